//! Compares the rayon-parallel ensemble path against the sequential
//! fallback on the two hot workloads: delay solves and short integrations.
//!
//! Run with `cargo bench -p sddde`; the parallel cases require the default
//! `parallel` feature.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sddde::config::default_model_config;
use sddde::ensemble::{indexed_map, indexed_map_seq, member_seed};
use sddde::history::{History, HistoryPair};
use sddde::integrator::{integrate, SolverConfig};
use sddde::threshold::solve_maturation;
use std::hint::black_box;

fn bench_threshold_ensemble(c: &mut Criterion) {
    let params = default_model_config().build().unwrap();
    let field = params.field().clone();
    let h = params.history_length();
    let n = 256;

    let mut group = c.benchmark_group("threshold_delay_x256");
    group.bench_function("sequential", |bench| {
        bench.iter_batched(
            || (),
            |_| {
                let taus = indexed_map_seq(n, |i| {
                    let psi =
                        History::random_lipschitz(member_seed(7, i), h, 1, 2.0, 4.0, 9).unwrap();
                    solve_maturation(&field, &psi, None).unwrap().tau
                });
                black_box(taus)
            },
            BatchSize::SmallInput,
        )
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |bench| {
        bench.iter_batched(
            || (),
            |_| {
                let taus = indexed_map(n, |i| {
                    let psi =
                        History::random_lipschitz(member_seed(7, i), h, 1, 2.0, 4.0, 9).unwrap();
                    solve_maturation(&field, &psi, None).unwrap().tau
                });
                black_box(taus)
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_integration_ensemble(c: &mut Criterion) {
    let params = default_model_config().build().unwrap();
    let h = params.history_length();
    let config = SolverConfig::default();
    let n = 32;
    let t_final = 2.0 * h;

    let mut group = c.benchmark_group("integrate_2h_x32");
    group.sample_size(10);
    group.bench_function("sequential", |bench| {
        bench.iter_batched(
            || (),
            |_| {
                let ends = indexed_map_seq(n, |i| {
                    let pair =
                        HistoryPair::random(member_seed(11, i), h, 1.0, 2.0, 1.0, 2.0, 9).unwrap();
                    let traj = integrate(&params, &pair, t_final, &config).unwrap();
                    traj.state_at(t_final).unwrap()
                });
                black_box(ends)
            },
            BatchSize::SmallInput,
        )
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |bench| {
        bench.iter_batched(
            || (),
            |_| {
                let ends = indexed_map(n, |i| {
                    let pair =
                        HistoryPair::random(member_seed(11, i), h, 1.0, 2.0, 1.0, 2.0, 9).unwrap();
                    let traj = integrate(&params, &pair, t_final, &config).unwrap();
                    traj.state_at(t_final).unwrap()
                });
                black_box(ends)
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_threshold_ensemble, bench_integration_ensemble);
criterion_main!(benches);
