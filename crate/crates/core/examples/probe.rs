//! Scratch probe for convergence behavior (not part of the deliverable).

use sddde::config::default_model_config;
use sddde::history::{History, HistoryPair};
use sddde::integrator::{convergence_order, integrate, SolverConfig};

fn selfconv(params: &sddde::ModelParams, pair: &HistoryPair, t_final: f64, step: f64) -> f64 {
    let coarse = integrate(params, pair, t_final, &SolverConfig::with_step(step)).unwrap();
    let fine = integrate(params, pair, t_final, &SolverConfig::with_step(step / 2.0)).unwrap();
    let (wc, vc) = coarse.state_at(t_final).unwrap();
    let (wf, vf) = fine.state_at(t_final).unwrap();
    (wc - wf).abs().max((vc - vf).abs()) / (1.0 + wf.abs().max(vf.abs()))
}

fn main() {
    let params = default_model_config().build().unwrap();
    let h = params.history_length();
    let step0 = params.tau_lower() / 8.0;

    let random_pair = HistoryPair::random(11, h, 1.0, 1.5, 1.0, 1.5, 9).unwrap();
    let const_pair = HistoryPair::new(
        History::constant(h, 0.7).unwrap(),
        History::constant(h, 0.6).unwrap(),
    )
    .unwrap();
    let (we, ve) = params.positive_equilibrium().unwrap().unwrap();
    let eq_pair = HistoryPair::constant(h, we, ve).unwrap();

    for (name, pair) in [
        ("random-9-node", &random_pair),
        ("constant", &const_pair),
        ("equilibrium", &eq_pair),
    ] {
        println!("--- {name} ---");
        for div in [1.0, 2.0, 4.0] {
            let s = step0 / div;
            println!(
                "  selfconv T=5h step=tau/{:2}: {:.3e}",
                8.0 * div,
                selfconv(&params, pair, 5.0 * h, s)
            );
        }
        for base in [0.1, 0.05] {
            let rep = convergence_order(&params, pair, 2.5, base).unwrap();
            println!(
                "  order base={base}: errors {:?} orders {:?}",
                rep.errors, rep.orders
            );
        }
    }

    for nodes in [2usize, 3, 5] {
        let pair = HistoryPair::random(11, h, 1.0, 1.5, 1.0, 1.5, nodes).unwrap();
        let rep = convergence_order(&params, &pair, 2.5, 0.05).unwrap();
        println!(
            "nodes={nodes}: errors {:?} orders {:?}",
            rep.errors, rep.orders
        );
    }

    // Corrector sensitivity on the random pair.
    for passes in [1usize, 2, 4] {
        let mut cfg = SolverConfig::with_step(0.1);
        cfg.corrector_passes = passes;
        let run = |s: f64| {
            let mut c = cfg;
            c.step = Some(s);
            let traj = integrate(&params, &random_pair, 2.5, &c).unwrap();
            traj.state_at(2.5).unwrap()
        };
        let rf = run(0.1 / 8.0);
        let scale = 1.0 + rf.0.abs().max(rf.1.abs());
        let es: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|d| {
                let r = run(0.1 / d);
                ((r.0 - rf.0).abs().max((r.1 - rf.1).abs()) / scale).max(1e-300)
            })
            .collect();
        println!(
            "passes={passes}: errors {es:?} orders [{:.2}, {:.2}]",
            (es[0] / es[1]).log2(),
            (es[1] / es[2]).log2()
        );
    }
}
