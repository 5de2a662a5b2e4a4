use sddde::config::default_model_config;
use sddde::ensemble::member_seed;
use sddde::history::HistoryPair;
use sddde::integrator::{integrate, SolverConfig};

fn main() {
    let params = default_model_config().build().unwrap();
    let h = params.history_length();
    let member = 37usize;
    let seed = member_seed(0xAC06, member);
    let pair = HistoryPair::random(seed, h, 1.0, 1.5, 1.0, 1.5, 9).unwrap();
    let mut config = SolverConfig::default();
    config.segment_samples = 1024;
    let step = config.resolved_step(&params).unwrap();
    let (s, t) = (step * 5.0, step * 6.0);

    let one = integrate(&params, &pair, s + t, &config).unwrap();
    let leg1 = integrate(&params, &pair, s, &config).unwrap();
    let mid = leg1.segment_at(s, config.segment_samples).unwrap();
    let leg2 = integrate(&params, &mid, t, &config).unwrap();

    println!("pair kinks: {:?}", pair.kink_times());
    println!("mid kinks:  {:?}", mid.kink_times());
    println!("one-shot grid:");
    for (tt, _, _) in one.step_log() { print!(" {tt:.9}"); }
    println!();
    println!("leg2 grid (shifted by s={s}):");
    for (tt, _, _) in leg2.step_log() { print!(" {:.9}", tt + s); }
    println!();
    // Worst state deviation on the overlap [s, s+t].
    let mut worst = (0.0_f64, 0.0_f64);
    for k in 0..=600 {
        let tg = s + t * k as f64 / 600.0;
        let (w1, v1) = one.state_at(tg).unwrap();
        let (w2, v2) = leg2.state_at(tg - s).unwrap();
        let d = (w1 - w2).abs().max((v1 - v2).abs());
        if d > worst.0 { worst = (d, tg); }
    }
    println!("worst overlap deviation {:.3e} at t = {:.4}", worst.0, worst.1);
}
