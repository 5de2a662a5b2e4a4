//! `sddde`: simulate the threshold-delay cell model, run its verification
//! suites, and compute invariance budgets.
//!
//! Exit codes: 0 on success, 1 when a gated check or budget precondition
//! fails, 2 on usage or configuration errors.

mod config;
mod suites;
mod svg;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::ScenarioConfig;
use sddde::integrator::{detect_equilibrium, integrate};
use sddde::invariance::{budget_linear, budget_threshold, delta_horizon, horizons};
use sddde::threshold::solve_maturation;
use sddde::{Error, Result};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "sddde", version, about = "Threshold-delay cell model: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and export trajectory CSV/JSON/SVG.
    Simulate(SimulateArgs),
    /// Run a verification suite and write JSON reports.
    Verify(VerifyArgs),
    /// Print invariance budgets and horizons for given amplitudes.
    Budget(BudgetArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of seeded initial conditions.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the files named in the scenario.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the run horizon.
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Embed wall-clock timing in the metadata (off by default so outputs
    /// are byte-identical across runs).
    #[arg(long)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Retraction,
    Threshold,
    Invariance,
    Semiflow,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which suite to run.
    suite: Suite,
    /// Scenario configuration (JSON); supplies the model parameters.
    #[arg(long)]
    config: PathBuf,
    /// Base seed for the ensembles.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory for the JSON reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Ensemble size override.
    #[arg(long)]
    ensemble: Option<usize>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Scenario configuration (JSON); supplies the model parameters.
    #[arg(long)]
    config: PathBuf,
    /// Amplitude bound on the stem cell history.
    #[arg(long = "A")]
    phi_bound: f64,
    /// Mature-population bound (with --R: horizon computation).
    #[arg(long = "B")]
    v_bound: Option<f64>,
    /// Mature-population Lipschitz cap.
    #[arg(long = "R")]
    lip_cap: Option<f64>,
    /// Horizon (budget computation).
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Optional path for the JSON version of the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads() {
    if let Ok(value) = std::env::var("SDDDE_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads() {}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Verify(args) => verify(args),
        Command::Budget(args) => budget(args),
    }
}

struct LoadedConfig {
    scenario: ScenarioConfig,
    sha256: String,
}

fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex_digest(text.as_bytes());
    Ok(LoadedConfig {
        scenario: ScenarioConfig::from_json(&text)?,
        sha256,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let loaded = load_config(&args.config)?;
    let scenario = &loaded.scenario;
    let params = scenario.model.build()?;
    let pair = scenario.build_initial(&params, args.seed)?;
    let solver = scenario.solver.build();
    let t_final = args.t_final.unwrap_or(scenario.run.t_final);
    let output_dt = scenario.run.output_dt;

    let traj = integrate(&params, &pair, t_final, &solver)?;

    let header = format!(
        "# config_sha256={} version={}\n",
        loaded.sha256,
        env!("CARGO_PKG_VERSION")
    );
    let mut rows = 0usize;
    if let Some(name) = &scenario.outputs.csv {
        let mut buffer = Vec::new();
        buffer.extend_from_slice(header.as_bytes());
        rows = traj
            .write_csv(&mut buffer, output_dt)
            .map_err(|e| Error::Config(e.to_string()))?;
        write_out(&args.out, name, &String::from_utf8_lossy(&buffer))?;
    }

    if let Some(name) = &scenario.outputs.svg {
        let mut ts = Vec::new();
        let mut ws = Vec::new();
        let mut vs = Vec::new();
        let mut taus = Vec::new();
        let mut k = 0usize;
        loop {
            let t = (k as f64 * output_dt).min(t_final);
            let (w, v) = traj.state_at(t)?;
            ts.push(t);
            ws.push(w);
            vs.push(v);
            let segment = traj.segment_at(t, solver.segment_samples)?;
            taus.push(solve_maturation(params.field(), segment.psi(), None)?.tau);
            if t >= t_final {
                break;
            }
            k += 1;
        }
        let doc = svg::render(&[
            svg::Panel { title: "w(t) stem cells", xs: &ts, ys: &ws },
            svg::Panel { title: "v(t) mature cells", xs: &ts, ys: &vs },
            svg::Panel { title: "tau(v_t) delay", xs: &ts, ys: &taus },
        ]);
        write_out(&args.out, name, &doc)?;
    }

    if let Some(name) = &scenario.outputs.json {
        let ((w_min, w_max), (v_min, v_max)) =
            traj.value_range(-params.history_length(), t_final);
        let equilibrium = if t_final >= 4.0 * params.history_length() {
            detect_equilibrium(&params, &traj, 2.0 * params.history_length(), None)?
        } else {
            None
        };
        let mut metadata = serde_json::json!({
            "config_sha256": loaded.sha256,
            "version": env!("CARGO_PKG_VERSION"),
            "T": t_final,
            "output_dt": output_dt,
            "rows": rows,
            "solver": solver,
            "derived": {
                "h": params.history_length(),
                "tau_lower": params.tau_lower(),
                "qbar": params.qbar(),
                "kj": params.kj(),
                "sup_gamma": params.sup_gamma(),
                "sup_abs_d": params.sup_abs_d(),
                "z_cap": params.z_cap(),
            },
            "diagnostics": {
                "w_range": [w_min, w_max],
                "v_range": [v_min, v_max],
                "equilibrium": equilibrium,
            },
        });
        if args.timing {
            metadata["runtime_seconds"] =
                serde_json::json!(started.elapsed().as_secs_f64());
        }
        write_out(
            &args.out,
            name,
            &format!("{}\n", serde_json::to_string_pretty(&metadata).unwrap()),
        )?;
    }

    println!(
        "simulated T={t_final} ({} steps of {}), outputs in {}",
        traj.step_log().len().saturating_sub(1),
        solver
            .resolved_step(&params)
            .map(|s| s.to_string())
            .unwrap_or_default(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let loaded = load_config(&args.config)?;
    let params = loaded.scenario.model.build()?;
    let solver = loaded.scenario.solver.build();
    let seed = args.seed;

    let mut outcomes = Vec::new();
    let run_suite = |suite: Suite, outcomes: &mut Vec<suites::SuiteOutcome>| -> Result<()> {
        match suite {
            Suite::Retraction => outcomes.push(suites::retraction_suite(
                &params,
                args.ensemble.unwrap_or(500),
                seed,
            )?),
            Suite::Threshold => outcomes.push(suites::threshold_suite(
                &params,
                args.ensemble.unwrap_or(1000),
                seed,
            )?),
            Suite::Invariance => outcomes.push(suites::invariance_suite(
                &params,
                args.ensemble.unwrap_or(200),
                seed,
                2.0 * params.history_length(),
                &solver,
            )?),
            Suite::Semiflow => outcomes.push(suites::semiflow_suite(
                &params,
                args.ensemble.unwrap_or(10),
                seed,
                &solver,
            )?),
            Suite::All => unreachable!(),
        }
        Ok(())
    };
    if args.suite == Suite::All {
        for suite in [Suite::Retraction, Suite::Threshold, Suite::Invariance, Suite::Semiflow] {
            run_suite(suite, &mut outcomes)?;
        }
    } else {
        run_suite(args.suite, &mut outcomes)?;
    }

    let mut all_pass = true;
    for outcome in &outcomes {
        let wrapped = serde_json::json!({
            "config_sha256": loaded.sha256,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "suite": outcome.name,
            "pass": outcome.pass,
            "report": outcome.report,
        });
        let file = format!("report_{}.json", outcome.name);
        write_out(
            &args.out,
            &file,
            &format!("{}\n", serde_json::to_string_pretty(&wrapped).unwrap()),
        )?;
        println!(
            "{}: {} ({})",
            outcome.name,
            if outcome.pass { "PASS" } else { "FAIL" },
            args.out.join(file).display()
        );
        all_pass &= outcome.pass;
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn budget(args: BudgetArgs) -> Result<ExitCode> {
    let loaded = load_config(&args.config)?;
    let params = loaded.scenario.model.build()?;
    let bp = params.bound_params();
    let a = args.phi_bound;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "--A must be positive, got {a}"
        )));
    }
    if args.horizon.is_none() && !(args.v_bound.is_some() && args.lip_cap.is_some()) {
        return Err(Error::InvalidParameter(
            "provide --T for budgets and/or both --B and --R for horizons".into(),
        ));
    }

    println!(
        "constants: kj = {:.6}, mu = {:.6}, qbar = {:.6}, tau_lower = {:.6}",
        bp.kj, bp.mu, bp.qbar, bp.tau_lower
    );
    let mut doc = serde_json::json!({
        "config_sha256": loaded.sha256,
        "version": env!("CARGO_PKG_VERSION"),
        "constants": bp,
        "A": a,
    });

    if let Some(t) = args.horizon {
        let (b_d, r_d) = budget_linear(&bp, a, t);
        let (b_e, r_e) = budget_threshold(&bp, a, t);
        println!("budgets at T = {t}:");
        println!("  {:<22} {:>14} {:>14}", "case", "bound B", "lip cap R");
        println!("  {:<22} {:>14.8} {:>14.8}", "linear", b_d, r_d);
        println!("  {:<22} {:>14.8} {:>14.8}", "threshold", b_e, r_e);
        doc["budgets"] = serde_json::json!({
            "T": t,
            "linear": { "B": b_d, "R": r_d },
            "threshold": { "B": b_e, "R": r_e },
        });
    }

    if let (Some(b), Some(r)) = (args.v_bound, args.lip_cap) {
        let hz = horizons(&bp, a, b, r).map_err(explain_precondition)?;
        let delta = delta_horizon(&bp, a, b).map_err(explain_precondition)?;
        println!("horizons for B = {b}, R = {r}:");
        println!("  {:<22} {:>14}", "case", "horizon");
        println!("  {:<22} {:>14.8}", "linear", hz.t_d);
        println!("  {:<22} {:>14.8}", "threshold", hz.t_e);
        println!(
            "  uniform extra horizon: tau_lower + delta = {:.8} (delta = {delta:.8})",
            bp.tau_lower + delta
        );
        doc["horizons"] = serde_json::json!({
            "B": b,
            "R": r,
            "detail": hz,
            "delta": delta,
            "uniform_horizon": bp.tau_lower + delta,
        });
    }

    if let Some(path) = &args.out {
        let dir = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_name()
            .ok_or_else(|| Error::Config(format!("invalid path {}", path.display())))?;
        write_out(
            dir,
            &name.to_string_lossy(),
            &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Budget preconditions are check failures (exit 1), not usage errors; keep
/// the message but normalize the class.
fn explain_precondition(err: Error) -> Error {
    match err {
        Error::Precondition(msg) => Error::Precondition(format!(
            "budget precondition failed: {msg} (requires A kj < mu B <= R)"
        )),
        other => other,
    }
}
