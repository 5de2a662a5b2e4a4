//! Scenario configuration: one JSON document with the model ingredients, the
//! initial condition, solver settings, the run window, and output paths.
//! Unknown keys are rejected everywhere.

use serde::Deserialize;
use sddde::config::ModelConfig;
use sddde::history::{History, HistoryPair};
use sddde::integrator::SolverConfig;
use sddde::retraction::{retract, DomainSpec};
use sddde::{Error, ModelParams, Result};

fn default_nodes() -> usize {
    9
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Explicit node lists for both components.
    Nodes {
        phi: Vec<(f64, f64)>,
        psi: Vec<(f64, f64)>,
    },
    /// Deterministic random Lipschitz pair.
    Random {
        seed: u64,
        amplitude: f64,
        lip_cap: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// The positive equilibrium (error when the regime has none).
    Equilibrium,
    /// Positive equilibrium plus a retracted random perturbation.
    EquilibriumPerturbed {
        seed: u64,
        scale: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub step: Option<f64>,
    pub corrector_passes: Option<usize>,
    pub root_tol: Option<f64>,
    pub residual_tol: Option<f64>,
    pub segment_samples: Option<usize>,
}

impl SolverSpec {
    pub fn build(&self) -> SolverConfig {
        let defaults = SolverConfig::default();
        SolverConfig {
            step: self.step.or(defaults.step),
            corrector_passes: self.corrector_passes.unwrap_or(defaults.corrector_passes),
            root_tol: self.root_tol.unwrap_or(defaults.root_tol),
            residual_tol: self.residual_tol.unwrap_or(defaults.residual_tol),
            segment_samples: self.segment_samples.unwrap_or(defaults.segment_samples),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub output_dt: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub csv: Option<String>,
    pub json: Option<String>,
    pub svg: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Materializes the initial pair; `seed_override` replaces the seed of
    /// seeded variants.
    pub fn build_initial(
        &self,
        params: &ModelParams,
        seed_override: Option<u64>,
    ) -> Result<HistoryPair> {
        let h = params.history_length();
        match &self.initial {
            InitialSpec::Nodes { phi, psi } => {
                let pair = HistoryPair::new(History::from_nodes(phi)?, History::from_nodes(psi)?)?;
                if (pair.h() - h).abs() > 1e-12 * h.max(1.0) {
                    return Err(Error::Config(format!(
                        "initial nodes span [{}, 0] but the model history length is {h}",
                        -pair.h()
                    )));
                }
                Ok(pair)
            }
            InitialSpec::Random {
                seed,
                amplitude,
                lip_cap,
                nodes,
            } => HistoryPair::random(
                seed_override.unwrap_or(*seed),
                h,
                *amplitude,
                *lip_cap,
                *amplitude,
                *lip_cap,
                *nodes,
            ),
            InitialSpec::Equilibrium => {
                let (w, v) = params.positive_equilibrium()?.ok_or_else(|| {
                    Error::Config(
                        "this parameter regime has no positive equilibrium; \
                         use another initial condition"
                            .into(),
                    )
                })?;
                HistoryPair::constant(h, w, v)
            }
            InitialSpec::EquilibriumPerturbed { seed, scale, nodes } => {
                let (w, v) = params.positive_equilibrium()?.ok_or_else(|| {
                    Error::Config("this parameter regime has no positive equilibrium".into())
                })?;
                let seed = seed_override.unwrap_or(*seed);
                let spec = DomainSpec::nonnegative(1);
                let bump = |s: u64, around: f64| -> Result<History> {
                    let p = History::random_lipschitz_in(
                        s,
                        h,
                        1,
                        -scale,
                        *scale,
                        scale / h,
                        *nodes,
                    )?;
                    retract(&p.shift_values(around), &spec)
                };
                HistoryPair::new(bump(seed, w)?, bump(seed ^ 0x5ee3_9c2a, v)?)
            }
        }
    }
}
