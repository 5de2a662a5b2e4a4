//! The model-ingredient configuration document.
//!
//! A flat JSON object holds every ingredient parameter plus the speed-field
//! family selector; unknown keys are rejected. Example:
//!
//! ```json
//! {
//!   "a_w": 1.0, "p_w": 1.0, "mu_w": 0.1,
//!   "k_a": 1.0, "k_p": 0.5, "k_d": 0.5,
//!   "mu": 1.0,
//!   "x1": 0.8, "x2": 1.0, "b": 0.5, "K": 1.0, "eps": 0.5,
//!   "g_family": "exponential",
//!   "g_params": { "floor": 0.55, "gamma_g": { "kind": "affine", "intercept": 0.3, "slope": 0.1 } },
//!   "alpha_spec": { "kind": "constant", "value": 0.4 },
//!   "mu_u_spec": { "kind": "constant", "value": 0.1 }
//! }
//! ```

use crate::error::{Error, Result};
use crate::funcs::{CoefFn, SpeedField};
use crate::model::{IngredientSet, ModelParams};
use crate::threshold::MaturationField;
use serde::{Deserialize, Serialize};

/// Serializable coefficient function of maturity.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefSpec {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
}

impl From<CoefSpec> for CoefFn {
    fn from(spec: CoefSpec) -> CoefFn {
        match spec {
            CoefSpec::Constant { value } => CoefFn::Constant(value),
            CoefSpec::Affine { intercept, slope } => CoefFn::Affine { intercept, slope },
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GFamily {
    /// `g = 2 [1 - a(y)/(1 + k_g z)] p(y)`
    Division,
    /// `g = floor + e^{-z} gamma_g(y)`
    Exponential,
    /// `g = value`
    Constant,
}

/// Family-dependent speed-field parameters; the required keys are validated
/// against the selected family at build time.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GParams {
    pub a: Option<CoefSpec>,
    pub p: Option<CoefSpec>,
    pub k_g: Option<f64>,
    pub floor: Option<f64>,
    pub gamma_g: Option<CoefSpec>,
    pub value: Option<f64>,
}

/// The flat ingredient document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub a_w: f64,
    pub p_w: f64,
    pub mu_w: f64,
    pub k_a: f64,
    pub k_p: f64,
    pub k_d: f64,
    pub mu: f64,
    pub x1: f64,
    pub x2: f64,
    pub b: f64,
    #[serde(rename = "K")]
    pub speed_max: f64,
    pub eps: f64,
    pub g_family: GFamily,
    pub g_params: GParams,
    pub alpha_spec: CoefSpec,
    pub mu_u_spec: CoefSpec,
    /// Optional window for the numeric suprema (default 1e3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_cap: Option<f64>,
}

impl ModelConfig {
    pub fn speed_field(&self) -> Result<SpeedField> {
        let missing = |key: &str| {
            Error::Config(format!(
                "g_params is missing `{key}` required by family {:?}",
                self.g_family
            ))
        };
        let reject_extra = |allowed: &[&str]| -> Result<()> {
            let set = [
                ("a", self.g_params.a.is_some()),
                ("p", self.g_params.p.is_some()),
                ("k_g", self.g_params.k_g.is_some()),
                ("floor", self.g_params.floor.is_some()),
                ("gamma_g", self.g_params.gamma_g.is_some()),
                ("value", self.g_params.value.is_some()),
            ];
            for (key, present) in set {
                if present && !allowed.contains(&key) {
                    return Err(Error::Config(format!(
                        "g_params key `{key}` is not accepted by family {:?}",
                        self.g_family
                    )));
                }
            }
            Ok(())
        };
        match self.g_family {
            GFamily::Division => {
                reject_extra(&["a", "p", "k_g"])?;
                Ok(SpeedField::Division {
                    a: self.g_params.a.clone().ok_or_else(|| missing("a"))?.into(),
                    p: self.g_params.p.clone().ok_or_else(|| missing("p"))?.into(),
                    k: self.g_params.k_g.ok_or_else(|| missing("k_g"))?,
                })
            }
            GFamily::Exponential => {
                reject_extra(&["floor", "gamma_g"])?;
                Ok(SpeedField::Exponential {
                    floor: self.g_params.floor.ok_or_else(|| missing("floor"))?,
                    gamma: self
                        .g_params
                        .gamma_g
                        .clone()
                        .ok_or_else(|| missing("gamma_g"))?
                        .into(),
                })
            }
            GFamily::Constant => {
                reject_extra(&["value"])?;
                Ok(SpeedField::Constant(
                    self.g_params.value.ok_or_else(|| missing("value"))?,
                ))
            }
        }
    }

    pub fn build(&self) -> Result<ModelParams> {
        let field = MaturationField::new(
            self.x1,
            self.x2,
            self.b,
            self.speed_max,
            self.eps,
            self.speed_field()?,
        )?;
        let ingredients = IngredientSet::new(
            self.a_w,
            self.p_w,
            self.mu_w,
            self.k_a,
            self.k_p,
            self.k_d,
            self.alpha_spec.clone().into(),
            self.mu_u_spec.clone().into(),
        )?;
        match self.z_cap {
            Some(z) => ModelParams::with_z_cap(ingredients, field, self.mu, z),
            None => ModelParams::new(ingredients, field, self.mu),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// The stock configuration used by examples and verification defaults: a
/// division/renewal pair with saturating inhibition, an exponentially
/// inhibited speed field, and a positive equilibrium.
pub fn default_model_config() -> ModelConfig {
    ModelConfig {
        a_w: 1.0,
        p_w: 1.0,
        mu_w: 0.1,
        k_a: 1.0,
        k_p: 0.5,
        k_d: 0.5,
        mu: 1.0,
        x1: 0.8,
        x2: 1.0,
        b: 0.5,
        speed_max: 1.0,
        eps: 0.5,
        g_family: GFamily::Exponential,
        g_params: GParams {
            floor: Some(0.55),
            gamma_g: Some(CoefSpec::Affine {
                intercept: 0.3,
                slope: 0.1,
            }),
            ..GParams::default()
        },
        alpha_spec: CoefSpec::Constant { value: 0.4 },
        mu_u_spec: CoefSpec::Constant { value: 0.1 },
        z_cap: None,
    }
}
