//! Named scenario presets and the JSON scenario file format.

use serde::{Deserialize, Serialize};

use super::{CensoringDist, CovariateGen, SimConfig};
use crate::error::{Error, Result};
use crate::model::{AgePolicy, Baseline, Eta, HazardFamily, Link, ModelParams, Modulation, Rho};

const PRESETS: [&str; 4] = ["hpp", "renewal-weibull", "cox-reduction", "power-count"];

pub fn preset_names() -> &'static [&'static str] {
    &PRESETS
}

/// Built-in scenarios.
///
/// * `hpp`: unit-rate Poisson process, exp link with one covariate and
///   `beta = 0`.
/// * `renewal-weibull`: perfect repair, Weibull(shape 2) gaps, no modulation.
/// * `cox-reduction`: minimal repair, exp link, `beta = 0.5` (Andersen-Gill).
/// * `power-count`: perfect repair, `rho = 0.8^k`, exp link with
///   `beta = 0.5`, Weibull(shape 2) baseline.
pub fn preset(name: &str, seed: u64) -> Result<SimConfig> {
    let uniform_x = CovariateGen::Uniform {
        dim: 1,
        low: -1.0,
        high: 1.0,
    };
    let censoring = CensoringDist::Uniform {
        low: 1.0,
        high: 3.0,
    };
    let (hazard, age, modulation, eta, covariates, t_star) = match name {
        "hpp" => (
            HazardFamily::Constant { rate: 1.0 },
            AgePolicy::PerfectRepair,
            Modulation::new(Rho::Identity, Link::Exp),
            Eta::new(vec![], vec![0.0]),
            uniform_x,
            None,
        ),
        "renewal-weibull" => (
            HazardFamily::Weibull {
                scale: 1.0,
                shape: 2.0,
            },
            AgePolicy::PerfectRepair,
            Modulation::unit(),
            Eta::default(),
            CovariateGen::None,
            None,
        ),
        "cox-reduction" => (
            HazardFamily::Weibull {
                scale: 1.0,
                shape: 1.5,
            },
            AgePolicy::MinimalRepair,
            Modulation::new(Rho::Identity, Link::Exp),
            Eta::new(vec![], vec![0.5]),
            uniform_x,
            None,
        ),
        "power-count" => (
            HazardFamily::Weibull {
                scale: 1.0,
                shape: 2.0,
            },
            AgePolicy::PerfectRepair,
            Modulation::new(Rho::PowerCount, Link::Exp),
            Eta::new(vec![0.8], vec![0.5]),
            uniform_x,
            Some(1.2),
        ),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown scenario '{other}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(SimConfig {
        params: ModelParams::new(Baseline::Hazard(hazard), modulation, eta),
        age,
        censoring,
        covariates,
        s_star: 4.0,
        t_star,
        seed,
        max_events_per_unit: 10_000,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineSpec {
    Constant { rate: f64 },
    Weibull { scale: f64, shape: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CensoringSpec {
    Fixed,
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovariateSpec {
    None,
    Uniform { dim: usize, low: f64, high: f64 },
    Bernoulli { dim: usize, prob: f64 },
    UniformSteps {
        dim: usize,
        times: Vec<f64>,
        low: f64,
        high: f64,
    },
}

fn default_max_events() -> usize {
    10_000
}

/// JSON scenario description accepted by `dynrec simulate --scenario <file>`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub baseline: BaselineSpec,
    /// "perfect" or "minimal".
    pub age: String,
    pub rho: String,
    pub link: String,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    pub covariates: CovariateSpec,
    pub censoring: CensoringSpec,
    pub s_star: f64,
    #[serde(default)]
    pub t_star: Option<f64>,
    #[serde(default = "default_max_events")]
    pub max_events_per_unit: usize,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn into_config(self, seed: u64) -> Result<SimConfig> {
        let hazard = match self.baseline {
            BaselineSpec::Constant { rate } => HazardFamily::Constant { rate },
            BaselineSpec::Weibull { scale, shape } => HazardFamily::Weibull { scale, shape },
        };
        let age = match self.age.as_str() {
            "perfect" => AgePolicy::PerfectRepair,
            "minimal" => AgePolicy::MinimalRepair,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown age policy '{other}' (perfect or minimal)"
                )))
            }
        };
        let censoring = match self.censoring {
            CensoringSpec::Fixed => CensoringDist::Fixed,
            CensoringSpec::Uniform { low, high } => CensoringDist::Uniform { low, high },
            CensoringSpec::Exponential { rate } => CensoringDist::Exponential { rate },
        };
        let covariates = match self.covariates {
            CovariateSpec::None => CovariateGen::None,
            CovariateSpec::Uniform { dim, low, high } => CovariateGen::Uniform { dim, low, high },
            CovariateSpec::Bernoulli { dim, prob } => CovariateGen::Bernoulli { dim, prob },
            CovariateSpec::UniformSteps {
                dim,
                times,
                low,
                high,
            } => CovariateGen::UniformSteps {
                dim,
                times,
                low,
                high,
            },
        };
        let modulation = Modulation::new(Rho::from_name(&self.rho)?, Link::from_name(&self.link)?);
        let config = SimConfig {
            params: ModelParams::new(
                Baseline::Hazard(hazard),
                modulation,
                Eta::new(self.alpha, self.beta),
            ),
            age,
            censoring,
            covariates,
            s_star: self.s_star,
            t_star: self.t_star,
            seed,
            max_events_per_unit: self.max_events_per_unit,
        };
        config.validate()?;
        Ok(config)
    }
}
