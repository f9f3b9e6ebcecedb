//! Generation of IID unit paths by cumulative-hazard inversion.

mod scenario;

pub use scenario::{preset, preset_names, ScenarioFile};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AgePolicy, Baseline, Cohort, CovariatePath, HazardFamily, ModelParams, UnitPath};
use crate::quad;

/// Distribution of the end-of-observation time tau.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensoringDist {
    /// tau = s_star.
    Fixed,
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
}

impl CensoringDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CensoringDist::Fixed => true,
            CensoringDist::Uniform { low, high } => low > 0.0 && high >= low && high.is_finite(),
            CensoringDist::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid censoring distribution {self:?}")))
        }
    }

    fn draw<R: Rng>(&self, s_star: f64, rng: &mut R) -> f64 {
        match *self {
            CensoringDist::Fixed => s_star,
            CensoringDist::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
            CensoringDist::Exponential { rate } => {
                // strictly positive: Exp1 can return 0 only with probability 0
                let e: f64 = Exp1.sample(rng);
                (e / rate).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// `E[min(tau, s_star)]`.
    pub fn mean_observation(&self, s_star: f64) -> f64 {
        match *self {
            CensoringDist::Fixed => s_star,
            CensoringDist::Uniform { low, high } => {
                if high <= s_star {
                    0.5 * (low + high)
                } else if low >= s_star {
                    s_star
                } else {
                    let w = high - low;
                    ((s_star * s_star - low * low) / 2.0 + s_star * (high - s_star)) / w
                }
            }
            CensoringDist::Exponential { rate } => (1.0 - (-rate * s_star).exp()) / rate,
        }
    }
}

/// Generator of covariate paths.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateGen {
    None,
    /// Time-constant vector with IID Uniform(low, high) entries.
    Uniform { dim: usize, low: f64, high: f64 },
    /// Time-constant vector with IID Bernoulli(prob) entries.
    Bernoulli { dim: usize, prob: f64 },
    /// Step path with fresh Uniform(low, high) entries at each change time.
    UniformSteps {
        dim: usize,
        times: Vec<f64>,
        low: f64,
        high: f64,
    },
}

impl CovariateGen {
    pub fn dim(&self) -> usize {
        match self {
            CovariateGen::None => 0,
            CovariateGen::Uniform { dim, .. }
            | CovariateGen::Bernoulli { dim, .. }
            | CovariateGen::UniformSteps { dim, .. } => *dim,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Result<CovariatePath> {
        let uniform = |rng: &mut R, dim: usize, low: f64, high: f64| -> Vec<f64> {
            (0..dim).map(|_| low + (high - low) * rng.random::<f64>()).collect()
        };
        match self {
            CovariateGen::None => Ok(CovariatePath::empty()),
            CovariateGen::Uniform { dim, low, high } => {
                Ok(CovariatePath::constant(uniform(rng, *dim, *low, *high)))
            }
            CovariateGen::Bernoulli { dim, prob } => Ok(CovariatePath::constant(
                (0..*dim)
                    .map(|_| if rng.random::<f64>() < *prob { 1.0 } else { 0.0 })
                    .collect(),
            )),
            CovariateGen::UniformSteps {
                dim,
                times,
                low,
                high,
            } => {
                let mut all = vec![0.0];
                all.extend(times.iter().copied().filter(|&t| t > 0.0));
                let values = all.iter().map(|_| uniform(rng, *dim, *low, *high)).collect();
                CovariatePath::new(all, values)
            }
        }
    }
}

/// Everything needed to draw a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// True parameters; the baseline must be a hazard family.
    pub params: ModelParams,
    /// PerfectRepair or MinimalRepair.
    pub age: AgePolicy,
    pub censoring: CensoringDist,
    pub covariates: CovariateGen,
    pub s_star: f64,
    /// Carried onto generated cohorts; `None` defers to the fitting default.
    pub t_star: Option<f64>,
    pub seed: u64,
    pub max_events_per_unit: usize,
}

impl SimConfig {
    pub fn hazard(&self) -> Result<HazardFamily> {
        match &self.params.baseline {
            Baseline::Hazard(h) => Ok(*h),
            Baseline::Cumulative(_) => Err(Error::InvalidInput(
                "simulation needs a hazard-function baseline".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hazard()?.validate()?;
        self.censoring.validate()?;
        if !(self.s_star.is_finite() && self.s_star > 0.0) {
            return Err(Error::InvalidInput("s_star must be positive".into()));
        }
        if self.max_events_per_unit < 1 {
            return Err(Error::InvalidInput("max_events_per_unit must be at least 1".into()));
        }
        if matches!(self.age, AgePolicy::PiecewiseLinear(_)) {
            return Err(Error::InvalidInput(
                "simulation supports perfect and minimal repair age policies only".into(),
            ));
        }
        self.params
            .modulation
            .check_eta(&self.params.eta, self.covariates.dim())
    }
}

/// A unit whose history is known up to the current time.
#[derive(Debug, Clone)]
pub struct PartialUnit {
    pub events: Vec<f64>,
    pub tau: f64,
    pub s_star: f64,
    pub age: AgePolicy,
    pub covariates: CovariatePath,
}

/// Outcome of one inversion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextEvent {
    At(f64),
    Censored,
}

const BISECTION_TOL: f64 = 1e-12;

/// Next event time after `current` for cumulative-hazard increment `exp_draw`.
///
/// Walks the calendar pieces between covariate changes up to
/// `min(tau, s_star)`; within a piece the cumulative hazard is
/// `kappa * Lambda0(age)` with unit age slope and is inverted in closed form.
/// Time-dependent modulation falls back to quadrature and bisection.
pub fn next_event_time(
    unit: &PartialUnit,
    current: f64,
    params: &ModelParams,
    exp_draw: f64,
) -> Result<NextEvent> {
    let hazard = match &params.baseline {
        Baseline::Hazard(h) => *h,
        Baseline::Cumulative(_) => return Err(Error::StepBaselineIntensity),
    };
    let end = unit.tau.min(unit.s_star);
    if current >= end {
        return Ok(NextEvent::Censored);
    }
    let count = unit.events.len();
    let seg_start = unit.events.last().copied().unwrap_or(0.0);
    let start_age = match unit.age {
        AgePolicy::PerfectRepair => 0.0,
        AgePolicy::MinimalRepair => seg_start,
        AgePolicy::PiecewiseLinear(_) => {
            return Err(Error::InvalidInput(
                "simulation supports perfect and minimal repair age policies only".into(),
            ))
        }
    };
    let age = |v: f64| start_age + (v - seg_start);
    let m = &params.modulation;
    let eta = &params.eta;
    let time_varying = m.rho.depends_on_time();

    let mut remaining = exp_draw;
    let mut lo = current;
    let breaks: Vec<f64> = unit
        .covariates
        .changes_within(current, end)
        .chain(std::iter::once(end))
        .collect();
    for hi in breaks {
        let x = unit.covariates.at(hi);
        if !time_varying {
            let kappa = m.value(hi, count, x, eta);
            let (a1, a2) = (age(lo), age(hi));
            let base_lo = hazard.cumulative(a1);
            let mass = kappa * (hazard.cumulative(a2) - base_lo);
            if !mass.is_finite() || !kappa.is_finite() {
                return Err(Error::NonFiniteHazard { time: lo });
            }
            if mass >= remaining && kappa > 0.0 {
                let target = hazard.inverse_cumulative(base_lo + remaining / kappa);
                let v = (seg_start + (target - start_age)).clamp(lo, hi);
                return Ok(finish(v, current, end));
            }
            remaining -= mass;
        } else {
            let rate = |v: f64| hazard.hazard(age(v)) * m.value(v, count, x, eta);
            let mass = quad::integrate_composite(lo, hi, 8, rate);
            if !mass.is_finite() {
                return Err(Error::NonFiniteHazard { time: lo });
            }
            if mass >= remaining {
                let (mut a, mut b) = (lo, hi);
                while b - a > BISECTION_TOL * (1.0 + b.abs()) {
                    let mid = 0.5 * (a + b);
                    if quad::integrate_composite(lo, mid, 8, rate) < remaining {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Ok(finish(0.5 * (a + b), current, end));
            }
            remaining -= mass;
        }
        lo = hi;
    }
    Ok(NextEvent::Censored)
}

fn finish(v: f64, current: f64, end: f64) -> NextEvent {
    if v >= end {
        NextEvent::Censored
    } else {
        NextEvent::At(v.max(current))
    }
}

/// Draws one unit from its own random stream.
pub fn draw_unit<R: Rng>(config: &SimConfig, rng: &mut R) -> Result<UnitPath> {
    let tau = config.censoring.draw(config.s_star, rng);
    let covariates = config.covariates.draw(rng)?;
    let mut unit = PartialUnit {
        events: Vec::new(),
        tau,
        s_star: config.s_star,
        age: config.age.clone(),
        covariates,
    };
    let mut current = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        match next_event_time(&unit, current, &config.params, e)? {
            NextEvent::Censored => break,
            NextEvent::At(v) => {
                if unit.events.len() >= config.max_events_per_unit {
                    return Err(Error::Explosive {
                        limit: config.max_events_per_unit,
                        detail: format!("{:?}, eta {:?}", config.hazard()?, config.params.eta),
                    });
                }
                if v <= current && !unit.events.is_empty() {
                    return Err(Error::Explosive {
                        limit: config.max_events_per_unit,
                        detail: "event times collapsed in floating point".into(),
                    });
                }
                unit.events.push(v);
                current = v;
            }
        }
    }
    UnitPath::new(unit.events, unit.tau, unit.s_star, unit.age, unit.covariates)
}

/// Random stream for unit `index` of a cohort drawn with `seed`.
pub fn unit_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `n` units, each from its own stream; the result does not depend on
/// evaluation order.
pub fn draw_cohort(n: usize, config: &SimConfig) -> Result<Cohort> {
    if n == 0 {
        return Err(Error::InvalidInput("cohort size must be at least 1".into()));
    }
    config.validate()?;
    let units = (0..n)
        .into_par_iter()
        .map(|i| draw_unit(config, &mut unit_stream(config.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Cohort::new(units, config.t_star)
}

/// SplitMix64 finalizer; derives independent seeds from structured keys.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
