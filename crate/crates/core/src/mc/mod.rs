//! Monte Carlo harness: numerical identity checks on random fixtures and
//! replication studies of the estimators' large-sample behaviour.
//!
//! Every study is a pure function of its config. Replications run in
//! parallel on their own seeds and are collected in order.

mod identities;
mod studies;

pub use identities::{identity_suite, random_fixture, Fixture};
pub use studies::{
    consistency_study, coverage_study, martingale_study, normality_study, run_replicate, Replicate,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::simulate::{preset, SimConfig};

/// Acceptance windows; the defaults are the documented ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windows {
    /// Allowed median-error ratio per 4x increase of n.
    pub rate_low: f64,
    pub rate_high: f64,
    pub coverage_low: f64,
    pub coverage_high: f64,
    /// Added to the 1.36/sqrt(reps) KS critical value.
    pub ks_slack: f64,
    /// Correlations must stay below `corr_sigmas / sqrt(reps)`.
    pub corr_sigmas: f64,
    /// Relative tolerance of the variance-consistency checks.
    pub variance_rel: f64,
    /// Largest tolerated share of non-converged replications.
    pub max_nonconvergence: f64,
    /// Shift, in standard errors, of the miscalibration probe.
    pub probe_shift: f64,
    /// Probe coverage must stay below this.
    pub probe_max: f64,
    /// Martingale means must lie within this many standard errors of 0.
    pub martingale_sigmas: f64,
}

impl Default for Windows {
    fn default() -> Self {
        Self {
            rate_low: 0.35,
            rate_high: 0.65,
            coverage_low: 0.92,
            coverage_high: 0.975,
            ks_slack: 0.05,
            corr_sigmas: 3.0,
            variance_rel: 0.15,
            max_nonconvergence: 0.02,
            probe_shift: 5.0,
            probe_max: 0.5,
            martingale_sigmas: 3.0,
        }
    }
}

/// A replication study: scenario with known truth, sample sizes and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// True parameters live in `scenario.params`; its seed is ignored.
    pub scenario: SimConfig,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    /// Ages at which baseline bands and `V_n` proxies are examined.
    pub grid: Vec<f64>,
    pub seed: u64,
    /// Nominal coverage of intervals and bands.
    pub level: f64,
    pub windows: Windows,
}

impl StudyConfig {
    /// HPP scenario, `n in {50, 200, 800}`, 200 replications, `t* = 1.5`.
    pub fn consistency_default(seed: u64) -> Result<Self> {
        let mut scenario = preset("hpp", seed)?;
        scenario.t_star = Some(1.5);
        Ok(Self {
            scenario,
            sample_sizes: vec![50, 200, 800],
            replications: 200,
            grid: vec![0.25, 0.5, 0.75, 1.0, 1.25],
            seed,
            level: 0.95,
            windows: Windows::default(),
        })
    }

    /// Power-count scenario (one alpha, one beta), `n = 400`, 500 replications.
    pub fn coverage_default(seed: u64) -> Result<Self> {
        Ok(Self {
            scenario: preset("power-count", seed)?,
            sample_sizes: vec![400],
            replications: 500,
            grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            seed,
            level: 0.95,
            windows: Windows::default(),
        })
    }

    /// Power-count scenario, `n = 800`, 500 replications.
    pub fn normality_default(seed: u64) -> Result<Self> {
        Ok(Self {
            sample_sizes: vec![800],
            ..Self::coverage_default(seed)?
        })
    }
}

/// One asserted property of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance window, e.g. `[0.92, 0.975]`.
    pub window: String,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            value,
            window: format!("[{low}, {high}]"),
            passed: value >= low && value <= high,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            window: format!("< {limit}"),
            passed: value < limit,
        }
    }

    pub fn holds(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value: if passed { 1.0 } else { 0.0 },
            window: "true".into(),
            passed,
        }
    }
}

/// Machine-readable outcome of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub study: String,
    pub seed: u64,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    /// Per-replication records (empty for the identity suite).
    pub records: Vec<Replicate>,
    /// Non-converged or failed replications per sample size.
    pub nonconverged: BTreeMap<usize, usize>,
    /// Named aggregates (medians, coverage rates, KS distances, ...).
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl McReport {
    pub(crate) fn new(study: &str, seed: u64, sample_sizes: Vec<usize>, replications: usize) -> Self {
        Self {
            study: study.into(),
            seed,
            sample_sizes,
            replications,
            records: Vec::new(),
            nonconverged: BTreeMap::new(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            passed: true,
        }
    }

    pub(crate) fn check(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub(crate) fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("{} (seed {})\n", self.study, self.seed);
        for c in &self.checks {
            out.push_str(&format!(
                "  {} {}: {:.6} in {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.window
            ));
        }
        out.push_str(&format!("  overall: {}\n", if self.passed { "PASS" } else { "FAIL" }));
        out
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with divisor `m - 1`.
pub(crate) fn variance(values: &[f64]) -> f64 {
    covariance(values, values)
}

pub(crate) fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

pub(crate) fn correlation(a: &[f64], b: &[f64]) -> f64 {
    covariance(a, b) / (variance(a) * variance(b)).sqrt()
}

/// Kolmogorov-Smirnov distance of a sample to the standard normal.
pub(crate) fn ks_normal(values: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::standard();
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = normal.cdf(x);
        d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
        // centred products sum to 4.5, squares to 2 and 61/6
        let expected = 4.5 / (2.0f64 * 61.0 / 6.0).sqrt();
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - expected).abs() < 1e-14);
    }

    #[test]
    fn ks_distance_of_a_single_point() {
        // one observation at 0: the empirical cdf jumps from 0 to 1 where Phi = 1/2
        assert!((ks_normal(&[0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn failed_check_fails_report() {
        let mut r = McReport::new("x", 1, vec![], 0);
        r.check(Check::within("a", 0.5, 0.0, 1.0));
        assert!(r.passed);
        r.check(Check::below("b", 2.0, 1.0));
        assert!(!r.passed);
        assert!(r.summary().contains("FAIL b"));
    }
}
