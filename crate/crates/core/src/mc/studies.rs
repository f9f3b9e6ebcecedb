//! Replication studies: martingale mean, consistency rates, coverage,
//! normality and variance consistency.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{correlation, covariance, ks_normal, mean, median, variance, Check, McReport, StudyConfig};
use crate::error::{Error, Result};
use crate::estimate::{fit, FitData, FitOptions, Order};
use crate::inference::{eta_confidence, spd_inverse, z_quantile, Inference};
use crate::simulate::{draw_cohort, mix_seed, SimConfig};
use crate::step::StepFunction;

/// Everything a study needs from one simulated cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub converged: bool,
    /// Set when the fit or its inference failed outright.
    pub error: Option<String>,
    pub eta_hat: Vec<f64>,
    /// Euclidean norm of `eta_hat - eta0`.
    pub eta_error: f64,
    /// `sup_{t <= t*} |Lambda_hat(t) - Lambda0(t)|`.
    pub lambda_sup_error: f64,
    /// `Lambda_hat(t) - Lambda0(t)` at the grid.
    pub lambda_error: Vec<f64>,
    /// `c_hat(t, t)` at the grid.
    pub c_diag: Vec<f64>,
    /// `Sigma_hat^{-1}`, row-major.
    pub sigma_inv: Vec<f64>,
    pub eta_ci_hit: Vec<bool>,
    /// Intervals checked against `eta0` shifted by the probe offset.
    pub probe_hit: Vec<bool>,
    pub band_hit: Vec<bool>,
    /// `B_n(t)` at the grid, evaluated at `eta0`.
    pub b_n: Vec<Vec<f64>>,
}

impl Replicate {
    fn failed(n: usize, rep: usize, seed: u64, error: Option<String>) -> Self {
        Self {
            n,
            rep,
            seed,
            converged: false,
            error,
            eta_hat: vec![],
            eta_error: f64::NAN,
            lambda_sup_error: f64::NAN,
            lambda_error: vec![],
            c_diag: vec![],
            sigma_inv: vec![],
            eta_ci_hit: vec![],
            probe_hit: vec![],
            band_hit: vec![],
            b_n: vec![],
        }
    }
}

fn sup_error(estimate: &StepFunction, truth: impl Fn(f64) -> f64, t_star: f64) -> f64 {
    let mut sup = (estimate.eval(t_star) - truth(t_star)).abs();
    for &w in estimate.locations().iter().take_while(|&&w| w <= t_star) {
        let t = truth(w);
        sup = sup.max((estimate.eval(w) - t).abs()).max((estimate.eval_left(w) - t).abs());
    }
    sup
}

fn scenario_for(config: &StudyConfig, n: usize, rep: usize) -> SimConfig {
    let mut scenario = config.scenario.clone();
    scenario.seed = mix_seed(config.seed, n as u64, rep as u64);
    scenario
}

/// Simulates and fits replication `rep` at sample size `n`.
pub fn run_replicate(config: &StudyConfig, n: usize, rep: usize) -> Result<Replicate> {
    let scenario = scenario_for(config, n, rep);
    let hazard = scenario.hazard()?;
    let truth = &scenario.params.eta;
    let modulation = &scenario.params.modulation;
    let cohort = draw_cohort(n, &scenario)?;
    let fitted = match fit(&cohort, modulation, &FitOptions::default()) {
        Ok(f) => f,
        Err(e) => return Ok(Replicate::failed(n, rep, scenario.seed, Some(e.to_string()))),
    };
    if !fitted.converged {
        return Ok(Replicate::failed(n, rep, scenario.seed, None));
    }
    let data = FitData::new(&cohort, modulation, None)?;
    let inference = Inference::new(&data, &fitted.eta_hat, &fitted.lambda0_hat)?;
    let k = truth.dim();
    let sigma_inv = match spd_inverse(inference.sigma_hat()) {
        Ok(inv) => inv.inverse,
        Err(e) => return Ok(Replicate::failed(n, rep, scenario.seed, Some(e.to_string()))),
    };
    let ci = eta_confidence(&fitted.eta_hat, inference.sigma_hat(), n, config.level)?;
    let eta_hat = fitted.eta_hat.to_vector();
    let eta0 = truth.to_vector();
    let shift = config.windows.probe_shift;
    let probe_hit = (0..k)
        .map(|j| ci[j].contains(eta0[j] + shift * (sigma_inv[(j, j)] / n as f64).sqrt()))
        .collect();
    let band = inference.lambda_band(&config.grid, config.level)?;
    let c_diag = config
        .grid
        .iter()
        .map(|&t| inference.c_hat(t, t))
        .collect::<Result<Vec<_>>>()?;

    // B_n at the true eta: sum over event ages of (dS0/S0^2) dP_n N
    let ages = data.event_ages();
    let sums = data.risk_sums(truth, ages, Order::Gradient);
    let mut b_n = vec![DVector::<f64>::zeros(k); config.grid.len()];
    for (i, &w) in ages.iter().enumerate() {
        let y0 = sums.y0(i);
        if y0 <= 0.0 {
            continue;
        }
        let term = sums.y1(i) * (data.event_counts()[i] as f64 / (y0 * y0));
        for (g, &t) in config.grid.iter().enumerate() {
            if w <= t {
                b_n[g] += &term;
            }
        }
    }

    Ok(Replicate {
        n,
        rep,
        seed: scenario.seed,
        converged: true,
        error: None,
        eta_error: (&eta_hat - &eta0).norm(),
        eta_hat: eta_hat.iter().copied().collect(),
        lambda_sup_error: sup_error(&fitted.lambda0_hat, |t| hazard.cumulative(t), fitted.t_star),
        lambda_error: config
            .grid
            .iter()
            .map(|&t| fitted.lambda0_hat.eval(t) - hazard.cumulative(t))
            .collect(),
        c_diag,
        sigma_inv: sigma_inv.transpose().iter().copied().collect(),
        eta_ci_hit: (0..k).map(|j| ci[j].contains(eta0[j])).collect(),
        probe_hit,
        band_hit: config
            .grid
            .iter()
            .zip(&band)
            .map(|(&t, b)| b.contains(hazard.cumulative(t)))
            .collect(),
        b_n: b_n.into_iter().map(|b| b.iter().copied().collect()).collect(),
    })
}

fn validate(config: &StudyConfig) -> Result<()> {
    if config.replications == 0 {
        return Err(Error::InvalidInput("replications must be at least 1".into()));
    }
    if config.sample_sizes.is_empty() || config.sample_sizes.contains(&0) {
        return Err(Error::InvalidInput("sample sizes must be positive".into()));
    }
    if config.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("sample sizes must be increasing".into()));
    }
    z_quantile(config.level)?;
    config.scenario.validate()
}

/// Refuses scenarios in which kappa does not depend on some coordinate of eta.
fn check_identified(config: &StudyConfig) -> Result<()> {
    let truth = &config.scenario.params.eta;
    if truth.dim() == 0 {
        return Err(Error::DegenerateEta("the scenario has no eta parameters".into()));
    }
    let n = config.sample_sizes[0];
    let pilot = draw_cohort(n, &scenario_for(config, n, usize::MAX))?;
    let data = FitData::new(&pilot, &config.scenario.params.modulation, None)?;
    let flat = data.flat_coordinates(truth);
    if !flat.is_empty() {
        return Err(Error::DegenerateEta(format!(
            "kappa does not depend on eta coordinates {flat:?}"
        )));
    }
    Ok(())
}

/// Runs all replications at every sample size; records the failure count.
fn replicate_all(config: &StudyConfig, report: &mut McReport) -> Result<()> {
    for &n in &config.sample_sizes {
        let records = (0..config.replications)
            .into_par_iter()
            .map(|rep| run_replicate(config, n, rep))
            .collect::<Result<Vec<_>>>()?;
        let failed = records.iter().filter(|r| !r.converged).count();
        report.nonconverged.insert(n, failed);
        let share = failed as f64 / config.replications as f64;
        report.check(Check::within(
            format!("n={n} non-converged share"),
            share,
            0.0,
            config.windows.max_nonconvergence,
        ));
        report.records.extend(records);
    }
    Ok(())
}

fn converged(report: &McReport, n: usize) -> Vec<Replicate> {
    report.records.iter().filter(|r| r.n == n && r.converged).cloned().collect()
}

fn new_report(study: &str, config: &StudyConfig) -> McReport {
    McReport::new(study, config.seed, config.sample_sizes.clone(), config.replications)
}

/// Median errors of eta and of the baseline must fall at the root-n rate.
pub fn consistency_study(config: &StudyConfig) -> Result<McReport> {
    validate(config)?;
    check_identified(config)?;
    let mut report = new_report("consistency", config);
    replicate_all(config, &mut report)?;
    let w = config.windows;
    let mut medians = Vec::new();
    for &n in &config.sample_sizes {
        let recs = converged(&report, n);
        let eta = median(&recs.iter().map(|r| r.eta_error).collect::<Vec<_>>());
        let lambda = median(&recs.iter().map(|r| r.lambda_sup_error).collect::<Vec<_>>());
        report.metric(format!("n={n} median eta error"), eta);
        report.metric(format!("n={n} median baseline sup error"), lambda);
        medians.push((n, eta, lambda));
    }
    for pair in medians.windows(2) {
        let ((n1, e1, l1), (n2, e2, l2)) = (pair[0], pair[1]);
        report.check(Check::holds(format!("eta median decreases {n1}->{n2}"), e2 < e1));
        report.check(Check::holds(format!("baseline median decreases {n1}->{n2}"), l2 < l1));
        // ratio rescaled to a 4x increase in n
        let power = 4f64.ln() / (n2 as f64 / n1 as f64).ln();
        report.check(Check::within(
            format!("eta error ratio per 4x n ({n1}->{n2})"),
            (e2 / e1).powf(power),
            w.rate_low,
            w.rate_high,
        ));
        report.check(Check::within(
            format!("baseline error ratio per 4x n ({n1}->{n2})"),
            (l2 / l1).powf(power),
            w.rate_low,
            w.rate_high,
        ));
    }
    Ok(report)
}

/// Acceptance window for a coverage rate at nominal `level`: the configured
/// window at 0.95, shifted with the level otherwise.
fn coverage_window(config: &StudyConfig) -> (f64, f64) {
    let w = config.windows;
    let shift = config.level - 0.95;
    ((w.coverage_low + shift).max(0.0), (w.coverage_high + shift).min(1.0))
}

fn rate(hits: impl Iterator<Item = bool>) -> f64 {
    let (mut yes, mut total) = (0usize, 0usize);
    for h in hits {
        yes += h as usize;
        total += 1;
    }
    yes as f64 / total as f64
}

/// Empirical coverage of the eta intervals and the pointwise baseline bands.
pub fn coverage_study(config: &StudyConfig) -> Result<McReport> {
    validate(config)?;
    if config.replications < 50 {
        return Err(Error::InvalidInput("coverage studies need at least 50 replications".into()));
    }
    check_identified(config)?;
    let mut report = new_report("coverage", config);
    replicate_all(config, &mut report)?;
    let (low, high) = coverage_window(config);
    let k = config.scenario.params.eta.dim();
    for &n in &config.sample_sizes {
        let recs = converged(&report, n);
        for j in 0..k {
            let c = rate(recs.iter().map(|r| r.eta_ci_hit[j]));
            report.check(Check::within(format!("n={n} eta[{j}] coverage"), c, low, high));
            let probe = rate(recs.iter().map(|r| r.probe_hit[j]));
            report.check(Check::below(
                format!("n={n} eta[{j}] coverage of shifted truth"),
                probe,
                config.windows.probe_max,
            ));
        }
        for (g, &t) in config.grid.iter().enumerate() {
            let c = rate(recs.iter().map(|r| r.band_hit[g]));
            report.check(Check::within(format!("n={n} baseline band coverage at t={t}"), c, low, high));
        }
    }
    Ok(report)
}

/// Gaussian shape, asymptotic independence and variance consistency.
pub fn normality_study(config: &StudyConfig) -> Result<McReport> {
    validate(config)?;
    if config.replications < 2 {
        return Err(Error::InvalidInput("normality studies need at least 2 replications".into()));
    }
    check_identified(config)?;
    let mut report = new_report("normality", config);
    replicate_all(config, &mut report)?;
    let w = config.windows;
    let eta0 = config.scenario.params.eta.to_vector();
    let k = eta0.len();
    for &n in &config.sample_sizes {
        let recs = converged(&report, n);
        let m = recs.len();
        let root_n = (n as f64).sqrt();
        let ks_limit = 1.36 / (m as f64).sqrt() + w.ks_slack;
        let corr_limit = w.corr_sigmas / (m as f64).sqrt();

        let scaled: Vec<Vec<f64>> = (0..k)
            .map(|j| recs.iter().map(|r| root_n * (r.eta_hat[j] - eta0[j])).collect())
            .collect();
        let mean_inv = recs
            .iter()
            .fold(DMatrix::zeros(k, k), |acc, r| acc + DMatrix::from_row_slice(k, k, &r.sigma_inv))
            / m as f64;

        for j in 0..k {
            let sd = mean_inv[(j, j)].sqrt();
            let z: Vec<f64> = scaled[j].iter().map(|x| x / sd).collect();
            report.check(Check::below(format!("n={n} eta[{j}] KS distance"), ks_normal(&z), ks_limit));
        }

        for (g, &t) in config.grid.iter().enumerate() {
            let v_n: Vec<f64> = recs
                .iter()
                .map(|r| {
                    let dev = DVector::from_iterator(k, (0..k).map(|j| r.eta_hat[j] - eta0[j]));
                    root_n * r.lambda_error[g] + root_n * dev.dot(&DVector::from_column_slice(&r.b_n[g]))
                })
                .collect();
            for (j, s) in scaled.iter().enumerate() {
                let c = correlation(s, &v_n);
                report.check(Check::below(
                    format!("n={n} |corr(eta[{j}], V_n(t={t}))|"),
                    c.abs(),
                    corr_limit,
                ));
            }
        }

        let sampling = DMatrix::from_fn(k, k, |a, b| covariance(&scaled[a], &scaled[b]));
        let rel = (&sampling - &mean_inv).norm() / mean_inv.norm();
        report.metric(format!("n={n} sampling covariance (frobenius)"), sampling.norm());
        report.check(Check::below(
            format!("n={n} eta covariance vs mean inverse Sigma_hat (rel frobenius)"),
            rel,
            w.variance_rel,
        ));
        for (g, &t) in config.grid.iter().enumerate() {
            let errs: Vec<f64> = recs.iter().map(|r| root_n * r.lambda_error[g]).collect();
            let mean_c = mean(&recs.iter().map(|r| r.c_diag[g]).collect::<Vec<_>>());
            let rel = (variance(&errs) - mean_c).abs() / mean_c;
            report.check(Check::below(
                format!("n={n} baseline variance vs mean c_hat at t={t} (rel)"),
                rel,
                w.variance_rel,
            ));
        }
    }
    Ok(report)
}

/// Empirical mean of `M(s*, t)` over `n` units at the true parameters.
pub fn martingale_study(scenario: &SimConfig, n: usize, grid: &[f64], sigmas: f64) -> Result<McReport> {
    let cohort = draw_cohort(n, scenario)?;
    let s_star = cohort.s_star();
    let mut report = McReport::new("martingale", scenario.seed, vec![n], 1);
    for &t in grid {
        let values = cohort
            .units()
            .par_iter()
            .map(|u| u.martingale(s_star, t, &scenario.params))
            .collect::<Result<Vec<_>>>()?;
        let m = mean(&values);
        let se = (variance(&values) / n as f64).sqrt();
        report.metric(format!("mean M at t={t}"), m);
        report.metric(format!("se M at t={t}"), se);
        let score = if se > 0.0 { m.abs() / se } else if m == 0.0 { 0.0 } else { f64::INFINITY };
        report.check(Check::within(format!("|mean M| / se at t={t}"), score, 0.0, sigmas));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Windows;
    use crate::model::{Eta, HazardFamily, Modulation};
    use crate::simulate::preset;

    #[test]
    fn sup_error_sees_both_sides_of_jumps() {
        let est = StepFunction::new(vec![1.0], vec![1.0], 0.0).unwrap();
        // truth t: error just before 1 is 1, at 1 is 0, at t* = 2 is 1
        assert!((sup_error(&est, |t| t, 1.5) - 1.0).abs() < 1e-15);
        let est = StepFunction::new(vec![1.0], vec![2.0], 0.0).unwrap();
        assert!((sup_error(&est, |t| t, 1.0) - 1.0).abs() < 1e-15);
    }

    fn small(study: &str) -> StudyConfig {
        let mut c = match study {
            "coverage" => StudyConfig::coverage_default(5).unwrap(),
            _ => StudyConfig::consistency_default(5).unwrap(),
        };
        c.sample_sizes = vec![60];
        c.replications = 50;
        c
    }

    #[test]
    fn degenerate_eta_is_refused() {
        let mut c = small("consistency");
        c.scenario = preset("renewal-weibull", 1).unwrap();
        assert!(matches!(consistency_study(&c), Err(Error::DegenerateEta(_))));
        // exp link whose only covariate is identically zero
        let mut c = small("consistency");
        c.scenario.covariates = crate::simulate::CovariateGen::Uniform { dim: 1, low: 0.0, high: 0.0 };
        assert!(matches!(consistency_study(&c), Err(Error::DegenerateEta(_))));
    }

    #[test]
    fn zero_replications_is_an_error() {
        let mut c = small("consistency");
        c.replications = 0;
        assert!(normality_study(&c).is_err());
        assert!(coverage_study(&c).is_err());
    }

    #[test]
    fn full_level_covers_everything() {
        let mut c = small("coverage");
        c.level = 1.0;
        let report = coverage_study(&c).unwrap();
        for check in report.checks.iter().filter(|c| c.name.contains("coverage at") || c.name.ends_with("] coverage")) {
            assert_eq!(check.value, 1.0, "{}", check.name);
        }
    }

    #[test]
    fn studies_are_deterministic() {
        let c = small("coverage");
        let a = run_replicate(&c, 60, 3).unwrap();
        let b = run_replicate(&c, 60, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn martingale_mean_near_zero_for_poisson() {
        let mut scenario = preset("hpp", 9).unwrap();
        scenario.params.modulation = Modulation::unit();
        scenario.params.eta = Eta::default();
        scenario.covariates = crate::simulate::CovariateGen::None;
        assert!(matches!(scenario.hazard().unwrap(), HazardFamily::Constant { .. }));
        let grid: Vec<f64> = (1..=5).map(|i| 0.5 * i as f64).collect();
        let report = martingale_study(&scenario, 500, &grid, Windows::default().martingale_sigmas).unwrap();
        assert_eq!(report.checks.len(), 5);
    }
}
