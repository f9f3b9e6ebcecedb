//! Estimation: pooled at-risk moments, the `Q_n` measure, profile partial
//! likelihood with exact score and Hessian, Newton-Raphson, and the
//! baseline and survivor estimators.

mod baseline;
mod likelihood;
mod newton;
mod risk;

pub use baseline::{product_limit, Survivor};
pub use likelihood::LikelihoodEval;
pub use newton::{fit_eta, EtaFit, NewtonOptions};
pub use risk::{qn_measure, qn_moments, s0, FitData, Order, QnAtom, QnMoments, RiskSums};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::inference::Inference;
use crate::model::{Cohort, Eta, Modulation};
use crate::step::StepFunction;

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Overrides the cohort's `t_star`.
    pub t_star: Option<f64>,
    /// Starting point; defaults to [`Modulation::neutral_eta`].
    pub init: Option<Eta>,
    pub newton: NewtonOptions,
}

/// Everything produced by a full fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub eta_hat: Eta,
    pub lambda0_hat: StepFunction,
    pub survivor: Survivor,
    pub sigma_hat: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub final_score_norm: f64,
    pub converged: bool,
    pub ascent_steps: usize,
    pub t_star: f64,
    pub n: usize,
    pub events_used: usize,
}

/// Partial MLE of eta, then the baseline, survivor and covariance estimates.
pub fn fit(cohort: &Cohort, modulation: &Modulation, options: &FitOptions) -> Result<FitResult> {
    let data = FitData::new(cohort, modulation, options.t_star.or(cohort.t_star()))?;
    let init = options
        .init
        .clone()
        .unwrap_or_else(|| modulation.neutral_eta(cohort.covariate_dim()));
    let eta_fit = fit_eta(&data, &init, &options.newton)?;
    let lambda0_hat = data.abn_baseline(&eta_fit.eta)?;
    let survivor = product_limit(&lambda0_hat);
    let sigma_hat = Inference::new(&data, &eta_fit.eta, &lambda0_hat)?.sigma_hat().clone();
    Ok(FitResult {
        eta_hat: eta_fit.eta,
        lambda0_hat,
        survivor,
        sigma_hat,
        log_likelihood: eta_fit.log_likelihood,
        iterations: eta_fit.iterations,
        final_score_norm: eta_fit.final_score_norm,
        converged: eta_fit.converged,
        ascent_steps: eta_fit.ascent_steps,
        t_star: data.t_star(),
        n: cohort.len(),
        events_used: data.event_count(),
    })
}

#[cfg(test)]
mod tests;
