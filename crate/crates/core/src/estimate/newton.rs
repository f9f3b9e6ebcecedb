//! Newton-Raphson maximization of the profile partial likelihood.

use nalgebra::DVector;

use super::risk::{FitData, Order};
use crate::error::Result;
use crate::model::Eta;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence when the sup-norm of the score falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Step length used when the Hessian is not negative definite.
    pub ascent_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
            ascent_step: 0.1,
        }
    }
}

/// Result of [`fit_eta`].
#[derive(Debug, Clone, PartialEq)]
pub struct EtaFit {
    pub eta: Eta,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub final_score_norm: f64,
    pub converged: bool,
    /// Iterations that fell back to steepest ascent.
    pub ascent_steps: usize,
    /// Set when the line search could not improve the likelihood.
    pub stalled: bool,
    /// Iterate history, starting with `init`.
    pub path: Vec<Eta>,
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Maximizes the log partial likelihood by Newton-Raphson with step halving.
pub fn fit_eta(data: &FitData<'_>, init: &Eta, options: &NewtonOptions) -> Result<EtaFit> {
    data.check_eta(init)?;
    let q = init.alpha.len();
    let mut eta = init.clone();
    let mut current = data.evaluate(&eta, Order::Hessian)?;
    let mut path = vec![eta.clone()];
    let mut ascent_steps = 0;
    let mut stalled = false;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let score = current.score.clone().unwrap();
        let norm = sup_norm(&score);
        if norm < options.tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iter || stalled {
            break;
        }
        iterations += 1;
        let neg_hessian = -current.hessian.clone().unwrap();
        let step = match neg_hessian.cholesky() {
            Some(chol) => chol.solve(&score),
            None => {
                ascent_steps += 1;
                &score * options.ascent_step
            }
        };
        let base = eta.to_vector();
        let slack = 1e-12 * (1.0 + current.log_likelihood.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let candidate = Eta::from_slice(q, (&base + &step * scale).as_slice());
            if let Ok(eval) = data.evaluate(&candidate, Order::Hessian) {
                if eval.log_likelihood.is_finite()
                    && eval.log_likelihood >= current.log_likelihood - slack
                {
                    accepted = Some((candidate, eval));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((candidate, eval)) => {
                eta = candidate;
                current = eval;
                path.push(eta.clone());
            }
            None => stalled = true,
        }
    }
    let final_score_norm = sup_norm(current.score.as_ref().unwrap());
    Ok(EtaFit {
        eta,
        log_likelihood: current.log_likelihood,
        iterations,
        final_score_norm,
        converged,
        ascent_steps,
        stalled,
        path,
    })
}
