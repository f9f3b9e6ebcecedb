//! Profile partial likelihood, its score and Hessian.

use nalgebra::{DMatrix, DVector};

use super::risk::{FitData, Order, RiskSums};
use crate::error::{Error, Result};
use crate::model::Eta;

/// Log partial likelihood with optional score and Hessian (of `l_P / n`).
#[derive(Debug, Clone)]
pub struct LikelihoodEval {
    pub log_likelihood: f64,
    pub score: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

impl<'a> FitData<'a> {
    /// Evaluates `l_P`, and up to `order` derivatives of `l_P / n`.
    pub fn evaluate(&self, eta: &Eta, order: Order) -> Result<LikelihoodEval> {
        self.check_eta(eta)?;
        let k = eta.dim();
        let n = self.n() as f64;
        let sums = self.risk_sums(eta, &self.ages, order);
        let mut loglik = 0.0;
        let mut score = DVector::zeros(if order >= Order::Gradient { k } else { 0 });
        let mut hess = DMatrix::zeros(
            if order >= Order::Hessian { k } else { 0 },
            if order >= Order::Hessian { k } else { 0 },
        );

        for event in &self.events {
            let d = self.event_kappa(event, eta);
            if !(d.value > 0.0) || !d.value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "kappa is {} at an event; eta {:?} is outside the model's support",
                    d.value, eta
                )));
            }
            loglik += d.value.ln();
            if order >= Order::Gradient {
                let ratio = &d.grad / d.value;
                if order >= Order::Hessian {
                    hess += &d.hess / d.value - &ratio * ratio.transpose();
                }
                score += ratio;
            }
        }
        for (i, &count) in self.counts.iter().enumerate() {
            let y0 = sums.y0(i);
            if !(y0 > 0.0) {
                return Err(Error::EmptyRiskSet { age: self.ages[i] });
            }
            let d = count as f64;
            loglik -= d * (y0 / n).ln();
            if order >= Order::Gradient {
                let ratio = ratio_vector(&sums, i);
                if order >= Order::Hessian {
                    let y2 = DMatrix::from_row_slice(k, k, sums.y2_slice(i)) / y0;
                    hess -= (y2 - &ratio * ratio.transpose()) * d;
                }
                score -= ratio * d;
            }
        }
        Ok(LikelihoodEval {
            log_likelihood: loglik,
            score: (order >= Order::Gradient).then(|| score / n),
            hessian: (order >= Order::Hessian).then(|| hess / n),
        })
    }

    pub fn log_partial_likelihood(&self, eta: &Eta) -> Result<f64> {
        Ok(self.evaluate(eta, Order::Value)?.log_likelihood)
    }

    /// Gradient of `l_P / n`.
    pub fn score(&self, eta: &Eta) -> Result<DVector<f64>> {
        Ok(self.evaluate(eta, Order::Gradient)?.score.unwrap())
    }

    /// Hessian of `l_P / n`.
    pub fn hessian(&self, eta: &Eta) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(eta, Order::Hessian)?.hessian.unwrap())
    }
}

pub(crate) fn ratio_vector(sums: &RiskSums, i: usize) -> DVector<f64> {
    DVector::from_column_slice(sums.y1_slice(i)) / sums.y0(i)
}
