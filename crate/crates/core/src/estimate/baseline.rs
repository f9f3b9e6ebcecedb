//! Generalized Aalen-Breslow-Nelson baseline and product-limit survivor.

use super::risk::{FitData, Order};
use crate::error::Result;
use crate::model::Eta;
use crate::step::StepFunction;

impl<'a> FitData<'a> {
    /// Cumulative baseline hazard estimate: jump `d_w / (n S0(w))` at each
    /// distinct event age `w <= t_star`; ages with an empty risk set add 0.
    pub fn abn_baseline(&self, eta: &Eta) -> Result<StepFunction> {
        self.check_eta(eta)?;
        let sums = self.risk_sums(eta, &self.ages, Order::Value);
        let (locations, jumps): (Vec<f64>, Vec<f64>) = self
            .ages
            .iter()
            .zip(&self.counts)
            .enumerate()
            .filter(|(i, _)| sums.y0(*i) > 0.0)
            .map(|(i, (&w, &d))| (w, d as f64 / sums.y0(i)))
            .unzip();
        StepFunction::new(locations, jumps, 0.0)
    }
}

/// Product-limit survivor from a cumulative hazard step function.
#[derive(Debug, Clone, PartialEq)]
pub struct Survivor {
    pub curve: StepFunction,
    /// A factor `1 - dLambda` was negative and the curve was clipped at 0.
    pub clipped: bool,
}

/// `prod_{w <= t} (1 - dLambda(w))`.
pub fn product_limit(cumulative: &StepFunction) -> Survivor {
    // `value` is accumulated exactly as the step function sums its jumps,
    // so a clipped curve evaluates to exactly 0.
    let mut value = 1.0f64;
    let mut clipped = false;
    let mut jumps = Vec::with_capacity(cumulative.len());
    for &dl in cumulative.jumps() {
        let factor = 1.0 - dl;
        let next = if factor < 0.0 {
            clipped = true;
            0.0
        } else {
            value * factor
        };
        let jump = next - value;
        jumps.push(jump);
        value += jump;
    }
    Survivor {
        curve: StepFunction::new(cumulative.locations().to_vec(), jumps, 1.0)
            .expect("locations come from a valid step function"),
        clipped,
    }
}

impl<'a> FitData<'a> {
    pub fn ple_survivor(&self, eta: &Eta) -> Result<Survivor> {
        Ok(product_limit(&self.abn_baseline(eta)?))
    }
}
