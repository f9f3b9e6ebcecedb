//! Plug-in covariance estimators and Wald intervals for eta and the baseline.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimate::{FitData, Order};
use crate::model::Eta;
use crate::step::StepFunction;

/// Largest condition number accepted when inverting the covariance estimate.
pub const MAX_CONDITION: f64 = 1e12;

/// Two-sided standard normal quantile for coverage `level`; infinite at 1.
pub fn z_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidInput(format!("level must be in (0, 1], got {level}")));
    }
    if level == 1.0 {
        return Ok(f64::INFINITY);
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Inverse of a symmetric positive definite matrix with its condition number.
#[derive(Debug, Clone)]
pub struct SpdInverse {
    pub inverse: DMatrix<f64>,
    pub condition: f64,
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<SpdInverse> {
    let k = m.nrows();
    if k == 0 {
        return Ok(SpdInverse {
            inverse: DMatrix::zeros(0, 0),
            condition: 1.0,
        });
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCovariance { condition });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or(Error::SingularCovariance { condition })?;
    Ok(SpdInverse {
        inverse: chol.inverse(),
        condition,
    })
}

/// Wald intervals `eta_j +- z sqrt([Sigma^-1]_jj / n)`.
pub fn eta_confidence(eta_hat: &Eta, sigma_hat: &DMatrix<f64>, n: usize, level: f64) -> Result<Vec<Interval>> {
    let z = z_quantile(level)?;
    let inv = spd_inverse(sigma_hat)?.inverse;
    Ok(eta_hat
        .to_vector()
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let half = z * (inv[(j, j)] / n as f64).sqrt();
            Interval {
                lower: e - half,
                upper: e + half,
            }
        })
        .collect())
}

/// Per-jump quantities of a fitted model, from which `Sigma`, `b`, `c` and
/// the bands are sums.
#[derive(Debug, Clone)]
pub struct Inference {
    n: usize,
    locations: Vec<f64>,
    jumps: Vec<f64>,
    /// `S0(w)` at each jump.
    s0: Vec<f64>,
    /// `dS0/S0` at each jump.
    ratio: Vec<DVector<f64>>,
    sigma: DMatrix<f64>,
    lambda0: StepFunction,
}

impl Inference {
    /// Stieltjes sums against the jumps of `lambda0_hat`.
    pub fn new(data: &FitData<'_>, eta_hat: &Eta, lambda0_hat: &StepFunction) -> Result<Self> {
        data.check_eta(eta_hat)?;
        let k = eta_hat.dim();
        let n = data.n();
        let locations = lambda0_hat.locations().to_vec();
        let sums = data.risk_sums(eta_hat, &locations, Order::Hessian);
        let mut sigma = DMatrix::zeros(k, k);
        let mut s0 = Vec::with_capacity(locations.len());
        let mut ratio = Vec::with_capacity(locations.len());
        for (i, &dl) in lambda0_hat.jumps().iter().enumerate() {
            let y0 = sums.y0(i);
            if y0 > 0.0 {
                let r = sums.y1(i) / y0;
                let v = sums.outer(i) / y0 - &r * r.transpose();
                sigma += v * (y0 / n as f64 * dl);
                ratio.push(r);
            } else {
                ratio.push(DVector::zeros(k));
            }
            s0.push(y0 / n as f64);
        }
        sigma = (&sigma + sigma.transpose()) * 0.5;
        Ok(Self {
            n,
            locations,
            jumps: lambda0_hat.jumps().to_vec(),
            s0,
            ratio,
            sigma,
            lambda0: lambda0_hat.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn upto(&self, t: f64) -> usize {
        self.locations.partition_point(|&w| w <= t)
    }

    /// `sum_{w <= t} (dS0/S0)(w) dLambda(w)`.
    pub fn b_hat(&self, t: f64) -> DVector<f64> {
        let k = self.sigma.nrows();
        (0..self.upto(t)).fold(DVector::zeros(k), |acc, i| acc + &self.ratio[i] * self.jumps[i])
    }

    /// `sum_{w <= t} dLambda(w) / S0(w)`, with `0/0 = 0`.
    pub fn nelson_aalen_variance(&self, t: f64) -> f64 {
        (0..self.upto(t))
            .filter(|&i| self.s0[i] > 0.0)
            .map(|i| self.jumps[i] / self.s0[i])
            .sum()
    }

    /// Covariance function estimate of the limit of `sqrt(n)(Lambda_hat - Lambda)`.
    pub fn c_hat(&self, t1: f64, t2: f64) -> Result<f64> {
        let base = self.nelson_aalen_variance(t1.min(t2));
        if self.sigma.nrows() == 0 {
            return Ok(base);
        }
        let inv = spd_inverse(&self.sigma)?.inverse;
        Ok(base + (self.b_hat(t1).transpose() * inv * self.b_hat(t2))[(0, 0)])
    }

    /// Pointwise Wald band `Lambda(t) +- z sqrt(c(t, t) / n)`, lower end clipped at 0.
    pub fn lambda_band(&self, grid: &[f64], level: f64) -> Result<Vec<Interval>> {
        let z = z_quantile(level)?;
        let inv = if self.sigma.nrows() > 0 {
            Some(spd_inverse(&self.sigma)?.inverse)
        } else {
            None
        };
        Ok(grid
            .iter()
            .map(|&t| {
                let mut c = self.nelson_aalen_variance(t);
                if let Some(inv) = &inv {
                    let b = self.b_hat(t);
                    c += (b.transpose() * inv * &b)[(0, 0)];
                }
                let centre = self.lambda0.eval(t);
                let half = if c > 0.0 { z * (c / self.n as f64).sqrt() } else { 0.0 };
                Interval {
                    lower: (centre - half).max(0.0),
                    upper: centre + half,
                }
            })
            .collect())
    }
}

/// `Sigma_hat`: Stieltjes sum of `V_Qn[dk/k] S0` against `lambda0_hat`.
pub fn sigma_hat(data: &FitData<'_>, eta_hat: &Eta, lambda0_hat: &StepFunction) -> Result<DMatrix<f64>> {
    Ok(Inference::new(data, eta_hat, lambda0_hat)?.sigma)
}

pub fn b_hat(data: &FitData<'_>, eta_hat: &Eta, lambda0_hat: &StepFunction, t: f64) -> Result<DVector<f64>> {
    Ok(Inference::new(data, eta_hat, lambda0_hat)?.b_hat(t))
}

pub fn c_hat(
    data: &FitData<'_>,
    eta_hat: &Eta,
    lambda0_hat: &StepFunction,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    Inference::new(data, eta_hat, lambda0_hat)?.c_hat(t1, t2)
}

pub fn lambda_band(
    data: &FitData<'_>,
    eta_hat: &Eta,
    lambda0_hat: &StepFunction,
    grid: &[f64],
    level: f64,
) -> Result<Vec<Interval>> {
    Inference::new(data, eta_hat, lambda0_hat)?.lambda_band(grid, level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantiles() {
        assert!((z_quantile(0.95).unwrap() - 1.959964).abs() < 1e-6);
        assert_eq!(z_quantile(1.0).unwrap(), f64::INFINITY);
        assert!(z_quantile(0.0).is_err());
        assert!(z_quantile(1.5).is_err());
    }

    #[test]
    fn wald_halfwidth() {
        // Sigma^-1 diagonal 4 with n = 100 gives half-width z * 0.2
        let sigma = DMatrix::from_element(1, 1, 0.25);
        let ci = eta_confidence(&Eta::new(vec![], vec![1.0]), &sigma, 100, 0.95).unwrap();
        let half = (ci[0].upper - ci[0].lower) / 2.0;
        assert!((half - 0.391993).abs() < 1e-6);
        assert!(ci[0].contains(1.0));
    }

    #[test]
    fn singular_sigma_is_reported() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = eta_confidence(&Eta::new(vec![], vec![0.0, 0.0]), &sigma, 10, 0.95).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { .. }));
    }
}
