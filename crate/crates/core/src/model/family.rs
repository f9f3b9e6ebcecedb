//! Count modulation (rho), link functions (psi) and their product kappa.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A scalar function of a parameter vector with its gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Derivs {
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            value,
            grad: DVector::zeros(dim),
            hess: DMatrix::zeros(dim, dim),
        }
    }
}

/// User-supplied count modulation `rho(s, k; alpha)`.
///
/// Implementations must satisfy `rho(s, 0; alpha) == 1`, stay nonnegative and
/// bounded on the observation window, and return exact first and second
/// derivatives in `alpha`.
pub trait RhoFn: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, s: f64, count: usize, alpha: &[f64]) -> Derivs;
    /// Whether the value varies with `s` for fixed `(count, alpha)`.
    fn depends_on_time(&self) -> bool {
        true
    }
}

/// Modulation of the intensity by the number of prior events.
#[derive(Debug, Clone)]
pub enum Rho {
    /// rho = 1.
    Identity,
    /// rho = alpha^k with scalar alpha > 0.
    PowerCount,
    /// rho = exp(alpha k).
    ExpCount,
    Custom(Arc<dyn RhoFn>),
}

impl PartialEq for Rho {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Rho::Identity, Rho::Identity)
            | (Rho::PowerCount, Rho::PowerCount)
            | (Rho::ExpCount, Rho::ExpCount) => true,
            (Rho::Custom(a), Rho::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Rho {
    pub fn dim(&self) -> usize {
        match self {
            Rho::Identity => 0,
            Rho::PowerCount | Rho::ExpCount => 1,
            Rho::Custom(f) => f.dim(),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        match self {
            Rho::Custom(f) => f.depends_on_time(),
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Rho::Identity => "identity",
            Rho::PowerCount => "power-count",
            Rho::ExpCount => "exp-count",
            Rho::Custom(_) => "custom",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" | "none" => Ok(Rho::Identity),
            "power-count" => Ok(Rho::PowerCount),
            "exp-count" => Ok(Rho::ExpCount),
            other => Err(Error::InvalidInput(format!("unknown rho family '{other}'"))),
        }
    }

    pub fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "rho family {} expects {} alpha parameters, got {}",
                self.name(),
                self.dim(),
                alpha.len()
            )));
        }
        if let Rho::PowerCount = self {
            if !(alpha[0] > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "power-count rho needs alpha > 0, got {}",
                    alpha[0]
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64, count: usize, alpha: &[f64]) -> Derivs {
        match self {
            Rho::Identity => Derivs::constant(1.0, 0),
            Rho::PowerCount => {
                let a = alpha[0];
                let k = count as i32;
                let value = a.powi(k);
                let d1 = if k >= 1 { k as f64 * a.powi(k - 1) } else { 0.0 };
                let d2 = if k >= 2 {
                    (k * (k - 1)) as f64 * a.powi(k - 2)
                } else {
                    0.0
                };
                Derivs {
                    value,
                    grad: DVector::from_element(1, d1),
                    hess: DMatrix::from_element(1, 1, d2),
                }
            }
            Rho::ExpCount => {
                let k = count as f64;
                let value = (alpha[0] * k).exp();
                Derivs {
                    value,
                    grad: DVector::from_element(1, k * value),
                    hess: DMatrix::from_element(1, 1, k * k * value),
                }
            }
            Rho::Custom(f) => f.eval(s, count, alpha),
        }
    }

    fn value(&self, s: f64, count: usize, alpha: &[f64]) -> f64 {
        match self {
            Rho::Identity => 1.0,
            Rho::PowerCount => alpha[0].powi(count as i32),
            Rho::ExpCount => (alpha[0] * count as f64).exp(),
            Rho::Custom(f) => f.eval(s, count, alpha).value,
        }
    }
}

/// Link function psi applied to the linear predictor `x^T beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// psi = 1: covariates have no effect and beta is absent.
    Identity,
    Exp,
    /// psi(v) = log(1 + exp(v)).
    Softplus,
}

impl Link {
    pub fn name(&self) -> &'static str {
        match self {
            Link::Identity => "none",
            Link::Exp => "exp",
            Link::Softplus => "softplus",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" | "identity" => Ok(Link::Identity),
            "exp" => Ok(Link::Exp),
            "softplus" | "logit-positive" => Ok(Link::Softplus),
            other => Err(Error::InvalidInput(format!("unknown link '{other}'"))),
        }
    }

    /// `(psi, psi', psi'')` at `v`.
    pub fn eval(&self, v: f64) -> (f64, f64, f64) {
        match self {
            Link::Identity => (1.0, 0.0, 0.0),
            Link::Exp => {
                let e = v.exp();
                (e, e, e)
            }
            Link::Softplus => {
                let value = if v > 30.0 { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() };
                let sig = 1.0 / (1.0 + (-v).exp());
                (value, sig, sig * (1.0 - sig))
            }
        }
    }

    /// Number of regression coefficients for a covariate dimension `p`.
    pub fn beta_dim(&self, p: usize) -> usize {
        match self {
            Link::Identity => 0,
            _ => p,
        }
    }
}

/// Parameter vector eta = (alpha, beta).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Eta {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Eta {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        Self { alpha, beta }
    }

    pub fn zeros(q: usize, p: usize) -> Self {
        Self::new(vec![0.0; q], vec![0.0; p])
    }

    pub fn dim(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.alpha.iter().chain(&self.beta).copied())
    }

    pub fn from_slice(q: usize, values: &[f64]) -> Self {
        Self::new(values[..q].to_vec(), values[q..].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(|v| v.is_finite())
    }
}

/// The kappa family `kappa(s; eta) = rho(s, N(s-); alpha) psi(X(s) beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulation {
    pub rho: Rho,
    pub link: Link,
}

impl Modulation {
    pub fn new(rho: Rho, link: Link) -> Self {
        Self { rho, link }
    }

    /// Known kappa = 1 with no parameters.
    pub fn unit() -> Self {
        Self::new(Rho::Identity, Link::Identity)
    }

    pub fn q(&self) -> usize {
        self.rho.dim()
    }

    pub fn dim(&self, p: usize) -> usize {
        self.q() + self.link.beta_dim(p)
    }

    /// Neutral starting point: alpha = 1 for power-count, zero otherwise.
    pub fn neutral_eta(&self, p: usize) -> Eta {
        let alpha = match self.rho {
            Rho::PowerCount => vec![1.0],
            _ => vec![0.0; self.q()],
        };
        Eta::new(alpha, vec![0.0; self.link.beta_dim(p)])
    }

    pub fn check_eta(&self, eta: &Eta, p: usize) -> Result<()> {
        if !eta.is_finite() {
            return Err(Error::InvalidInput("eta has non-finite entries".into()));
        }
        self.rho.check_alpha(&eta.alpha)?;
        let want = self.link.beta_dim(p);
        if eta.beta.len() != want {
            return Err(Error::InvalidInput(format!(
                "link {} with {p} covariates expects {want} beta parameters, got {}",
                self.link.name(),
                eta.beta.len()
            )));
        }
        Ok(())
    }

    fn linear_predictor(&self, x: &[f64], beta: &[f64]) -> f64 {
        x.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    /// Kappa value only.
    pub fn value(&self, s: f64, count: usize, x: &[f64], eta: &Eta) -> f64 {
        let rho = self.rho.value(s, count, &eta.alpha);
        let psi = if eta.beta.is_empty() {
            1.0
        } else {
            self.link.eval(self.linear_predictor(x, &eta.beta)).0
        };
        rho * psi
    }

    /// Kappa with exact gradient and Hessian in eta.
    pub fn eval(&self, s: f64, count: usize, x: &[f64], eta: &Eta) -> Derivs {
        let q = eta.alpha.len();
        let p = eta.beta.len();
        let k = q + p;
        let rho = self.rho.eval(s, count, &eta.alpha);
        let (psi, dpsi, ddpsi) = if p == 0 {
            (1.0, 0.0, 0.0)
        } else {
            self.link.eval(self.linear_predictor(x, &eta.beta))
        };
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for a in 0..q {
            grad[a] = rho.grad[a] * psi;
            for b in 0..q {
                hess[(a, b)] = rho.hess[(a, b)] * psi;
            }
            for j in 0..p {
                let cross = rho.grad[a] * dpsi * x[j];
                hess[(a, q + j)] = cross;
                hess[(q + j, a)] = cross;
            }
        }
        for i in 0..p {
            grad[q + i] = rho.value * dpsi * x[i];
            for j in 0..p {
                hess[(q + i, q + j)] = rho.value * ddpsi * x[i] * x[j];
            }
        }
        Derivs {
            value: rho.value * psi,
            grad,
            hess,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_is_one_without_prior_events() {
        for rho in [Rho::Identity, Rho::PowerCount, Rho::ExpCount] {
            let alpha = vec![0.7; rho.dim()];
            assert_eq!(rho.eval(1.3, 0, &alpha).value, 1.0);
        }
    }

    #[test]
    fn power_count_value() {
        let m = Modulation::new(Rho::PowerCount, Link::Identity);
        let d = m.eval(0.4, 2, &[], &Eta::new(vec![0.9], vec![]));
        assert!((d.value - 0.81).abs() < 1e-15);
        assert!((d.grad[0] - 1.8).abs() < 1e-15);
        assert!((d.hess[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exp_link_at_zero() {
        let m = Modulation::new(Rho::Identity, Link::Exp);
        let d = m.eval(0.4, 3, &[1.0], &Eta::new(vec![], vec![0.0]));
        assert_eq!(d.value, 1.0);
        assert_eq!(d.grad[0], 1.0);
    }

    #[test]
    fn identity_family_is_flat() {
        let d = Modulation::unit().eval(0.4, 5, &[1.0, 2.0], &Eta::default());
        assert_eq!(d.value, 1.0);
        assert_eq!(d.grad.len(), 0);
    }

    #[test]
    fn softplus_is_stable_for_large_arguments() {
        let (v, d1, d2) = Link::Softplus.eval(800.0);
        assert!((v - 800.0).abs() < 1e-12);
        assert_eq!(d1, 1.0);
        assert_eq!(d2, 0.0);
        let (v, _, _) = Link::Softplus.eval(0.0);
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn power_count_rejects_nonpositive_alpha() {
        assert!(Rho::PowerCount.check_alpha(&[0.0]).is_err());
        assert!(Rho::PowerCount.check_alpha(&[0.5]).is_ok());
        assert!(Rho::ExpCount.check_alpha(&[-3.0]).is_ok());
    }
}
