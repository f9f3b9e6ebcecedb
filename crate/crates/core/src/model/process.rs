//! Effective age, kappa, intensity and the doubly-indexed processes
//! `N(s, t)`, `Y(s, t)`, `A(s, t)` and `M(s, t)` of a single unit.

use crate::error::{Error, Result};
use crate::model::baseline::{Baseline, HazardFamily};
use crate::model::family::{Derivs, Eta, Modulation};
use crate::model::unit::{RiskPiece, UnitPath};
use crate::quad;
use crate::step::StepFunction;

/// Baseline, kappa family and parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub baseline: Baseline,
    pub modulation: Modulation,
    pub eta: Eta,
}

impl ModelParams {
    pub fn new(baseline: Baseline, modulation: Modulation, eta: Eta) -> Self {
        Self {
            baseline,
            modulation,
            eta,
        }
    }
}

impl UnitPath {
    /// Effective age at calendar time `s`.
    pub fn effective_age(&self, s: f64) -> Result<f64> {
        self.check_time(s)?;
        Ok(self.segment_at(s).age_at(s))
    }

    /// Calendar time in segment `segment` (zero-based) whose effective age is `t`.
    pub fn age_inverse(&self, segment: usize, t: f64) -> Result<f64> {
        let segs = self.segments();
        let seg = segs.get(segment).ok_or_else(|| {
            Error::InvalidInput(format!(
                "segment {} does not exist; the unit has {} segments",
                segment + 1,
                segs.len()
            ))
        })?;
        if seg.slope == 0.0 {
            return Err(Error::DegenerateAge {
                segment: segment + 1,
            });
        }
        if !seg.covers_age(t) {
            return Err(Error::AgeOutOfSegment {
                segment: segment + 1,
                age: t,
                lo: seg.age_lo(),
                hi: seg.age_hi(),
            });
        }
        Ok(seg.calendar_at(t))
    }

    /// Kappa at `s` with its gradient and Hessian in eta.
    pub fn kappa(&self, s: f64, eta: &Eta, modulation: &Modulation) -> Result<Derivs> {
        self.check_time(s)?;
        Ok(modulation.eval(s, self.events_before(s), self.covariates().at(s), eta))
    }

    pub(crate) fn kappa_on_piece(&self, piece: &RiskPiece, v: f64, eta: &Eta, m: &Modulation) -> f64 {
        let x = &self.covariates().values()[piece.covariate];
        m.value(v, piece.prior_events(), x, eta)
    }

    pub(crate) fn kappa_derivs_on_piece(
        &self,
        piece: &RiskPiece,
        v: f64,
        eta: &Eta,
        m: &Modulation,
    ) -> Derivs {
        let x = &self.covariates().values()[piece.covariate];
        m.eval(v, piece.prior_events(), x, eta)
    }

    /// Conditional intensity `Y(s) lambda0(E(s)) kappa(s)`.
    pub fn intensity(&self, s: f64, params: &ModelParams) -> Result<f64> {
        self.check_time(s)?;
        let hazard = match &params.baseline {
            Baseline::Hazard(h) => h,
            Baseline::Cumulative(_) => return Err(Error::StepBaselineIntensity),
        };
        if s > self.tau() {
            return Ok(0.0);
        }
        let age = self.effective_age(s)?;
        let kappa = params.modulation.value(
            s,
            self.events_before(s),
            self.covariates().at(s),
            &params.eta,
        );
        Ok(hazard.hazard(age) * kappa)
    }

    /// `t -> N(s, t)`: unit jumps at the effective ages of events `<= s`.
    pub fn counting_n(&self, s: f64) -> Result<StepFunction> {
        self.check_time(s)?;
        let count = self.event_times().partition_point(|&e| e <= s);
        StepFunction::from_points(self.event_ages()[..count].iter().map(|&a| (a, 1.0)), 0.0)
    }

    /// Generalized at-risk process `Y(s, t; eta)`.
    pub fn at_risk(&self, s: f64, t: f64, eta: &Eta, modulation: &Modulation) -> Result<f64> {
        self.check_time(s)?;
        Ok(self
            .pieces_until(s)
            .iter()
            .filter(|p| p.covers_age(t))
            .map(|p| self.kappa_on_piece(p, p.calendar_at(t), eta, modulation) / p.segment.slope)
            .sum())
    }

    /// `A(s, t) = int_0^t Y(s, w) Lambda0(dw)`, integrated exactly piece by piece.
    pub fn compensator(&self, s: f64, t: f64, params: &ModelParams) -> Result<f64> {
        self.check_time(s)?;
        let m = &params.modulation;
        let eta = &params.eta;
        let time_varying = m.rho.depends_on_time();
        let mut total = 0.0;
        for piece in self.pieces_until(s) {
            let lo = piece.age_lo();
            let hi = piece.age_hi().min(t);
            if hi <= lo {
                continue;
            }
            let slope = piece.segment.slope;
            total += match &params.baseline {
                Baseline::Cumulative(f) => f.integrate(lo, hi, |w| {
                    self.kappa_on_piece(&piece, piece.calendar_at(w), eta, m) / slope
                }),
                Baseline::Hazard(h) if !time_varying => {
                    let kappa = self.kappa_on_piece(&piece, piece.end, eta, m);
                    kappa / slope * (h.cumulative(hi) - h.cumulative(lo))
                }
                Baseline::Hazard(h) => piece_hazard_quadrature(h, lo, hi, |w| {
                    self.kappa_on_piece(&piece, piece.calendar_at(w), eta, m) / slope
                }),
            };
        }
        Ok(total)
    }

    /// `M(s, t) = N(s, t) - A(s, t)`.
    pub fn martingale(&self, s: f64, t: f64, params: &ModelParams) -> Result<f64> {
        Ok(self.counting_n(s)?.eval(t) - self.compensator(s, t, params)?)
    }
}

/// `int_lo^hi g(w) lambda0(w) dw` for a smooth weight `g`.
fn piece_hazard_quadrature<G: FnMut(f64) -> f64>(h: &HazardFamily, lo: f64, hi: f64, mut g: G) -> f64 {
    quad::integrate_composite(lo, hi, 8, |w| g(w) * h.hazard(w))
}
