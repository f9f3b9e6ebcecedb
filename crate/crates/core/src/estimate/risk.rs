//! Pooled at-risk sums `n S0`, `n dS0`, `n d2S0` on a sorted set of ages,
//! and the prepared per-cohort structure they are computed from.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Cohort, Derivs, Eta, Modulation, RiskPiece};

/// How many derivative orders to accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// An observed event with effective age `<= t_star`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EventRef {
    pub piece: usize,
    pub time: f64,
}

/// A cohort prepared for repeated evaluation at different eta.
///
/// Holds every risk piece of every unit over `[0, s_star]`, the distinct
/// event ages `<= t_star` with their multiplicities, and the events
/// themselves.
#[derive(Debug, Clone)]
pub struct FitData<'a> {
    pub(crate) cohort: &'a Cohort,
    pub(crate) modulation: &'a Modulation,
    pub(crate) t_star: f64,
    pub(crate) pieces: Vec<(usize, RiskPiece)>,
    pub(crate) ages: Vec<f64>,
    pub(crate) counts: Vec<usize>,
    pub(crate) events: Vec<EventRef>,
}

impl<'a> FitData<'a> {
    /// Prepares `cohort`; `t_star` defaults to [`Cohort::resolved_t_star`].
    pub fn new(cohort: &'a Cohort, modulation: &'a Modulation, t_star: Option<f64>) -> Result<Self> {
        let t_star = t_star.unwrap_or_else(|| cohort.resolved_t_star());
        if !(t_star.is_finite() && t_star > 0.0) {
            return Err(Error::InvalidInput(format!("t_star must be positive, got {t_star}")));
        }
        let mut pieces = Vec::new();
        let mut raw_events = Vec::new();
        for (i, unit) in cohort.units().iter().enumerate() {
            let unit_pieces = unit.pieces();
            let base = pieces.len();
            for (offset, piece) in unit_pieces.iter().enumerate() {
                let ends_in_event = piece.end == piece.segment.end
                    && piece.segment.index < unit.event_times().len();
                if ends_in_event {
                    let age = piece.age_hi();
                    if age <= t_star {
                        raw_events.push((base + offset, piece.end, age));
                    }
                }
            }
            pieces.extend(unit_pieces.into_iter().map(|p| (i, p)));
        }
        let mut ages: Vec<f64> = raw_events.iter().map(|e| e.2).collect();
        ages.sort_by(f64::total_cmp);
        ages.dedup();
        let mut counts = vec![0usize; ages.len()];
        let events = raw_events
            .into_iter()
            .map(|(piece, time, age)| {
                counts[ages.partition_point(|&a| a < age)] += 1;
                EventRef { piece, time }
            })
            .collect();
        Ok(Self {
            cohort,
            modulation,
            t_star,
            pieces,
            ages,
            counts,
            events,
        })
    }

    pub fn cohort(&self) -> &Cohort {
        self.cohort
    }

    pub fn modulation(&self) -> &Modulation {
        self.modulation
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn n(&self) -> usize {
        self.cohort.len()
    }

    /// Parameter dimension `q + p` for this cohort's covariates.
    pub fn dim(&self) -> usize {
        self.modulation.dim(self.cohort.covariate_dim())
    }

    /// Distinct event ages `<= t_star`, sorted.
    pub fn event_ages(&self) -> &[f64] {
        &self.ages
    }

    /// Number of events at each of [`Self::event_ages`].
    pub fn event_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn check_eta(&self, eta: &Eta) -> Result<()> {
        self.modulation.check_eta(eta, self.cohort.covariate_dim())
    }

    pub(crate) fn piece_kappa(&self, index: usize, v: f64, eta: &Eta) -> Derivs {
        let (unit, piece) = &self.pieces[index];
        self.cohort.units()[*unit].kappa_derivs_on_piece(piece, v, eta, self.modulation)
    }

    pub(crate) fn event_kappa(&self, event: &EventRef, eta: &Eta) -> Derivs {
        self.piece_kappa(event.piece, event.time, eta)
    }

    /// Coordinates of eta that kappa does not depend on anywhere in the
    /// cohort (zero gradient on every risk piece).
    pub fn flat_coordinates(&self, eta: &Eta) -> Vec<usize> {
        let k = eta.dim();
        let mut seen = vec![false; k];
        for index in 0..self.pieces.len() {
            let piece = &self.pieces[index].1;
            let d = self.piece_kappa(index, piece.end, eta);
            for (c, flag) in seen.iter_mut().enumerate() {
                if d.grad[c] != 0.0 {
                    *flag = true;
                }
            }
        }
        (0..k).filter(|&c| !seen[c]).collect()
    }

    /// Raw sums `sum_i Y_i`, `sum_i dY_i`, `sum_i d2Y_i` and
    /// `sum_i sum_j phi_ij (dk/k)(dk/k)^T` at each of `ages` (sorted).
    pub fn risk_sums(&self, eta: &Eta, ages: &[f64], order: Order) -> RiskSums {
        let k = eta.dim();
        let m = ages.len();
        let mut sums = RiskSums::zeros(k, m, order);
        // difference arrays for pieces with constant kappa; m + 1 slots
        let mut diff = RiskSums::zeros(k, m + 1, order);
        let time_varying = self.modulation.rho.depends_on_time();
        for (index, (_, piece)) in self.pieces.iter().enumerate() {
            let (lo, hi) = (piece.age_lo(), piece.age_hi());
            let i0 = ages.partition_point(|&a| a <= lo);
            let i1 = ages.partition_point(|&a| a <= hi);
            if i1 <= i0 {
                continue;
            }
            let slope = piece.segment.slope;
            if time_varying {
                for (i, &age) in ages.iter().enumerate().take(i1).skip(i0) {
                    let d = self.piece_kappa(index, piece.calendar_at(age), eta);
                    sums.add(i, &d, slope, 1.0);
                }
            } else {
                let d = self.piece_kappa(index, piece.end, eta);
                diff.add(i0, &d, slope, 1.0);
                diff.add(i1, &d, slope, -1.0);
            }
        }
        if !time_varying {
            diff.prefix_into(&mut sums);
        }
        sums
    }
}

/// Raw (not divided by `n`) at-risk sums on a grid of ages.
#[derive(Debug, Clone)]
pub struct RiskSums {
    k: usize,
    order: Order,
    y0: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
    outer: Vec<f64>,
}

impl RiskSums {
    fn zeros(k: usize, m: usize, order: Order) -> Self {
        let kk = k * k;
        Self {
            k,
            order,
            y0: vec![0.0; m],
            y1: if order >= Order::Gradient { vec![0.0; m * k] } else { Vec::new() },
            y2: if order >= Order::Hessian { vec![0.0; m * kk] } else { Vec::new() },
            outer: if order >= Order::Hessian { vec![0.0; m * kk] } else { Vec::new() },
        }
    }

    fn add(&mut self, i: usize, d: &Derivs, slope: f64, sign: f64) {
        let k = self.k;
        let w = sign / slope;
        self.y0[i] += w * d.value;
        if self.order >= Order::Gradient {
            for a in 0..k {
                self.y1[i * k + a] += w * d.grad[a];
            }
        }
        if self.order >= Order::Hessian {
            let inv = if d.value != 0.0 { 1.0 / d.value } else { 0.0 };
            for a in 0..k {
                for b in 0..k {
                    self.y2[(i * k + a) * k + b] += w * d.hess[(a, b)];
                    self.outer[(i * k + a) * k + b] += w * d.grad[a] * d.grad[b] * inv;
                }
            }
        }
    }

    fn prefix_into(&self, out: &mut RiskSums) {
        let k = self.k;
        let kk = k * k;
        let m = out.y0.len();
        let mut acc = RiskSums::zeros(k, 1, self.order);
        for i in 0..m {
            acc.y0[0] += self.y0[i];
            out.y0[i] = acc.y0[0];
            if self.order >= Order::Gradient {
                for a in 0..k {
                    acc.y1[a] += self.y1[i * k + a];
                    out.y1[i * k + a] = acc.y1[a];
                }
            }
            if self.order >= Order::Hessian {
                for c in 0..kk {
                    acc.y2[c] += self.y2[i * kk + c];
                    acc.outer[c] += self.outer[i * kk + c];
                    out.y2[i * kk + c] = acc.y2[c];
                    out.outer[i * kk + c] = acc.outer[c];
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }

    /// `sum_i Y_i` at age index `i`.
    pub fn y0(&self, i: usize) -> f64 {
        self.y0[i]
    }

    pub fn y1(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.y1[i * self.k..(i + 1) * self.k])
    }

    pub fn y2(&self, i: usize) -> DMatrix<f64> {
        let kk = self.k * self.k;
        DMatrix::from_row_slice(self.k, self.k, &self.y2[i * kk..(i + 1) * kk])
    }

    /// `sum phi (dk/k)(dk/k)^T`, the second moment under `Q_n` times `n S0`.
    pub fn outer(&self, i: usize) -> DMatrix<f64> {
        let kk = self.k * self.k;
        DMatrix::from_row_slice(self.k, self.k, &self.outer[i * kk..(i + 1) * kk])
    }

    pub(crate) fn y1_slice(&self, i: usize) -> &[f64] {
        &self.y1[i * self.k..(i + 1) * self.k]
    }

    pub(crate) fn y2_slice(&self, i: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.y2[i * kk..(i + 1) * kk]
    }
}

/// `S0(s*, t; eta)` with its gradient and Hessian in eta, by direct
/// summation over every risk piece.
pub fn s0(cohort: &Cohort, modulation: &Modulation, t: f64, eta: &Eta) -> Result<Derivs> {
    modulation.check_eta(eta, cohort.covariate_dim())?;
    let k = eta.dim();
    let mut out = Derivs::constant(0.0, k);
    for unit in cohort.units() {
        for piece in unit.pieces() {
            if !piece.covers_age(t) {
                continue;
            }
            let d = unit.kappa_derivs_on_piece(&piece, piece.calendar_at(t), eta, modulation);
            let w = 1.0 / piece.segment.slope;
            out.value += w * d.value;
            out.grad += d.grad * w;
            out.hess += d.hess * w;
        }
    }
    let n = cohort.len() as f64;
    out.value /= n;
    out.grad /= n;
    out.hess /= n;
    Ok(out)
}

/// One atom of the `Q_n(s*, t, eta)` measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnAtom {
    pub unit: usize,
    /// Zero-based segment index.
    pub segment: usize,
    pub weight: f64,
}

/// The discrete probability `Q_n(.; s*, t, eta)` over unit-segment pairs
/// whose age range covers `t`. Empty when `S0 = 0`.
pub fn qn_measure(cohort: &Cohort, modulation: &Modulation, t: f64, eta: &Eta) -> Result<Vec<QnAtom>> {
    modulation.check_eta(eta, cohort.covariate_dim())?;
    let mut atoms = Vec::new();
    let mut total = 0.0;
    for (i, unit) in cohort.units().iter().enumerate() {
        for piece in unit.pieces() {
            if piece.covers_age(t) {
                let phi = unit.kappa_on_piece(&piece, piece.calendar_at(t), eta, modulation)
                    / piece.segment.slope;
                total += phi;
                atoms.push(QnAtom {
                    unit: i,
                    segment: piece.segment.index,
                    weight: phi,
                });
            }
        }
    }
    if total <= 0.0 {
        return Ok(Vec::new());
    }
    for a in &mut atoms {
        a.weight /= total;
    }
    Ok(atoms)
}

/// `Q_n` moments of `dk/k` and `d2k/k` at age `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct QnMoments {
    pub q1: DVector<f64>,
    pub q2: DMatrix<f64>,
    /// `Q_n[(dk/k)^2] - (Q_n[dk/k])^2`.
    pub v: DMatrix<f64>,
}

/// Moments of `dk/k(E^{-1}(t); eta2)` and `d2k/k(E^{-1}(t); eta2)` under
/// `Q_n(s*, t, eta1)`.
pub fn qn_moments(
    cohort: &Cohort,
    modulation: &Modulation,
    t: f64,
    eta1: &Eta,
    eta2: &Eta,
) -> Result<QnMoments> {
    modulation.check_eta(eta1, cohort.covariate_dim())?;
    modulation.check_eta(eta2, cohort.covariate_dim())?;
    let k = eta2.dim();
    let mut total = 0.0;
    let mut q1 = DVector::zeros(k);
    let mut q2 = DMatrix::zeros(k, k);
    let mut second = DMatrix::zeros(k, k);
    for unit in cohort.units() {
        for piece in unit.pieces() {
            if !piece.covers_age(t) {
                continue;
            }
            let v = piece.calendar_at(t);
            let phi = unit.kappa_on_piece(&piece, v, eta1, modulation) / piece.segment.slope;
            let d = unit.kappa_derivs_on_piece(&piece, v, eta2, modulation);
            let ratio = &d.grad / d.value;
            total += phi;
            q1 += &ratio * phi;
            q2 += &d.hess * (phi / d.value);
            second += &ratio * ratio.transpose() * phi;
        }
    }
    if total <= 0.0 {
        return Err(Error::EmptyRiskSet { age: t });
    }
    q1 /= total;
    q2 /= total;
    second /= total;
    let v = second - &q1 * q1.transpose();
    Ok(QnMoments { q1, q2, v })
}
