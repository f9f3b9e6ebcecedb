//! Identity suite: compensator representation, change of variable between
//! calendar and age time, `Q_n` moment ratios, and derivative checks, each
//! computed along two independent routes on random fixtures.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Check, McReport};
use crate::error::Result;
use crate::estimate::{qn_moments, s0, FitData};
use crate::model::{
    AgeParams, AgePolicy, Baseline, Cohort, CovariatePath, Eta, HazardFamily, Link, ModelParams,
    Modulation, Rho, UnitPath,
};
use crate::quad;
use crate::simulate::mix_seed;
use crate::step::StepFunction;

const REPRESENTATION_TOL: f64 = 1e-8;
const CHANGE_OF_VARIABLE_TOL: f64 = 1e-10;
const LEMMA_TOL: f64 = 1e-10;
const SCORE_TOL: f64 = 1e-6;
const HESSIAN_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;

/// A random cohort with known parameters and a test function `H`.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub cohort: Cohort,
    pub params: ModelParams,
    /// Bounded step function of age used in the change-of-variable check.
    pub h: StepFunction,
}

fn random_unit(rng: &mut ChaCha8Rng, s_star: f64, p: usize, with_events: bool) -> Result<UnitPath> {
    let tau = rng.random_range(0.5 * s_star..1.5 * s_star);
    let end = tau.min(s_star);
    let m = if with_events { rng.random_range(0..5) } else { 0 };
    let mut events: Vec<f64> = (0..m).map(|_| rng.random_range(0.02 * end..0.98 * end)).collect();
    events.sort_by(f64::total_cmp);
    events.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let age = match rng.random_range(0..3) {
        0 => AgePolicy::PerfectRepair,
        1 => AgePolicy::MinimalRepair,
        _ => {
            // start age at most the segment start and slope at most 1 keep age <= calendar time
            let starts = std::iter::once(0.0).chain(events.iter().copied());
            AgePolicy::PiecewiseLinear(
                starts
                    .map(|s| AgeParams {
                        start_age: s * rng.random_range(0.0..1.0),
                        slope: rng.random_range(0.2..1.0),
                    })
                    .collect(),
            )
        }
    };
    let covariates = if p == 0 {
        CovariatePath::empty()
    } else {
        let steps = rng.random_range(0..3);
        let mut times = vec![0.0];
        let mut cuts: Vec<f64> = (0..steps).map(|_| rng.random_range(0.05 * end..0.95 * end)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        times.extend(cuts);
        let values = times
            .iter()
            .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        CovariatePath::new(times, values)?
    };
    UnitPath::new(events, tau, s_star, age, covariates)
}

/// Fixture `index` drawn from `seed`. Fixture 0 has kappa = 1 and fixture 1
/// has no events.
pub fn random_fixture(seed: u64, index: usize) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x1D, index as u64));
    let s_star = rng.random_range(1.0..3.0);
    let shape = [1.0, 2.0, 3.0][rng.random_range(0..3)];
    let hazard = HazardFamily::Weibull {
        scale: rng.random_range(0.5..2.0),
        shape,
    };
    let (modulation, p) = if index == 0 {
        (Modulation::unit(), 0)
    } else {
        let rho = match rng.random_range(0..3) {
            0 => Rho::Identity,
            1 => Rho::PowerCount,
            _ => Rho::ExpCount,
        };
        let p = rng.random_range(0..3);
        let link = match (p, rng.random_range(0..2)) {
            (0, _) => Link::Identity,
            (_, 0) => Link::Exp,
            _ => Link::Softplus,
        };
        (Modulation::new(rho, link), p)
    };
    let alpha = match modulation.rho {
        Rho::PowerCount => vec![rng.random_range(0.5..1.5)],
        Rho::ExpCount => vec![rng.random_range(-0.5..0.5)],
        _ => vec![],
    };
    let beta = (0..modulation.link.beta_dim(p)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eta = Eta::new(alpha, beta);
    let n = rng.random_range(1..6);
    let units = (0..n)
        .map(|_| random_unit(&mut rng, s_star, p, index != 1))
        .collect::<Result<Vec<_>>>()?;
    let cohort = Cohort::new(units, Some(s_star))?;
    let mut h_points: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(0.05..s_star), rng.random_range(-2.0..2.0)))
        .collect();
    h_points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let h = StepFunction::from_points(h_points, rng.random_range(-1.0..1.0))?;
    Ok(Fixture {
        cohort,
        params: ModelParams::new(Baseline::Hazard(hazard), modulation, eta),
        h,
    })
}

/// Calendar sub-intervals of `(0, s]` on which age, covariates and the
/// indicators of `age <= c` for each `c` in `cuts` are all smooth.
fn calendar_pieces(unit: &UnitPath, s: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for seg in unit.segments_until(s) {
        let mut points = vec![seg.start, seg.end];
        points.extend(unit.covariates().changes_within(seg.start, seg.end));
        for &c in cuts {
            let v = seg.start + (c - seg.start_age) / seg.slope;
            if v > seg.start && v < seg.end {
                points.push(v);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        out.extend(points.windows(2).map(|w| (w[0], w[1])));
    }
    out
}

/// `int_0^s I{E(v) <= t} g(E(v)) dA_dagger(v)` by quadrature in calendar time.
fn calendar_integral(
    unit: &UnitPath,
    s: f64,
    t: f64,
    params: &ModelParams,
    g: &dyn Fn(f64) -> f64,
    cuts: &[f64],
) -> Result<f64> {
    let mut all_cuts = cuts.to_vec();
    all_cuts.push(t);
    let mut total = 0.0;
    for (a, b) in calendar_pieces(unit, s, &all_cuts) {
        let mid = 0.5 * (a + b);
        if unit.effective_age(mid)? > t {
            continue;
        }
        let mut err = None;
        total += quad::integrate(a, b, |v| match (unit.effective_age(v), unit.intensity(v, params)) {
            (Ok(age), Ok(rate)) => g(age) * rate,
            (Err(e), _) | (_, Err(e)) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(total)
}

/// `int_0^t g(w) Y(s, w) lambda0(w) dw` by quadrature in age time.
fn age_integral(
    unit: &UnitPath,
    s: f64,
    t: f64,
    params: &ModelParams,
    hazard: &HazardFamily,
    g: &dyn Fn(f64) -> f64,
    cuts: &[f64],
) -> Result<f64> {
    let mut points = vec![0.0, t];
    for piece in unit.pieces_until(s) {
        points.push(piece.age_lo());
        points.push(piece.age_hi());
    }
    points.extend(cuts.iter().copied());
    points.retain(|&w| w >= 0.0 && w <= t);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut total = 0.0;
    for w in points.windows(2) {
        let mut err = None;
        total += quad::integrate(w[0], w[1], |x| {
            match unit.at_risk(s, x, &params.eta, &params.modulation) {
                Ok(y) => g(x) * y * hazard.hazard(x),
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(total)
}

#[derive(Debug, Default, Clone, Copy)]
struct FixtureErrors {
    representation: f64,
    change_of_variable: f64,
    lemma: f64,
    score: f64,
    hessian: f64,
}

impl FixtureErrors {
    fn max(self, o: Self) -> Self {
        Self {
            representation: self.representation.max(o.representation),
            change_of_variable: self.change_of_variable.max(o.change_of_variable),
            lemma: self.lemma.max(o.lemma),
            score: self.score.max(o.score),
            hessian: self.hessian.max(o.hessian),
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn vector_relative(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (a - b).amax() / a.amax().max(b.amax()).max(1.0)
}

fn check_fixture(fx: &Fixture, seed: u64, index: usize) -> Result<FixtureErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x2E, index as u64));
    let hazard = match fx.params.baseline {
        Baseline::Hazard(h) => h,
        Baseline::Cumulative(_) => unreachable!("fixtures use hazard baselines"),
    };
    let s_star = fx.cohort.s_star();
    let mut errors = FixtureErrors::default();
    let h = &fx.h;
    let h_cuts = h.locations().to_vec();
    let one = |_: f64| 1.0;
    let h_fn = |w: f64| h.eval(w);

    for unit in fx.cohort.units() {
        for _ in 0..4 {
            let s = rng.random_range(0.0..s_star);
            let t = rng.random_range(0.0..s_star);

            let direct = calendar_integral(unit, s, t, &fx.params, &one, &[])?;
            let compensator = unit.compensator(s, t, &fx.params)?;
            errors.representation = errors.representation.max(relative(direct, compensator));

            let counts = unit.counting_n(s)?;
            let calendar_jumps: f64 = unit
                .event_times()
                .iter()
                .filter(|&&v| v <= s)
                .map(|&v| unit.effective_age(v))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|&age| age <= t)
                .map(h_fn)
                .sum();
            let lhs = calendar_jumps - calendar_integral(unit, s, t, &fx.params, &h_fn, &h_cuts)?;
            let age_jumps = counts.integrate(0.0, t, h_fn);
            let rhs = age_jumps - age_integral(unit, s, t, &fx.params, &hazard, &h_fn, &h_cuts)?;
            errors.change_of_variable = errors.change_of_variable.max((lhs - rhs).abs());
        }
    }

    let m = &fx.params.modulation;
    let eta = &fx.params.eta;
    let max_age = fx
        .cohort
        .units()
        .iter()
        .flat_map(|u| u.pieces())
        .map(|p| p.age_hi())
        .fold(0.0f64, f64::max);
    for _ in 0..8 {
        let t = rng.random_range(0.0..max_age.max(1e-3));
        let s = s0(&fx.cohort, m, t, eta)?;
        if s.value <= 0.0 {
            continue;
        }
        let q = qn_moments(&fx.cohort, m, t, eta, eta)?;
        let d1 = (&s.grad / s.value - &q.q1).amax();
        let d2 = (&s.hess / s.value - &q.q2).amax();
        if eta.dim() > 0 {
            errors.lemma = errors.lemma.max(d1).max(d2);
        }
    }

    let data = FitData::new(&fx.cohort, m, Some(s_star))?;
    let k = eta.dim();
    if k > 0 && data.event_count() > 0 {
        let q = eta.alpha.len();
        let n = fx.cohort.len() as f64;
        let x = eta.to_vector();
        let at = |v: &DVector<f64>| Eta::from_slice(q, v.as_slice());
        let fd = |f: &dyn Fn(&DVector<f64>) -> Result<f64>| -> Result<DVector<f64>> {
            let mut g = DVector::zeros(k);
            for i in 0..k {
                let (mut up, mut down) = (x.clone(), x.clone());
                up[i] += FD_STEP;
                down[i] -= FD_STEP;
                g[i] = (f(&up)? - f(&down)?) / (2.0 * FD_STEP);
            }
            Ok(g)
        };
        let score = data.score(eta)?;
        let numeric = fd(&|v| Ok(data.log_partial_likelihood(&at(v))? / n))?;
        errors.score = vector_relative(&score, &numeric);
        let hess = data.hessian(eta)?;
        for j in 0..k {
            let numeric = fd(&|v| Ok(data.score(&at(v))?[j]))?;
            let row = hess.row(j).transpose();
            errors.hessian = errors.hessian.max(vector_relative(&row, &numeric));
        }
    }
    Ok(errors)
}

/// Runs every identity on `fixtures` random fixtures (at least 100 are
/// needed for the documented guarantee).
pub fn identity_suite(seed: u64, fixtures: usize) -> Result<McReport> {
    let results = (0..fixtures)
        .into_par_iter()
        .map(|i| check_fixture(&random_fixture(seed, i)?, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let worst = results.into_iter().fold(FixtureErrors::default(), FixtureErrors::max);
    let mut report = McReport::new("identities", seed, vec![], fixtures);
    report.metric("fixtures", fixtures as f64);
    report.check(Check::below(
        "compensator representation (max rel error)",
        worst.representation,
        REPRESENTATION_TOL,
    ));
    report.check(Check::below(
        "change of variable (max abs error)",
        worst.change_of_variable,
        CHANGE_OF_VARIABLE_TOL,
    ));
    report.check(Check::below("Q_n moment ratios (max abs error)", worst.lemma, LEMMA_TOL));
    report.check(Check::below("score vs finite differences (max rel error)", worst.score, SCORE_TOL));
    report.check(Check::below(
        "hessian vs finite differences (max rel error)",
        worst.hessian,
        HESSIAN_TOL,
    ));
    Ok(report)
}
