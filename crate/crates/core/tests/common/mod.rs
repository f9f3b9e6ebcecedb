//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use dynrec::model::{Cohort, CovariatePath};

/// Classical Nelson-Aalen on the pooled gap sample of a perfect-repair
/// cohort: every completed gap is an event, every final gap is censored.
/// Returns `(distinct event gap, increment)` pairs.
pub fn pooled_nelson_aalen(cohort: &Cohort) -> Vec<(f64, f64)> {
    let mut gaps: Vec<(f64, bool)> = Vec::new();
    for unit in cohort.units() {
        let mut last = 0.0;
        for &s in unit.event_times() {
            gaps.push((s - last, true));
            last = s;
        }
        let end = unit.tau().min(unit.s_star());
        gaps.push((end - last, false));
    }
    let mut times: Vec<f64> = gaps.iter().filter(|g| g.1).map(|g| g.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|w| {
            let deaths = gaps.iter().filter(|g| g.1 && g.0 == w).count() as f64;
            let at_risk = gaps.iter().filter(|g| g.0 >= w).count() as f64;
            (w, deaths / at_risk)
        })
        .collect()
}

fn covariate_at(path: &CovariatePath, v: f64) -> f64 {
    // left-continuous: the last step that started strictly before v
    let mut value = path.values()[0][0];
    for (t, x) in path.times().iter().zip(path.values()) {
        if *t < v {
            value = x[0];
        }
    }
    value
}

/// Andersen-Gill log partial likelihood in calendar time for a scalar
/// covariate: every unit is at risk until the end of its observation.
pub fn cox_log_partial_likelihood(cohort: &Cohort, beta: f64) -> f64 {
    let mut ll = 0.0;
    for unit in cohort.units() {
        for &v in unit.event_times() {
            let own = beta * covariate_at(unit.covariates(), v);
            let denom: f64 = cohort
                .units()
                .iter()
                .filter(|u| u.tau().min(u.s_star()) >= v)
                .map(|u| (beta * covariate_at(u.covariates(), v)).exp())
                .sum();
            ll += own - denom.ln();
        }
    }
    ll
}

/// Golden-section maximisation of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}
