use nalgebra::DVector;

use super::*;
use crate::error::Error;
use crate::model::{AgeParams, AgePolicy, CovariatePath, Link, Rho, UnitPath};

fn canonical_unit() -> UnitPath {
    UnitPath::new(vec![0.5, 1.2], 2.0, 2.0, AgePolicy::PerfectRepair, CovariatePath::empty()).unwrap()
}

fn canonical() -> Cohort {
    Cohort::new(vec![canonical_unit()], None).unwrap()
}

/// Three units with covariate steps, piecewise ages and a power-count rho.
fn mixed_cohort() -> Cohort {
    let u1 = UnitPath::new(
        vec![0.4, 1.1, 1.5],
        2.0,
        2.0,
        AgePolicy::PiecewiseLinear(vec![
            AgeParams { start_age: 0.0, slope: 1.0 },
            AgeParams { start_age: 0.1, slope: 0.5 },
            AgeParams { start_age: 0.05, slope: 1.5 },
            AgeParams { start_age: 0.2, slope: 1.0 },
        ]),
        CovariatePath::new(vec![0.0, 0.8], vec![vec![0.3, -1.0], vec![-0.4, 0.5]]).unwrap(),
    )
    .unwrap();
    let u2 = UnitPath::new(
        vec![0.3, 0.9],
        1.6,
        2.0,
        AgePolicy::PerfectRepair,
        CovariatePath::constant(vec![1.0, 0.2]),
    )
    .unwrap();
    let u3 = UnitPath::new(
        vec![0.7],
        2.0,
        2.0,
        AgePolicy::MinimalRepair,
        CovariatePath::new(vec![0.0, 0.5, 1.3], vec![vec![-0.6, 0.1], vec![0.2, 0.9], vec![0.0, -0.3]])
            .unwrap(),
    )
    .unwrap();
    Cohort::new(vec![u1, u2, u3], None).unwrap()
}

fn mixed_modulation() -> Modulation {
    Modulation::new(Rho::PowerCount, Link::Exp)
}

fn mixed_eta() -> Eta {
    Eta::new(vec![0.8], vec![0.4, -0.3])
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn s0_canonical_values() {
    let cohort = canonical();
    let m = Modulation::unit();
    assert_eq!(s0(&cohort, &m, 0.6, &Eta::default()).unwrap().value, 2.0);
    assert_eq!(s0(&cohort, &m, 5.0, &Eta::default()).unwrap().value, 0.0);
    let twice = Cohort::new(vec![canonical_unit(), canonical_unit()], None).unwrap();
    assert_eq!(s0(&twice, &m, 0.6, &Eta::default()).unwrap().value, 2.0);
}

#[test]
fn risk_sums_agree_with_direct_s0() {
    let cohort = mixed_cohort();
    let m = mixed_modulation();
    let eta = mixed_eta();
    let data = FitData::new(&cohort, &m, Some(2.0)).unwrap();
    let ages = [0.05, 0.1, 0.3, 0.45, 0.7, 1.0, 1.9];
    let sums = data.risk_sums(&eta, &ages, Order::Hessian);
    for (i, &t) in ages.iter().enumerate() {
        let direct = s0(&cohort, &m, t, &eta).unwrap();
        let n = cohort.len() as f64;
        assert!(close(sums.y0(i) / n, direct.value, 1e-12));
        assert!((sums.y1(i) / n - &direct.grad).amax() < 1e-12);
        assert!((sums.y2(i) / n - &direct.hess).amax() < 1e-12);
    }
}

#[test]
fn qn_weights_are_a_probability() {
    let cohort = mixed_cohort();
    let m = mixed_modulation();
    for t in [0.05, 0.3, 0.6, 1.0] {
        let atoms = qn_measure(&cohort, &m, t, &mixed_eta()).unwrap();
        assert!(atoms.iter().all(|a| a.weight >= 0.0));
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert!(qn_measure(&cohort, &m, 50.0, &mixed_eta()).unwrap().is_empty());
}

#[test]
fn qn_first_and_second_moments_match_s0_ratios() {
    let cohort = mixed_cohort();
    let m = mixed_modulation();
    let eta = mixed_eta();
    for t in [0.05, 0.2, 0.35, 0.6, 0.9] {
        let s = s0(&cohort, &m, t, &eta).unwrap();
        let q = qn_moments(&cohort, &m, t, &eta, &eta).unwrap();
        assert!((&s.grad / s.value - &q.q1).amax() < 1e-10);
        assert!((&s.hess / s.value - &q.q2).amax() < 1e-10);
    }
}

#[test]
fn qn_moments_degenerate_cases() {
    // exp link with every covariate zero: kappa does not move with beta
    let unit = UnitPath::new(vec![0.5], 1.0, 1.0, AgePolicy::PerfectRepair, CovariatePath::constant(vec![0.0]))
        .unwrap();
    let cohort = Cohort::new(vec![unit.clone(), unit], None).unwrap();
    let m = Modulation::new(Rho::Identity, Link::Exp);
    let eta = Eta::new(vec![], vec![0.7]);
    let q = qn_moments(&cohort, &m, 0.3, &eta, &eta).unwrap();
    assert_eq!(q.q1[0], 0.0);
    assert_eq!(q.v[(0, 0)], 0.0);

    let shared = |e: Vec<f64>| {
        UnitPath::new(e, 2.0, 2.0, AgePolicy::PerfectRepair, CovariatePath::constant(vec![0.5])).unwrap()
    };
    let cohort = Cohort::new(vec![shared(vec![0.4]), shared(vec![1.0, 1.5])], None).unwrap();
    let q = qn_moments(&cohort, &m, 0.3, &eta, &eta).unwrap();
    assert!(q.v[(0, 0)].abs() < 1e-15);
    assert!(matches!(
        qn_moments(&cohort, &m, 9.0, &eta, &eta),
        Err(Error::EmptyRiskSet { .. })
    ));
}

#[test]
fn canonical_likelihood_baseline_and_survivor() {
    let cohort = canonical();
    let m = Modulation::unit();
    let data = FitData::new(&cohort, &m, None).unwrap();
    assert_eq!(data.t_star(), 0.7);
    let ll = data.log_partial_likelihood(&Eta::default()).unwrap();
    assert!((ll - (-(3f64.ln()) - 2f64.ln())).abs() < 1e-12);
    let lambda = data.abn_baseline(&Eta::default()).unwrap();
    assert!((lambda.eval(0.7) - 5.0 / 6.0).abs() < 1e-12);
    let surv = data.ple_survivor(&Eta::default()).unwrap();
    assert!((surv.curve.eval(0.7) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(surv.curve.eval(0.2), 1.0);
    assert!(!surv.clipped);
}

#[test]
fn single_event_likelihood_and_survivor_boundary() {
    let unit = UnitPath::new(vec![0.5], 0.5 + 1e-9, 1.0, AgePolicy::PerfectRepair, CovariatePath::empty());
    // final gap shorter than the event age: only the first segment covers it
    let unit = unit.unwrap();
    let cohort = Cohort::new(vec![unit], None).unwrap();
    let m = Modulation::unit();
    let data = FitData::new(&cohort, &m, None).unwrap();
    assert_eq!(data.log_partial_likelihood(&Eta::default()).unwrap(), 0.0);
    let surv = data.ple_survivor(&Eta::default()).unwrap();
    assert_eq!(surv.curve.eval(0.5), 0.0);
}

#[test]
fn no_events_gives_zero_baseline() {
    let unit = UnitPath::new(vec![], 1.0, 1.0, AgePolicy::PerfectRepair, CovariatePath::empty()).unwrap();
    let cohort = Cohort::new(vec![unit], None).unwrap();
    let m = Modulation::unit();
    let data = FitData::new(&cohort, &m, None).unwrap();
    let lambda = data.abn_baseline(&Eta::default()).unwrap();
    assert!(lambda.is_empty());
    assert_eq!(lambda.eval(10.0), 0.0);
}

#[test]
fn events_beyond_t_star_are_dropped() {
    let cohort = canonical();
    let m = Modulation::unit();
    let data = FitData::new(&cohort, &m, Some(0.6)).unwrap();
    assert_eq!(data.event_count(), 1);
    let ll = data.log_partial_likelihood(&Eta::default()).unwrap();
    assert!((ll + 3f64.ln()).abs() < 1e-12);
}

fn finite_difference_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        }),
    )
}

#[test]
fn score_and_hessian_match_finite_differences() {
    let cohort = mixed_cohort();
    let m = mixed_modulation();
    let data = FitData::new(&cohort, &m, Some(2.0)).unwrap();
    let eta = mixed_eta();
    let x = eta.to_vector();
    let n = cohort.len() as f64;
    let score = data.score(&eta).unwrap();
    let fd = finite_difference_gradient(
        |v| data.log_partial_likelihood(&Eta::from_slice(1, v.as_slice())).unwrap() / n,
        &x,
        1e-5,
    );
    for i in 0..x.len() {
        assert!(close(score[i], fd[i], 1e-6), "score {i}: {} vs {}", score[i], fd[i]);
    }
    let hess = data.hessian(&eta).unwrap();
    for j in 0..x.len() {
        let fd = finite_difference_gradient(|v| data.score(&Eta::from_slice(1, v.as_slice())).unwrap()[j], &x, 1e-5);
        for i in 0..x.len() {
            assert!(close(hess[(j, i)], fd[i], 1e-5), "hessian {j},{i}");
        }
    }
}

#[test]
fn flat_kappa_leaves_init_unchanged() {
    let unit = |e: Vec<f64>| {
        UnitPath::new(e, 2.0, 2.0, AgePolicy::PerfectRepair, CovariatePath::constant(vec![0.0])).unwrap()
    };
    let cohort = Cohort::new(vec![unit(vec![0.3, 1.0]), unit(vec![0.6])], None).unwrap();
    let m = Modulation::new(Rho::Identity, Link::Exp);
    let data = FitData::new(&cohort, &m, None).unwrap();
    let init = Eta::new(vec![], vec![0.25]);
    assert_eq!(data.score(&init).unwrap()[0], 0.0);
    assert_eq!(data.hessian(&init).unwrap()[(0, 0)], 0.0);
    assert_eq!(data.flat_coordinates(&init), vec![0]);
    let fit = fit_eta(&data, &init, &NewtonOptions::default()).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.iterations, 0);
    assert_eq!(fit.eta, init);
    let lambda = data.abn_baseline(&init).unwrap();
    let inf = Inference::new(&data, &init, &lambda).unwrap();
    assert_eq!(inf.sigma_hat()[(0, 0)], 0.0);
    assert_eq!(inf.b_hat(1.0)[0], 0.0);
}

#[test]
fn newton_reaches_a_stationary_point() {
    let cohort = mixed_cohort();
    let m = Modulation::new(Rho::Identity, Link::Exp);
    let data = FitData::new(&cohort, &m, None).unwrap();
    let fit = fit_eta(&data, &Eta::zeros(0, 2), &NewtonOptions::default()).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!(fit.final_score_norm < 1e-8);
    let h = data.hessian(&fit.eta).unwrap();
    assert!((-h).symmetric_eigenvalues().min() >= -1e-12);
    assert!(fit.path.windows(2).all(|w| {
        data.log_partial_likelihood(&w[1]).unwrap() >= data.log_partial_likelihood(&w[0]).unwrap() - 1e-9
    }));
}

#[test]
fn full_fit_pipeline() {
    let cohort = canonical();
    let result = fit(&cohort, &Modulation::unit(), &FitOptions::default()).unwrap();
    assert!(result.converged);
    assert_eq!(result.sigma_hat.nrows(), 0);
    assert!((result.lambda0_hat.eval(0.7) - 5.0 / 6.0).abs() < 1e-12);
    assert!((result.survivor.curve.eval(0.7) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(result.events_used, 2);
}

#[test]
fn kappa_scaling_rescales_jumps() {
    // adding a constant to a covariate with exp link scales every kappa by e^{beta c}
    let cohort = mixed_cohort();
    let m = Modulation::new(Rho::Identity, Link::Exp);
    let eta = Eta::new(vec![], vec![0.4, -0.3]);
    let shifted_units: Vec<UnitPath> = cohort
        .units()
        .iter()
        .map(|u| {
            let cov = u.covariates();
            let values = cov.values().iter().map(|x| vec![x[0] + 1.0, x[1]]).collect();
            UnitPath::new(
                u.event_times().to_vec(),
                u.tau(),
                u.s_star(),
                u.age_policy().clone(),
                CovariatePath::new(cov.times().to_vec(), values).unwrap(),
            )
            .unwrap()
        })
        .collect();
    let shifted = Cohort::new(shifted_units, None).unwrap();
    let a = FitData::new(&cohort, &m, None).unwrap();
    let b = FitData::new(&shifted, &m, None).unwrap();
    let c = 0.4f64.exp();
    let la = a.abn_baseline(&eta).unwrap();
    let lb = b.abn_baseline(&eta).unwrap();
    for (ja, jb) in la.jumps().iter().zip(lb.jumps()) {
        assert!(close(*jb * c, *ja, 1e-12));
    }
    let fa = fit_eta(&a, &Eta::zeros(0, 2), &NewtonOptions::default()).unwrap();
    let fb = fit_eta(&b, &Eta::zeros(0, 2), &NewtonOptions::default()).unwrap();
    assert!((fa.eta.to_vector() - fb.eta.to_vector()).amax() < 1e-7);
}
