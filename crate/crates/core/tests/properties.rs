mod common;

use dynrec::cli::CohortFile;
use dynrec::estimate::{product_limit, FitData};
use dynrec::inference::{z_quantile, Inference};
use dynrec::model::{AgePolicy, Cohort, CovariatePath, Eta, Link, Modulation, Rho, UnitPath};
use proptest::prelude::*;

const S_STAR: f64 = 4.0;

/// Gaps between events, a trailing censored gap and a scalar covariate.
type UnitSpec = (Vec<f64>, f64, f64);

fn unit_spec() -> impl Strategy<Value = UnitSpec> {
    (prop::collection::vec(0.05f64..0.8, 0..5), 0.01f64..0.7, -1.0f64..1.0)
}

fn build(specs: &[UnitSpec], age: AgePolicy, with_x: bool) -> Cohort {
    let units = specs
        .iter()
        .map(|(gaps, tail, x)| {
            let mut s = 0.0;
            let events: Vec<f64> = gaps
                .iter()
                .map(|g| {
                    s += g;
                    s
                })
                .collect();
            let cov = if with_x {
                CovariatePath::constant(vec![*x])
            } else {
                CovariatePath::empty()
            };
            UnitPath::new(events, s + tail, S_STAR, age.clone(), cov).unwrap()
        })
        .collect();
    Cohort::new(units, None).unwrap()
}

/// Breslow estimator on the pooled gap sample with weights `exp(beta x)`.
fn breslow_gaps(cohort: &Cohort, beta: f64) -> Vec<(f64, f64)> {
    let mut gaps: Vec<(f64, bool, f64)> = Vec::new();
    for unit in cohort.units() {
        let w = (beta * unit.covariates().values()[0][0]).exp();
        let mut last = 0.0;
        for &s in unit.event_times() {
            gaps.push((s - last, true, w));
            last = s;
        }
        gaps.push((unit.tau() - last, false, w));
    }
    let mut times: Vec<f64> = gaps.iter().filter(|g| g.1).map(|g| g.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| {
            let d = gaps.iter().filter(|g| g.1 && g.0 == t).count() as f64;
            let risk: f64 = gaps.iter().filter(|g| g.0 >= t).map(|g| g.2).sum();
            (t, d / risk)
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unmodulated_baseline_is_pooled_nelson_aalen(specs in prop::collection::vec(unit_spec(), 1..8)) {
        let cohort = build(&specs, AgePolicy::PerfectRepair, false);
        let m = Modulation::unit();
        let data = FitData::new(&cohort, &m, Some(S_STAR)).unwrap();
        let abn = data.abn_baseline(&Eta::default()).unwrap();
        let oracle = common::pooled_nelson_aalen(&cohort);
        prop_assert_eq!(abn.locations().len(), oracle.len());
        for ((w, d), (ow, od)) in abn.locations().iter().zip(abn.jumps()).zip(&oracle) {
            prop_assert_eq!(w, ow);
            prop_assert!(close(*d, *od, 1e-13), "{} vs {}", d, od);
        }
    }

    #[test]
    fn weighted_baseline_is_breslow_in_gap_time(
        specs in prop::collection::vec(unit_spec(), 1..8),
        beta in -2.0f64..2.0,
    ) {
        let cohort = build(&specs, AgePolicy::PerfectRepair, true);
        let m = Modulation::new(Rho::Identity, Link::Exp);
        let data = FitData::new(&cohort, &m, Some(S_STAR)).unwrap();
        let abn = data.abn_baseline(&Eta::new(vec![], vec![beta])).unwrap();
        let oracle = breslow_gaps(&cohort, beta);
        prop_assert_eq!(abn.locations().len(), oracle.len());
        for ((w, d), (ow, od)) in abn.locations().iter().zip(abn.jumps()).zip(&oracle) {
            prop_assert_eq!(w, ow);
            prop_assert!(close(*d, *od, 1e-12), "{} vs {}", d, od);
        }
    }

    #[test]
    fn survivor_is_a_monotone_probability(
        specs in prop::collection::vec(unit_spec(), 1..8),
        beta in -2.0f64..2.0,
    ) {
        let cohort = build(&specs, AgePolicy::PerfectRepair, true);
        let m = Modulation::new(Rho::Identity, Link::Exp);
        let data = FitData::new(&cohort, &m, Some(S_STAR)).unwrap();
        let abn = data.abn_baseline(&Eta::new(vec![], vec![beta])).unwrap();
        prop_assert!(abn.is_nondecreasing());
        let surv = product_limit(&abn);
        let values = surv.curve.cumulative_values();
        let mut previous = 1.0;
        for v in values {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v <= previous);
            previous = v;
        }
    }

    #[test]
    fn unmodulated_band_uses_nelson_aalen_variance(
        specs in prop::collection::vec(unit_spec(), 1..8),
        t in 0.0f64..3.0,
    ) {
        let cohort = build(&specs, AgePolicy::PerfectRepair, false);
        let m = Modulation::unit();
        let data = FitData::new(&cohort, &m, Some(S_STAR)).unwrap();
        let abn = data.abn_baseline(&Eta::default()).unwrap();
        let inference = Inference::new(&data, &Eta::default(), &abn).unwrap();
        let band = inference.lambda_band(&[t], 0.9).unwrap()[0];
        let n = cohort.len() as f64;
        // sum of d / Y^2 over event gaps up to t, with Y the number of gaps at least that long
        let variance: f64 = gap_counts(&cohort)
            .into_iter()
            .filter(|g| g.0 <= t)
            .map(|(_, d, y)| d / (y * y))
            .sum();
        let centre = abn.eval(t);
        let half = z_quantile(0.9).unwrap() * variance.sqrt();
        prop_assert!(band.lower >= 0.0);
        prop_assert!(band.lower <= centre && centre <= band.upper);
        prop_assert!(close(band.upper - centre, half, 1e-9), "{} vs {}", band.upper - centre, half);
        prop_assert!(close(inference.nelson_aalen_variance(t) / n, variance, 1e-9) || variance == 0.0);
    }

    #[test]
    fn cohort_files_round_trip(
        specs in prop::collection::vec(unit_spec(), 1..6),
        minimal in any::<bool>(),
        t_star in prop::option::of(0.1f64..3.0),
    ) {
        let age = if minimal { AgePolicy::MinimalRepair } else { AgePolicy::PerfectRepair };
        let base = build(&specs, age, true);
        let cohort = Cohort::new(base.units().to_vec(), t_star).unwrap();
        let file = CohortFile { cohort, modulation: Modulation::new(Rho::PowerCount, Link::Exp) };
        let text = file.to_text();
        let back = CohortFile::parse(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_text(), text);
    }
}

/// `(gap length, completed gaps of that length, gaps at least that long)`.
fn gap_counts(cohort: &Cohort) -> Vec<(f64, f64, f64)> {
    let mut gaps: Vec<(f64, bool)> = Vec::new();
    for unit in cohort.units() {
        let mut last = 0.0;
        for &s in unit.event_times() {
            gaps.push((s - last, true));
            last = s;
        }
        gaps.push((unit.tau() - last, false));
    }
    let mut times: Vec<f64> = gaps.iter().filter(|g| g.1).map(|g| g.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|w| {
            let d = gaps.iter().filter(|g| g.1 && g.0 == w).count() as f64;
            let y = gaps.iter().filter(|g| g.0 >= w).count() as f64;
            (w, d, y)
        })
        .collect()
}

proptest! {
    #[test]
    fn clipped_survivor_evaluates_to_zero(jumps in prop::collection::vec(0.0f64..1.6, 1..12), t in 0.0f64..14.0) {
        let locations: Vec<f64> = (1..=jumps.len()).map(|i| i as f64).collect();
        let cumulative = dynrec::StepFunction::new(locations, jumps.clone(), 0.0).unwrap();
        let surv = product_limit(&cumulative);
        // direct product, with the first negative factor sending it to 0 for good
        let mut expected = 1.0f64;
        for &dl in jumps.iter().take((t.floor() as usize).min(jumps.len())) {
            expected = if 1.0 - dl < 0.0 || expected == 0.0 { 0.0 } else { expected * (1.0 - dl) };
        }
        let value = surv.curve.eval(t);
        prop_assert!((0.0..=1.0).contains(&value));
        if expected == 0.0 {
            prop_assert_eq!(value, 0.0);
        } else {
            prop_assert!((value - expected).abs() < 1e-12);
        }
    }
}
