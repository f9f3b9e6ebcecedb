//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance -- --nocapture` or plain
//! `cargo test`.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dynrec::estimate::{fit, FitData, FitOptions};
use dynrec::mc::{
    consistency_study, coverage_study, identity_suite, martingale_study, normality_study, McReport,
    StudyConfig, Windows,
};
use dynrec::model::{AgePolicy, Cohort, CovariatePath, Eta, Link, Modulation, Rho, UnitPath};
use dynrec::simulate::{draw_cohort, preset, CovariateGen};

const SEED: u64 = 20240611;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn from_report(report: &McReport, elapsed: Duration, budget: Duration) -> Outcome {
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} = {:.4} not {}", c.name, c.value, c.window))
        .collect();
    let in_time = elapsed <= budget;
    let mut detail = format!("{} checks, {:.1}s (budget {}s)", report.checks.len(), elapsed.as_secs_f64(), budget.as_secs());
    if !failed.is_empty() {
        detail.push_str(&format!("; failed: {}", failed.join("; ")));
    }
    outcome(report.passed && in_time, detail)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

fn identities() -> Outcome {
    let (report, elapsed) = timed(|| identity_suite(SEED, 100).expect("identity suite runs"));
    from_report(&report, elapsed, Duration::from_secs(60))
}

fn closed_form() -> Outcome {
    let unit = UnitPath::new(vec![0.5, 1.2], 2.0, 2.0, AgePolicy::PerfectRepair, CovariatePath::empty()).unwrap();
    let cohort = Cohort::new(vec![unit], None).unwrap();
    let result = fit(&cohort, &Modulation::unit(), &FitOptions::default()).unwrap();
    let lambda = result.lambda0_hat.eval(0.7);
    let surv = result.survivor.curve.eval(0.7);
    let ok = (lambda - 5.0 / 6.0).abs() < 1e-12 && (surv - 1.0 / 3.0).abs() < 1e-12;
    outcome(ok, format!("Lambda(0.7) = {lambda:.17}, survivor(0.7) = {surv:.17}"))
}

fn nelson_aalen() -> Outcome {
    let mut mismatches = 0;
    let mut jumps = 0;
    for (i, n) in [5usize, 40, 300].into_iter().enumerate() {
        let mut config = preset("hpp", SEED + i as u64).unwrap();
        config.params.modulation = Modulation::unit();
        config.params.eta = Eta::default();
        config.covariates = CovariateGen::None;
        let cohort = draw_cohort(n, &config).unwrap();
        let m = Modulation::unit();
        let data = FitData::new(&cohort, &m, None).unwrap();
        let abn = data.abn_baseline(&Eta::default()).unwrap();
        let oracle = common::pooled_nelson_aalen(&cohort);
        jumps += oracle.len();
        let same = abn.locations().len() == oracle.len()
            && abn
                .locations()
                .iter()
                .zip(abn.jumps())
                .zip(&oracle)
                .all(|((w, d), (ow, od))| w == ow && d == od);
        if !same {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("3 cohorts, {jumps} jumps compared for exact equality, {mismatches} mismatched"))
}

fn cox() -> Outcome {
    let m = Modulation::new(Rho::Identity, Link::Exp);
    let mut worst = 0.0f64;
    for rep in 0..5u64 {
        let mut config = preset("cox-reduction", SEED + 100 + rep).unwrap();
        if rep % 2 == 1 {
            // time-varying covariates exercise the left-continuous lookup
            config.covariates = CovariateGen::UniformSteps {
                dim: 1,
                times: vec![0.7, 1.6],
                low: -1.0,
                high: 1.0,
            };
        }
        let cohort = draw_cohort(12 + 2 * rep as usize, &config).unwrap();
        let result = fit(&cohort, &m, &FitOptions::default()).unwrap();
        let oracle = common::golden_max(|b| common::cox_log_partial_likelihood(&cohort, b), -10.0, 10.0, 1e-11);
        worst = worst.max((result.eta_hat.beta[0] - oracle).abs());
    }
    outcome(worst < 1e-6, format!("5 fixtures of 12-20 units, max |beta_hat - oracle| = {worst:.3e}"))
}

fn martingale() -> Outcome {
    let config = preset("power-count", SEED).unwrap();
    let grid: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    let (report, elapsed) =
        timed(|| martingale_study(&config, 2000, &grid, Windows::default().martingale_sigmas).unwrap());
    from_report(&report, elapsed, Duration::from_secs(60))
}

fn consistency() -> Outcome {
    let config = StudyConfig::consistency_default(SEED).unwrap();
    let (report, elapsed) = timed(|| consistency_study(&config).unwrap());
    let medians: Vec<String> = report.metrics.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
    let mut o = from_report(&report, elapsed, Duration::from_secs(600));
    o.detail = format!("{} [{}]", o.detail, medians.join(", "));
    o
}

fn coverage() -> Outcome {
    let config = StudyConfig::coverage_default(SEED).unwrap();
    let (report, elapsed) = timed(|| coverage_study(&config).unwrap());
    let mut o = from_report(&report, elapsed, Duration::from_secs(900));
    let rates: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.name.contains("coverage"))
        .map(|c| format!("{:.3}", c.value))
        .collect();
    o.detail = format!("{} [coverage {}]", o.detail, rates.join(" "));
    o
}

fn normality_checks(report: &McReport, variance: bool) -> McReport {
    let mut r = report.clone();
    r.checks.retain(|c| {
        let is_variance = c.name.contains("vs mean");
        (is_variance == variance) || c.name.contains("non-converged")
    });
    r.passed = r.checks.iter().all(|c| c.passed);
    r
}

fn main() {
    let normality = {
        let config = StudyConfig::normality_default(SEED).unwrap();
        timed(|| normality_study(&config).unwrap())
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("identity suite", Box::new(identities)),
        ("closed-form fixture", Box::new(closed_form)),
        ("Nelson-Aalen reduction", Box::new(nelson_aalen)),
        ("Cox/Andersen-Gill reduction", Box::new(cox)),
        ("martingale mean", Box::new(martingale)),
        ("consistency", Box::new(consistency)),
        ("coverage", Box::new(coverage)),
        (
            "normality and independence",
            Box::new(|| from_report(&normality_checks(&normality.0, false), normality.1, Duration::from_secs(900))),
        ),
        (
            "variance consistency",
            Box::new(|| from_report(&normality_checks(&normality.0, true), normality.1, Duration::from_secs(900))),
        ),
        ("CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            name,
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn run_cli(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_dynrec"))
        .args(args)
        .current_dir(dir)
        .env("DYNREC_THREADS", "4")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn cli_determinism() -> Outcome {
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["simulate", "--n", "200", "--scenario", "power-count", "--seed", "7", "--out", "cohort.txt"], vec!["cohort.txt"]),
        (
            vec!["fit", "--in", "cohort.txt", "--rho", "power-count", "--link", "exp", "--out", "fit.txt"],
            vec!["fit.txt"],
        ),
        (vec!["plot", "--fit", "fit.txt", "--out-dir", "plots"], vec!["plots/baseline.svg", "plots/survivor.svg"]),
        (vec!["check", "--suite", "identities", "--seed", "3", "--out", "identities.json"], vec!["identities.json"]),
        (
            vec!["check", "--suite", "coverage", "--reps", "50", "--n", "100", "--seed", "3", "--out", "coverage.json"],
            vec!["coverage.json"],
        ),
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs: [Vec<(i32, Vec<u8>, Vec<Vec<u8>>)>; 2] = [Vec::new(), Vec::new()];
    for (d, dir) in dirs.iter().enumerate() {
        for (args, files) in &commands {
            let (code, stdout) = run_cli(args, dir.path());
            let contents = files
                .iter()
                .map(|f| std::fs::read(dir.path().join(f)).unwrap_or_default())
                .collect();
            outputs[d].push((code, stdout, contents));
        }
    }
    let mut detail = Vec::new();
    let mut ok = true;
    for (i, (args, _)) in commands.iter().enumerate() {
        let (a, b) = (&outputs[0][i], &outputs[1][i]);
        let missing = a.2.iter().any(|c| c.is_empty());
        let same = a == b;
        ok &= same && !missing;
        detail.push(format!(
            "{} exit {} {}",
            args[0],
            a.0,
            if missing {
                "missing output"
            } else if same {
                "identical"
            } else {
                "DIFFERS"
            }
        ));
    }
    outcome(ok, detail.join(", "))
}
