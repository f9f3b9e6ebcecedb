//! Command-line front end: `simulate`, `fit`, `check` and `plot`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad arguments or input,
//! 3 explosive simulation, 4 Newton did not converge (the fit file is still
//! written), 5 eta not identified, 6 a Monte Carlo check failed.

mod cohort_file;
mod fit_file;
mod plot;

pub use cohort_file::{CohortFile, COHORT_MAGIC};
pub use fit_file::{BaselineRow, Diagnostics, EtaRow, FitFile, FIT_MAGIC};
pub use plot::{baseline_svg, emit_plots, survivor_svg};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimate::{fit, FitData, FitOptions};
use crate::inference::Inference;
use crate::mc::{
    consistency_study, coverage_study, identity_suite, martingale_study, normality_study, McReport,
    StudyConfig, Windows,
};
use crate::model::{Link, Modulation, Rho};
use crate::simulate::{draw_cohort, preset, preset_names, ScenarioFile, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "dynrec", version, about = "Dynamic recurrent-event models: simulate, fit, check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a cohort from a preset or a JSON scenario file.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Preset name or path to a JSON scenario.
        #[arg(long, default_value = "power-count")]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit eta and the baseline to a cohort file.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        /// Overrides the rho family named in the cohort file.
        #[arg(long)]
        rho: Option<String>,
        /// Overrides the link named in the cohort file.
        #[arg(long)]
        link: Option<String>,
        /// Largest age used; defaults to the file's t_star, then the largest event age.
        #[arg(long)]
        t_star: Option<f64>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo suite and write its JSON report.
    #[command(alias = "mc")]
    Check {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Replications (fixtures for the identity suite).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sample sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the fitted baseline and survivor as SVG.
    Plot {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Identities,
    Consistency,
    Coverage,
    Normality,
    Martingale,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Simulate { n, seed, scenario, out } => simulate(n, seed, &scenario, &out),
        Command::Fit {
            input,
            rho,
            link,
            t_star,
            level,
            out,
        } => fit_command(&input, rho.as_deref(), link.as_deref(), t_star, level, &out),
        Command::Check {
            suite,
            reps,
            seed,
            n,
            level,
            out,
        } => check(suite, reps, seed, &n, level, &out),
        Command::Plot { fit, out_dir } => plot_command(&fit, &out_dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 1,
        Error::Explosive { .. } => 3,
        Error::DegenerateEta(_) => 5,
        _ => 2,
    }
}

/// `DYNREC_THREADS` sets the worker count; results do not depend on it.
fn configure_threads() {
    if let Some(threads) = std::env::var("DYNREC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn scenario_config(scenario: &str, seed: u64) -> Result<SimConfig> {
    if preset_names().contains(&scenario) {
        return preset(scenario, seed);
    }
    let path = Path::new(scenario);
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "'{scenario}' is neither a preset ({}) nor a scenario file",
            preset_names().join(", ")
        )));
    }
    ScenarioFile::parse(&read(path)?)?.into_config(seed)
}

fn simulate(n: usize, seed: u64, scenario: &str, out: &Path) -> Result<i32> {
    let config = scenario_config(scenario, seed)?;
    if matches!(config.params.modulation.rho, Rho::Custom(_)) {
        return Err(Error::InvalidInput("custom rho families cannot be written to a cohort file".into()));
    }
    let cohort = draw_cohort(n, &config)?;
    let events: usize = cohort.units().iter().map(|u| u.event_times().len()).sum();
    let file = CohortFile {
        cohort,
        modulation: config.params.modulation.clone(),
    };
    write(out, &file.to_text())?;
    println!("wrote {} units with {events} events to {}", n, out.display());
    Ok(0)
}

fn fit_command(
    input: &Path,
    rho: Option<&str>,
    link: Option<&str>,
    t_star: Option<f64>,
    level: f64,
    out: &Path,
) -> Result<i32> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {level}")));
    }
    let file = CohortFile::parse(&read(input)?)?;
    let modulation = Modulation::new(
        match rho {
            Some(name) => Rho::from_name(name)?,
            None => file.modulation.rho.clone(),
        },
        match link {
            Some(name) => Link::from_name(name)?,
            None => file.modulation.link,
        },
    );
    let cohort = &file.cohort;
    let options = FitOptions {
        t_star: t_star.or(cohort.t_star()),
        ..FitOptions::default()
    };
    let data = FitData::new(cohort, &modulation, options.t_star)?;
    let neutral = modulation.neutral_eta(cohort.covariate_dim());
    let flat = data.flat_coordinates(&neutral);
    if !flat.is_empty() {
        let all = fit_file::eta_names(modulation.q(), neutral.dim());
        let names: Vec<&str> = flat.iter().map(|&c| all[c].as_str()).collect();
        return Err(Error::DegenerateEta(names.join(", ")));
    }
    let result = fit(cohort, &modulation, &options)?;
    let inference = Inference::new(&data, &result.eta_hat, &result.lambda0_hat)?;
    let (fit_file, warnings) = FitFile::build(&result, &inference, &modulation, level)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    write(out, &fit_file.to_text())?;
    print!("{}", fit_file.table());
    if !result.converged {
        eprintln!(
            "error: Newton iterations did not converge (score norm {:.3e} after {} iterations); estimates written for inspection",
            result.final_score_norm, result.iterations
        );
        return Ok(4);
    }
    Ok(0)
}

fn check(suite: Suite, reps: Option<usize>, seed: u64, n: &[usize], level: Option<f64>, out: &Path) -> Result<i32> {
    if reps == Some(0) {
        return Err(Error::InvalidInput("--reps must be at least 1".into()));
    }
    let report = match suite {
        Suite::Identities => identity_suite(seed, reps.unwrap_or(100))?,
        Suite::Martingale => {
            let scenario = preset("power-count", seed)?;
            let grid: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
            let size = match n {
                [] => 2000,
                [size] => *size,
                _ => return Err(Error::InvalidInput("the martingale suite takes a single --n".into())),
            };
            martingale_study(&scenario, size, &grid, Windows::default().martingale_sigmas)?
        }
        Suite::Consistency | Suite::Coverage | Suite::Normality => {
            let mut config = match suite {
                Suite::Consistency => StudyConfig::consistency_default(seed)?,
                Suite::Coverage => StudyConfig::coverage_default(seed)?,
                _ => StudyConfig::normality_default(seed)?,
            };
            if let Some(reps) = reps {
                config.replications = reps;
            }
            if !n.is_empty() {
                config.sample_sizes = n.to_vec();
            }
            if let Some(level) = level {
                config.level = level;
            }
            match suite {
                Suite::Consistency => consistency_study(&config)?,
                Suite::Coverage => coverage_study(&config)?,
                _ => normality_study(&config)?,
            }
        }
    };
    write_report(&report, out)?;
    print!("{}", report.summary());
    Ok(if report.passed { 0 } else { 6 })
}

fn write_report(report: &McReport, out: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    write(out, &(json + "\n"))
}

fn plot_command(fit: &Path, out_dir: &Path) -> Result<i32> {
    let file = FitFile::parse(&read(fit)?)?;
    emit_plots(&file, out_dir)?;
    println!("wrote baseline.svg and survivor.svg to {}", out_dir.display());
    Ok(0)
}
