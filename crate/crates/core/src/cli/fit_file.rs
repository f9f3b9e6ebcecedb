//! Versioned text format for fitted models, plus the human-readable table.
//!
//! Sections appear in a fixed order: `[diagnostics]`, `[eta]`, `[sigma]`,
//! `[baseline]`, `[survivor]`, `[b_hat]`. Reals are written with 17
//! significant digits. The baseline table lists, at every jump of the
//! estimated cumulative hazard, its value, `c_hat(t, t)` and the pointwise
//! band; all of these are constant up to the next jump.

use crate::error::{Error, Result};
use crate::estimate::FitResult;
use crate::inference::{spd_inverse, z_quantile, Inference};
use crate::model::Modulation;

pub const FIT_MAGIC: &str = "format dynrec-fit 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub n: usize,
    pub events_used: usize,
    pub t_star: f64,
    pub rho: String,
    pub link: String,
    pub level: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_score_norm: f64,
    pub ascent_steps: usize,
    pub log_likelihood: f64,
    pub survivor_clipped: bool,
    /// Condition number of `Sigma_hat`; NaN when it could not be inverted.
    pub sigma_condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub location: f64,
    pub cumulative: f64,
    pub c_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitFile {
    pub diagnostics: Diagnostics,
    pub eta: Vec<EtaRow>,
    pub sigma: Vec<Vec<f64>>,
    pub baseline: Vec<BaselineRow>,
    pub survivor: Vec<(f64, f64)>,
    pub b_hat: Vec<(f64, Vec<f64>)>,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn eta_names(q: usize, k: usize) -> Vec<String> {
    (0..k)
        .map(|j| if j < q { format!("alpha{}", j + 1) } else { format!("beta{}", j - q + 1) })
        .collect()
}

impl FitFile {
    /// Assembles the file; returns warnings for conditions worth reporting
    /// (no events, singular covariance, clipped survivor).
    pub fn build(
        fit: &FitResult,
        inference: &Inference,
        modulation: &Modulation,
        level: f64,
    ) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        let z = z_quantile(level)?;
        let k = fit.eta_hat.dim();
        let q = fit.eta_hat.alpha.len();
        let n = fit.n as f64;
        if fit.events_used == 0 {
            warnings.push("no events with age <= t_star: the baseline estimate is identically 0".into());
        }
        let inverse = match spd_inverse(&fit.sigma_hat) {
            Ok(inv) => Some(inv),
            Err(e) => {
                warnings.push(format!(
                    "{e}; standard errors and bands are not available (check for collinear or constant covariates)"
                ));
                None
            }
        };
        let eta_vec = fit.eta_hat.to_vector();
        let eta = eta_names(q, k)
            .into_iter()
            .enumerate()
            .map(|(j, name)| {
                let se = inverse.as_ref().map_or(f64::NAN, |inv| (inv.inverse[(j, j)] / n).sqrt());
                EtaRow {
                    name,
                    estimate: eta_vec[j],
                    se,
                    lower: eta_vec[j] - z * se,
                    upper: eta_vec[j] + z * se,
                }
            })
            .collect();
        let locations = fit.lambda0_hat.locations();
        let band_ok = inverse.is_some() || k == 0;
        let baseline = if band_ok {
            let band = inference.lambda_band(locations, level)?;
            locations
                .iter()
                .zip(band)
                .map(|(&t, b)| {
                    Ok(BaselineRow {
                        location: t,
                        cumulative: fit.lambda0_hat.eval(t),
                        c_hat: inference.c_hat(t, t)?,
                        lower: b.lower,
                        upper: b.upper,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            locations
                .iter()
                .map(|&t| BaselineRow {
                    location: t,
                    cumulative: fit.lambda0_hat.eval(t),
                    c_hat: f64::NAN,
                    lower: f64::NAN,
                    upper: f64::NAN,
                })
                .collect()
        };
        if fit.survivor.clipped {
            warnings.push("a baseline jump exceeded 1; the survivor estimate was clipped at 0".into());
        }
        let file = FitFile {
            diagnostics: Diagnostics {
                n: fit.n,
                events_used: fit.events_used,
                t_star: fit.t_star,
                rho: modulation.rho.name().into(),
                link: modulation.link.name().into(),
                level,
                iterations: fit.iterations,
                converged: fit.converged,
                final_score_norm: fit.final_score_norm,
                ascent_steps: fit.ascent_steps,
                log_likelihood: fit.log_likelihood,
                survivor_clipped: fit.survivor.clipped,
                sigma_condition: inverse.as_ref().map_or(f64::NAN, |i| i.condition),
            },
            eta,
            sigma: (0..k).map(|i| (0..k).map(|j| fit.sigma_hat[(i, j)]).collect()).collect(),
            baseline,
            survivor: fit
                .survivor
                .curve
                .locations()
                .iter()
                .map(|&t| (t, fit.survivor.curve.eval(t)))
                .collect(),
            b_hat: locations
                .iter()
                .map(|&t| (t, inference.b_hat(t).iter().copied().collect()))
                .collect(),
        };
        Ok((file, warnings))
    }

    pub fn to_text(&self) -> String {
        let d = &self.diagnostics;
        let mut out = format!("{FIT_MAGIC}\n[diagnostics]\n");
        out.push_str(&format!("n {}\n", d.n));
        out.push_str(&format!("events_used {}\n", d.events_used));
        out.push_str(&format!("t_star {}\n", real(d.t_star)));
        out.push_str(&format!("rho {}\n", d.rho));
        out.push_str(&format!("link {}\n", d.link));
        out.push_str(&format!("level {}\n", real(d.level)));
        out.push_str(&format!("iterations {}\n", d.iterations));
        out.push_str(&format!("converged {}\n", d.converged));
        out.push_str(&format!("final_score_norm {}\n", real(d.final_score_norm)));
        out.push_str(&format!("ascent_steps {}\n", d.ascent_steps));
        out.push_str(&format!("log_likelihood {}\n", real(d.log_likelihood)));
        out.push_str(&format!("survivor_clipped {}\n", d.survivor_clipped));
        out.push_str(&format!("sigma_condition {}\n", real(d.sigma_condition)));
        out.push_str("[eta]\n# name estimate se lower upper\n");
        for r in &self.eta {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                r.name,
                real(r.estimate),
                real(r.se),
                real(r.lower),
                real(r.upper)
            ));
        }
        out.push_str("[sigma]\n");
        for row in &self.sigma {
            out.push_str(&row.iter().map(|v| real(*v)).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        out.push_str("[baseline]\n# location cumulative c_hat lower upper\n");
        for r in &self.baseline {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                real(r.location),
                real(r.cumulative),
                real(r.c_hat),
                real(r.lower),
                real(r.upper)
            ));
        }
        out.push_str("[survivor]\n# location value\n");
        for (t, v) in &self.survivor {
            out.push_str(&format!("{} {}\n", real(*t), real(*v)));
        }
        out.push_str("[b_hat]\n# location components\n");
        for (t, b) in &self.b_hat {
            out.push_str(&real(*t));
            for v in b {
                out.push(' ');
                out.push_str(&real(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, FIT_MAGIC)) => {}
            Some((line, _)) => return Err(perr(line, format!("expected header '{FIT_MAGIC}'"))),
            None => return Err(perr(1, "empty file")),
        }
        let mut section = String::new();
        let mut fields: Vec<(usize, String, String)> = Vec::new();
        let mut file = FitFile {
            diagnostics: Diagnostics {
                n: 0,
                events_used: 0,
                t_star: f64::NAN,
                rho: String::new(),
                link: String::new(),
                level: f64::NAN,
                iterations: 0,
                converged: false,
                final_score_norm: f64::NAN,
                ascent_steps: 0,
                log_likelihood: f64::NAN,
                survivor_clipped: false,
                sigma_condition: f64::NAN,
            },
            eta: vec![],
            sigma: vec![],
            baseline: vec![],
            survivor: vec![],
            b_hat: vec![],
        };
        for (line, text) in lines {
            if let Some(name) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                section = name.to_string();
                continue;
            }
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let nums = |from: usize| -> Result<Vec<f64>> {
                tokens[from..]
                    .iter()
                    .map(|t| t.parse::<f64>().map_err(|_| perr(line, format!("'{t}' is not a number"))))
                    .collect()
            };
            match section.as_str() {
                "diagnostics" => {
                    if tokens.len() != 2 {
                        return Err(perr(line, "diagnostic lines are 'key value'"));
                    }
                    fields.push((line, tokens[0].into(), tokens[1].into()));
                }
                "eta" => {
                    let v = nums(1)?;
                    if v.len() != 4 {
                        return Err(perr(line, "eta rows need name, estimate, se, lower, upper"));
                    }
                    file.eta.push(EtaRow {
                        name: tokens[0].into(),
                        estimate: v[0],
                        se: v[1],
                        lower: v[2],
                        upper: v[3],
                    });
                }
                "sigma" => file.sigma.push(nums(0)?),
                "baseline" => {
                    let v = nums(0)?;
                    if v.len() != 5 {
                        return Err(perr(line, "baseline rows have 5 columns"));
                    }
                    file.baseline.push(BaselineRow {
                        location: v[0],
                        cumulative: v[1],
                        c_hat: v[2],
                        lower: v[3],
                        upper: v[4],
                    });
                }
                "survivor" => {
                    let v = nums(0)?;
                    if v.len() != 2 {
                        return Err(perr(line, "survivor rows have 2 columns"));
                    }
                    file.survivor.push((v[0], v[1]));
                }
                "b_hat" => {
                    let v = nums(0)?;
                    if v.is_empty() {
                        return Err(perr(line, "b_hat rows start with a location"));
                    }
                    file.b_hat.push((v[0], v[1..].to_vec()));
                }
                other => return Err(perr(line, format!("unknown section '{other}'"))),
            }
        }
        for (line, key, value) in fields {
            let d = &mut file.diagnostics;
            let f = || value.parse::<f64>().map_err(|_| perr(line, format!("{key}: bad number")));
            let u = || value.parse::<usize>().map_err(|_| perr(line, format!("{key}: bad integer")));
            let b = || value.parse::<bool>().map_err(|_| perr(line, format!("{key}: expected true/false")));
            match key.as_str() {
                "n" => d.n = u()?,
                "events_used" => d.events_used = u()?,
                "t_star" => d.t_star = f()?,
                "rho" => d.rho = value.clone(),
                "link" => d.link = value.clone(),
                "level" => d.level = f()?,
                "iterations" => d.iterations = u()?,
                "converged" => d.converged = b()?,
                "final_score_norm" => d.final_score_norm = f()?,
                "ascent_steps" => d.ascent_steps = u()?,
                "log_likelihood" => d.log_likelihood = f()?,
                "survivor_clipped" => d.survivor_clipped = b()?,
                "sigma_condition" => d.sigma_condition = f()?,
                other => return Err(perr(line, format!("unknown diagnostic '{other}'"))),
            }
        }
        Ok(file)
    }

    /// Value of the baseline estimate at `t`.
    pub fn cumulative_at(&self, t: f64) -> f64 {
        self.baseline
            .iter()
            .take_while(|r| r.location <= t)
            .last()
            .map_or(0.0, |r| r.cumulative)
    }

    /// Summary table: estimates with standard errors and intervals, then the
    /// baseline at tenths of `t_star`.
    pub fn table(&self) -> String {
        let d = &self.diagnostics;
        let pct = d.level * 100.0;
        let mut out = format!(
            "n = {}, events used = {}, t* = {:.6}, rho = {}, link = {}\n",
            d.n, d.events_used, d.t_star, d.rho, d.link
        );
        out.push_str(&format!(
            "newton: {} iterations, converged = {}, |score| = {:.3e}, log partial likelihood = {:.6}\n",
            d.iterations, d.converged, d.final_score_norm, d.log_likelihood
        ));
        if !self.eta.is_empty() {
            out.push_str(&format!(
                "\n{:<10} {:>14} {:>12} {:>14} {:>14}\n",
                "parameter",
                "estimate",
                "std.err",
                format!("{pct:.0}% lower"),
                format!("{pct:.0}% upper")
            ));
            for r in &self.eta {
                out.push_str(&format!(
                    "{:<10} {:>14.6} {:>12.6} {:>14.6} {:>14.6}\n",
                    r.name, r.estimate, r.se, r.lower, r.upper
                ));
            }
        }
        out.push_str(&format!("\n{:>10} {:>14} {:>14}\n", "age", "cum.hazard", "survivor"));
        for i in 1..=10 {
            let t = d.t_star * i as f64 / 10.0;
            let surv = self
                .survivor
                .iter()
                .take_while(|(w, _)| *w <= t)
                .last()
                .map_or(1.0, |(_, v)| *v);
            out.push_str(&format!("{:>10.4} {:>14.6} {:>14.6}\n", t, self.cumulative_at(t), surv));
        }
        out
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
