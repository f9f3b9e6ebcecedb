//! Versioned text format for cohorts.
//!
//! ```text
//! format dynrec-cohort 1
//! s_star 4
//! t_star none
//! p 1
//! q 1
//! rho power-count
//! link exp
//! units 2
//! unit
//! tau 2.5
//! events 0.3 1.1
//! age perfect
//! covariate 0 0.25
//! end
//! ...
//! ```
//!
//! `age` is `perfect`, `minimal`, or `piecewise` followed by
//! `start_age slope` pairs, one per segment. Each `covariate` line gives a
//! step time followed by the `p` values in force after it; the first step
//! is at time 0. Numbers are written in shortest round-trip form.

use crate::error::{Error, Result};
use crate::model::{AgeParams, AgePolicy, Cohort, CovariatePath, Link, Modulation, Rho, UnitPath};

pub const COHORT_MAGIC: &str = "format dynrec-cohort 1";

/// A cohort together with the modulation family it was generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortFile {
    pub cohort: Cohort,
    pub modulation: Modulation,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

impl CohortFile {
    pub fn to_text(&self) -> String {
        let c = &self.cohort;
        let mut out = String::new();
        out.push_str(COHORT_MAGIC);
        out.push('\n');
        out.push_str(&format!("s_star {}\n", c.s_star()));
        match c.t_star() {
            Some(t) => out.push_str(&format!("t_star {t}\n")),
            None => out.push_str("t_star none\n"),
        }
        out.push_str(&format!("p {}\n", c.covariate_dim()));
        out.push_str(&format!("q {}\n", self.modulation.q()));
        out.push_str(&format!("rho {}\n", self.modulation.rho.name()));
        out.push_str(&format!("link {}\n", self.modulation.link.name()));
        out.push_str(&format!("units {}\n", c.len()));
        for unit in c.units() {
            out.push_str("unit\n");
            out.push_str(&format!("tau {}\n", unit.tau()));
            if unit.event_times().is_empty() {
                out.push_str("events\n");
            } else {
                out.push_str(&format!("events {}\n", join(unit.event_times())));
            }
            match unit.age_policy() {
                AgePolicy::PerfectRepair => out.push_str("age perfect\n"),
                AgePolicy::MinimalRepair => out.push_str("age minimal\n"),
                AgePolicy::PiecewiseLinear(params) => {
                    let flat: Vec<f64> = params.iter().flat_map(|a| [a.start_age, a.slope]).collect();
                    out.push_str(&format!("age piecewise {}\n", join(&flat)));
                }
            }
            let cov = unit.covariates();
            if cov.dim() > 0 {
                for (t, x) in cov.times().iter().zip(cov.values()) {
                    out.push_str(&format!("covariate {t} {}\n", join(x)));
                }
            }
            out.push_str("end\n");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(line: usize, field: &str, token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| err(line, format!("{field}: '{token}' is not a number")))?;
    if !v.is_finite() {
        return Err(err(line, format!("{field}: '{token}' is not finite")));
    }
    Ok(v)
}

fn count(line: usize, field: &str, token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| err(line, format!("{field}: '{token}' is not a nonnegative integer")))
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| err(self.last_line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok(line)
    }

    fn peek_key(&self) -> Option<&'a str> {
        self.lines.get(self.pos).and_then(|(_, l)| l.split_whitespace().next())
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, text) = self.next()?;
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok((line, tokens.collect())),
            Some(k) => Err(err(line, format!("expected '{key}', found '{k}'"))),
            None => Err(err(line, format!("expected '{key}'"))),
        }
    }

    fn single(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, tokens) = self.keyed(key)?;
        match tokens.as_slice() {
            [v] => Ok((line, v)),
            _ => Err(err(line, format!("'{key}' takes exactly one value"))),
        }
    }

    fn parse(mut self) -> Result<CohortFile> {
        let (line, magic) = self.next().map_err(|_| err(1, "empty file"))?;
        if magic != COHORT_MAGIC {
            return Err(err(line, format!("expected header '{COHORT_MAGIC}'")));
        }
        let (line, s) = self.single("s_star")?;
        let s_star = number(line, "s_star", s)?;
        let (line, t) = self.single("t_star")?;
        let t_star = if t == "none" {
            None
        } else {
            Some(number(line, "t_star", t)?)
        };
        let (line, p) = self.single("p")?;
        let p = count(line, "p", p)?;
        let (q_line, q) = self.single("q")?;
        let q = count(q_line, "q", q)?;
        let (line, rho) = self.single("rho")?;
        let rho = Rho::from_name(rho).map_err(|e| err(line, e.to_string()))?;
        let (line, link) = self.single("link")?;
        let link = Link::from_name(link).map_err(|e| err(line, e.to_string()))?;
        let modulation = Modulation::new(rho, link);
        if modulation.q() != q {
            return Err(err(
                q_line,
                format!("q = {q} but rho {} has {} parameters", modulation.rho.name(), modulation.q()),
            ));
        }
        let (line, n) = self.single("units")?;
        let n = count(line, "units", n)?;
        let mut units = Vec::with_capacity(n);
        for _ in 0..n {
            units.push(self.unit(s_star, p)?);
        }
        if self.pos < self.lines.len() {
            return Err(err(self.lines[self.pos].0, "content after the last unit"));
        }
        let cohort = Cohort::new(units, t_star).map_err(|e| err(line, e.to_string()))?;
        Ok(CohortFile { cohort, modulation })
    }

    fn unit(&mut self, s_star: f64, p: usize) -> Result<UnitPath> {
        let (start, rest) = self.keyed("unit")?;
        if !rest.is_empty() {
            return Err(err(start, "'unit' takes no values"));
        }
        let (line, tau) = self.single("tau")?;
        let tau = number(line, "tau", tau)?;
        let (line, tokens) = self.keyed("events")?;
        let events = tokens
            .iter()
            .map(|t| number(line, "events", t))
            .collect::<Result<Vec<_>>>()?;
        let (age_line, tokens) = self.keyed("age")?;
        let age = match tokens.as_slice() {
            ["perfect"] => AgePolicy::PerfectRepair,
            ["minimal"] => AgePolicy::MinimalRepair,
            ["piecewise", rest @ ..] => {
                if rest.len() % 2 != 0 {
                    return Err(err(age_line, "piecewise age needs start_age slope pairs"));
                }
                let values = rest
                    .iter()
                    .map(|t| number(age_line, "age", t))
                    .collect::<Result<Vec<_>>>()?;
                AgePolicy::PiecewiseLinear(
                    values
                        .chunks(2)
                        .map(|c| AgeParams {
                            start_age: c[0],
                            slope: c[1],
                        })
                        .collect(),
                )
            }
            _ => return Err(err(age_line, "age must be 'perfect', 'minimal' or 'piecewise ...'")),
        };
        let mut times = Vec::new();
        let mut values = Vec::new();
        while self.peek_key() == Some("covariate") {
            let (line, tokens) = self.keyed("covariate")?;
            if tokens.len() != p + 1 {
                return Err(err(line, format!("covariate line needs a time and {p} values")));
            }
            let nums = tokens
                .iter()
                .map(|t| number(line, "covariate", t))
                .collect::<Result<Vec<_>>>()?;
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        let (line, rest) = self.keyed("end")?;
        if !rest.is_empty() {
            return Err(err(line, "'end' takes no values"));
        }
        let covariates = if p == 0 {
            if !times.is_empty() {
                return Err(err(line, "covariate lines given but p = 0"));
            }
            CovariatePath::empty()
        } else {
            if times.is_empty() {
                return Err(err(line, format!("unit needs covariate lines (p = {p})")));
            }
            CovariatePath::new(times, values).map_err(|e| err(start, e.to_string()))?
        };
        UnitPath::new(events, tau, s_star, age, covariates).map_err(|e| err(start, e.to_string()))
    }
}
