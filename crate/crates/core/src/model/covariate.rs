use crate::error::{Error, Result};

/// Piecewise-constant covariate path, evaluated left-continuously so that the
/// value at `s` is known just before `s`.
///
/// `times[0]` is always 0; `values[k]` holds on `(times[k], times[k+1]]`
/// (and at 0 for `k = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariatePath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl CovariatePath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidInput(
                "covariate path needs one value vector per step time".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidInput("covariate path must start at time 0".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(
                "covariate step times must be finite and strictly increasing".into(),
            ));
        }
        let p = values[0].len();
        if values.iter().any(|v| v.len() != p) {
            return Err(Error::InvalidInput(
                "covariate vectors must share one dimension".into(),
            ));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("covariate values must be finite".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(x: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            values: vec![x],
        }
    }

    pub fn empty() -> Self {
        Self::constant(Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Index of the step in force at `s` (left-continuous).
    pub fn index_at(&self, s: f64) -> usize {
        self.times[1..].partition_point(|&c| c < s)
    }

    pub fn at(&self, s: f64) -> &[f64] {
        &self.values[self.index_at(s)]
    }

    /// Change times strictly inside `(lo, hi)`.
    pub fn changes_within(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        self.times[1..]
            .iter()
            .copied()
            .filter(move |&c| c > lo && c < hi)
    }
}
