//! Right-continuous step functions.

use crate::error::{Error, Result};

/// A right-continuous step function with finitely many jumps.
///
/// The value at `t` is `initial + sum of jumps at locations <= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    locations: Vec<f64>,
    jumps: Vec<f64>,
    initial: f64,
}

impl StepFunction {
    pub fn new(locations: Vec<f64>, jumps: Vec<f64>, initial: f64) -> Result<Self> {
        if locations.len() != jumps.len() {
            return Err(Error::InvalidInput(format!(
                "step function has {} locations but {} jumps",
                locations.len(),
                jumps.len()
            )));
        }
        if !initial.is_finite() || jumps.iter().any(|j| !j.is_finite()) {
            return Err(Error::InvalidInput("step function values must be finite".into()));
        }
        if locations.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidInput(
                "step function locations must be finite and nonnegative".into(),
            ));
        }
        if locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "step function locations must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            locations,
            jumps,
            initial,
        })
    }

    /// Identically `value`.
    pub fn constant(value: f64) -> Self {
        Self {
            locations: Vec::new(),
            jumps: Vec::new(),
            initial: value,
        }
    }

    /// Builds a step function from unsorted `(location, jump)` pairs, summing
    /// jumps at tied locations.
    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>, initial: f64) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        if pts.iter().any(|(l, _)| l.is_nan()) {
            return Err(Error::InvalidInput("NaN jump location".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations: Vec<f64> = Vec::with_capacity(pts.len());
        let mut jumps: Vec<f64> = Vec::with_capacity(pts.len());
        for (l, j) in pts {
            match locations.last() {
                Some(&last) if last == l => *jumps.last_mut().unwrap() += j,
                _ => {
                    locations.push(l);
                    jumps.push(j);
                }
            }
        }
        Self::new(locations, jumps, initial)
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Number of jump locations `<= t`.
    fn count_le(&self, t: f64) -> usize {
        self.locations.partition_point(|&l| l <= t)
    }

    /// Value at `t` (right-continuous).
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.count_le(t);
        self.jumps[..k].iter().fold(self.initial, |acc, j| acc + j)
    }

    /// Left limit at `t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.locations.partition_point(|&l| l < t);
        self.jumps[..k].iter().fold(self.initial, |acc, j| acc + j)
    }

    /// Values just after each jump, accumulated in location order.
    pub fn cumulative_values(&self) -> Vec<f64> {
        self.jumps
            .iter()
            .scan(self.initial, |acc, j| {
                *acc += j;
                Some(*acc)
            })
            .collect()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.jumps.iter().all(|&j| j >= 0.0)
    }

    /// Stieltjes sum of `f(location) * jump` over jump locations in `(lo, hi]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let start = self.count_le(lo);
        let end = self.count_le(hi);
        (start..end.max(start))
            .map(|k| f(self.locations[k]) * self.jumps[k])
            .sum()
    }
}
