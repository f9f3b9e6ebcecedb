use crate::error::{Error, Result};
use crate::step::StepFunction;

/// Parametric baseline hazard families used for simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardFamily {
    Constant { rate: f64 },
    /// Cumulative hazard `(t / scale)^shape`.
    Weibull { scale: f64, shape: f64 },
}

impl HazardFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            HazardFamily::Constant { rate } => rate.is_finite() && rate >= 0.0,
            HazardFamily::Weibull { scale, shape } => {
                scale.is_finite() && scale > 0.0 && shape.is_finite() && shape > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid hazard family {self:?}")))
        }
    }

    pub fn hazard(&self, t: f64) -> f64 {
        match *self {
            HazardFamily::Constant { rate } => rate,
            HazardFamily::Weibull { scale, shape } => {
                if shape == 1.0 {
                    1.0 / scale
                } else {
                    shape / scale * (t / scale).powf(shape - 1.0)
                }
            }
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            HazardFamily::Constant { rate } => rate * t,
            HazardFamily::Weibull { scale, shape } => (t / scale).powf(shape),
        }
    }

    /// Smallest `t` with `cumulative(t) >= u`; infinite when unreachable.
    pub fn inverse_cumulative(&self, u: f64) -> f64 {
        match *self {
            HazardFamily::Constant { rate } => {
                if rate > 0.0 {
                    u / rate
                } else if u > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            HazardFamily::Weibull { scale, shape } => scale * u.powf(1.0 / shape),
        }
    }
}

/// Baseline of the effective-age hazard: either a rate function or a
/// cumulative step function (as produced by estimation).
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Hazard(HazardFamily),
    Cumulative(StepFunction),
}

impl Baseline {
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            Baseline::Hazard(h) => h.cumulative(t),
            Baseline::Cumulative(f) => f.eval(t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Baseline::Hazard(h) => h.validate(),
            Baseline::Cumulative(f) => {
                if f.initial() != 0.0 || !f.is_nondecreasing() {
                    Err(Error::InvalidInput(
                        "cumulative baseline must start at 0 and be nondecreasing".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weibull_shape_two_is_linear_hazard() {
        let h = HazardFamily::Weibull { scale: 1.0, shape: 2.0 };
        assert!((h.hazard(0.3) - 0.6).abs() < 1e-15);
        assert!((h.cumulative(0.5) - 0.25).abs() < 1e-15);
        assert!((h.inverse_cumulative(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_never_reaches_positive_mass() {
        let h = HazardFamily::Constant { rate: 0.0 };
        assert_eq!(h.inverse_cumulative(1.0), f64::INFINITY);
    }
}
