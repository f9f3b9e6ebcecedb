use crate::error::{Error, Result};
use crate::model::covariate::CovariatePath;

/// Per-segment parameters of a piecewise-linear effective age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeParams {
    pub start_age: f64,
    pub slope: f64,
}

/// How the effective age evolves between events.
#[derive(Debug, Clone, PartialEq)]
pub enum AgePolicy {
    /// Age resets to zero at each event.
    PerfectRepair,
    /// Age equals calendar time.
    MinimalRepair,
    /// Explicit affine map on each inter-event segment, one entry per segment
    /// (events + 1, the last one being the censored segment).
    PiecewiseLinear(Vec<AgeParams>),
}

/// Slack allowed when checking `age(s) <= s` on ingested data.
const AGE_SLACK: f64 = 1e-12;

/// One inter-event segment `(start, end]` with its affine age map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeSegment {
    /// Zero-based segment index; equals the number of prior events.
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub start_age: f64,
    pub slope: f64,
}

impl AgeSegment {
    pub fn age_at(&self, v: f64) -> f64 {
        self.start_age + self.slope * (v - self.start)
    }

    pub fn age_lo(&self) -> f64 {
        self.start_age
    }

    pub fn age_hi(&self) -> f64 {
        self.age_at(self.end)
    }

    /// Calendar time at which the age on this segment equals `t`.
    pub fn calendar_at(&self, t: f64) -> f64 {
        self.start + (t - self.start_age) / self.slope
    }

    pub fn covers_age(&self, t: f64) -> bool {
        t > self.age_lo() && t <= self.age_hi()
    }
}

/// A sub-interval of a segment on which the covariate vector is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskPiece {
    pub segment: AgeSegment,
    pub start: f64,
    pub end: f64,
    /// Index into the unit's covariate steps.
    pub covariate: usize,
}

impl RiskPiece {
    pub fn age_lo(&self) -> f64 {
        self.segment.age_at(self.start)
    }

    pub fn age_hi(&self) -> f64 {
        self.segment.age_at(self.end)
    }

    pub fn prior_events(&self) -> usize {
        self.segment.index
    }

    pub fn calendar_at(&self, t: f64) -> f64 {
        self.segment.calendar_at(t)
    }

    pub fn covers_age(&self, t: f64) -> bool {
        t > self.age_lo() && t <= self.age_hi()
    }
}

/// One observed unit: event times, end of observation, effective age policy
/// and covariate path.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPath {
    event_times: Vec<f64>,
    tau: f64,
    s_star: f64,
    age: AgePolicy,
    covariates: CovariatePath,
}

impl UnitPath {
    pub fn new(
        event_times: Vec<f64>,
        tau: f64,
        s_star: f64,
        age: AgePolicy,
        covariates: CovariatePath,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidInput(format!("tau must be finite and positive, got {tau}")));
        }
        if !(s_star.is_finite() && s_star > 0.0) {
            return Err(Error::InvalidInput(format!(
                "s_star must be finite and positive, got {s_star}"
            )));
        }
        let end = tau.min(s_star);
        if event_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "event times must be strictly increasing (ties are not allowed)".into(),
            ));
        }
        if let Some(&bad) = event_times.iter().find(|&&s| !(s > 0.0 && s < end)) {
            return Err(Error::InvalidInput(format!(
                "event time {bad} outside (0, min(tau, s_star)) = (0, {end})"
            )));
        }
        let unit = Self {
            event_times,
            tau,
            s_star,
            age,
            covariates,
        };
        unit.validate_age()?;
        Ok(unit)
    }

    fn validate_age(&self) -> Result<()> {
        if let AgePolicy::PiecewiseLinear(params) = &self.age {
            if params.len() != self.event_times.len() + 1 {
                return Err(Error::InvalidInput(format!(
                    "piecewise-linear age needs {} segments, got {}",
                    self.event_times.len() + 1,
                    params.len()
                )));
            }
            for seg in self.segments() {
                let AgeParams { start_age, slope } = params[seg.index];
                if !(start_age.is_finite() && start_age >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "segment {} start age must be finite and nonnegative",
                        seg.index + 1
                    )));
                }
                if !slope.is_finite() || slope < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "segment {} slope must be finite and nonnegative",
                        seg.index + 1
                    )));
                }
                if slope == 0.0 {
                    return Err(Error::DegenerateAge {
                        segment: seg.index + 1,
                    });
                }
                let tol = AGE_SLACK * (1.0 + seg.end);
                if seg.age_lo() > seg.start + tol || seg.age_hi() > seg.end + tol {
                    return Err(Error::InvalidInput(format!(
                        "segment {} has effective age exceeding calendar time",
                        seg.index + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn s_star(&self) -> f64 {
        self.s_star
    }

    pub fn age_policy(&self) -> &AgePolicy {
        &self.age
    }

    pub fn covariates(&self) -> &CovariatePath {
        &self.covariates
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.dim()
    }

    /// End of observation, `min(tau, s_star)`.
    pub fn observation_end(&self) -> f64 {
        self.tau.min(self.s_star)
    }

    /// Number of events strictly before `s`, i.e. `N(s-)`.
    pub fn events_before(&self, s: f64) -> usize {
        self.event_times.partition_point(|&e| e < s)
    }

    pub(crate) fn check_time(&self, s: f64) -> Result<()> {
        if s.is_finite() && (0.0..=self.s_star).contains(&s) {
            Ok(())
        } else {
            Err(Error::OutOfWindow {
                value: s,
                upper: self.s_star,
            })
        }
    }

    /// Segment `index` (zero-based) with its right end capped at `cap`.
    fn segment(&self, index: usize, cap: f64) -> AgeSegment {
        let start = if index == 0 { 0.0 } else { self.event_times[index - 1] };
        let end = self.event_times.get(index).copied().unwrap_or(cap).min(cap.max(start));
        let (start_age, slope) = match &self.age {
            AgePolicy::PerfectRepair => (0.0, 1.0),
            AgePolicy::MinimalRepair => (start, 1.0),
            AgePolicy::PiecewiseLinear(p) => (p[index].start_age, p[index].slope),
        };
        AgeSegment {
            index,
            start,
            end,
            start_age,
            slope,
        }
    }

    /// All `N(end-) + 1` segments over the full observation window.
    pub fn segments(&self) -> Vec<AgeSegment> {
        self.segments_until(self.s_star)
    }

    /// The `N(s-) + 1` segments contributing up to calendar time `s`; the last
    /// one ends at `min(s, tau)`.
    pub fn segments_until(&self, s: f64) -> Vec<AgeSegment> {
        let cap = s.min(self.tau);
        let count = self.events_before(s);
        (0..=count).map(|j| self.segment(j, cap)).collect()
    }

    /// Segment containing calendar time `s` under the `(S_{j-1}, S_j]`
    /// convention, extending the last segment past the end of observation.
    pub fn segment_at(&self, s: f64) -> AgeSegment {
        let j = self.events_before(s);
        let mut seg = self.segment(j, self.s_star);
        seg.end = seg.end.max(s);
        seg
    }

    /// Segments up to `s`, split at covariate change times.
    pub fn pieces_until(&self, s: f64) -> Vec<RiskPiece> {
        let mut out = Vec::new();
        for seg in self.segments_until(s) {
            if seg.end <= seg.start {
                continue;
            }
            let mut lo = seg.start;
            for c in self
                .covariates
                .changes_within(seg.start, seg.end)
                .chain(std::iter::once(seg.end))
            {
                out.push(RiskPiece {
                    segment: seg,
                    start: lo,
                    end: c,
                    covariate: self.covariates.index_at(c),
                });
                lo = c;
            }
        }
        out
    }

    pub fn pieces(&self) -> Vec<RiskPiece> {
        self.pieces_until(self.s_star)
    }

    /// Effective age at each event, in event order.
    pub fn event_ages(&self) -> Vec<f64> {
        (0..self.event_times.len())
            .map(|j| self.segment(j, self.s_star).age_hi())
            .collect()
    }
}

/// `n` units observed over a common calendar window `[0, s_star]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    s_star: f64,
    t_star: Option<f64>,
    units: Vec<UnitPath>,
}

impl Cohort {
    pub fn new(units: Vec<UnitPath>, t_star: Option<f64>) -> Result<Self> {
        let first = units
            .first()
            .ok_or_else(|| Error::InvalidInput("a cohort needs at least one unit".into()))?;
        let s_star = first.s_star();
        let p = first.covariate_dim();
        if units.iter().any(|u| u.s_star() != s_star) {
            return Err(Error::InvalidInput("all units must share s_star".into()));
        }
        if units.iter().any(|u| u.covariate_dim() != p) {
            return Err(Error::InvalidInput(
                "all units must share the covariate dimension".into(),
            ));
        }
        if let Some(t) = t_star {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidInput(format!("t_star must be positive, got {t}")));
            }
        }
        Ok(Self {
            s_star,
            t_star,
            units,
        })
    }

    pub fn units(&self) -> &[UnitPath] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn s_star(&self) -> f64 {
        self.s_star
    }

    pub fn t_star(&self) -> Option<f64> {
        self.t_star
    }

    pub fn with_t_star(mut self, t_star: Option<f64>) -> Result<Self> {
        if let Some(t) = t_star {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidInput(format!("t_star must be positive, got {t}")));
            }
        }
        self.t_star = t_star;
        Ok(self)
    }

    pub fn covariate_dim(&self) -> usize {
        self.units[0].covariate_dim()
    }

    pub fn total_events(&self) -> usize {
        self.units.iter().map(|u| u.event_times().len()).sum()
    }

    pub fn max_event_age(&self) -> Option<f64> {
        self.units
            .iter()
            .flat_map(|u| u.event_ages())
            .max_by(f64::total_cmp)
    }

    /// The configured `t_star`, else the largest observed event age, else
    /// `s_star` when there are no events.
    pub fn resolved_t_star(&self) -> f64 {
        self.t_star
            .or_else(|| self.max_event_age())
            .unwrap_or(self.s_star)
    }
}
