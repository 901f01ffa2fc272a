//! Target cumulative position `s_t` for the parent order.
//!
//! Quantities are in percent of the parent, so `Q = 100` in normal use.

use serde::{Deserialize, Serialize};

use crate::marketdata::VolumeProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Twap,
    Vwap,
    #[serde(alias = "almgren-chriss")]
    Ac,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Twap => "twap",
            ScheduleKind::Vwap => "vwap",
            ScheduleKind::Ac => "ac",
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("step {t} outside 0..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub quantity: f64,
    pub steps: usize,
    /// Almgren-Chriss urgency per step.
    pub psi: f64,
    /// VWAP only: cumulative volume fraction at each step boundary.
    fractions: Vec<f64>,
}

impl Schedule {
    fn check(quantity: f64, steps: usize) -> Result<(), ScheduleError> {
        if steps == 0 {
            return Err(ScheduleError::InvalidParameter("need at least one step".into()));
        }
        if !(quantity >= 0.0) || !quantity.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!("quantity {quantity}")));
        }
        Ok(())
    }

    pub fn twap(quantity: f64, steps: usize) -> Result<Self, ScheduleError> {
        Self::check(quantity, steps)?;
        Ok(Schedule {
            kind: ScheduleKind::Twap,
            quantity,
            steps,
            psi: 0.0,
            fractions: Vec::new(),
        })
    }

    /// Follow a (forecast) cumulative volume profile; one schedule step per
    /// profile bucket.
    pub fn vwap(quantity: f64, profile: &VolumeProfile) -> Result<Self, ScheduleError> {
        let steps = profile.buckets();
        Self::check(quantity, steps)?;
        if !(profile.terminal() > 0.0) {
            return Err(ScheduleError::InvalidParameter("volume profile has no volume".into()));
        }
        if profile.cumulative[0] != 0.0 || profile.cumulative.windows(2).any(|w| w[1] < w[0]) {
            return Err(ScheduleError::InvalidParameter("volume profile must start at 0 and not decrease".into()));
        }
        Ok(Schedule {
            kind: ScheduleKind::Vwap,
            quantity,
            steps,
            psi: 0.0,
            fractions: (0..=steps).map(|k| profile.fraction(k)).collect(),
        })
    }

    pub fn almgren_chriss(quantity: f64, steps: usize, psi: f64) -> Result<Self, ScheduleError> {
        Self::check(quantity, steps)?;
        if !(psi >= 0.0) || !psi.is_finite() {
            return Err(ScheduleError::InvalidParameter(format!("psi {psi}")));
        }
        Ok(Schedule {
            kind: ScheduleKind::Ac,
            quantity,
            steps,
            psi,
            fractions: Vec::new(),
        })
    }

    /// Target position after `t` steps.
    pub fn at(&self, t: usize) -> Result<f64, ScheduleError> {
        let steps = self.steps;
        if t > steps {
            return Err(ScheduleError::StepOutOfRange { t, steps });
        }
        if t == steps {
            return Ok(self.quantity);
        }
        let frac = match self.kind {
            ScheduleKind::Twap => t as f64 / steps as f64,
            ScheduleKind::Vwap => self.fractions[t],
            ScheduleKind::Ac => 1.0 - ac_remaining(self.psi, t, steps),
        };
        Ok(self.quantity * frac)
    }

    /// `s_0 ..= s_T`.
    pub fn path(&self) -> Vec<f64> {
        (0..=self.steps).map(|t| self.at(t).expect("in range")).collect()
    }
}

/// `sinh(psi (T - t)) / sinh(psi T)`, evaluated without overflow for large
/// `psi T` and without cancellation for small `psi`.
fn ac_remaining(psi: f64, t: usize, steps: usize) -> f64 {
    let (a, b) = (psi * (steps - t) as f64, psi * steps as f64);
    if b == 0.0 {
        return (steps - t) as f64 / steps as f64;
    }
    (-psi * t as f64).exp() * (-2.0 * a).exp_m1() / (-2.0 * b).exp_m1()
}

/// Free-function form of [`Schedule::at`].
pub fn schedule_at(schedule: &Schedule, t: usize) -> Result<f64, ScheduleError> {
    schedule.at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twap_is_linear() {
        let s = Schedule::twap(100.0, 10).unwrap();
        assert_eq!(s.at(5).unwrap(), 50.0);
        assert_eq!(s.at(11), Err(ScheduleError::StepOutOfRange { t: 11, steps: 10 }));
    }

    #[test]
    fn ac_endpoints_and_midpoint() {
        for psi in [0.0, 1e-9, 0.1, 3.0, 500.0] {
            let s = Schedule::almgren_chriss(100.0, 10, psi).unwrap();
            assert_eq!(s.at(0).unwrap(), 0.0);
            assert_eq!(s.at(10).unwrap(), 100.0);
        }
        let s = Schedule::almgren_chriss(100.0, 10, 0.1).unwrap();
        let expected = 100.0 * (1.0 - 0.5f64.sinh() / 1.0f64.sinh());
        assert!((s.at(5).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 55.66).abs() < 5e-3);
    }

    #[test]
    fn ac_large_urgency_does_not_overflow() {
        let s = Schedule::almgren_chriss(100.0, 78, 50.0).unwrap();
        let path = s.path();
        assert!(path.iter().all(|x| x.is_finite()));
        assert!(path[1] > 99.9);
    }

    #[test]
    fn vwap_on_linear_profile_is_twap() {
        let v = Schedule::vwap(100.0, &VolumeProfile::linear(12)).unwrap();
        let t = Schedule::twap(100.0, 12).unwrap();
        for k in 0..=12 {
            assert!((v.at(k).unwrap() - t.at(k).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Schedule::twap(100.0, 0).is_err());
        assert!(Schedule::almgren_chriss(100.0, 5, f64::NAN).is_err());
        assert!(Schedule::vwap(100.0, &VolumeProfile::empty(0, 1, 3)).is_err());
    }
}
