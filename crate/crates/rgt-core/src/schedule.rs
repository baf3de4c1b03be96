//! Time schedules for the regularization weight beta.
//!
//! Annealing beta trades transient active-power dissipation against
//! convergence speed; the three shapes here are constant-from-onset, a
//! logistic ramp beta(t) = beta_min + (beta_max - beta_min)/(1 + exp(-k(t + t0))),
//! and a hard switch at a fixed time.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Shape of the annealing curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant {
        beta0: f64,
    },
    Logistic {
        beta_min: f64,
        beta_max: f64,
        k: f64,
        t0: f64,
    },
    Switching {
        beta_min: f64,
        beta_max: f64,
        t_switch: f64,
    },
}

/// A beta schedule with an optimization onset time.
///
/// Before `start_time` the constant schedule reports 0 and the other kinds
/// report their beta_min; the optimization is considered dormant until then.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    pub start_time: f64,
}

/// Default optimization onset, in the same arbitrary time units as the solver.
pub const DEFAULT_START_TIME: f64 = 0.1;

impl BetaSchedule {
    pub fn constant(beta0: f64) -> Result<Self> {
        let s = BetaSchedule {
            kind: ScheduleKind::Constant { beta0 },
            start_time: DEFAULT_START_TIME,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn logistic(beta_min: f64, beta_max: f64, k: f64, t0: f64) -> Result<Self> {
        let s = BetaSchedule {
            kind: ScheduleKind::Logistic {
                beta_min,
                beta_max,
                k,
                t0,
            },
            start_time: DEFAULT_START_TIME,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn switching(beta_min: f64, beta_max: f64, t_switch: f64) -> Result<Self> {
        let s = BetaSchedule {
            kind: ScheduleKind::Switching {
                beta_min,
                beta_max,
                t_switch,
            },
            start_time: DEFAULT_START_TIME,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_start_time(mut self, start_time: f64) -> Result<Self> {
        self.start_time = start_time;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_time >= 0.0) {
            return Err(Error::config("schedule.start_time", "must be >= 0"));
        }
        match self.kind {
            ScheduleKind::Constant { beta0 } => {
                if !(beta0 >= 0.0) {
                    return Err(Error::config("schedule.beta0", "must be >= 0"));
                }
            }
            ScheduleKind::Logistic {
                beta_min,
                beta_max,
                k,
                ..
            } => {
                if !(0.0 <= beta_min && beta_min <= beta_max) {
                    return Err(Error::config(
                        "schedule.beta_min/beta_max",
                        "need 0 <= beta_min <= beta_max",
                    ));
                }
                if !(k > 0.0) {
                    return Err(Error::config("schedule.k", "must be > 0"));
                }
            }
            ScheduleKind::Switching {
                beta_min, beta_max, ..
            } => {
                if !(0.0 <= beta_min && beta_min <= beta_max) {
                    return Err(Error::config(
                        "schedule.beta_min/beta_max",
                        "need 0 <= beta_min <= beta_max",
                    ));
                }
            }
        }
        Ok(())
    }

    /// beta(t). Non-decreasing in t and confined to the declared range.
    pub fn beta_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Constant { beta0 } => {
                if t >= self.start_time {
                    beta0
                } else {
                    0.0
                }
            }
            ScheduleKind::Logistic {
                beta_min,
                beta_max,
                k,
                t0,
            } => {
                if t < self.start_time {
                    beta_min
                } else {
                    let raw = beta_min + (beta_max - beta_min) / (1.0 + (-k * (t + t0)).exp());
                    raw.clamp(beta_min, beta_max)
                }
            }
            ScheduleKind::Switching {
                beta_min,
                beta_max,
                t_switch,
            } => {
                if t < self.start_time || t < t_switch {
                    beta_min
                } else {
                    beta_max
                }
            }
        }
    }

    /// Whether beta(t) has effectively reached its final value. The solver
    /// refuses to declare convergence while the schedule is still moving.
    pub fn settled_at(&self, t: f64) -> bool {
        if t < self.start_time {
            return false;
        }
        match self.kind {
            ScheduleKind::Constant { .. } => true,
            ScheduleKind::Logistic {
                beta_min,
                beta_max,
                k,
                t0,
            } => beta_max == beta_min || k * (t + t0) >= 21.0,
            ScheduleKind::Switching { t_switch, .. } => t >= t_switch,
        }
    }

    /// The weight the schedule saturates to; decides whether a run is
    /// held to the zero-dissipation convergence requirement.
    pub fn final_beta(&self) -> f64 {
        match self.kind {
            ScheduleKind::Constant { beta0 } => beta0,
            ScheduleKind::Logistic { beta_max, .. } => beta_max,
            ScheduleKind::Switching { beta_max, .. } => beta_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_saturates() {
        let s = BetaSchedule::logistic(0.0, 1.0, 20.0, -0.5).unwrap();
        assert!((s.beta_at(1e6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_midpoint() {
        let s = BetaSchedule::logistic(0.0, 10.0, 7.0, -3.0)
            .unwrap()
            .with_start_time(0.0)
            .unwrap();
        assert!((s.beta_at(3.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn switching_edge() {
        let s = BetaSchedule::switching(0.0, 1.0, 0.3).unwrap();
        assert_eq!(s.beta_at(0.29), 0.0);
        assert_eq!(s.beta_at(0.3), 1.0);
    }

    #[test]
    fn constant_respects_onset() {
        let s = BetaSchedule::constant(2.5).unwrap();
        assert_eq!(s.beta_at(0.0), 0.0);
        assert_eq!(s.beta_at(0.1), 2.5);
    }

    #[test]
    fn nondecreasing_and_bounded() {
        let schedules = [
            BetaSchedule::constant(3.0).unwrap(),
            BetaSchedule::logistic(0.5, 4.0, 11.0, -1.0).unwrap(),
            BetaSchedule::switching(0.25, 2.0, 1.7).unwrap(),
        ];
        for s in &schedules {
            let mut prev = f64::NEG_INFINITY;
            for step in 0..2000 {
                let t = step as f64 * 0.005;
                let b = s.beta_at(t);
                assert!(b >= prev - 1e-15, "decreasing at t={t}");
                assert!(b >= 0.0 && b <= s.final_beta() + 1e-15);
                prev = b;
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BetaSchedule::constant(-1.0).is_err());
        assert!(BetaSchedule::logistic(1.0, 0.5, 2.0, 0.0).is_err());
        assert!(BetaSchedule::logistic(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = BetaSchedule::logistic(0.0, 10.0, 20.0, -2.0).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: BetaSchedule = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
