use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a base hyperparameter evolves with the step index `t` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    #[default]
    Constant,
    /// `base / sqrt(t)`.
    InvSqrt,
    /// Linear ramp from zero to `base` over `warmup_steps`, then linear decay
    /// reaching zero at `end_step`.
    LinearWarmupDecay { warmup_steps: u64, end_step: u64 },
    /// `base * zeta^t`.
    Geometric { zeta: f64 },
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScheduleSpec::Constant | ScheduleSpec::InvSqrt => Ok(()),
            ScheduleSpec::Geometric { zeta } => {
                if zeta > 0.0 && zeta < 1.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("geometric schedule needs 0 < zeta < 1, got {zeta}")))
                }
            }
            ScheduleSpec::LinearWarmupDecay { warmup_steps, end_step } => {
                if end_step == 0 {
                    Err(Error::config("linear_warmup_decay needs end_step >= 1"))
                } else if warmup_steps >= end_step {
                    Err(Error::config(format!(
                        "linear_warmup_decay needs warmup_steps < end_step, got {warmup_steps} >= {end_step}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, base: f64, t: u64) -> Result<f64> {
        schedule_eval(self, base, t)
    }
}

/// Value of a scheduled hyperparameter at step `t >= 1`.
pub fn schedule_eval(spec: &ScheduleSpec, base: f64, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("schedules are defined for t >= 1"));
    }
    let tf = t as f64;
    Ok(match *spec {
        ScheduleSpec::Constant => base,
        ScheduleSpec::InvSqrt => base / tf.sqrt(),
        ScheduleSpec::Geometric { zeta } => base * zeta.powf(tf),
        ScheduleSpec::LinearWarmupDecay { warmup_steps, end_step } => {
            if t <= warmup_steps {
                base * tf / warmup_steps as f64
            } else if t >= end_step {
                0.0
            } else {
                let span = (end_step - warmup_steps) as f64;
                base * (end_step - t) as f64 / span
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_sqrt() {
        assert_eq!(schedule_eval(&ScheduleSpec::InvSqrt, 0.4, 4).unwrap(), 0.2);
    }

    #[test]
    fn geometric() {
        let v = schedule_eval(&ScheduleSpec::Geometric { zeta: 0.5 }, 0.9, 3).unwrap();
        assert!((v - 0.1125).abs() < 1e-15);
    }

    #[test]
    fn warmup_then_decay() {
        let s = ScheduleSpec::LinearWarmupDecay { warmup_steps: 10, end_step: 20 };
        assert_eq!(s.eval(1.0, 15).unwrap(), 0.5);
        assert_eq!(s.eval(1.0, 5).unwrap(), 0.5);
        assert_eq!(s.eval(1.0, 10).unwrap(), 1.0);
        assert_eq!(s.eval(1.0, 20).unwrap(), 0.0);
        assert_eq!(s.eval(1.0, 500).unwrap(), 0.0);
    }

    #[test]
    fn zero_step_rejected() {
        assert!(matches!(
            schedule_eval(&ScheduleSpec::Constant, 1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(ScheduleSpec::Geometric { zeta: 1.0 }.validate().is_err());
        assert!(ScheduleSpec::Geometric { zeta: 0.0 }.validate().is_err());
        assert!(ScheduleSpec::Geometric { zeta: 0.99 }.validate().is_ok());
        assert!(ScheduleSpec::LinearWarmupDecay { warmup_steps: 5, end_step: 5 }
            .validate()
            .is_err());
    }
}
