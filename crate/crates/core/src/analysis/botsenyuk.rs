//! Continuation lemma for `x <= gamma + a x^2`.
//!
//! With `1 - 4 a gamma(t) > 0` the quadratic `a z^2 - z + gamma = 0` has the
//! roots `xi1 <= xi2`. A continuous `x` obeying the inequality that starts
//! below `xi1` stays below `xi1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotsenyukInput {
    pub t_grid: Vec<f64>,
    pub x: Vec<f64>,
    pub gamma: Vec<f64>,
    pub a: f64,
}

impl BotsenyukInput {
    pub fn validate(&self) -> Result<()> {
        let n = self.t_grid.len();
        if n == 0 {
            return Err(Error::InsufficientData("empty time grid".into()));
        }
        for (name, len) in [("x", self.x.len()), ("gamma", self.gamma.len())] {
            if len != n {
                return Err(Error::Parameter(format!(
                    "{name} has {len} samples, the time grid {n}"
                )));
            }
        }
        if !self.t_grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Parameter(
                "time grid must be strictly increasing".into(),
            ));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Parameter(format!(
                "a must be positive, got {}",
                self.a
            )));
        }
        if self
            .x
            .iter()
            .chain(&self.gamma)
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Parameter(
                "x and gamma must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BotsenyukStatus {
    /// `1 - 4 a gamma <= 0` at some sample.
    Inadmissible,
    /// The inequality or `x(0) < xi1(0)` fails; the lemma says nothing.
    HypothesisNotMet,
    Certified,
    /// Hypotheses hold but `x` leaves the lower branch.
    ConclusionViolated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BotsenyukReport {
    pub status: BotsenyukStatus,
    pub first_inadmissible_t: Option<f64>,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    /// Max of `|a xi^2 - xi + gamma|` over both roots and all samples.
    pub root_residual_max: f64,
    pub inequality_holds: bool,
    pub first_inequality_violation_t: Option<f64>,
    pub starts_below: bool,
    pub conclusion_holds: bool,
    pub first_conclusion_violation_t: Option<f64>,
}

/// Roots of `a z^2 - z + gamma`, the small one in cancellation-free form.
fn roots(a: f64, gamma: f64) -> Option<(f64, f64)> {
    let d = 1.0 - 4.0 * a * gamma;
    if !(d > 0.0) {
        return None;
    }
    let s = 1.0 + d.sqrt();
    Some((2.0 * gamma / s, s / (2.0 * a)))
}

pub fn botsenyuk_check(input: &BotsenyukInput) -> Result<BotsenyukReport> {
    input.validate()?;
    let a = input.a;
    let n = input.t_grid.len();
    let mut xi1 = Vec::with_capacity(n);
    let mut xi2 = Vec::with_capacity(n);
    for (k, &g) in input.gamma.iter().enumerate() {
        match roots(a, g) {
            Some((r1, r2)) => {
                xi1.push(r1);
                xi2.push(r2);
            }
            None => {
                return Ok(BotsenyukReport {
                    status: BotsenyukStatus::Inadmissible,
                    first_inadmissible_t: Some(input.t_grid[k]),
                    xi1,
                    xi2,
                    root_residual_max: 0.0,
                    inequality_holds: false,
                    first_inequality_violation_t: None,
                    starts_below: false,
                    conclusion_holds: false,
                    first_conclusion_violation_t: None,
                });
            }
        }
    }
    let root_residual_max = (0..n)
        .flat_map(|k| [xi1[k], xi2[k]].map(|z| (a * z * z - z + input.gamma[k]).abs()))
        .fold(0.0, f64::max);
    let first_inequality_violation_t = (0..n)
        .find(|&k| {
            let x = input.x[k];
            x > input.gamma[k] + a * x * x
        })
        .map(|k| input.t_grid[k]);
    let first_conclusion_violation_t = (0..n)
        .find(|&k| input.x[k] > xi1[k])
        .map(|k| input.t_grid[k]);
    let inequality_holds = first_inequality_violation_t.is_none();
    let starts_below = input.x[0] < xi1[0];
    let conclusion_holds = first_conclusion_violation_t.is_none();
    let status = if !(inequality_holds && starts_below) {
        BotsenyukStatus::HypothesisNotMet
    } else if conclusion_holds {
        BotsenyukStatus::Certified
    } else {
        BotsenyukStatus::ConclusionViolated
    };
    Ok(BotsenyukReport {
        status,
        first_inadmissible_t: None,
        xi1,
        xi2,
        root_residual_max,
        inequality_holds,
        first_inequality_violation_t,
        starts_below,
        conclusion_holds,
        first_conclusion_violation_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(x: Vec<f64>, gamma: Vec<f64>, a: f64) -> BotsenyukInput {
        let t_grid = (0..x.len()).map(|k| k as f64 * 0.1).collect();
        BotsenyukInput {
            t_grid,
            x,
            gamma,
            a,
        }
    }

    #[test]
    fn degenerate_gamma() {
        let r = botsenyuk_check(&input(vec![0.0, 0.1], vec![0.0, 0.0], 2.0)).unwrap();
        assert_eq!(r.status, BotsenyukStatus::HypothesisNotMet);
        assert_eq!(r.xi1, vec![0.0, 0.0]);
        assert_eq!(r.xi2, vec![0.5, 0.5]);
    }

    #[test]
    fn quarter_three_quarters() {
        let r = botsenyuk_check(&input(vec![0.2; 3], vec![3.0 / 16.0; 3], 1.0)).unwrap();
        assert_eq!((r.xi1[0], r.xi2[0]), (0.25, 0.75));
        assert_eq!(r.status, BotsenyukStatus::Certified);
    }

    #[test]
    fn certificate_below_root() {
        let gamma: Vec<f64> = (0..50)
            .map(|k| 0.1 + 0.05 * (k as f64 * 0.3).sin())
            .collect();
        let a = 1.5;
        let x = gamma
            .iter()
            .map(|&g| roots(a, g).unwrap().0 - 1e-3)
            .collect();
        let r = botsenyuk_check(&input(x, gamma, a)).unwrap();
        assert_eq!(r.status, BotsenyukStatus::Certified);
        assert!(r.root_residual_max < 1e-15);
    }

    #[test]
    fn jump_above_upper_root_detected() {
        let mut x = vec![0.1; 5];
        x[3] = 0.95;
        let r = botsenyuk_check(&input(x, vec![3.0 / 16.0; 5], 1.0)).unwrap();
        assert_eq!(r.status, BotsenyukStatus::ConclusionViolated);
        assert_eq!(r.first_conclusion_violation_t, Some(0.30000000000000004));
    }

    #[test]
    fn inadmissible_reports_time() {
        let r = botsenyuk_check(&input(vec![0.0; 3], vec![0.1, 0.3, 0.1], 1.0)).unwrap();
        assert_eq!(r.status, BotsenyukStatus::Inadmissible);
        assert_eq!(r.first_inadmissible_t, Some(0.1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(botsenyuk_check(&input(vec![0.0], vec![0.0, 0.0], 1.0)).is_err());
        assert!(botsenyuk_check(&input(vec![-1.0], vec![0.0], 1.0)).is_err());
        assert!(botsenyuk_check(&input(vec![0.0], vec![0.0], 0.0)).is_err());
    }
}
