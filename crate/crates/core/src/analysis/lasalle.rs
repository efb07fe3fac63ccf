//! Finite-horizon trends of a trajectory towards the invariant set
//! `{h = 0, div u' = 0, rho u'' + L u = 0}`.

use serde::{Deserialize, Serialize};

use crate::energy::{decay_rate_fit, energy_total};
use crate::model::MaterialParams;
use crate::ops::{divergence, gradient, norm_l2};
use crate::stepper::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LasalleOptions {
    /// Allowed sample-to-sample energy increase, relative to `E(0)`.
    pub energy_tol_rel: f64,
    /// `|h|(end) / |h|(0)` below which `h` counts as small.
    pub h_ratio_threshold: f64,
}

impl Default for LasalleOptions {
    fn default() -> Self {
        LasalleOptions {
            energy_tol_rel: 1e-8,
            h_ratio_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LasalleReport {
    pub times: Vec<f64>,
    pub h_l2: Vec<f64>,
    pub grad_h_l2: Vec<f64>,
    pub div_ut_l2: Vec<f64>,
    pub energy: Vec<f64>,
    pub h_ratio: f64,
    pub energy_ratio: f64,
    pub energy_max_increase: f64,
    pub energy_monotone: bool,
    pub h_small: bool,
    /// Fitted exponential rates over the second half of the run.
    pub h_rate: Option<f64>,
    pub energy_rate: Option<f64>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

pub fn lasalle_report(
    traj: &Trajectory,
    params: &MaterialParams,
    opts: &LasalleOptions,
) -> LasalleReport {
    let times = traj.times();
    let h_l2: Vec<f64> = traj.samples.iter().map(|s| norm_l2(&s.h)).collect();
    let grad_h_l2 = traj
        .samples
        .iter()
        .map(|s| norm_l2(&gradient(&s.h)))
        .collect();
    let div_ut_l2 = traj
        .samples
        .iter()
        .map(|s| norm_l2(&divergence(&s.ut)))
        .collect();
    let energy: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| energy_total(s, params))
        .collect();
    let e0 = energy[0];
    let energy_max_increase = energy.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let h_ratio = ratio(*h_l2.last().unwrap(), h_l2[0]);
    let fit = |v: &[f64]| {
        let t_end = *times.last().unwrap();
        decay_rate_fit(&times, v, (0.5 * t_end, t_end))
            .ok()
            .map(|(r, _)| r)
    };
    let (h_rate, energy_rate) = if h_l2[0] > 0.0 && e0 > 0.0 {
        (fit(&h_l2), fit(&energy))
    } else {
        (None, None)
    };
    LasalleReport {
        h_ratio,
        energy_ratio: ratio(*energy.last().unwrap(), e0),
        energy_monotone: energy_max_increase <= opts.energy_tol_rel * e0,
        energy_max_increase,
        h_small: h_ratio <= opts.h_ratio_threshold,
        h_rate,
        energy_rate,
        times,
        h_l2,
        grad_h_l2,
        div_ut_l2,
        energy,
    }
}
