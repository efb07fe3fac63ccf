//! Closed-form smallness conditions on the data and the diffusivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub e1_0: f64,
    pub f_h1_l1: f64,
    pub nu1: f64,
    pub c_mu: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub margin: f64,
    /// Largest `E1(0)` that still satisfies the condition for the given
    /// forcing, or `None` if the forcing alone violates it.
    pub e1_threshold: Option<f64>,
}

/// `6 c^2 E1(0) + 2 sqrt(2) nu1 c sqrt(E1(0)) + 8 c nu1 F < nu1^2`.
pub fn condition_regularity(
    e1_0: f64,
    f_h1_l1: f64,
    nu1: f64,
    c_mu: f64,
) -> Result<RegularityReport> {
    if !(e1_0 >= 0.0 && f_h1_l1 >= 0.0 && nu1 > 0.0 && c_mu > 0.0) {
        return Err(Error::Parameter(
            "regularity condition needs E1(0), F >= 0 and nu1, c_mu > 0".into(),
        ));
    }
    let c = c_mu;
    let lhs =
        6.0 * c * c * e1_0 + 2.0 * nu1 * 2f64.sqrt() * c * e1_0.sqrt() + 8.0 * c * nu1 * f_h1_l1;
    let rhs = nu1 * nu1;
    // positive root in s = sqrt(E1(0)) of 6c^2 s^2 + 2 sqrt(2) nu1 c s + (8 c nu1 F - nu1^2)
    let k = 8.0 * c * nu1 * f_h1_l1 - rhs;
    let e1_threshold = (k < 0.0).then(|| {
        let b = 2.0 * 2f64.sqrt() * nu1 * c;
        let s = -2.0 * k / (b + (b * b - 24.0 * c * c * k).sqrt());
        s * s
    });
    Ok(RegularityReport {
        e1_0,
        f_h1_l1,
        nu1,
        c_mu,
        lhs,
        rhs,
        satisfied: lhs < rhs,
        margin: rhs - lhs,
        e1_threshold,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub nu1: f64,
    pub c_e: f64,
    pub c_omega: f64,
    pub c_small: f64,
    pub threshold: f64,
    pub satisfied: bool,
    pub margin: f64,
    /// `2 sqrt(2) C_E sqrt(C_Omega)`.
    pub inline_threshold: f64,
    pub inline_satisfied: bool,
}

/// `nu1 > 2 sqrt(C_Omega) max(sqrt(2) C_E, 2 c C_E^2)`.
pub fn condition_stability(
    nu1: f64,
    c_e: f64,
    c_omega: f64,
    c_small: f64,
) -> Result<StabilityReport> {
    if !(nu1 > 0.0 && c_e >= 0.0 && c_omega > 0.0 && c_small > 0.0) {
        return Err(Error::Parameter(
            "stability condition needs positive inputs".into(),
        ));
    }
    let root = c_omega.sqrt();
    let threshold = 2.0 * root * (2f64.sqrt() * c_e).max(2.0 * c_small * c_e * c_e);
    let inline_threshold = 2.0 * 2f64.sqrt() * c_e * root;
    Ok(StabilityReport {
        nu1,
        c_e,
        c_omega,
        c_small,
        threshold,
        satisfied: nu1 > threshold,
        margin: nu1 - threshold,
        inline_threshold,
        inline_satisfied: nu1 > inline_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_data_satisfies() {
        let r = condition_regularity(0.0, 0.0, 0.3, 2.0).unwrap();
        assert!(r.satisfied && r.lhs == 0.0 && r.rhs == 0.09);
        assert!(condition_stability(1e-9, 0.0, 3.0, 1.0).unwrap().satisfied);
    }

    #[test]
    fn stability_arithmetic() {
        let r = condition_stability(3.0, 1.0, 1.0, 0.5).unwrap();
        assert!((r.threshold - 2.0 * 2f64.sqrt()).abs() < 1e-15 && r.satisfied);
        assert!(!condition_stability(2.8, 1.0, 1.0, 0.5).unwrap().satisfied);
    }

    #[test]
    fn regularity_threshold_is_the_crossover() {
        let (f, nu, c) = (0.01, 0.8, 0.7);
        let t = condition_regularity(0.0, f, nu, c)
            .unwrap()
            .e1_threshold
            .unwrap();
        assert!(
            condition_regularity(t * (1.0 - 1e-9), f, nu, c)
                .unwrap()
                .satisfied
        );
        assert!(
            !condition_regularity(t * (1.0 + 1e-9), f, nu, c)
                .unwrap()
                .satisfied
        );
        assert!(condition_regularity(0.0, 1.0, 0.1, 1.0)
            .unwrap()
            .e1_threshold
            .is_none());
    }

    #[test]
    fn large_diffusivity_satisfies() {
        let sat: Vec<bool> = (0..40)
            .map(|k| {
                condition_regularity(2.0, 0.5, 0.5 * 1.3f64.powi(k), 1.0)
                    .unwrap()
                    .satisfied
            })
            .collect();
        let first = sat.iter().position(|&s| s).unwrap();
        assert!(first > 0 && sat[first..].iter().all(|&s| s));
    }
}
