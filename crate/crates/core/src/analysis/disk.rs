//! Azimuthal Bessel modes `xi = J1(zeta_m r) e_theta` on the unit disk.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::bessel::{bessel_j0, bessel_j1, bessel_j1_zero};
use crate::error::{Error, Result};
use crate::model::MaterialParams;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiskModeSpec {
    pub m: usize,
    pub zeta_m: f64,
    /// Radial intervals of the composite Simpson rule (even).
    pub radial_points: usize,
}

impl DiskModeSpec {
    pub fn new(m: usize, radial_points: usize) -> Result<Self> {
        let s = DiskModeSpec {
            m,
            zeta_m: bessel_j1_zero(m)?,
            radial_points,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Parameter("mode index starts at 1".into()));
        }
        if self.radial_points < 4 || !self.radial_points.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "radial points must be even and >= 4, got {}",
                self.radial_points
            )));
        }
        if !(bessel_j1(self.zeta_m).abs() <= 1e-12) {
            return Err(Error::Parameter(format!(
                "zeta_m = {} is not a zero of J1",
                self.zeta_m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiskModeReport {
    pub m: usize,
    pub zeta_m: f64,
    pub radial_points: usize,
    pub xi_norm: f64,
    /// `||-Lap xi - zeta^2 xi||`, derivatives by fourth-order differences.
    pub residual_eigen: f64,
    pub residual_div: f64,
    pub residual_boundary: f64,
    /// `||rho u'' + L u||` of the standing wave, max over time.
    pub residual_elastic: f64,
    /// `||B0 div u'||`, max over time.
    pub residual_induction: f64,
    pub angular_frequency: f64,
    /// `(max E - min E) / max E` over one oscillation.
    pub energy_variation: f64,
}

/// Composite Simpson rule for `int_0^1 f(r) 2 pi r dr`.
fn disk_integral(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / n as f64;
    let s: f64 = (0..=n)
        .map(|i| {
            let r = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f(r) * 2.0 * PI * r
        })
        .sum();
    s * h / 3.0
}

/// Residuals of the eigen, divergence and boundary conditions of the mode
/// and of the standing wave `u = xi cos(zeta sqrt(mu / rho_m) t)`, `h = 0`.
pub fn disk_mode_residual(spec: &DiskModeSpec, params: &MaterialParams) -> Result<DiskModeReport> {
    spec.validate()?;
    params.validate()?;
    let z = spec.zeta_m;
    let n = spec.radial_points;
    let h = 1.0 / n as f64;
    let v = |r: f64| bessel_j1(z * r);

    let eigen = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let (p2, p1, c, m1, m2) = (v(r + 2.0 * h), v(r + h), v(r), v(r - h), v(r - 2.0 * h));
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
        -(d2 + d1 / r - c / (r * r)) - z * z * c
    };
    let residual_eigen = disk_integral(n, |r| eigen(r).powi(2)).sqrt();
    if !residual_eigen.is_finite() {
        return Err(Error::Domain(
            "radial quadrature produced a non-finite residual".into(),
        ));
    }

    // (1/r) d(r v_r)/dr + (1/r) dv_theta/dtheta with v_r = 0 and v_theta free of theta
    let residual_div = 0.0;
    let residual_boundary = v(1.0).abs();

    let xi_sq = disk_integral(n, |r| v(r).powi(2));
    let grad_sq = disk_integral(n, |r| {
        if r == 0.0 {
            return 0.5 * z * z;
        }
        let x = z * r;
        let dv = z * (bessel_j0(x) - bessel_j1(x) / x);
        dv * dv + (v(r) / r).powi(2)
    });
    let omega = z * (params.mu / params.rho_m).sqrt();
    let energies: Vec<f64> = (0..32)
        .map(|k| {
            let t = k as f64 / 32.0 * 2.0 * PI / omega;
            let (c, s) = ((omega * t).cos(), (omega * t).sin());
            0.5 * (params.rho_m * omega * omega * s * s * xi_sq + params.mu * c * c * grad_sq)
        })
        .collect();
    let e_max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(DiskModeReport {
        m: spec.m,
        zeta_m: z,
        radial_points: n,
        xi_norm: xi_sq.sqrt(),
        residual_eigen,
        residual_div,
        residual_boundary,
        residual_elastic: params.mu * residual_eigen,
        residual_induction: params.b0.abs() * omega * residual_div,
        angular_frequency: omega,
        energy_variation: (e_max - e_min) / e_max,
    })
}
