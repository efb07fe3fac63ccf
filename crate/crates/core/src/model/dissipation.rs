//! Mechanical dissipation laws and samplers for their structural hypotheses.
//!
//! The power law is `rho(z) = alpha z + k1 |z|^p z`. It is monotone, so
//! `(rho(u + w) - rho(u), w) >= alpha |w|^2`, and for `alpha = 0` it meets the
//! growth bounds with `K0 = K1 = k1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{VectorBc, VectorField2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationKind {
    None,
    Linear,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationSpec {
    pub kind: DissipationKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub k0: f64,
    #[serde(default)]
    pub k1: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_r_rho")]
    pub r_rho: f64,
    #[serde(default)]
    pub k_c: f64,
}

fn default_p() -> f64 {
    3.0
}
fn default_r_rho() -> f64 {
    1.0
}

impl Default for DissipationSpec {
    fn default() -> Self {
        DissipationSpec::none()
    }
}

impl DissipationSpec {
    pub fn none() -> Self {
        DissipationSpec {
            kind: DissipationKind::None,
            alpha: 0.0,
            k0: 0.0,
            k1: 0.0,
            p: 3.0,
            r_rho: 1.0,
            k_c: 0.0,
        }
    }

    pub fn linear(alpha: f64) -> Self {
        DissipationSpec {
            kind: DissipationKind::Linear,
            alpha,
            k_c: alpha,
            ..DissipationSpec::none()
        }
    }

    pub fn power(alpha: f64, k0: f64, k1: f64, p: f64, r_rho: f64) -> Self {
        DissipationSpec {
            kind: DissipationKind::Power,
            alpha,
            k0,
            k1,
            p,
            r_rho,
            k_c: alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DissipationKind::None => Ok(()),
            DissipationKind::Linear => {
                if self.alpha > 0.0 && self.alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "linear dissipation needs alpha > 0, got {}",
                        self.alpha
                    )))
                }
            }
            DissipationKind::Power => {
                if !(self.alpha >= 0.0) {
                    return Err(Error::Parameter(
                        "power dissipation needs alpha >= 0".into(),
                    ));
                }
                if !(self.k0 > 0.0 && self.k1 > 0.0 && self.r_rho > 0.0) {
                    return Err(Error::Parameter(
                        "power dissipation needs k0, k1, r_rho > 0".into(),
                    ));
                }
                if !(3.0..=4.0).contains(&self.p) {
                    return Err(Error::Parameter(format!(
                        "power exponent must lie in [3, 4], got {}",
                        self.p
                    )));
                }
                Ok(())
            }
        }
    }

    /// Coefficient of the part treated implicitly by the stepper.
    pub fn linear_coefficient(&self) -> f64 {
        match self.kind {
            DissipationKind::None => 0.0,
            DissipationKind::Linear | DissipationKind::Power => self.alpha,
        }
    }

    /// Conjugate exponent `q = (p + 2) / (p + 1)` of the forcing integrability.
    pub fn q(&self) -> f64 {
        (self.p + 2.0) / (self.p + 1.0)
    }

    /// Pointwise law on one Euclidean vector.
    #[inline]
    pub fn apply_point(&self, z: [f64; 2]) -> [f64; 2] {
        match self.kind {
            DissipationKind::None => [0.0, 0.0],
            DissipationKind::Linear => [self.alpha * z[0], self.alpha * z[1]],
            DissipationKind::Power => {
                let c = self.alpha + self.k1 * z[0].hypot(z[1]).powf(self.p);
                [c * z[0], c * z[1]]
            }
        }
    }

    /// Nonlinear remainder `rho(z) - alpha z`.
    #[inline]
    pub(crate) fn nonlinear_point(&self, z: [f64; 2]) -> [f64; 2] {
        match self.kind {
            DissipationKind::Power => {
                let c = self.k1 * z[0].hypot(z[1]).powf(self.p);
                [c * z[0], c * z[1]]
            }
            _ => [0.0, 0.0],
        }
    }
}

/// Applies the law pointwise to a velocity field.
pub fn dissipation_eval(spec: &DissipationSpec, w: &VectorField2) -> Result<VectorField2> {
    spec.validate()?;
    let g = *w.grid();
    let n = g.node_count();
    let mut flat = vec![0.0; 2 * n];
    for k in 0..n {
        let r = spec.apply_point([w.ux()[k], w.uy()[k]]);
        flat[k] = r[0];
        flat[n + k] = r[1];
    }
    let mut out = VectorField2::from_flat(g, &flat, w.bc());
    if w.bc() == VectorBc::DirichletZero {
        out.enforce_bc();
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H2Report {
    pub p: f64,
    pub q: f64,
    pub k0: f64,
    pub k1: f64,
    pub r_rho: f64,
    pub samples: usize,
    /// Worst relative margin of `(rho(z), z) >= K0 |z|^(p+2)`.
    pub lower_margin: f64,
    /// Radius where the lower bound is tightest.
    pub lower_worst_radius: f64,
    /// Worst relative margin of `|rho(z)| <= K1 |z|^(p+1)` over `|z| >= r_rho`.
    pub upper_margin: f64,
    pub upper_worst_radius: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    pub passed: bool,
}

const MARGIN_SLACK: f64 = 1e-12;

fn rel_margin(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs) / scale
    }
}

/// Samples radial shells `|z| in [0, 10 r_rho]` and checks the growth hypotheses.
pub fn validate_h2(spec: &DissipationSpec, n_samples: usize) -> H2Report {
    let shells = ((n_samples as f64).sqrt().ceil() as usize).max(2);
    let dirs = (n_samples / shells).max(1);
    let r_max = 10.0 * spec.r_rho;
    let mut lower = (f64::INFINITY, 0.0);
    let mut upper = (f64::INFINITY, f64::NAN);
    let mut count = 0;
    for s in 0..shells {
        let r = r_max * s as f64 / (shells - 1) as f64;
        for d in 0..dirs {
            let th = std::f64::consts::TAU * (d as f64 + 0.5) / dirs as f64;
            let z = [r * th.cos(), r * th.sin()];
            let rz = spec.apply_point(z);
            let dot = rz[0] * z[0] + rz[1] * z[1];
            let m = rel_margin(dot, spec.k0 * r.powf(spec.p + 2.0));
            if m < lower.0 {
                lower = (m, r);
            }
            if r >= spec.r_rho {
                let m = rel_margin(spec.k1 * r.powf(spec.p + 1.0), rz[0].hypot(rz[1]));
                if m < upper.0 {
                    upper = (m, r);
                }
            }
            count += 1;
        }
    }
    if upper.0 == f64::INFINITY {
        upper.0 = 0.0;
    }
    let lower_holds = lower.0 >= -MARGIN_SLACK;
    let upper_holds = upper.0 >= -MARGIN_SLACK;
    H2Report {
        p: spec.p,
        q: spec.q(),
        k0: spec.k0,
        k1: spec.k1,
        r_rho: spec.r_rho,
        samples: count,
        lower_margin: lower.0,
        lower_worst_radius: lower.1,
        upper_margin: upper.0,
        upper_worst_radius: upper.1,
        lower_holds,
        upper_holds,
        passed: lower_holds && upper_holds,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KcReport {
    pub k_c: f64,
    pub samples: usize,
    /// Worst margin of `(rho(u + w) - rho(u), z) - K_c (w, z)`, scaled by `|w| |z|`.
    pub worst_margin: f64,
    /// `(u, w, z)` at the worst margin.
    pub witness: [[f64; 2]; 3],
    pub passed: bool,
}

/// Samples triples `(u, w, z)` with `z` a nonnegative multiple of `w` and checks
/// `(rho(u + w) - rho(u), z) >= K_c (w, z)`.
pub fn validate_kc(spec: &DissipationSpec, n_samples: usize) -> KcReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b63);
    let scale = 10.0 * spec.r_rho;
    let mut worst = (f64::INFINITY, [[0.0; 2]; 3]);
    for _ in 0..n_samples.max(1) {
        let mut draw = || {
            [
                scale * (2.0 * rng.gen::<f64>() - 1.0),
                scale * (2.0 * rng.gen::<f64>() - 1.0),
            ]
        };
        let u = draw();
        let w = draw();
        let s: f64 = 2.0 * rng.gen::<f64>();
        let z = [s * w[0], s * w[1]];
        let a = spec.apply_point([u[0] + w[0], u[1] + w[1]]);
        let b = spec.apply_point(u);
        let lhs = (a[0] - b[0]) * z[0] + (a[1] - b[1]) * z[1];
        let rhs = spec.k_c * (w[0] * z[0] + w[1] * z[1]);
        let norm = w[0].hypot(w[1]) * z[0].hypot(z[1]);
        let m = if norm > 0.0 { (lhs - rhs) / norm } else { 0.0 };
        if m < worst.0 {
            worst = (m, [u, w, z]);
        }
    }
    let slack = 1e-12 * (1.0 + spec.alpha + spec.k_c);
    KcReport {
        k_c: spec.k_c,
        samples: n_samples.max(1),
        worst_margin: worst.0,
        witness: worst.1,
        passed: worst.0 >= -slack,
    }
}
