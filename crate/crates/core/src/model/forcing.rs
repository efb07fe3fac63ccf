//! Time-periodic body forcing built from separable terms `g(t) phi(x, y)`.
//!
//! Each `g` is a trigonometric polynomial in `2 pi t / T`, so periodicity
//! holds by construction.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;
use crate::ops::{dirichlet_form_raw, weighted_dot_raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingTarget {
    F1,
    F2x,
    F2y,
}

/// `a0 + sum_k a_k cos(k w t) + b_k sin(k w t)` with `w = 2 pi / T`.
/// `cos[0]` is the constant term; `sin[k - 1]` multiplies `sin(k w t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigPoly {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        TrigPoly {
            cos: vec![c],
            sin: vec![],
        }
    }

    pub fn eval(&self, t: f64, period: f64) -> f64 {
        let w = TAU / period;
        let mut s = self.cos.first().copied().unwrap_or(0.0);
        for (k, a) in self.cos.iter().enumerate().skip(1) {
            s += a * (k as f64 * w * t).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            s += b * ((k + 1) as f64 * w * t).sin();
        }
        s
    }

    fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Constant,
    /// `sin(kx pi x / lx) sin(ky pi y / ly)`
    SinMode {
        kx: u32,
        ky: u32,
    },
    /// `cos(kx pi x / lx) cos(ky pi y / ly)`
    CosMode {
        kx: u32,
        ky: u32,
    },
    /// `exp(-((x - x0)^2 + (y - y0)^2) / (2 sigma^2))`
    Gaussian {
        x0: f64,
        y0: f64,
        sigma: f64,
    },
}

impl Shape {
    pub fn eval(&self, x: f64, y: f64, lx: f64, ly: f64) -> f64 {
        match *self {
            Shape::Constant => 1.0,
            Shape::SinMode { kx, ky } => {
                (kx as f64 * PI * x / lx).sin() * (ky as f64 * PI * y / ly).sin()
            }
            Shape::CosMode { kx, ky } => {
                (kx as f64 * PI * x / lx).cos() * (ky as f64 * PI * y / ly).cos()
            }
            Shape::Gaussian { x0, y0, sigma } => {
                (-((x - x0).powi(2) + (y - y0).powi(2)) / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    pub target: ForcingTarget,
    pub g_coeffs: TrigPoly,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub period: f64,
    #[serde(default)]
    pub terms: Vec<ForcingTerm>,
}

impl Forcing {
    pub fn zero(period: f64) -> Self {
        Forcing {
            period,
            terms: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Parameter(format!(
                "forcing period must be positive, got {}",
                self.period
            )));
        }
        for t in &self.terms {
            if t.g_coeffs
                .cos
                .iter()
                .chain(&t.g_coeffs.sin)
                .any(|c| !c.is_finite())
            {
                return Err(Error::Parameter("non-finite forcing coefficient".into()));
            }
            if let Shape::Gaussian { sigma, .. } = t.shape {
                if !(sigma > 0.0) {
                    return Err(Error::Parameter("gaussian width must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.g_coeffs.is_zero())
    }

    /// Multiplies every amplitude by `s`.
    pub fn scaled(&self, s: f64) -> Forcing {
        let mut f = self.clone();
        for t in &mut f.terms {
            t.g_coeffs
                .cos
                .iter_mut()
                .chain(t.g_coeffs.sin.iter_mut())
                .for_each(|c| *c *= s);
        }
        f
    }
}

/// Forcing with spatial shapes sampled on a grid.
#[derive(Debug, Clone)]
pub struct GriddedForcing {
    grid: Grid2D,
    period: f64,
    terms: Vec<(ForcingTarget, TrigPoly, Vec<f64>)>,
}

impl GriddedForcing {
    pub fn new(forcing: &Forcing, grid: Grid2D) -> Result<Self> {
        forcing.validate()?;
        let terms = forcing
            .terms
            .iter()
            .filter(|t| !t.g_coeffs.is_zero())
            .map(|t| {
                let phi = ScalarField::from_fn(grid, ScalarBc::None, |x, y| {
                    t.shape.eval(x, y, grid.lx(), grid.ly())
                });
                (t.target, t.g_coeffs.clone(), phi.into_values())
            })
            .collect();
        Ok(GriddedForcing {
            grid,
            period: forcing.period,
            terms,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Writes `f1(t)` and `f2(t) = [f2x; f2y]` into flat buffers. The vector
    /// part is zeroed on the boundary, where the displacement is pinned.
    pub fn eval_into(&self, t: f64, f1: &mut [f64], f2: &mut [f64]) {
        let n = self.grid.node_count();
        f1.iter_mut().for_each(|v| *v = 0.0);
        f2.iter_mut().for_each(|v| *v = 0.0);
        for (target, g, phi) in &self.terms {
            let a = g.eval(t, self.period);
            let dst = match target {
                ForcingTarget::F1 => &mut f1[..],
                ForcingTarget::F2x => &mut f2[..n],
                ForcingTarget::F2y => &mut f2[n..],
            };
            for (d, p) in dst.iter_mut().zip(phi) {
                *d += a * p;
            }
        }
        let g = self.grid;
        for j in 0..=g.ny() {
            for i in 0..=g.nx() {
                if g.is_boundary(i, j) {
                    let k = g.idx(i, j);
                    f2[k] = 0.0;
                    f2[n + k] = 0.0;
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> (ScalarField, VectorField2) {
        let n = self.grid.node_count();
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; 2 * n];
        self.eval_into(t, &mut f1, &mut f2);
        (
            ScalarField::from_values(self.grid, f1, ScalarBc::Neumann).expect("finite forcing"),
            VectorField2::from_flat(self.grid, &f2, VectorBc::DirichletZero),
        )
    }

    fn time_integral(&self, samples: usize, pointwise: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        // periodic integrand: the rectangle rule is spectrally accurate
        let n = self.grid.node_count();
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; 2 * n];
        let dt = self.period / samples as f64;
        (0..samples)
            .map(|k| {
                self.eval_into(k as f64 * dt, &mut f1, &mut f2);
                pointwise(&f1, &f2)
            })
            .sum::<f64>()
            * dt
    }

    /// `int_0^T |f(t)|_2 dt`.
    pub fn l1_l2_norm(&self) -> f64 {
        let g = self.grid;
        let n = g.node_count();
        self.time_integral(256, |f1, f2| {
            (weighted_dot_raw(&g, f1, f1)
                + weighted_dot_raw(&g, &f2[..n], &f2[..n])
                + weighted_dot_raw(&g, &f2[n..], &f2[n..]))
            .sqrt()
        })
    }

    /// `int_0^T ||f(t)||_{H^1} dt` with the edge-difference gradient.
    pub fn l1_h1_norm(&self) -> f64 {
        let g = self.grid;
        let n = g.node_count();
        self.time_integral(256, |f1, f2| {
            let l2 = weighted_dot_raw(&g, f1, f1)
                + weighted_dot_raw(&g, &f2[..n], &f2[..n])
                + weighted_dot_raw(&g, &f2[n..], &f2[n..]);
            let grad = dirichlet_form_raw(&g, f1, f1)
                + dirichlet_form_raw(&g, &f2[..n], &f2[..n])
                + dirichlet_form_raw(&g, &f2[n..], &f2[n..]);
            (l2 + grad).sqrt()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Forcing {
        Forcing {
            period: 2.0,
            terms: vec![
                ForcingTerm {
                    target: ForcingTarget::F2x,
                    g_coeffs: TrigPoly {
                        cos: vec![0.0, 0.5],
                        sin: vec![0.25],
                    },
                    shape: Shape::SinMode { kx: 1, ky: 1 },
                },
                ForcingTerm {
                    target: ForcingTarget::F1,
                    g_coeffs: TrigPoly {
                        cos: vec![],
                        sin: vec![0.0, 1.0],
                    },
                    shape: Shape::CosMode { kx: 1, ky: 0 },
                },
            ],
        }
    }

    #[test]
    fn trig_poly_is_periodic() {
        let p = TrigPoly {
            cos: vec![0.3, 1.0, -0.2],
            sin: vec![0.7, 0.1],
        };
        for k in 0..10 {
            let t = 0.37 * k as f64;
            assert!((p.eval(t, 1.5) - p.eval(t + 1.5, 1.5)).abs() < 1e-12);
        }
        assert_eq!(p.eval(0.0, 1.5), 0.3 + 1.0 - 0.2);
    }

    #[test]
    fn gridded_forcing_endpoints_match() {
        let g = Grid2D::unit_square(8).unwrap();
        let f = GriddedForcing::new(&sample(), g).unwrap();
        let (a1, a2) = f.eval(0.0);
        let (b1, b2) = f.eval(2.0);
        for (x, y) in a1.values().iter().zip(b1.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a2.to_flat().iter().zip(b2.to_flat()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(a2.boundary_is_zero());
    }

    #[test]
    fn zero_forcing_norms() {
        let g = Grid2D::unit_square(8).unwrap();
        let f = GriddedForcing::new(&Forcing::zero(1.0), g).unwrap();
        assert!(f.is_zero());
        assert_eq!(f.l1_l2_norm(), 0.0);
    }

    #[test]
    fn constant_amplitude_norm() {
        // f2x = c sin(pi x) sin(pi y) for all t: |f|_2 = c / 2, integral over T = c T / 2
        let g = Grid2D::unit_square(64).unwrap();
        let f = Forcing {
            period: 3.0,
            terms: vec![ForcingTerm {
                target: ForcingTarget::F2x,
                g_coeffs: TrigPoly::constant(2.0),
                shape: Shape::SinMode { kx: 1, ky: 1 },
            }],
        };
        let gf = GriddedForcing::new(&f, g).unwrap();
        assert!((gf.l1_l2_norm() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn json_roundtrip() {
        let f = sample();
        let s = serde_json::to_string(&f).unwrap();
        let back: Forcing = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        assert!(s.contains("\"kind\":\"sin_mode\""));
    }
}
