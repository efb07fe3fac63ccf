//! Discrete differential operators on the node grid.
//!
//! The collocated first-derivative pair is a summation-by-parts operator:
//! centered differences inside, one-sided at the boundary. Against the
//! trapezoid inner product it satisfies
//!
//! ```text
//! (gradient h, w) + (h, divergence w) = 0    whenever w vanishes on the boundary,
//! ```
//!
//! which is the discrete integration by parts that makes the coupling terms
//! cancel in the energy balance. Second-order operators (`laplacian_neumann`
//! and the `mu` part of `lame_apply`) are the compact 5-point stencils; their
//! quadratic forms are the edge-difference form [`dirichlet_form`].

use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;

/// Summation-by-parts derivative along x of a nodal array.
pub(crate) fn d1x(g: &Grid2D, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let inv = 1.0 / g.dx();
    let half = 0.5 * inv;
    for j in 0..=ny {
        let r = g.idx(0, j);
        out[r] = (f[r + 1] - f[r]) * inv;
        for i in 1..nx {
            out[r + i] = (f[r + i + 1] - f[r + i - 1]) * half;
        }
        out[r + nx] = (f[r + nx] - f[r + nx - 1]) * inv;
    }
}

/// Summation-by-parts derivative along y of a nodal array.
pub(crate) fn d1y(g: &Grid2D, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let row = g.row_len();
    let inv = 1.0 / g.dy();
    let half = 0.5 * inv;
    for i in 0..=nx {
        out[i] = (f[i + row] - f[i]) * inv;
        for j in 1..ny {
            let k = g.idx(i, j);
            out[k] = (f[k + row] - f[k - row]) * half;
        }
        let k = g.idx(i, ny);
        out[k] = (f[k] - f[k - row]) * inv;
    }
}

/// Collocated second-order gradient (one-sided at the boundary).
pub fn gradient(h: &ScalarField) -> VectorField2 {
    let g = *h.grid();
    let n = g.node_count();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    d1x(&g, h.values(), &mut gx);
    d1y(&g, h.values(), &mut gy);
    VectorField2::from_flat(g, &[gx, gy].concat(), VectorBc::None)
}

/// Collocated divergence; the negative adjoint of [`gradient`] on zero-boundary fields.
pub fn divergence(w: &VectorField2) -> ScalarField {
    let g = *w.grid();
    let n = g.node_count();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    d1x(&g, w.ux(), &mut a);
    d1y(&g, w.uy(), &mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    ScalarField::from_values(g, a, ScalarBc::None).expect("finite input gives finite divergence")
}

/// 5-point Laplacian with ghost-node reflection (zero normal derivative).
pub fn laplacian_neumann(h: &ScalarField) -> Result<ScalarField> {
    h.require_neumann()?;
    let g = *h.grid();
    let mut out = vec![0.0; g.node_count()];
    neumann_laplacian_raw(&g, h.values(), &mut out);
    ScalarField::from_values(g, out, ScalarBc::Neumann)
}

pub(crate) fn neumann_laplacian_raw(g: &Grid2D, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let row = g.row_len();
    let cx = 1.0 / (g.dx() * g.dx());
    let cy = 1.0 / (g.dy() * g.dy());
    for j in 0..=ny {
        for i in 0..=nx {
            let k = g.idx(i, j);
            let c = f[k];
            let left = if i == 0 { f[k + 1] } else { f[k - 1] };
            let right = if i == nx { f[k - 1] } else { f[k + 1] };
            let down = if j == 0 { f[k + row] } else { f[k - row] };
            let up = if j == ny { f[k - row] } else { f[k + row] };
            out[k] = (left - 2.0 * c + right) * cx + (down - 2.0 * c + up) * cy;
        }
    }
}

/// 5-point Laplacian at interior nodes of an array that vanishes on the boundary;
/// boundary entries of `out` are set to zero.
pub(crate) fn dirichlet_laplacian_raw(g: &Grid2D, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx(), g.ny());
    let row = g.row_len();
    let cx = 1.0 / (g.dx() * g.dx());
    let cy = 1.0 / (g.dy() * g.dy());
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 1..ny {
        for i in 1..nx {
            let k = g.idx(i, j);
            let c = f[k];
            out[k] =
                (f[k - 1] - 2.0 * c + f[k + 1]) * cx + (f[k - row] - 2.0 * c + f[k + row]) * cy;
        }
    }
}

fn check_moduli(mu: f64, lambda: f64) -> Result<()> {
    if !(mu > 0.0 && lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "Lame moduli must be positive, got mu = {mu}, lambda = {lambda}"
        )));
    }
    Ok(())
}

/// Lame operator `-mu Lap u - (lambda + mu) grad div u` on zero-boundary fields.
pub fn lame_apply(u: &VectorField2, mu: f64, lambda: f64) -> Result<VectorField2> {
    check_moduli(mu, lambda)?;
    u.require_dirichlet()?;
    Ok(lame_apply_coeffs(u, mu, lambda + mu))
}

/// `-mu Lap u - grad_div * grad div u`. No parameter checks.
pub(crate) fn lame_apply_coeffs(u: &VectorField2, mu: f64, grad_div: f64) -> VectorField2 {
    let g = *u.grid();
    let n = g.node_count();
    let mut flat = vec![0.0; 2 * n];
    lame_raw(&g, u.ux(), u.uy(), mu, grad_div, &mut flat);
    VectorField2::from_flat(g, &flat, VectorBc::DirichletZero)
}

/// Flat-array Lame operator, `out = [Lx; Ly]`. Inputs must vanish on the boundary.
pub(crate) fn lame_raw(
    g: &Grid2D,
    ux: &[f64],
    uy: &[f64],
    mu: f64,
    grad_div: f64,
    out: &mut [f64],
) {
    let n = g.node_count();
    let (ox, oy) = out.split_at_mut(n);
    dirichlet_laplacian_raw(g, ux, ox);
    dirichlet_laplacian_raw(g, uy, oy);
    if grad_div != 0.0 {
        let mut div = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        d1x(g, ux, &mut div);
        d1y(g, uy, &mut tmp);
        for (d, t) in div.iter_mut().zip(&tmp) {
            *d += t;
        }
        let (nx, ny) = (g.nx(), g.ny());
        let row = g.row_len();
        let hx = 0.5 / g.dx();
        let hy = 0.5 / g.dy();
        for j in 1..ny {
            for i in 1..nx {
                let k = g.idx(i, j);
                let gx = (div[k + 1] - div[k - 1]) * hx;
                let gy = (div[k + row] - div[k - row]) * hy;
                ox[k] = -mu * ox[k] - grad_div * gx;
                oy[k] = -mu * oy[k] - grad_div * gy;
            }
        }
    } else {
        ox.iter_mut().chain(oy.iter_mut()).for_each(|v| *v *= -mu);
    }
}

/// Fields that carry the trapezoid inner product.
pub trait L2Field {
    fn grid_ref(&self) -> &Grid2D;
    fn weighted_dot(&self, other: &Self) -> f64;
}

impl L2Field for ScalarField {
    fn grid_ref(&self) -> &Grid2D {
        self.grid()
    }
    fn weighted_dot(&self, other: &Self) -> f64 {
        weighted_dot_raw(self.grid(), self.values(), other.values())
    }
}

impl L2Field for VectorField2 {
    fn grid_ref(&self) -> &Grid2D {
        self.grid()
    }
    fn weighted_dot(&self, other: &Self) -> f64 {
        weighted_dot_raw(self.grid(), self.ux(), other.ux())
            + weighted_dot_raw(self.grid(), self.uy(), other.uy())
    }
}

pub(crate) fn weighted_dot_raw(g: &Grid2D, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..=g.ny() {
        let wy = g.wy(j);
        let mut row = 0.0;
        for i in 0..=g.nx() {
            let k = g.idx(i, j);
            row += g.wx(i) * a[k] * b[k];
        }
        s += wy * row;
    }
    s
}

/// Trapezoid inner product.
pub fn inner<F: L2Field>(a: &F, b: &F) -> Result<f64> {
    a.grid_ref().ensure_same(b.grid_ref())?;
    Ok(a.weighted_dot(b))
}

pub fn norm_l2<F: L2Field>(a: &F) -> f64 {
    a.weighted_dot(a).max(0.0).sqrt()
}

pub(crate) fn dirichlet_form_raw(g: &Grid2D, a: &[f64], b: &[f64]) -> f64 {
    let (nx, ny) = (g.nx(), g.ny());
    let row = g.row_len();
    let (dx, dy) = (g.dx(), g.dy());
    let mut s = 0.0;
    for j in 0..=ny {
        let c = g.wy(j) / dx;
        for i in 0..nx {
            let k = g.idx(i, j);
            s += c * (a[k + 1] - a[k]) * (b[k + 1] - b[k]);
        }
    }
    for j in 0..ny {
        for i in 0..=nx {
            let k = g.idx(i, j);
            s += g.wx(i) / dy * (a[k + row] - a[k]) * (b[k + row] - b[k]);
        }
    }
    s
}

/// Edge-difference Dirichlet form `(grad a, grad b)`; equals `-(laplacian_neumann a, b)`.
pub fn dirichlet_form(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.grid().ensure_same(b.grid())?;
    Ok(dirichlet_form_raw(a.grid(), a.values(), b.values()))
}

/// `nu1 (grad h, grad g) + (h, g)` for Neumann fields.
pub fn bilinear_a1(h: &ScalarField, g: &ScalarField, nu1: f64) -> Result<f64> {
    if !(nu1 > 0.0) {
        return Err(Error::Parameter(format!("nu1 must be positive, got {nu1}")));
    }
    h.require_neumann()?;
    g.require_neumann()?;
    Ok(nu1 * dirichlet_form(h, g)? + inner(h, g)?)
}

/// `mu (grad v, grad w) + (lambda + mu)(div v, div w)` for zero-boundary fields.
pub fn bilinear_a2(u: &VectorField2, w: &VectorField2, mu: f64, lambda: f64) -> Result<f64> {
    check_moduli(mu, lambda)?;
    u.require_dirichlet()?;
    w.require_dirichlet()?;
    u.grid().ensure_same(w.grid())?;
    Ok(a2_raw(u, w, mu, lambda + mu))
}

pub(crate) fn a2_raw(u: &VectorField2, w: &VectorField2, mu: f64, grad_div: f64) -> f64 {
    let g = u.grid();
    let grad = dirichlet_form_raw(g, u.ux(), w.ux()) + dirichlet_form_raw(g, u.uy(), w.uy());
    let du = divergence(u);
    let dw = divergence(w);
    mu * grad + grad_div * du.weighted_dot(&dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid2D {
        Grid2D::unit_square(n).unwrap()
    }

    #[test]
    fn gradient_of_constant_and_linear() {
        let g = Grid2D::new(8, 6, 2.0, 1.5).unwrap();
        let c = ScalarField::constant(g, 3.0, ScalarBc::Neumann);
        assert_eq!(gradient(&c).max_abs(), 0.0);
        let lin = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| 0.7 * x - 1.3 * y);
        let gr = gradient(&lin);
        for j in 0..=g.ny() {
            for i in 0..=g.nx() {
                let (a, b) = gr.at(i, j);
                assert!((a - 0.7).abs() < 1e-13 && (b + 1.3).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gradient_is_second_order_inside() {
        let err = |n: usize| {
            let g = grid(n);
            let h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, _| (PI * x).sin());
            let gr = gradient(&h);
            let mut e: f64 = 0.0;
            for j in 1..n {
                for i in 1..n {
                    e = e.max((gr.at(i, j).0 - PI * (PI * g.x(i)).cos()).abs());
                }
            }
            e
        };
        let order = (err(16) / err(32)).log2();
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn divergence_of_constant_and_solenoidal_linear() {
        let g = grid(8);
        let w = VectorField2::from_fn(g, VectorBc::None, |_, _| (2.0, -1.0));
        assert!(divergence(&w).max_abs() < 1e-13);
        let w = VectorField2::from_fn(g, VectorBc::None, |x, y| (x, -y));
        assert!(divergence(&w).max_abs() < 1e-12);
    }

    #[test]
    fn neumann_laplacian_constant_and_conservation() {
        let g = Grid2D::new(9, 7, 1.0, 2.0).unwrap();
        let c = ScalarField::constant(g, 2.0, ScalarBc::Neumann);
        assert!(laplacian_neumann(&c).unwrap().max_abs() < 1e-12);
        let h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| {
            (3.0 * x).exp() * y.sin() + x * x * y
        });
        let l = laplacian_neumann(&h).unwrap();
        let total = inner(&l, &ScalarField::constant(g, 1.0, ScalarBc::Neumann)).unwrap();
        let scale = norm_l2(&l) * g.area().sqrt();
        assert!(total.abs() <= 1e-12 * scale, "{total}");
    }

    #[test]
    fn neumann_laplacian_rejects_untagged() {
        let g = grid(6);
        let h = ScalarField::zeros(g, ScalarBc::None);
        assert!(matches!(
            laplacian_neumann(&h),
            Err(Error::BoundaryContract { .. })
        ));
    }

    #[test]
    fn neumann_cosine_eigenvalue_converges_second_order() {
        let rel = |n: usize| {
            let g = Grid2D::new(n, n, 2.0, 2.0).unwrap();
            let h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, _| (PI * x / 2.0).cos());
            let l = laplacian_neumann(&h).unwrap();
            let k2 = (PI / 2.0).powi(2);
            let mut e: f64 = 0.0;
            for (a, b) in l.values().iter().zip(h.values()) {
                e = e.max((-a - k2 * b).abs());
            }
            e / k2
        };
        let order = (rel(16) / rel(32)).log2();
        assert!(order > 1.95, "order {order}");
    }

    #[test]
    fn dirichlet_form_matches_laplacian() {
        let g = Grid2D::new(7, 5, 1.2, 0.9).unwrap();
        let a = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| (2.0 * x + y).sin());
        let b = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| x * y * y + 0.3);
        let lhs = dirichlet_form(&a, &b).unwrap();
        let rhs = -inner(&laplacian_neumann(&a).unwrap(), &b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn lame_rejects_bad_moduli() {
        let g = grid(6);
        let u = VectorField2::zeros(g, VectorBc::DirichletZero);
        assert!(lame_apply(&u, 0.0, 1.0).is_err());
        assert!(lame_apply(&u, 1.0, -1.0).is_err());
        assert_eq!(lame_apply(&u, 1.0, 1.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn lame_mu_only_path_is_vector_laplacian() {
        let g = grid(10);
        let u = VectorField2::from_fn(g, VectorBc::DirichletZero, |x, y| {
            (x * (1.0 - x) * y, (PI * y).sin() * x)
        });
        let l = lame_apply_coeffs(&u, 2.0, 0.0);
        let n = g.node_count();
        let mut lx = vec![0.0; n];
        dirichlet_laplacian_raw(&g, u.ux(), &mut lx);
        for (a, b) in l.ux().iter().zip(&lx) {
            assert!((a + 2.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_basics() {
        let g = Grid2D::new(64, 64, 1.0, 1.0).unwrap();
        let one = ScalarField::constant(g, 1.0, ScalarBc::Neumann);
        assert!((inner(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        let s = ScalarField::from_fn(g, ScalarBc::Neumann, |x, _| (PI * x).sin());
        assert!((inner(&s, &s).unwrap() - 0.5).abs() < 1e-3);
        let other = Grid2D::unit_square(8).unwrap();
        let z = ScalarField::zeros(other, ScalarBc::Neumann);
        assert!(matches!(inner(&one, &z), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn a1_closed_forms() {
        let g = Grid2D::new(64, 64, 2.0, 1.0).unwrap();
        let one = ScalarField::constant(g, 1.0, ScalarBc::Neumann);
        assert!((bilinear_a1(&one, &one, 0.3).unwrap() - 2.0).abs() < 1e-13);
        let h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, _| (PI * x / 2.0).cos());
        let want = (PI / 2.0).powi(2) * 1.0 + 1.0;
        let got = bilinear_a1(&h, &h, 1.0).unwrap();
        assert!(((got - want) / want).abs() < 1e-2);
        assert!(bilinear_a1(&h, &h, 0.0).is_err());
    }

    #[test]
    fn a2_zero_and_coercive() {
        let g = grid(8);
        let z = VectorField2::zeros(g, VectorBc::DirichletZero);
        assert_eq!(bilinear_a2(&z, &z, 1.0, 1.0).unwrap(), 0.0);
        let u = VectorField2::from_fn(g, VectorBc::DirichletZero, |x, y| (x * y, 0.0));
        assert!(bilinear_a2(&u, &u, 1.0, 1.0).unwrap() > 0.0);
    }
}
