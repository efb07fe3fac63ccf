//! Numerical evidence for property P on a rectangle: no Dirichlet eigenmode
//! of the vector Laplacian is divergence free.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{VectorBc, VectorField2};
use crate::grid::Grid2D;
use crate::linalg::symmetric_eigen;
use crate::ops::{divergence, inner};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenspaceRatio {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    /// `min ||div xi|| / ||xi|| * diam` over the eigenspace.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyPReport {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub modes_scanned: usize,
    pub eigenspaces: Vec<EigenspaceRatio>,
    pub min_ratio: f64,
    pub min_ratio_eigenvalue: f64,
}

/// Scans the first `m_modes` vector modes (completed to whole eigenspaces)
/// of the five-point Dirichlet Laplacian. Within each eigenspace the
/// smallest divergence ratio is found from the generalised eigenproblem
/// `(div a, div b) = r^2 (a, b)`.
pub fn property_p_scan(grid: &Grid2D, m_modes: usize) -> Result<PropertyPReport> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let max_modes = 2 * grid.interior_count();
    if m_modes == 0 || m_modes > max_modes {
        return Err(Error::Parameter(format!(
            "mode count must lie in 1..={max_modes}, got {m_modes}"
        )));
    }
    let sx = |p: usize| {
        (2.0 / grid.dx() * (p as f64 * PI * grid.dx() / (2.0 * grid.lx())).sin()).powi(2)
    };
    let sy = |q: usize| {
        (2.0 / grid.dy() * (q as f64 * PI * grid.dy() / (2.0 * grid.ly())).sin()).powi(2)
    };
    let mut scalar: Vec<(f64, usize, usize)> = (1..nx)
        .flat_map(|p| (1..ny).map(move |q| (p, q)))
        .map(|(p, q)| (sx(p) + sy(q), p, q))
        .collect();
    scalar.sort_by(|a, b| a.0.total_cmp(&b.0));

    // each scalar mode contributes two vector modes of the same eigenvalue
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut counted = 0;
    for &(lam, p, q) in &scalar {
        let same = values.last().is_some_and(|&v| (lam - v).abs() <= 1e-10 * v);
        if same {
            groups.last_mut().unwrap().push((p, q));
        } else {
            if counted >= m_modes {
                break;
            }
            groups.push(vec![(p, q)]);
            values.push(lam);
        }
        counted += 2;
    }

    let diam = grid.diameter();
    let mut eigenspaces = Vec::with_capacity(groups.len());
    for (pq, &lam) in groups.iter().zip(&values) {
        let mut basis = Vec::with_capacity(2 * pq.len());
        for &(p, q) in pq {
            let phi = move |x: f64, y: f64| {
                (p as f64 * PI * x / grid.lx()).sin() * (q as f64 * PI * y / grid.ly()).sin()
            };
            basis.push(VectorField2::from_fn(
                *grid,
                VectorBc::DirichletZero,
                move |x, y| (phi(x, y), 0.0),
            ));
            basis.push(VectorField2::from_fn(
                *grid,
                VectorBc::DirichletZero,
                move |x, y| (0.0, phi(x, y)),
            ));
        }
        let divs: Vec<_> = basis.iter().map(divergence).collect();
        let k = basis.len();
        let mut a = DMatrix::zeros(k, k);
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                a[(i, j)] = inner(&divs[i], &divs[j])?;
                a[(j, i)] = a[(i, j)];
                m[(i, j)] = inner(&basis[i], &basis[j])?;
                m[(j, i)] = m[(i, j)];
            }
        }
        let l = m.cholesky().ok_or_else(|| {
            Error::EigenSolve("eigenspace mass matrix is not positive definite".into())
        })?;
        let linv = l
            .l()
            .try_inverse()
            .ok_or_else(|| Error::EigenSolve("singular mass factor".into()))?;
        let s = &linv * a * linv.transpose();
        let (ev, _) = symmetric_eigen((&s + s.transpose()) * 0.5)?;
        let rmin = ev
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
            .sqrt();
        eigenspaces.push(EigenspaceRatio {
            eigenvalue: lam,
            multiplicity: k,
            ratio: rmin * diam,
        });
    }
    let (min_ratio, min_ratio_eigenvalue) =
        eigenspaces.iter().map(|e| (e.ratio, e.eigenvalue)).fold(
            (f64::INFINITY, f64::NAN),
            |acc, x| if x.0 < acc.0 { x } else { acc },
        );
    Ok(PropertyPReport {
        nx,
        ny,
        lx: grid.lx(),
        ly: grid.ly(),
        modes_scanned: eigenspaces.iter().map(|e| e.multiplicity).sum(),
        eigenspaces,
        min_ratio,
        min_ratio_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_floor() {
        let r = property_p_scan(&Grid2D::unit_square(32).unwrap(), 20).unwrap();
        assert!(r.min_ratio > 0.1, "{}", r.min_ratio);
        assert!(r.modes_scanned >= 20);
        // (1,2) and (2,1) share an eigenvalue on the square
        assert!(r.eigenspaces.iter().any(|e| e.multiplicity == 4));
    }

    #[test]
    fn swap_symmetry() {
        let a = property_p_scan(&Grid2D::new(24, 16, 1.5, 1.0).unwrap(), 16).unwrap();
        let b = property_p_scan(&Grid2D::new(16, 24, 1.0, 1.5).unwrap(), 16).unwrap();
        for (x, y) in a.eigenspaces.iter().zip(&b.eigenspaces) {
            assert!((x.ratio - y.ratio).abs() < 1e-10 * x.ratio.max(1.0));
        }
    }

    #[test]
    fn mesh_independent() {
        let a = property_p_scan(&Grid2D::unit_square(32).unwrap(), 20)
            .unwrap()
            .min_ratio;
        let b = property_p_scan(&Grid2D::unit_square(48).unwrap(), 20)
            .unwrap()
            .min_ratio;
        assert!((a - b).abs() < 0.05 * b, "{a} {b}");
    }
}
