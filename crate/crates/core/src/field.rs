//! Nodal scalar and 2-vector fields carrying a boundary tag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarBc {
    Neumann,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorBc {
    DirichletZero,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
    bc: ScalarBc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    grid: Grid2D,
    ux: Vec<f64>,
    uy: Vec<f64>,
    bc: VectorBc,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D, bc: ScalarBc) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.node_count()],
            bc,
        }
    }

    pub fn constant(grid: Grid2D, c: f64, bc: ScalarBc) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.node_count()],
            bc,
        }
    }

    pub fn from_fn(grid: Grid2D, bc: ScalarBc, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 0..=grid.ny() {
            for i in 0..=grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        ScalarField { grid, values, bc }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>, bc: ScalarBc) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {k}")));
        }
        Ok(ScalarField { grid, values, bc })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn bc(&self) -> ScalarBc {
        self.bc
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn with_bc(mut self, bc: ScalarBc) -> Self {
        self.bc = bc;
        self
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn require_neumann(&self) -> Result<()> {
        if self.bc == ScalarBc::Neumann {
            Ok(())
        } else {
            Err(Error::BoundaryContract {
                expected: "neumann".into(),
                found: format!("{:?}", self.bc),
            })
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    /// `a * x + b * y` componentwise.
    pub fn lincomb(a: f64, x: &ScalarField, b: f64, y: &ScalarField) -> ScalarField {
        let values = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(p, q)| a * p + b * q)
            .collect();
        ScalarField {
            grid: x.grid,
            values,
            bc: x.bc,
        }
    }

    /// Quadrature mean over the domain.
    pub fn mean(&self) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for j in 0..=g.ny() {
            let wy = g.wy(j);
            for i in 0..=g.nx() {
                s += g.wx(i) * wy * self.values[g.idx(i, j)];
            }
        }
        s / g.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl VectorField2 {
    pub fn zeros(grid: Grid2D, bc: VectorBc) -> Self {
        let n = grid.node_count();
        VectorField2 {
            grid,
            ux: vec![0.0; n],
            uy: vec![0.0; n],
            bc,
        }
    }

    /// Samples `f` at every node. With `DirichletZero` the boundary nodes are pinned to 0.
    pub fn from_fn(grid: Grid2D, bc: VectorBc, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let n = grid.node_count();
        let mut ux = Vec::with_capacity(n);
        let mut uy = Vec::with_capacity(n);
        for j in 0..=grid.ny() {
            for i in 0..=grid.nx() {
                let (a, b) = f(grid.x(i), grid.y(j));
                ux.push(a);
                uy.push(b);
            }
        }
        let mut v = VectorField2 { grid, ux, uy, bc };
        v.enforce_bc();
        v
    }

    pub fn from_components(grid: Grid2D, ux: Vec<f64>, uy: Vec<f64>, bc: VectorBc) -> Result<Self> {
        let n = grid.node_count();
        for c in [&ux, &uy] {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite vector component".into()));
            }
        }
        let v = VectorField2 { grid, ux, uy, bc };
        if bc == VectorBc::DirichletZero && !v.boundary_is_zero() {
            return Err(Error::BoundaryContract {
                expected: "zero boundary values".into(),
                found: "nonzero boundary node".into(),
            });
        }
        Ok(v)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn bc(&self) -> VectorBc {
        self.bc
    }
    pub fn ux(&self) -> &[f64] {
        &self.ux
    }
    pub fn uy(&self) -> &[f64] {
        &self.uy
    }
    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.ux, &mut self.uy)
    }
    pub fn with_bc(mut self, bc: VectorBc) -> Self {
        self.bc = bc;
        self.enforce_bc();
        self
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.idx(i, j);
        (self.ux[k], self.uy[k])
    }

    /// Pins boundary nodes to zero when tagged `DirichletZero`.
    pub fn enforce_bc(&mut self) {
        if self.bc != VectorBc::DirichletZero {
            return;
        }
        let g = self.grid;
        for j in 0..=g.ny() {
            for i in 0..=g.nx() {
                if g.is_boundary(i, j) {
                    let k = g.idx(i, j);
                    self.ux[k] = 0.0;
                    self.uy[k] = 0.0;
                }
            }
        }
    }

    pub fn boundary_is_zero(&self) -> bool {
        let g = self.grid;
        (0..=g.ny()).all(|j| {
            (0..=g.nx()).all(|i| {
                !g.is_boundary(i, j) || {
                    let k = g.idx(i, j);
                    self.ux[k] == 0.0 && self.uy[k] == 0.0
                }
            })
        })
    }

    pub fn require_dirichlet(&self) -> Result<()> {
        if self.bc == VectorBc::DirichletZero {
            Ok(())
        } else {
            Err(Error::BoundaryContract {
                expected: "dirichlet_zero".into(),
                found: format!("{:?}", self.bc),
            })
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|v| v.is_finite())
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField2) {
        debug_assert_eq!(self.grid, other.grid);
        for (s, o) in self.ux.iter_mut().zip(&other.ux) {
            *s += a * o;
        }
        for (s, o) in self.uy.iter_mut().zip(&other.uy) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> VectorField2 {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        self.ux
            .iter_mut()
            .chain(self.uy.iter_mut())
            .for_each(|v| *v *= a);
    }

    pub fn lincomb(a: f64, x: &VectorField2, b: f64, y: &VectorField2) -> VectorField2 {
        let ux = x.ux.iter().zip(&y.ux).map(|(p, q)| a * p + b * q).collect();
        let uy = x.uy.iter().zip(&y.uy).map(|(p, q)| a * p + b * q).collect();
        VectorField2 {
            grid: x.grid,
            ux,
            uy,
            bc: x.bc,
        }
    }

    /// Multiplies both components pointwise by a scalar field.
    pub fn times_scalar(&self, s: &ScalarField) -> VectorField2 {
        let ux = self.ux.iter().zip(s.values()).map(|(a, b)| a * b).collect();
        let uy = self.uy.iter().zip(s.values()).map(|(a, b)| a * b).collect();
        VectorField2 {
            grid: self.grid,
            ux,
            uy,
            bc: self.bc,
        }
    }

    /// Flat `[ux; uy]` copy.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.ux.clone();
        v.extend_from_slice(&self.uy);
        v
    }

    pub fn from_flat(grid: Grid2D, flat: &[f64], bc: VectorBc) -> Self {
        let n = grid.node_count();
        assert_eq!(flat.len(), 2 * n);
        VectorField2 {
            grid,
            ux: flat[..n].to_vec(),
            uy: flat[n..].to_vec(),
            bc,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.ux
            .iter()
            .chain(&self.uy)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
