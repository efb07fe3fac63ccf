use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;

/// Displacement, velocity and magnetic perturbation at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: VectorField2,
    pub ut: VectorField2,
    pub h: ScalarField,
    pub t: f64,
}

impl State {
    pub fn new(u: VectorField2, ut: VectorField2, h: ScalarField, t: f64) -> Result<Self> {
        let s = State { u, ut, h, t };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros(grid: Grid2D) -> Self {
        State {
            u: VectorField2::zeros(grid, VectorBc::DirichletZero),
            ut: VectorField2::zeros(grid, VectorBc::DirichletZero),
            h: ScalarField::zeros(grid, ScalarBc::Neumann),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        self.u.grid()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.u.grid();
        g.ensure_same(self.ut.grid())?;
        g.ensure_same(self.h.grid())?;
        self.u.require_dirichlet()?;
        self.ut.require_dirichlet()?;
        self.h.require_neumann()?;
        for (name, v) in [("u", &self.u), ("ut", &self.ut)] {
            if !v.boundary_is_zero() {
                return Err(Error::BoundaryContract {
                    expected: "zero boundary values".into(),
                    found: format!("{name} nonzero on boundary"),
                });
            }
        }
        if !(self.u.is_finite() && self.ut.is_finite() && self.h.is_finite() && self.t.is_finite())
        {
            return Err(Error::Diverged {
                t: self.t,
                term: "state".into(),
            });
        }
        Ok(())
    }

    /// `a * x + b * y` fieldwise; the time is taken from `x`.
    pub fn lincomb(a: f64, x: &State, b: f64, y: &State) -> State {
        State {
            u: VectorField2::lincomb(a, &x.u, b, &y.u),
            ut: VectorField2::lincomb(a, &x.ut, b, &y.ut),
            h: ScalarField::lincomb(a, &x.h, b, &y.h),
            t: x.t,
        }
    }

    /// `self - other`, timed at `self.t`.
    pub fn difference(&self, other: &State) -> State {
        State::lincomb(1.0, self, -1.0, other)
    }

    pub fn scaled(&self, s: f64) -> State {
        State {
            u: self.u.scaled(s),
            ut: self.ut.scaled(s),
            h: self.h.scaled(s),
            t: self.t,
        }
    }

    pub fn with_time(mut self, t: f64) -> State {
        self.t = t;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .max_abs()
            .max(self.ut.max_abs())
            .max(self.h.max_abs())
    }
}
