//! Rectangular node grid `[0, lx] x [0, ly]` with `(nx + 1) x (ny + 1)` nodes.
//!
//! Node `(i, j)` sits at `(i * dx, j * dy)` and is stored at flat index
//! `j * (nx + 1) + i` (x fastest). Quadrature uses trapezoid weights, so
//! edge nodes carry half weight and corners a quarter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

/// Serialized form of a grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<GridSpec> for Grid2D {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid2D::new(s.nx, s.ny, s.lx, s.ly)
    }
}

impl From<Grid2D> for GridSpec {
    fn from(g: Grid2D) -> Self {
        GridSpec {
            nx: g.nx,
            ny: g.ny,
            lx: g.lx,
            ly: g.ly,
        }
    }
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Parameter(format!(
                "grid needs nx, ny >= 4, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Parameter(format!(
                "side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid2D { nx, ny, lx, ly })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid2D::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn diameter(&self) -> f64 {
        self.lx.hypot(self.ly)
    }

    /// Nodes per row.
    pub fn row_len(&self) -> usize {
        self.nx + 1
    }
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }
    pub fn interior_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }
    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// 1D trapezoid weight of node `i` along x.
    #[inline]
    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }
    #[inline]
    pub fn wy(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.dy()
        } else {
            self.dy()
        }
    }

    /// Quadrature weight of every node, flat-indexed.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.node_count());
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                w.push(self.wx(i) * self.wy(j));
            }
        }
        w
    }

    /// Same grid with both sides multiplied by `s`.
    pub fn dilated(&self, s: f64) -> Result<Self> {
        Grid2D::new(self.nx, self.ny, self.lx * s, self.ly * s)
    }

    /// Grid with the roles of x and y exchanged.
    pub fn transposed(&self) -> Self {
        Grid2D {
            nx: self.ny,
            ny: self.nx,
            lx: self.ly,
            ly: self.lx,
        }
    }

    pub fn ensure_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Stable 64-bit fingerprint used to tag cached artifacts.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.nx as u64).to_le_bytes());
        h.update((self.ny as u64).to_le_bytes());
        h.update(self.lx.to_bits().to_le_bytes());
        h.update(self.ly.to_bits().to_le_bytes());
        hex::encode(&h.finalize()[..8])
    }
}
