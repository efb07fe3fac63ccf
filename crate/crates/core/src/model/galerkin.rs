//! Eigenbases of the two bilinear forms and the associated projections.
//!
//! Elastic modes solve `a2(b, phi) = lambda (b, phi)` over zero-boundary
//! fields; magnetic modes solve `a1(b, psi) = lambda (b, psi)` over all nodal
//! fields. Both families are orthonormal in the trapezoid inner product.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;
use crate::linalg::symmetric_eigen;
use crate::model::params::MaterialParams;
use crate::model::state::State;
use crate::ops::{lame_raw, neumann_laplacian_raw};

/// Largest dense eigenproblem the builder accepts.
pub const MAX_DENSE_DOF: usize = 5000;

#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    grid: Grid2D,
    params: MaterialParams,
    elastic_values: Vec<f64>,
    elastic_modes: Vec<Vec<f64>>,
    magnetic_values: Vec<f64>,
    magnetic_modes: Vec<Vec<f64>>,
}

fn interior_nodes(g: &Grid2D) -> Vec<usize> {
    let mut v = Vec::with_capacity(g.interior_count());
    for j in 1..g.ny() {
        for i in 1..g.nx() {
            v.push(g.idx(i, j));
        }
    }
    v
}

pub fn elastic_dof(g: &Grid2D) -> usize {
    2 * g.interior_count()
}

pub fn magnetic_dof(g: &Grid2D) -> usize {
    g.node_count()
}

/// All eigenpairs of the Lame operator on the zero-boundary subspace,
/// ascending, as flat `[ux; uy]` node arrays orthonormal in the trapezoid product.
pub(crate) fn elastic_eigenpairs(
    g: &Grid2D,
    params: &MaterialParams,
    m: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let nodes = interior_nodes(g);
    let ni = nodes.len();
    let ndof = 2 * ni;
    if ndof > MAX_DENSE_DOF {
        return Err(Error::Unsupported(format!(
            "{ndof} elastic degrees of freedom exceed the dense limit {MAX_DENSE_DOF}"
        )));
    }
    let n = g.node_count();
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    let mut e = vec![0.0; 2 * n];
    let mut out = vec![0.0; 2 * n];
    for col in 0..ndof {
        let node = nodes[col % ni] + n * (col / ni);
        e[node] = 1.0;
        lame_raw(g, &e[..n], &e[n..], params.mu, params.grad_div(), &mut out);
        e[node] = 0.0;
        for (row, &r) in nodes.iter().enumerate() {
            k[(row, col)] = out[r];
            k[(ni + row, col)] = out[n + r];
        }
    }
    let (vals, vecs) = symmetric_eigen(k)?;
    // interior trapezoid weights are all dx dy
    let s = 1.0 / (g.dx() * g.dy()).sqrt();
    let modes = (0..m)
        .map(|c| {
            let mut flat = vec![0.0; 2 * n];
            for (row, &r) in nodes.iter().enumerate() {
                flat[r] = s * vecs[(row, c)];
                flat[n + r] = s * vecs[(ni + row, c)];
            }
            flat
        })
        .collect();
    Ok((vals[..m].to_vec(), modes))
}

/// Eigenpairs of `nu1 (grad, grad) + (., .)` against the trapezoid mass.
fn magnetic_eigenpairs(g: &Grid2D, nu1: f64, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = g.node_count();
    if n > MAX_DENSE_DOF {
        return Err(Error::Unsupported(format!(
            "{n} magnetic degrees of freedom exceed the dense limit {MAX_DENSE_DOF}"
        )));
    }
    let w = g.weights();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut out = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        neumann_laplacian_raw(g, &e, &mut out);
        e[col] = 0.0;
        for row in 0..n {
            a[(row, col)] = -nu1 * sw[row] * out[row] / sw[col];
        }
        a[(col, col)] += 1.0;
    }
    let (vals, vecs) = symmetric_eigen(a)?;
    let modes = (0..m)
        .map(|c| (0..n).map(|r| vecs[(r, c)] / sw[r]).collect())
        .collect();
    Ok((vals[..m].to_vec(), modes))
}

/// First `m` modes of each family.
pub fn build_galerkin_basis(
    grid: Grid2D,
    params: &MaterialParams,
    m: usize,
) -> Result<GalerkinBasis> {
    GalerkinBasis::build(grid, params, m, m)
}

impl GalerkinBasis {
    /// First `m_elastic` elastic and `m_magnetic` magnetic modes.
    pub fn build(
        grid: Grid2D,
        params: &MaterialParams,
        m_elastic: usize,
        m_magnetic: usize,
    ) -> Result<Self> {
        params.validate()?;
        let (ne, nm) = (elastic_dof(&grid), magnetic_dof(&grid));
        if m_elastic == 0 || m_magnetic == 0 {
            return Err(Error::Parameter("basis size must be at least 1".into()));
        }
        if m_elastic > ne {
            return Err(Error::Parameter(format!(
                "m = {m_elastic} exceeds {ne} elastic degrees of freedom"
            )));
        }
        if m_magnetic > nm {
            return Err(Error::Parameter(format!(
                "m = {m_magnetic} exceeds {nm} magnetic degrees of freedom"
            )));
        }
        let (elastic_values, elastic_modes) = elastic_eigenpairs(&grid, params, m_elastic)?;
        let (magnetic_values, magnetic_modes) = magnetic_eigenpairs(&grid, params.nu1, m_magnetic)?;
        Ok(GalerkinBasis {
            grid,
            params: *params,
            elastic_values,
            elastic_modes,
            magnetic_values,
            magnetic_modes,
        })
    }

    /// Untruncated basis: every degree of freedom of both families.
    pub fn build_full(grid: Grid2D, params: &MaterialParams) -> Result<Self> {
        Self::build(grid, params, elastic_dof(&grid), magnetic_dof(&grid))
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn params(&self) -> &MaterialParams {
        &self.params
    }
    pub fn m_elastic(&self) -> usize {
        self.elastic_values.len()
    }
    pub fn m_magnetic(&self) -> usize {
        self.magnetic_values.len()
    }
    /// Length of a state coefficient vector `[c, c', c~]`.
    pub fn state_dim(&self) -> usize {
        2 * self.m_elastic() + self.m_magnetic()
    }
    pub fn elastic_values(&self) -> &[f64] {
        &self.elastic_values
    }
    pub fn magnetic_values(&self) -> &[f64] {
        &self.magnetic_values
    }

    pub fn elastic_mode(&self, j: usize) -> VectorField2 {
        VectorField2::from_flat(self.grid, &self.elastic_modes[j], VectorBc::DirichletZero)
    }

    pub fn magnetic_mode(&self, k: usize) -> ScalarField {
        ScalarField::from_values(self.grid, self.magnetic_modes[k].clone(), ScalarBc::Neumann)
            .expect("finite mode")
    }

    pub(crate) fn project_elastic_raw(&self, flat: &[f64]) -> Vec<f64> {
        let w = self.grid.weights();
        let n = w.len();
        self.elastic_modes
            .iter()
            .map(|b| {
                (0..n)
                    .map(|k| w[k] * (flat[k] * b[k] + flat[n + k] * b[n + k]))
                    .sum()
            })
            .collect()
    }

    pub(crate) fn project_magnetic_raw(&self, vals: &[f64]) -> Vec<f64> {
        let w = self.grid.weights();
        self.magnetic_modes
            .iter()
            .map(|b| w.iter().zip(vals).zip(b).map(|((w, v), b)| w * v * b).sum())
            .collect()
    }

    pub(crate) fn reconstruct_elastic_raw(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.grid.node_count()];
        for (cj, b) in c.iter().zip(&self.elastic_modes) {
            for (o, v) in out.iter_mut().zip(b) {
                *o += cj * v;
            }
        }
        out
    }

    pub(crate) fn reconstruct_magnetic_raw(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.node_count()];
        for (cj, b) in c.iter().zip(&self.magnetic_modes) {
            for (o, v) in out.iter_mut().zip(b) {
                *o += cj * v;
            }
        }
        out
    }

    pub fn project_elastic(&self, u: &VectorField2) -> Result<Vec<f64>> {
        self.grid.ensure_same(u.grid())?;
        Ok(self.project_elastic_raw(&u.to_flat()))
    }

    pub fn project_magnetic(&self, h: &ScalarField) -> Result<Vec<f64>> {
        self.grid.ensure_same(h.grid())?;
        Ok(self.project_magnetic_raw(h.values()))
    }

    pub fn reconstruct_elastic(&self, c: &[f64]) -> Result<VectorField2> {
        if c.len() != self.m_elastic() {
            return Err(Error::DimensionMismatch {
                expected: self.m_elastic(),
                found: c.len(),
            });
        }
        Ok(VectorField2::from_flat(
            self.grid,
            &self.reconstruct_elastic_raw(c),
            VectorBc::DirichletZero,
        ))
    }

    pub fn reconstruct_magnetic(&self, c: &[f64]) -> Result<ScalarField> {
        if c.len() != self.m_magnetic() {
            return Err(Error::DimensionMismatch {
                expected: self.m_magnetic(),
                found: c.len(),
            });
        }
        ScalarField::from_values(
            self.grid,
            self.reconstruct_magnetic_raw(c),
            ScalarBc::Neumann,
        )
    }

    /// `[c, c', c~]` for a state.
    pub fn project_state(&self, s: &State) -> Result<Vec<f64>> {
        let mut v = self.project_elastic(&s.u)?;
        v.extend(self.project_elastic(&s.ut)?);
        v.extend(self.project_magnetic(&s.h)?);
        Ok(v)
    }

    pub fn reconstruct_state(&self, coeffs: &[f64], t: f64) -> Result<State> {
        if coeffs.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: coeffs.len(),
            });
        }
        let me = self.m_elastic();
        Ok(State {
            u: self.reconstruct_elastic(&coeffs[..me])?,
            ut: self.reconstruct_elastic(&coeffs[me..2 * me])?,
            h: self.reconstruct_magnetic(&coeffs[2 * me..])?,
            t,
        })
    }

    /// Total energy of a coefficient vector; equals the field energy of its
    /// reconstruction.
    pub fn coefficient_energy(&self, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: coeffs.len(),
            });
        }
        let me = self.m_elastic();
        let p = &self.params;
        let mut e = 0.0;
        for j in 0..me {
            e += p.rho_m * coeffs[me + j].powi(2) + self.elastic_values[j] * coeffs[j].powi(2);
        }
        e += p.mu0 * coeffs[2 * me..].iter().map(|c| c * c).sum::<f64>();
        Ok(0.5 * e)
    }

    /// Writes the eigenpairs as CSV behind a `#` header line that records the
    /// grid fingerprint, mode counts and moduli.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        let p = &self.params;
        writeln!(
            s,
            "# melab-basis grid={} m_elastic={} m_magnetic={} mu={:e} lambda={:e} nu1={:e}",
            self.grid.fingerprint(),
            self.m_elastic(),
            self.m_magnetic(),
            p.mu,
            p.lambda,
            p.nu1
        )
        .unwrap();
        s.push_str("family,eigenvalue,values\n");
        for (fam, vals, modes) in [
            ("elastic", &self.elastic_values, &self.elastic_modes),
            ("magnetic", &self.magnetic_values, &self.magnetic_modes),
        ] {
            for (v, b) in vals.iter().zip(modes) {
                write!(s, "{fam},{v:.16e}").unwrap();
                for x in b {
                    write!(s, ",{x:.16e}").unwrap();
                }
                s.push('\n');
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Loads a cache written by [`save_csv`](Self::save_csv). The header must
    /// match `grid` and the moduli in `params`.
    pub fn load_csv(path: &Path, grid: Grid2D, params: &MaterialParams) -> Result<Self> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Archive("empty basis cache".into()))??;
        let field = |key: &str| -> Result<String> {
            header
                .split_whitespace()
                .find_map(|t| t.strip_prefix(&format!("{key}=")).map(str::to_string))
                .ok_or_else(|| Error::Archive(format!("basis cache header lacks {key}")))
        };
        if field("grid")? != grid.fingerprint() {
            return Err(Error::GridMismatch(
                "basis cache was built on a different grid".into(),
            ));
        }
        let num = |key: &str| -> Result<f64> {
            field(key)?
                .parse::<f64>()
                .map_err(|e| Error::Archive(format!("{key}: {e}")))
        };
        for (key, v) in [
            ("mu", params.mu),
            ("lambda", params.lambda),
            ("nu1", params.nu1),
        ] {
            if num(key)? != v {
                return Err(Error::Archive(format!(
                    "basis cache {key} differs from the requested parameters"
                )));
            }
        }
        let me = num("m_elastic")? as usize;
        let mm = num("m_magnetic")? as usize;
        let mut b = GalerkinBasis {
            grid,
            params: *params,
            elastic_values: vec![],
            elastic_modes: vec![],
            magnetic_values: vec![],
            magnetic_modes: vec![],
        };
        let n = grid.node_count();
        for line in lines.skip(1) {
            let line = line?;
            let mut parts = line.split(',');
            let fam = parts.next().unwrap_or_default().to_string();
            let nums: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| Error::Archive(format!("basis cache: {e}")))?;
            let (val, mode) = nums
                .split_first()
                .ok_or_else(|| Error::Archive("empty basis row".into()))?;
            match fam.as_str() {
                "elastic" if mode.len() == 2 * n => {
                    b.elastic_values.push(*val);
                    b.elastic_modes.push(mode.to_vec());
                }
                "magnetic" if mode.len() == n => {
                    b.magnetic_values.push(*val);
                    b.magnetic_modes.push(mode.to_vec());
                }
                _ => {
                    return Err(Error::Archive(format!(
                        "malformed basis row for family '{fam}'"
                    )))
                }
            }
        }
        if b.m_elastic() != me || b.m_magnetic() != mm {
            return Err(Error::Archive(
                "basis cache row count disagrees with header".into(),
            ));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{bilinear_a1, inner, lame_apply, laplacian_neumann, norm_l2};

    fn small() -> (Grid2D, MaterialParams) {
        (
            Grid2D::new(6, 5, 1.0, 0.8).unwrap(),
            MaterialParams {
                nu1: 0.4,
                lambda: 2.0,
                ..MaterialParams::default()
            },
        )
    }

    #[test]
    fn magnetic_ground_mode_is_constant() {
        let (g, p) = small();
        let b = build_galerkin_basis(g, &p, 6).unwrap();
        assert!((b.magnetic_values()[0] - 1.0).abs() < 1e-12);
        let m0 = b.magnetic_mode(0);
        let c = m0.values()[0];
        assert!(m0.values().iter().all(|v| (v - c).abs() < 1e-10));
        assert!((bilinear_a1(&m0, &m0, p.nu1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_residuals_and_orthonormality() {
        let (g, p) = small();
        let b = build_galerkin_basis(g, &p, 12).unwrap();
        for j in 0..12 {
            let v = b.elastic_mode(j);
            let lv = lame_apply(&v, p.mu, p.lambda).unwrap();
            let r = VectorField2::lincomb(1.0, &lv, -b.elastic_values()[j], &v);
            assert!(norm_l2(&r) <= 1e-8 * b.elastic_values()[j]);
            let h = b.magnetic_mode(j);
            let lh = laplacian_neumann(&h).unwrap();
            let r = ScalarField::lincomb(-p.nu1, &lh, 1.0 - b.magnetic_values()[j], &h);
            assert!(norm_l2(&r) <= 1e-8 * b.magnetic_values()[j]);
            for k in 0..12 {
                let d = if j == k { 1.0 } else { 0.0 };
                assert!((inner(&v, &b.elastic_mode(k)).unwrap() - d).abs() < 1e-10);
                assert!((inner(&h, &b.magnetic_mode(k)).unwrap() - d).abs() < 1e-10);
            }
        }
        assert!(b.elastic_values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn project_unit_coordinate() {
        let (g, p) = small();
        let b = build_galerkin_basis(g, &p, 8).unwrap();
        let c = b.project_elastic(&b.elastic_mode(3)).unwrap();
        for (k, v) in c.iter().enumerate() {
            assert!((v - if k == 3 { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        assert_eq!(b.reconstruct_elastic(&[0.0; 8]).unwrap().max_abs(), 0.0);
        assert!(b.reconstruct_elastic(&[0.0; 3]).is_err());
    }

    #[test]
    fn rejects_oversized_m() {
        let (g, p) = small();
        assert!(build_galerkin_basis(g, &p, 41).is_err());
    }

    #[test]
    fn cache_roundtrip() {
        let (g, p) = small();
        let b = build_galerkin_basis(g, &p, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.csv");
        b.save_csv(&path).unwrap();
        let back = GalerkinBasis::load_csv(&path, g, &p).unwrap();
        assert_eq!(back.elastic_values(), b.elastic_values());
        assert_eq!(back.magnetic_mode(2), b.magnetic_mode(2));
        let other = Grid2D::new(6, 5, 1.0, 0.9).unwrap();
        assert!(matches!(
            GalerkinBasis::load_csv(&path, other, &p),
            Err(Error::GridMismatch(_))
        ));
    }
}
