//! Small linear-algebra kernels: weighted conjugate gradients and a dense
//! symmetric eigensolve.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Conjugate gradients for an operator that is self-adjoint and positive
/// definite in the `w`-weighted inner product. `x` holds the initial guess.
/// Returns the iteration count.
pub fn cg_weighted<F>(
    mut apply: F,
    w: &[f64],
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
) -> Result<usize>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = wdot(w, b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = wdot(w, &r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..opts.max_iter {
        if rr.sqrt() <= opts.tol * bnorm {
            return Ok(it);
        }
        apply(&p, &mut ap);
        let pap = wdot(w, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverStall {
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = wdot(w, &r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    if rr.sqrt() <= opts.tol * bnorm {
        Ok(opts.max_iter)
    } else {
        Err(Error::SolverStall {
            iterations: opts.max_iter,
            residual: rr.sqrt() / bnorm,
        })
    }
}

/// Eigenpairs of a dense symmetric matrix, ascending. Columns of the returned
/// matrix are orthonormal eigenvectors.
pub fn symmetric_eigen(mut a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::EigenSolve("matrix is not square".into()));
    }
    // symmetrize exactly; assembled forms carry round-off asymmetry
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000)
        .ok_or_else(|| Error::EigenSolve("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok((values, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_weighted_spd_system() {
        // A = W^{-1} K with K symmetric positive definite is W-self-adjoint.
        let w = [0.5, 1.0, 2.0];
        let k = [[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = (0..3).map(|j| k[i][j] * x[j]).sum::<f64>() / w[i];
            }
        };
        let b = [1.0, -2.0, 0.5];
        let mut x = [0.0; 3];
        cg_weighted(
            apply,
            &w,
            &b,
            &mut x,
            CgOptions {
                tol: 1e-14,
                max_iter: 50,
            },
        )
        .unwrap();
        let mut y = [0.0; 3];
        apply(&x, &mut y);
        for i in 0..3 {
            assert!((y[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_sorted() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.5]);
        let (vals, _) = symmetric_eigen(a).unwrap();
        assert!((vals[0] - 0.5).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
    }
}
