//! Right-hand side of the coupled system
//!
//! ```text
//! rho_m u'' = -L u - rho(u') - mu0 (B0 + h) grad h + f2
//! h'        = nu1 Lap h - div((B0 + h) u') + f1
//! ```

use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;
use crate::model::dissipation::DissipationSpec;
use crate::model::forcing::GriddedForcing;
use crate::model::params::MaterialParams;
use crate::model::state::State;
use crate::ops::{d1x, d1y, lame_raw, neumann_laplacian_raw};

/// `-mu0 (B0 + h) grad h`.
pub fn lorentz_force(h: &ScalarField, params: &MaterialParams) -> Result<VectorField2> {
    h.require_neumann()?;
    let g = *h.grid();
    let n = g.node_count();
    let mut out = vec![0.0; 2 * n];
    lorentz_raw(&g, params, h.values(), &mut out);
    Ok(VectorField2::from_flat(g, &out, VectorBc::None))
}

pub(crate) fn lorentz_raw(g: &Grid2D, params: &MaterialParams, h: &[f64], out: &mut [f64]) {
    let n = g.node_count();
    let (ox, oy) = out.split_at_mut(n);
    d1x(g, h, ox);
    d1y(g, h, oy);
    for k in 0..n {
        let c = -params.mu0 * (params.b0 + h[k]);
        ox[k] *= c;
        oy[k] *= c;
    }
}

/// `-div((B0 + h) u')`.
pub fn induction_term(
    ut: &VectorField2,
    h: &ScalarField,
    params: &MaterialParams,
) -> Result<ScalarField> {
    ut.require_dirichlet()?;
    ut.grid().ensure_same(h.grid())?;
    let g = *h.grid();
    let mut out = vec![0.0; g.node_count()];
    induction_raw(&g, params, ut.ux(), ut.uy(), h.values(), &mut out);
    ScalarField::from_values(g, out, ScalarBc::Neumann)
}

pub(crate) fn induction_raw(
    g: &Grid2D,
    params: &MaterialParams,
    vx: &[f64],
    vy: &[f64],
    h: &[f64],
    out: &mut [f64],
) {
    let n = g.node_count();
    let fx: Vec<f64> = (0..n).map(|k| (params.b0 + h[k]) * vx[k]).collect();
    let fy: Vec<f64> = (0..n).map(|k| (params.b0 + h[k]) * vy[k]).collect();
    let mut tmp = vec![0.0; n];
    d1x(g, &fx, out);
    d1y(g, &fy, &mut tmp);
    for (o, t) in out.iter_mut().zip(&tmp) {
        *o = -(*o + t);
    }
}

/// Explicit coupling terms shared by the integrators.
///
/// `force = lorentz + f2 - (rho(v) - alpha v)` with boundary rows zeroed, and
/// `source = induction + f1`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn coupling_raw(
    g: &Grid2D,
    params: &MaterialParams,
    spec: &DissipationSpec,
    v: &[f64],
    h: &[f64],
    f1: &[f64],
    f2: &[f64],
    force: &mut [f64],
    source: &mut [f64],
) {
    let n = g.node_count();
    lorentz_raw(g, params, h, force);
    induction_raw(g, params, &v[..n], &v[n..], h, source);
    for k in 0..n {
        source[k] += f1[k];
        let r = spec.nonlinear_point([v[k], v[n + k]]);
        force[k] += f2[k] - r[0];
        force[n + k] += f2[n + k] - r[1];
    }
    for j in 0..=g.ny() {
        for i in 0..=g.nx() {
            if g.is_boundary(i, j) {
                let k = g.idx(i, j);
                force[k] = 0.0;
                force[n + k] = 0.0;
            }
        }
    }
}

fn check_term(name: &str, t: f64, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged {
            t,
            term: name.into(),
        })
    }
}

/// `(u'', h')` of the continuous-in-time system with explicit sources.
pub fn rhs_with_sources(
    state: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
    f1: &ScalarField,
    f2: &VectorField2,
) -> Result<(VectorField2, ScalarField)> {
    params.validate()?;
    spec.validate()?;
    state.grid().ensure_same(f1.grid())?;
    state.grid().ensure_same(f2.grid())?;
    let g = *state.grid();
    let n = g.node_count();
    let t = state.t;

    let mut elastic = vec![0.0; 2 * n];
    lame_raw(
        &g,
        state.u.ux(),
        state.u.uy(),
        params.mu,
        params.grad_div(),
        &mut elastic,
    );
    check_term("elastic", t, &elastic)?;
    let mut lorentz = vec![0.0; 2 * n];
    lorentz_raw(&g, params, state.h.values(), &mut lorentz);
    check_term("lorentz", t, &lorentz)?;
    let mut acc = vec![0.0; 2 * n];
    for k in 0..n {
        let r = spec.apply_point([state.ut.ux()[k], state.ut.uy()[k]]);
        acc[k] = (-elastic[k] - r[0] + lorentz[k] + f2.ux()[k]) / params.rho_m;
        acc[n + k] = (-elastic[n + k] - r[1] + lorentz[n + k] + f2.uy()[k]) / params.rho_m;
    }
    check_term("dissipation", t, &acc)?;
    let mut acc = VectorField2::from_flat(g, &acc, VectorBc::DirichletZero);
    acc.enforce_bc();

    let mut diff = vec![0.0; n];
    neumann_laplacian_raw(&g, state.h.values(), &mut diff);
    let mut ind = vec![0.0; n];
    induction_raw(
        &g,
        params,
        state.ut.ux(),
        state.ut.uy(),
        state.h.values(),
        &mut ind,
    );
    check_term("induction", t, &ind)?;
    let hdot: Vec<f64> = (0..n)
        .map(|k| params.nu1 * diff[k] + ind[k] + f1.values()[k])
        .collect();
    check_term("diffusion", t, &hdot)?;
    Ok((acc, ScalarField::from_values(g, hdot, ScalarBc::Neumann)?))
}

/// `(u'', h')` with the forcing evaluated at `state.t`.
pub fn rhs(
    state: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
) -> Result<(VectorField2, ScalarField)> {
    state.grid().ensure_same(forcing.grid())?;
    let (f1, f2) = forcing.eval(state.t);
    rhs_with_sources(state, params, spec, &f1, &f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forcing::Forcing;
    use crate::ops::{gradient, inner};
    use std::f64::consts::PI;

    fn params(b0: f64) -> MaterialParams {
        MaterialParams {
            b0,
            ..MaterialParams::default()
        }
    }

    #[test]
    fn lorentz_of_constant_is_zero() {
        let g = Grid2D::unit_square(8).unwrap();
        let h = ScalarField::constant(g, 2.5, ScalarBc::Neumann);
        assert_eq!(lorentz_force(&h, &params(1.0)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn lorentz_of_linear_field() {
        let g = Grid2D::unit_square(8).unwrap();
        let a = 0.7;
        let h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, _| a * x);
        let f = lorentz_force(&h, &params(0.0)).unwrap();
        for j in 1..8 {
            for i in 1..8 {
                let (fx, fy) = f.at(i, j);
                assert!((fx + a * a * g.x(i)).abs() < 1e-14 && fy.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn induction_weak_form() {
        let g = Grid2D::new(10, 12, 1.0, 1.3).unwrap();
        let p = params(0.8);
        let ut = VectorField2::from_fn(g, VectorBc::DirichletZero, |x, y| {
            ((3.0 * x + y).sin(), x * y * y)
        });
        let h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| (x - y).cos());
        let phi = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| x * x + (2.0 * y).sin());
        let lhs = inner(&induction_term(&ut, &h, &p).unwrap(), &phi).unwrap();
        let flux = ut.times_scalar(&ScalarField::from_fn(g, ScalarBc::None, |x, y| {
            0.8 + (x - y).cos()
        }));
        let rhs = inner(&flux.with_bc(VectorBc::None), &gradient(&phi)).unwrap();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        assert!(induction_term(&ut, &h, &p).unwrap().mean().abs() < 1e-14);
    }

    #[test]
    fn zero_state_zero_rhs() {
        let g = Grid2D::unit_square(6).unwrap();
        let f = GriddedForcing::new(&Forcing::zero(1.0), g).unwrap();
        let (a, hd) = rhs(
            &State::zeros(g),
            &params(1.0),
            &DissipationSpec::linear(0.5),
            &f,
        )
        .unwrap();
        assert_eq!(a.max_abs(), 0.0);
        assert_eq!(hd.max_abs(), 0.0);
    }

    #[test]
    fn magnetic_eigenmode_decays() {
        let n = 16;
        let g = Grid2D::unit_square(n).unwrap();
        let p = MaterialParams {
            nu1: 0.3,
            ..params(1.0)
        };
        let mut s = State::zeros(g);
        s.h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| {
            (PI * x).cos() * (2.0 * PI * y).cos()
        });
        let f = GriddedForcing::new(&Forcing::zero(1.0), g).unwrap();
        let (_, hd) = rhs(&s, &p, &DissipationSpec::none(), &f).unwrap();
        // discrete eigenvalue of the 5-point stencil
        let dx = 1.0 / n as f64;
        let lam = (4.0 / (dx * dx)) * ((PI * dx / 2.0).sin().powi(2) + (PI * dx).sin().powi(2));
        for (a, b) in hd.values().iter().zip(s.h.values()) {
            assert!((a + p.nu1 * lam * b).abs() < 1e-10);
        }
    }

    #[test]
    fn nan_reports_term() {
        let g = Grid2D::unit_square(4).unwrap();
        let mut s = State::zeros(g);
        s.h.values_mut()[7] = f64::NAN;
        let f = GriddedForcing::new(&Forcing::zero(1.0), g).unwrap();
        match rhs(&s, &params(1.0), &DissipationSpec::none(), &f) {
            Err(Error::Diverged { term, .. }) => assert_eq!(term, "lorentz"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
