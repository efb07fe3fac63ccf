//! Energy functionals, the constants ledger and diagnostics built on them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::grid::Grid2D;
use crate::linalg::{cg_weighted, CgOptions};
use crate::model::galerkin::{elastic_dof, elastic_eigenpairs};
use crate::model::{DissipationSpec, GriddedForcing, MaterialParams, State};
use crate::ops::{
    a2_raw, dirichlet_form_raw, lame_apply_coeffs, lame_raw, neumann_laplacian_raw,
    weighted_dot_raw, L2Field,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    Configured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

/// Named inequality constants with their provenance. Serializes as
/// `{name: {value, provenance}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstantsLedger(BTreeMap<String, Constant>);

impl ConstantsLedger {
    pub const C_OMEGA: &'static str = "c_omega";
    pub const C_E: &'static str = "c_e";
    pub const C_H_INT: &'static str = "c_h_int";
    pub const C_MU: &'static str = "c_mu";
    pub const C0: &'static str = "c0";
    pub const C1_CONST: &'static str = "c1_const";
    pub const C2_CONST: &'static str = "c2_const";
    pub const C3_CONST: &'static str = "c3_const";
    pub const EPS: &'static str = "eps";
    pub const ETA: &'static str = "eta";
    pub const C_BIG0: &'static str = "c_big0";
    pub const C_BIG1: &'static str = "c_big1";
    pub const R_CR: &'static str = "r_cr";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: f64, provenance: Provenance) -> Result<()> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::Parameter(format!(
                "constant {name} must be finite and nonnegative, got {value}"
            )));
        }
        self.0
            .insert(name.to_string(), Constant { value, provenance });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).map(|c| c.value)
    }

    pub fn require(&self, name: &str) -> Result<f64> {
        self.get(name)
            .ok_or_else(|| Error::Config(format!("constants ledger has no entry '{name}'")))
    }

    pub fn entry(&self, name: &str) -> Option<&Constant> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Constant)> {
        self.0.iter()
    }

    pub fn merge(&mut self, other: &ConstantsLedger) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), *v);
        }
    }
}

/// `1/2 {rho_m |u'|^2 + a2(u, u) + mu0 |h|^2}`.
pub fn energy_total(state: &State, params: &MaterialParams) -> f64 {
    0.5 * (params.rho_m * state.ut.weighted_dot(&state.ut)
        + a2_raw(&state.u, &state.u, params.mu, params.grad_div())
        + params.mu0 * state.h.weighted_dot(&state.h))
}

/// `|grad h|^2` in the edge-difference form, `-(Lap_N h, h)`.
pub fn grad_h_sq(h: &ScalarField) -> f64 {
    dirichlet_form_raw(h.grid(), h.values(), h.values())
}

/// `|Lap_N h|^2`.
pub fn lap_h_sq(h: &ScalarField) -> f64 {
    let g = h.grid();
    let mut out = vec![0.0; g.node_count()];
    neumann_laplacian_raw(g, h.values(), &mut out);
    weighted_dot_raw(g, &out, &out)
}

/// `1/2 {a2(u', u') + |L u|^2 + |grad h|^2}`.
pub fn energy_e1(state: &State, params: &MaterialParams) -> f64 {
    let lu = lame_apply_coeffs(&state.u, params.mu, params.grad_div());
    0.5 * (a2_raw(&state.ut, &state.ut, params.mu, params.grad_div())
        + lu.weighted_dot(&lu)
        + grad_h_sq(&state.h))
}

/// `1/2 {|v'|^2 + a2(v, v) + mu0 |b|^2}`.
pub fn energy_perturbation(
    v: &VectorField2,
    vt: &VectorField2,
    b: &ScalarField,
    params: &MaterialParams,
) -> f64 {
    0.5 * (vt.weighted_dot(vt)
        + a2_raw(v, v, params.mu, params.grad_div())
        + params.mu0 * b.weighted_dot(b))
}

/// `E + eps (u', u) + (alpha eps / 2) |u|^2`.
pub fn lyapunov_g(state: &State, eps: f64, alpha: f64, params: &MaterialParams) -> f64 {
    energy_total(state, params)
        + eps * state.ut.weighted_dot(&state.u)
        + 0.5 * alpha * eps * state.u.weighted_dot(&state.u)
}

/// `E_p + eta (v', v) + (alpha eta / 2) |v|^2`.
pub fn lyapunov_g_perturbation(
    v: &VectorField2,
    vt: &VectorField2,
    b: &ScalarField,
    eta: f64,
    alpha: f64,
    params: &MaterialParams,
) -> f64 {
    energy_perturbation(v, vt, b, params)
        + eta * vt.weighted_dot(v)
        + 0.5 * alpha * eta * v.weighted_dot(v)
}

/// `1/2 min(1, C_Omega^-2, alpha/2, nu1)`.
pub fn default_eps(c_omega: f64, alpha: f64, nu1: f64) -> f64 {
    0.5 * 1f64.min(c_omega.powi(-2)).min(0.5 * alpha).min(nu1)
}

/// One row of an energy log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub e_total: f64,
    pub e1: f64,
    pub e_p: f64,
    pub g: f64,
    pub grad_h_sq: f64,
    pub lh_sq: f64,
    pub residual: f64,
}

impl EnergySample {
    pub const CSV_HEADER: &'static str = "t,e_total,e1,e_p,g,grad_h_sq,lh_sq,residual";

    pub fn of_state(state: &State, params: &MaterialParams, eps: f64, alpha: f64) -> Self {
        EnergySample {
            t: state.t,
            e_total: energy_total(state, params),
            e1: energy_e1(state, params),
            e_p: 0.0,
            g: lyapunov_g(state, eps, alpha, params),
            grad_h_sq: grad_h_sq(&state.h),
            lh_sq: lap_h_sq(&state.h),
            residual: 0.0,
        }
    }
}

/// Balance defect of one step from `a` to `b`, evaluated at the averaged state:
///
/// ```text
/// (E(b) - E(a)) / dt + mu0 nu1 |grad h|^2 + (rho(u'), u') - (f2, u') - mu0 (f1, h)
/// ```
pub fn step_residual(
    a: &State,
    b: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
) -> f64 {
    let dt = b.t - a.t;
    let avg = State::lincomb(0.5, a, 0.5, b);
    let g = *a.grid();
    let n = g.node_count();
    let v = avg.ut.to_flat();
    let mut diss = 0.0;
    let w = g.weights();
    for k in 0..n {
        let r = spec.apply_point([v[k], v[n + k]]);
        diss += w[k] * (r[0] * v[k] + r[1] * v[n + k]);
    }
    let mut power = 0.0;
    if !forcing.is_zero() {
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; 2 * n];
        forcing.eval_into(0.5 * (a.t + b.t), &mut f1, &mut f2);
        power = weighted_dot_raw(&g, &f2[..n], &v[..n])
            + weighted_dot_raw(&g, &f2[n..], &v[n..])
            + params.mu0 * weighted_dot_raw(&g, &f1, avg.h.values());
    }
    (energy_total(b, params) - energy_total(a, params)) / dt
        + params.mu0 * params.nu1 * grad_h_sq(&avg.h)
        + diss
        - power
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub t_mid: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

/// Per-interval energy-balance residuals of a uniformly sampled run.
pub fn energy_identity_residual(
    samples: &[State],
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
) -> Result<ResidualSeries> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    let dt0 = samples[1].t - samples[0].t;
    for w in samples.windows(2) {
        if ((w[1].t - w[0].t) - dt0).abs() > 1e-9 * dt0.abs().max(1.0) || !(w[1].t > w[0].t) {
            return Err(Error::InsufficientData(
                "samples are not uniformly spaced in time".into(),
            ));
        }
    }
    let residuals: Vec<f64> = samples
        .windows(2)
        .map(|w| step_residual(&w[0], &w[1], params, spec, forcing))
        .collect();
    let t_mid = samples
        .windows(2)
        .map(|w| 0.5 * (w[0].t + w[1].t))
        .collect();
    let max_abs = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    Ok(ResidualSeries {
        t_mid,
        residuals,
        max_abs,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChSeries {
    pub times: Vec<f64>,
    pub running: Vec<f64>,
    pub sup: f64,
}

/// Running trapezoid integral of `|Lap_N h|^2` over sample times.
pub fn accumulate_ch_values(times: &[f64], lh_sq: &[f64]) -> ChSeries {
    let mut running = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (lh_sq[k] + lh_sq[k - 1]);
        }
        running.push(acc);
    }
    ChSeries {
        times: times.to_vec(),
        running,
        sup: acc,
    }
}

pub fn accumulate_ch(samples: &[State]) -> ChSeries {
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let vals: Vec<f64> = samples.iter().map(|s| lap_h_sq(&s.h)).collect();
    accumulate_ch_values(&times, &vals)
}

/// Least-squares slope of `ln(value)` against `t` over `window`; returns `(rate, r^2)`.
pub fn decay_rate_fit(t: &[f64], values: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 10 points in the window, got {}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Domain(format!("nonpositive value {v} at t = {t}")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, v) in &pts {
        let (a, b) = (t - mt, v.ln() - my);
        stt += a * a;
        sty += a * b;
        syy += b * b;
    }
    let rate = sty / stt;
    let r2 = if syy <= 1e-300 {
        1.0
    } else {
        (sty * sty / (stt * syy)).min(1.0)
    };
    Ok((rate, r2))
}

/// Smallest eigenvalue of the Lame operator on the zero-boundary subspace.
pub fn smallest_elastic_eigenvalue(grid: &Grid2D, params: &MaterialParams) -> Result<f64> {
    params.validate()?;
    if elastic_dof(grid) <= 800 {
        let (vals, _) = elastic_eigenpairs(grid, params, 1)?;
        return Ok(vals[0]);
    }
    let g = *grid;
    let n = g.node_count();
    let w: Vec<f64> = {
        let mut w = g.weights();
        w.extend_from_within(..);
        w
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0e);
    let mut x = vec![0.0; 2 * n];
    for j in 1..g.ny() {
        for i in 1..g.nx() {
            let k = g.idx(i, j);
            let bump = (std::f64::consts::PI * g.x(i) / g.lx()).sin()
                * (std::f64::consts::PI * g.y(j) / g.ly()).sin();
            x[k] = bump * (1.0 + 0.1 * rng.gen::<f64>());
            x[n + k] = bump * (0.5 + 0.1 * rng.gen::<f64>());
        }
    }
    let apply = |a: &[f64], out: &mut [f64]| {
        lame_raw(&g, &a[..n], &a[n..], params.mu, params.grad_div(), out)
    };
    let mut lx = vec![0.0; 2 * n];
    let rq = |x: &[f64], lx: &mut [f64]| {
        apply(x, lx);
        weighted_dot_raw(&g, lx, x) / weighted_dot_raw(&g, x, x)
    };
    let mut prev = rq(&x, &mut lx);
    let opts = CgOptions {
        tol: 1e-12,
        max_iter: 20 * n,
    };
    for _ in 0..500 {
        let b = x.clone();
        let nb = weighted_dot_raw(&g, &b, &b).sqrt();
        let mut y = b.iter().map(|v| v / prev).collect::<Vec<_>>();
        cg_weighted(apply, &w, &b, &mut y, opts)?;
        let ny = weighted_dot_raw(&g, &y, &y).sqrt();
        x = y.iter().map(|v| v * nb / ny).collect();
        let cur = rq(&x, &mut lx);
        if (cur - prev).abs() <= 1e-14 * cur {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

/// `C_Omega = 1 / sqrt(lambda_1)`, so that `|v|_2 <= C_Omega a2(v, v)^(1/2)`.
pub fn poincare_constant(grid: &Grid2D, params: &MaterialParams) -> Result<f64> {
    Ok(1.0 / smallest_elastic_eigenvalue(grid, params)?.sqrt())
}

/// Smooth random zero-boundary state built from low sine modes; used by
/// property tests and sampled checks.
pub(crate) fn random_mode_state(grid: Grid2D, rng: &mut impl Rng, modes: u32) -> State {
    use std::f64::consts::PI;
    let mut coef = Vec::new();
    for kx in 1..=modes {
        for ky in 1..=modes {
            let scale = 1.0 / (kx * kx + ky * ky) as f64;
            coef.push((
                kx,
                ky,
                [0; 5].map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0)),
            ));
        }
    }
    let (lx, ly) = (grid.lx(), grid.ly());
    let sines = |c: usize, x: f64, y: f64| -> f64 {
        coef.iter()
            .map(|(kx, ky, a)| {
                a[c] * (*kx as f64 * PI * x / lx).sin() * (*ky as f64 * PI * y / ly).sin()
            })
            .sum()
    };
    let u = VectorField2::from_fn(grid, crate::field::VectorBc::DirichletZero, |x, y| {
        (sines(0, x, y), sines(1, x, y))
    });
    let ut = VectorField2::from_fn(grid, crate::field::VectorBc::DirichletZero, |x, y| {
        (sines(2, x, y), sines(3, x, y))
    });
    let h = ScalarField::from_fn(grid, crate::field::ScalarBc::Neumann, |x, y| {
        coef.iter()
            .map(|(kx, ky, a)| {
                a[4] * (*kx as f64 * PI * x / lx).cos() * (*ky as f64 * PI * y / ly).cos()
            })
            .sum()
    });
    State { u, ut, h, t: 0.0 }
}
