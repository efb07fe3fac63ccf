//! Period map, periodic orbits and the perturbation-decay experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    accumulate_ch_values, decay_rate_fit, energy_perturbation, energy_total, lap_h_sq,
    poincare_constant, random_mode_state, ConstantsLedger, Provenance,
};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField2};
use crate::grid::Grid2D;
use crate::model::rhs::{induction_raw, lorentz_raw};
use crate::model::{DissipationKind, DissipationSpec, GriddedForcing, MaterialParams, State};
use crate::ops::{lame_raw, neumann_laplacian_raw, weighted_dot_raw};
use crate::stepper::{Integrator, StepperConfig, Trajectory};

/// `sqrt(E(a - b))`, the distance used for fixed-point residuals.
pub fn energy_distance(a: &State, b: &State, params: &MaterialParams) -> f64 {
    energy_total(&a.difference(b), params).max(0.0).sqrt()
}

pub fn energy_norm(a: &State, params: &MaterialParams) -> f64 {
    energy_total(a, params).max(0.0).sqrt()
}

fn require_damped(spec: &DissipationSpec) -> Result<()> {
    if spec.kind == DissipationKind::None || !(spec.linear_coefficient() > 0.0) {
        return Err(Error::Parameter(
            "the period map needs linear mechanical dissipation with alpha > 0".into(),
        ));
    }
    Ok(())
}

fn period_steps(period: f64, dt: f64) -> (usize, f64) {
    let n = ((period / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, period / n as f64)
}

/// Advances `z` through one forcing period with the time reset to zero.
fn advance_period(integ: &Integrator, z: &State, period: f64, dt: f64) -> Result<State> {
    let (n, h) = period_steps(period, dt);
    let mut cur = z.clone().with_time(0.0);
    for k in 1..=n {
        cur = integ.step_by(&cur, h)?;
        cur.t = k as f64 * h;
    }
    Ok(cur.with_time(0.0))
}

/// `S(z)`: the state one forcing period after `z`, timed at 0.
pub fn poincare_map(
    z: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
) -> Result<State> {
    require_damped(spec)?;
    z.validate()?;
    let integ = Integrator::new(params, spec, forcing, config)?;
    advance_period(&integ, z, forcing.period(), config.dt)
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub z_star: State,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `||S(z_k) - z_k||` for every iterate.
    pub residual_history: Vec<f64>,
    /// One period from `z_star`.
    pub trajectory: Trajectory,
}

/// Picard iteration `z <- S(z)` until `||S(z) - z|| <= tol max(1, ||z||)`.
/// Without convergence the best iterate is returned with `converged = false`.
pub fn find_periodic(
    z_init: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
    tol: f64,
    max_iter: usize,
) -> Result<PeriodicOrbit> {
    require_damped(spec)?;
    z_init.validate()?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::Parameter(
            "tolerance and iteration cap must be positive".into(),
        ));
    }
    let integ = Integrator::new(params, spec, forcing, config)?;
    let period = forcing.period();
    let mut z = z_init.clone().with_time(0.0);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, z.clone());
    let mut converged = false;
    for _ in 0..max_iter {
        let sz = advance_period(&integ, &z, period, config.dt)?;
        let res = energy_distance(&sz, &z, params);
        history.push(res);
        if res < best.0 {
            best = (res, z.clone());
        }
        if res <= tol * energy_norm(&z, params).max(1.0) {
            converged = true;
            break;
        }
        z = sz;
    }
    let (_, z_star) = best;
    let trajectory = integ.run(&z_star, period)?;
    let residual = energy_distance(
        &trajectory.final_state().clone().with_time(0.0),
        &z_star,
        params,
    );
    Ok(PeriodicOrbit {
        z_star,
        residual,
        iterations: history.len(),
        converged,
        residual_history: history,
        trajectory,
    })
}

/// Constants of the critical-radius formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcrConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub eps: f64,
}

impl Default for RcrConstants {
    fn default() -> Self {
        RcrConstants {
            c1: 1.0,
            c2: 0.1,
            c3: 1.0,
            eps: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RcrReport {
    pub r_cr: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub admissible: bool,
    pub diagnostic: Option<String>,
}

/// ```text
/// R_cr = [C1 |f| + (C3/nu1) |f|^2] / [1 - sqrt(2 + alpha) exp(-eps T / (2 + alpha)) - (C2/nu1)(1 + |f|)]
/// ```
/// Admissible iff the denominator is positive and `0 < R_cr < 1`.
pub fn r_critical(
    f_l1_norm: f64,
    alpha: f64,
    nu1: f64,
    period: f64,
    c: &RcrConstants,
) -> Result<RcrReport> {
    if !(f_l1_norm >= 0.0)
        || !(alpha > 0.0 && nu1 > 0.0 && period > 0.0)
        || !(c.c1 > 0.0 && c.c2 > 0.0 && c.c3 > 0.0 && c.eps > 0.0)
    {
        return Err(Error::Parameter(
            "r_critical inputs must be positive (the forcing norm nonnegative)".into(),
        ));
    }
    let f = f_l1_norm;
    let numerator = c.c1 * f + c.c3 / nu1 * f * f;
    let denominator = 1.0
        - (2.0 + alpha).sqrt() * (-c.eps * period / (2.0 + alpha)).exp()
        - c.c2 / nu1 * (1.0 + f);
    if !(denominator > 0.0) {
        return Ok(RcrReport {
            r_cr: f64::NAN,
            numerator,
            denominator,
            admissible: false,
            diagnostic: Some(format!("denominator {denominator:.6e} is not positive: the period or the damping is too small")),
        });
    }
    let r_cr = numerator / denominator;
    let admissible = r_cr > 0.0 && r_cr < 1.0;
    let diagnostic = match admissible {
        true => None,
        false if r_cr == 0.0 => Some("R_cr = 0: no forcing, every ball is invariant".into()),
        false => Some(format!(
            "R_cr = {r_cr:.6e} is not below 1: the forcing is too large"
        )),
    };
    Ok(RcrReport {
        r_cr,
        numerator,
        denominator,
        admissible,
        diagnostic,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallWitness {
    pub sample: usize,
    pub sqrt_e_in: f64,
    pub sqrt_e_out: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallReport {
    pub radius: f64,
    pub samples: usize,
    pub inside: usize,
    pub fraction: f64,
    /// Largest `sqrt(E(S(z))) - R`; negative when every image is strictly inside.
    pub worst_excess: f64,
    pub witnesses: Vec<BallWitness>,
}

/// Random smooth state with `sqrt(E) = radius`.
pub fn random_state_on_sphere(
    grid: Grid2D,
    params: &MaterialParams,
    radius: f64,
    seed: u64,
) -> State {
    random_state(grid, params, radius, 3, seed)
}

/// Random combination of the lowest `modes` Fourier modes per direction,
/// with mean-free `h`, scaled to `sqrt(E) = radius`.
pub fn random_state(
    grid: Grid2D,
    params: &MaterialParams,
    radius: f64,
    modes: u32,
    seed: u64,
) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = random_mode_state(grid, &mut rng, modes.max(1));
    // drop the mean of h so the sample lies in the invariant mean-zero slice
    let m = s.h.mean();
    s.h.values_mut().iter_mut().for_each(|v| *v -= m);
    let e = energy_total(&s, params).sqrt();
    s.scaled(radius / e)
}

/// Samples `n_samples` states on the sphere `sqrt(E) = radius`, applies the
/// period map to each (in parallel) and reports how many land strictly inside.
#[allow(clippy::too_many_arguments)]
pub fn ball_mapping_check(
    radius: f64,
    n_samples: usize,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
    seed: u64,
) -> Result<BallReport> {
    if !(radius > 0.0) {
        return Err(Error::Parameter("ball radius must be positive".into()));
    }
    require_damped(spec)?;
    let grid = *forcing.grid();
    let integ = Integrator::new(params, spec, forcing, config)?;
    let results: Vec<BallWitness> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let z = random_state_on_sphere(grid, params, radius, seed.wrapping_add(i as u64));
            match advance_period(&integ, &z, forcing.period(), config.dt) {
                Ok(sz) => BallWitness {
                    sample: i,
                    sqrt_e_in: radius,
                    sqrt_e_out: Some(energy_norm(&sz, params)),
                    diverged: false,
                },
                Err(_) => BallWitness {
                    sample: i,
                    sqrt_e_in: radius,
                    sqrt_e_out: None,
                    diverged: true,
                },
            }
        })
        .collect();
    let inside = results
        .iter()
        .filter(|w| matches!(w.sqrt_e_out, Some(e) if e < radius))
        .count();
    let worst_excess = results
        .iter()
        .map(|w| w.sqrt_e_out.map_or(f64::INFINITY, |e| e - radius))
        .fold(f64::NEG_INFINITY, f64::max);
    let witnesses = results
        .into_iter()
        .filter(|w| w.diverged || w.sqrt_e_out.is_some_and(|e| e >= radius))
        .collect();
    Ok(BallReport {
        radius,
        samples: n_samples,
        inside,
        fraction: inside as f64 / n_samples.max(1) as f64,
        worst_excess,
        witnesses,
    })
}

/// Perturbation `(v, v', b)` sampled from a co-integrated base/perturbed pair.
#[derive(Debug, Clone)]
pub struct PerturbationRun {
    pub times: Vec<f64>,
    pub e_p: Vec<f64>,
    pub e_base: Vec<f64>,
    /// `|Lap_N h|^2` of the base solution at each sample.
    pub lh_base_sq: Vec<f64>,
    /// Max over steps of the perturbation-equation residual norm.
    pub pgoveq_max: f64,
    pub base_final: State,
    pub perturbation_final: State,
}

/// Co-evolves the orbit and the perturbed orbit and records `E_p` of their
/// difference. `b0` must have zero mean.
#[allow(clippy::too_many_arguments)]
pub fn run_perturbation(
    orbit: &PeriodicOrbit,
    v0: &VectorField2,
    v1: &VectorField2,
    b0: &ScalarField,
    t_end: f64,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
) -> Result<PerturbationRun> {
    let base0 = orbit.z_star.clone().with_time(0.0);
    let pert = State::new(v0.clone(), v1.clone(), b0.clone(), 0.0)?;
    if b0.mean().abs() > 1e-12 * b0.max_abs().max(1.0) {
        return Err(Error::Parameter(format!(
            "magnetic perturbation must have zero mean, got {:e}",
            b0.mean()
        )));
    }
    base0.grid().ensure_same(pert.grid())?;
    let integ = Integrator::new(params, spec, forcing, config)?;
    let (steps, dt) = period_steps(t_end, config.dt);
    let mut base = base0.clone();
    let mut full = State::lincomb(1.0, &base0, 1.0, &pert);
    let ep = |b: &State, f: &State| {
        let d = f.difference(b);
        energy_perturbation(&d.u, &d.ut, &d.h, params)
    };
    let mut out = PerturbationRun {
        times: vec![0.0],
        e_p: vec![ep(&base, &full)],
        e_base: vec![energy_total(&base, params)],
        lh_base_sq: vec![lap_h_sq(&base.h)],
        pgoveq_max: 0.0,
        base_final: base.clone(),
        perturbation_final: pert.clone(),
    };
    for k in 1..=steps {
        let mut nb = integ.step_by(&base, dt)?;
        let mut nf = integ.step_by(&full, dt)?;
        nb.t = k as f64 * dt;
        nf.t = nb.t;
        let r = pgoveq_residual(&base, &nb, &full, &nf, params, spec)?;
        out.pgoveq_max = out.pgoveq_max.max(r.0.max(r.1));
        base = nb;
        full = nf;
        if k % config.sample_every == 0 || k == steps {
            out.times.push(base.t);
            out.e_p.push(ep(&base, &full));
            out.e_base.push(energy_total(&base, params));
            out.lh_base_sq.push(lap_h_sq(&base.h));
        }
    }
    out.perturbation_final = full.difference(&base);
    out.base_final = base;
    Ok(out)
}

/// Residual of the perturbation equations on one step, with `v = full - base`:
///
/// ```text
/// rho v'' + L v + rho(u' + v') - rho(u') = lorentz(h + b) - lorentz(h)
/// b' - nu1 Lap b = induction(u' + v', h + b) - induction(u', h)
/// ```
///
/// Time derivatives are step differences and all other terms use the step
/// average. Returns the L2 norms of the two equation residuals.
pub fn pgoveq_residual(
    base_a: &State,
    base_b: &State,
    full_a: &State,
    full_b: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
) -> Result<(f64, f64)> {
    let g = *base_a.grid();
    let n = g.node_count();
    let dt = base_b.t - base_a.t;
    if !(dt > 0.0) {
        return Err(Error::Parameter(
            "pgoveq residual needs increasing times".into(),
        ));
    }
    let pa = full_a.difference(base_a);
    let pb = full_b.difference(base_b);
    let bm = State::lincomb(0.5, base_a, 0.5, base_b);
    let fm = State::lincomb(0.5, full_a, 0.5, full_b);
    let pm = fm.difference(&bm);

    let mut lv = vec![0.0; 2 * n];
    lame_raw(
        &g,
        pm.u.ux(),
        pm.u.uy(),
        params.mu,
        params.grad_div(),
        &mut lv,
    );
    let mut lor_f = vec![0.0; 2 * n];
    let mut lor_b = vec![0.0; 2 * n];
    lorentz_raw(&g, params, fm.h.values(), &mut lor_f);
    lorentz_raw(&g, params, bm.h.values(), &mut lor_b);
    let (vb, vf) = (bm.ut.to_flat(), fm.ut.to_flat());
    let (va, vb1) = (pa.ut.to_flat(), pb.ut.to_flat());
    let mut rv = vec![0.0; 2 * n];
    for k in 0..n {
        let rf = spec.apply_point([vf[k], vf[n + k]]);
        let rb = spec.apply_point([vb[k], vb[n + k]]);
        for c in 0..2 {
            let i = c * n + k;
            rv[i] = params.rho_m * (vb1[i] - va[i]) / dt + lv[i] + (rf[c] - rb[c])
                - (lor_f[i] - lor_b[i]);
        }
    }
    for j in 0..=g.ny() {
        for i in 0..=g.nx() {
            if g.is_boundary(i, j) {
                let k = g.idx(i, j);
                rv[k] = 0.0;
                rv[n + k] = 0.0;
            }
        }
    }
    let mut lap = vec![0.0; n];
    neumann_laplacian_raw(&g, pm.h.values(), &mut lap);
    let mut ind_f = vec![0.0; n];
    let mut ind_b = vec![0.0; n];
    induction_raw(
        &g,
        params,
        fm.ut.ux(),
        fm.ut.uy(),
        fm.h.values(),
        &mut ind_f,
    );
    induction_raw(
        &g,
        params,
        bm.ut.ux(),
        bm.ut.uy(),
        bm.h.values(),
        &mut ind_b,
    );
    let rb: Vec<f64> = (0..n)
        .map(|k| {
            (pb.h.values()[k] - pa.h.values()[k]) / dt - params.nu1 * lap[k] - (ind_f[k] - ind_b[k])
        })
        .collect();
    let nv = (weighted_dot_raw(&g, &rv[..n], &rv[..n]) + weighted_dot_raw(&g, &rv[n..], &rv[n..]))
        .sqrt();
    let nb = weighted_dot_raw(&g, &rb, &rb).sqrt();
    Ok((nv, nb))
}

/// First nonzero eigenvalue of the discrete Neumann Laplacian on the grid.
pub fn first_neumann_eigenvalue(g: &Grid2D) -> f64 {
    use std::f64::consts::PI;
    let kx = (2.0 / g.dx() * (PI * g.dx() / (2.0 * g.lx())).sin()).powi(2);
    let ky = (2.0 / g.dy() * (PI * g.dy() / (2.0 * g.ly())).sin()).powi(2);
    kx.min(ky)
}

/// Constants of the decay bound for a perturbation with initial energy
/// `e_p0` and base-orbit integral `c_h`:
///
/// ```text
/// C0' = min(alpha, nu1 kappa_1)
/// eta = 1/2 min(1, alpha / (2 C_Omega^2), C0' / (C_h sqrt(2 E_p(0))))
/// C0  = min(C0', eta)
/// C1  = (C0 - C_h sqrt(2 E_p(0)) eta) / (2 + alpha)
/// ```
pub fn stability_constants(
    grid: &Grid2D,
    params: &MaterialParams,
    alpha: f64,
    c_h: f64,
    e_p0: f64,
) -> Result<ConstantsLedger> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter(
            "stability constants need alpha > 0".into(),
        ));
    }
    let c_omega = poincare_constant(grid, params)?;
    let c0p = alpha.min(params.nu1 * first_neumann_eigenvalue(grid));
    let s = c_h * (2.0 * e_p0).sqrt();
    let mut eta = 1f64.min(alpha / (2.0 * c_omega * c_omega));
    if s > 0.0 {
        eta = eta.min(c0p / s);
    }
    eta *= 0.5;
    let c_big0 = c0p.min(eta);
    let c_big1 = ((c_big0 - s * eta) / (2.0 + alpha)).max(0.0);
    let mut l = ConstantsLedger::new();
    l.set(ConstantsLedger::C_OMEGA, c_omega, Provenance::Measured)?;
    l.set(ConstantsLedger::C_H_INT, c_h, Provenance::Measured)?;
    l.set(ConstantsLedger::ETA, eta, Provenance::Configured)?;
    l.set(ConstantsLedger::C_BIG0, c_big0, Provenance::Measured)?;
    l.set(ConstantsLedger::C_BIG1, c_big1, Provenance::Measured)?;
    Ok(l)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub c1: f64,
    pub c_h: f64,
    pub e_p0: f64,
    pub bound_margin_min: f64,
    pub fitted_rate: f64,
    pub r_squared: f64,
    pub violations: Vec<f64>,
}

/// Checks `E_p(t) <= 2 (2 + alpha) E_p(0) exp(-C1 t + 4 C_h / nu1)` at every
/// sample and fits the observed decay rate of `E_p`.
pub fn check_decay_bound(
    run: &PerturbationRun,
    consts: &ConstantsLedger,
    alpha: f64,
    nu1: f64,
) -> Result<DecayReport> {
    let c1 = consts.require(ConstantsLedger::C_BIG1)?;
    let c_h = consts.require(ConstantsLedger::C_H_INT)?;
    let e0 = run.e_p[0];
    let mut margin = f64::INFINITY;
    let mut violations = Vec::new();
    for (t, e) in run.times.iter().zip(&run.e_p) {
        let bound = 2.0 * (2.0 + alpha) * e0 * (-c1 * t + 4.0 * c_h / nu1).exp();
        let m = bound - e;
        margin = margin.min(m);
        if m < 0.0 {
            violations.push(*t);
        }
    }
    let (fitted_rate, r_squared) = if e0 > 0.0 {
        let t_end = *run.times.last().unwrap();
        decay_rate_fit(&run.times, &run.e_p, (0.0, t_end))?
    } else {
        (0.0, 1.0)
    };
    Ok(DecayReport {
        c1,
        c_h,
        e_p0: e0,
        bound_margin_min: margin,
        fitted_rate,
        r_squared,
        violations,
    })
}

/// `C_h` of a perturbation run: the trapezoid integral of the base `|Lap_N h|^2`.
pub fn measured_c_h(run: &PerturbationRun) -> f64 {
    accumulate_ch_values(&run.times, &run.lh_base_sq).sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarBc, VectorBc};
    use crate::model::{Forcing, ForcingTarget, ForcingTerm, Shape, TrigPoly};

    fn setup(
        n: usize,
        amp: f64,
    ) -> (
        Grid2D,
        MaterialParams,
        DissipationSpec,
        GriddedForcing,
        StepperConfig,
    ) {
        let g = Grid2D::unit_square(n).unwrap();
        let p = MaterialParams::default();
        let f = Forcing {
            period: 1.0,
            terms: vec![
                ForcingTerm {
                    target: ForcingTarget::F2x,
                    g_coeffs: TrigPoly {
                        cos: vec![0.0],
                        sin: vec![amp],
                    },
                    shape: Shape::SinMode { kx: 1, ky: 1 },
                },
                ForcingTerm {
                    target: ForcingTarget::F1,
                    g_coeffs: TrigPoly {
                        cos: vec![0.0, amp],
                        sin: vec![],
                    },
                    shape: Shape::CosMode { kx: 1, ky: 1 },
                },
            ],
        };
        (
            g,
            p,
            DissipationSpec::linear(1.0),
            GriddedForcing::new(&f, g).unwrap(),
            StepperConfig::new(0.02),
        )
    }

    #[test]
    fn zero_is_fixed_without_forcing() {
        let (g, p, spec, _, cfg) = setup(8, 0.0);
        let f = GriddedForcing::new(&Forcing::zero(1.0), g).unwrap();
        let s = poincare_map(&State::zeros(g), &p, &spec, &f, &cfg).unwrap();
        assert_eq!(s.max_abs(), 0.0);
        let orbit = find_periodic(&State::zeros(g), &p, &spec, &f, &cfg, 1e-10, 5).unwrap();
        assert!(orbit.converged && orbit.iterations == 1 && orbit.residual == 0.0);
    }

    #[test]
    fn undamped_map_rejected() {
        let (g, p, _, f, cfg) = setup(6, 0.1);
        assert!(poincare_map(&State::zeros(g), &p, &DissipationSpec::none(), &f, &cfg).is_err());
    }

    #[test]
    fn unforced_map_dissipates() {
        let (g, p, spec, _, cfg) = setup(8, 0.0);
        let f = GriddedForcing::new(&Forcing::zero(1.0), g).unwrap();
        for seed in 0..4 {
            let z = random_state_on_sphere(g, &p, 0.3, seed);
            let s = poincare_map(&z, &p, &spec, &f, &cfg).unwrap();
            assert!(energy_norm(&s, &p) < energy_norm(&z, &p));
        }
    }

    #[test]
    fn affine_map_without_coupling() {
        // h stays zero when B0 = 0 and f1 = 0, leaving the forced elastic problem
        let (g, _, spec, _, cfg) = setup(8, 0.0);
        let p = MaterialParams {
            b0: 0.0,
            ..MaterialParams::default()
        };
        let f = Forcing {
            period: 1.0,
            terms: vec![ForcingTerm {
                target: ForcingTarget::F2y,
                g_coeffs: TrigPoly {
                    cos: vec![0.1],
                    sin: vec![0.3],
                },
                shape: Shape::SinMode { kx: 1, ky: 2 },
            }],
        };
        let f = GriddedForcing::new(&f, g).unwrap();
        let elastic = |seed| {
            let mut s = random_state_on_sphere(g, &p, 0.1, seed);
            s.h = ScalarField::zeros(g, ScalarBc::Neumann);
            s
        };
        let (a, b) = (elastic(1), elastic(2));
        let s = |x: &State| poincare_map(x, &p, &spec, &f, &cfg).unwrap();
        let lhs = s(&State::lincomb(1.0, &a, 1.0, &b));
        let rhs = State::lincomb(
            1.0,
            &State::lincomb(1.0, &s(&a), 1.0, &s(&b)),
            -1.0,
            &s(&State::zeros(g)),
        );
        assert!(lhs.difference(&rhs).max_abs() < 1e-10);
    }

    #[test]
    fn picard_contracts() {
        let (g, p, spec, f, cfg) = setup(8, 0.1);
        let orbit = find_periodic(&State::zeros(g), &p, &spec, &f, &cfg, 1e-9, 40).unwrap();
        assert!(orbit.converged, "{:?}", orbit.residual_history);
        let h = &orbit.residual_history;
        assert!(h.windows(2).skip(1).all(|w| w[1] < w[0]));
        let again = poincare_map(&orbit.z_star, &p, &spec, &f, &cfg).unwrap();
        assert!((energy_distance(&again, &orbit.z_star, &p) - orbit.residual).abs() <= 1e-15);
    }

    #[test]
    fn r_critical_formula() {
        let c = RcrConstants::default();
        let r0 = r_critical(0.0, 1.0, 1.0, 10.0, &c).unwrap();
        assert!(r0.r_cr == 0.0 && r0.denominator > 0.0);
        let mut prev = -1.0;
        for k in 0..20 {
            let r = r_critical(0.01 * k as f64, 1.0, 1.0, 10.0, &c).unwrap();
            assert!(r.r_cr > prev);
            prev = r.r_cr;
        }
        let short = r_critical(0.1, 1.0, 1.0, 0.01, &c).unwrap();
        assert!(!short.admissible && short.diagnostic.is_some());
    }

    #[test]
    fn perturbation_zero_and_scaling() {
        let (g, p, spec, f, cfg) = setup(8, 0.1);
        let orbit = find_periodic(&State::zeros(g), &p, &spec, &f, &cfg, 1e-9, 40).unwrap();
        let zv = VectorField2::zeros(g, VectorBc::DirichletZero);
        let zb = ScalarField::zeros(g, ScalarBc::Neumann);
        let run = run_perturbation(&orbit, &zv, &zv, &zb, 1.0, &p, &spec, &f, &cfg).unwrap();
        assert!(run.e_p.iter().all(|&e| e == 0.0));

        let d = random_state_on_sphere(g, &p, 1e-3, 9);
        let big = run_perturbation(&orbit, &d.u, &d.ut, &d.h, 1.0, &p, &spec, &f, &cfg).unwrap();
        let h = d.scaled(0.5);
        let small = run_perturbation(&orbit, &h.u, &h.ut, &h.h, 1.0, &p, &spec, &f, &cfg).unwrap();
        for (a, b) in big.e_p.iter().zip(&small.e_p) {
            assert!((b / a - 0.25).abs() < 0.05 * 0.25);
        }
    }

    #[test]
    fn pgoveq_residual_is_second_order() {
        let (g, p, spec, f, _) = setup(8, 0.1);
        let base0 = random_state_on_sphere(g, &p, 0.2, 4);
        let pert = random_state_on_sphere(g, &p, 0.05, 5);
        let full0 = State::lincomb(1.0, &base0, 1.0, &pert);
        let res = |dt: f64| {
            let cfg = StepperConfig::new(dt);
            let integ = Integrator::new(&p, &spec, &f, &cfg).unwrap();
            let b1 = integ.step(&base0).unwrap();
            let f1 = integ.step(&full0).unwrap();
            let r = pgoveq_residual(&base0, &b1, &full0, &f1, &p, &spec).unwrap();
            r.0.max(r.1)
        };
        let (r1, r2) = (res(4e-3), res(2e-3));
        assert!(r1 / r2 > 3.5, "{r1} {r2}");
    }

    #[test]
    fn decay_bound_at_start_dominates() {
        let (g, p, spec, f, cfg) = setup(8, 0.1);
        let orbit = find_periodic(&State::zeros(g), &p, &spec, &f, &cfg, 1e-9, 40).unwrap();
        let d = random_state_on_sphere(g, &p, 1e-2, 3);
        let run = run_perturbation(&orbit, &d.u, &d.ut, &d.h, 3.0, &p, &spec, &f, &cfg).unwrap();
        let c_h = measured_c_h(&run);
        let l = stability_constants(&g, &p, 1.0, c_h, run.e_p[0]).unwrap();
        let rep = check_decay_bound(&run, &l, 1.0, p.nu1).unwrap();
        assert!(rep.violations.is_empty() && rep.fitted_rate < 0.0);
        let bound0 = 2.0 * 3.0 * run.e_p[0] * (4.0 * c_h / p.nu1).exp();
        assert!(bound0 >= 6.0 * run.e_p[0]);
    }
}
