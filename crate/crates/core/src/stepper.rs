//! Time integration on the grid and in Galerkin coefficients.
//!
//! The default scheme is an implicit-explicit midpoint rule. With `z = (u, v, h)`
//! and `tau = dt / 2`, each step
//!
//! 1. evaluates the coupling `F = lorentz + f2 - (rho(v) - alpha v)` and
//!    `G = induction + f1` at `z_k`, and takes a backward-Euler half step to a
//!    predictor `z_p`;
//! 2. re-evaluates the coupling at `z_p, t_k + tau` and solves the midpoint
//!    equations
//!    `rho (v_{k+1} - v_k) / dt = F - L u_mid - alpha v_mid`,
//!    `(h_{k+1} - h_k) / dt = nu1 Lap h_mid + G`.
//!
//! Both stages share one symmetric positive definite solve per field. The
//! linear parts are conserved or dissipated exactly; the energy balance is off
//! only by the coupling lag `O(dt^2)`.

use serde::{Deserialize, Serialize};

use crate::energy::{default_eps, energy_total, poincare_constant, step_residual, EnergySample};
use crate::error::{Error, Result};
use crate::field::{ScalarBc, ScalarField, VectorBc, VectorField2};
use crate::grid::Grid2D;
use crate::linalg::{cg_weighted, CgOptions};
use crate::model::galerkin::GalerkinBasis;
use crate::model::rhs::coupling_raw;
use crate::model::{DissipationSpec, GriddedForcing, MaterialParams, State};
use crate::ops::{lame_raw, neumann_laplacian_raw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexMidpoint,
    ExplicitRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Relative tolerance of the inner linear solves.
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    /// Iteration cap of the inner linear solves.
    #[serde(default = "default_max")]
    pub newton_max: usize,
    #[serde(default = "default_every")]
    pub sample_every: usize,
    /// Weight of the cross term in the logged `G`; defaults to
    /// `1/2 min(1, C_Omega^-2, alpha/2, nu1)`.
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_scheme() -> Scheme {
    Scheme::ImexMidpoint
}
fn default_tol() -> f64 {
    1e-13
}
fn default_max() -> usize {
    5000
}
fn default_every() -> usize {
    1
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        StepperConfig {
            dt,
            scheme: Scheme::ImexMidpoint,
            newton_tol: 1e-13,
            newton_max: 5000,
            sample_every: 1,
            eps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max == 0 || self.sample_every == 0 {
            return Err(Error::Parameter(
                "solver tolerance, iteration cap and sample_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { t: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<State>,
    pub energy: Vec<EnergySample>,
    pub config: StepperConfig,
    /// Step actually used (the configured step shrunk to divide the horizon).
    pub dt_used: f64,
    pub steps: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.samples
            .last()
            .expect("trajectory holds at least the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.energy.iter().map(|e| e.t).collect()
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

/// Reusable integrator with the forcing sampled on the grid.
pub struct Integrator<'a> {
    grid: Grid2D,
    params: MaterialParams,
    spec: DissipationSpec,
    forcing: &'a GriddedForcing,
    config: StepperConfig,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

struct Work {
    f1: Vec<f64>,
    f2: Vec<f64>,
    force: Vec<f64>,
    source: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(
        params: &MaterialParams,
        spec: &DissipationSpec,
        forcing: &'a GriddedForcing,
        config: &StepperConfig,
    ) -> Result<Self> {
        params.validate()?;
        spec.validate()?;
        config.validate()?;
        let grid = *forcing.grid();
        let w1 = grid.weights();
        let mut w2 = w1.clone();
        w2.extend_from_within(..);
        Ok(Integrator {
            grid,
            params: *params,
            spec: *spec,
            forcing,
            config: *config,
            w1,
            w2,
        })
    }

    fn work(&self) -> Work {
        let n = self.grid.node_count();
        Work {
            f1: vec![0.0; n],
            f2: vec![0.0; 2 * n],
            force: vec![0.0; 2 * n],
            source: vec![0.0; n],
            tmp: vec![0.0; 2 * n],
        }
    }

    fn opts(&self) -> CgOptions {
        CgOptions {
            tol: self.config.newton_tol,
            max_iter: self.config.newton_max,
        }
    }

    fn coupling(&self, v: &[f64], h: &[f64], t: f64, w: &mut Work) {
        self.forcing.eval_into(t, &mut w.f1, &mut w.f2);
        coupling_raw(
            &self.grid,
            &self.params,
            &self.spec,
            v,
            h,
            &w.f1,
            &w.f2,
            &mut w.force,
            &mut w.source,
        );
    }

    /// Solves the midpoint equations for `(v_mid, h_mid)` given the coupling in `w`.
    fn midpoint_solve(
        &self,
        u: &[f64],
        v: &[f64],
        h: &[f64],
        dt: f64,
        w: &mut Work,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.grid;
        let n = g.node_count();
        let p = &self.params;
        let alpha = self.spec.linear_coefficient();
        lame_raw(&g, &u[..n], &u[n..], p.mu, p.grad_div(), &mut w.tmp);
        let rhs: Vec<f64> = (0..2 * n)
            .map(|k| 2.0 * p.rho_m * v[k] + dt * (w.force[k] - w.tmp[k]))
            .collect();
        let diag = 2.0 * p.rho_m + alpha * dt;
        let c = 0.5 * dt * dt;
        let mut lx = vec![0.0; 2 * n];
        let apply = |x: &[f64], y: &mut [f64]| {
            lame_raw(&g, &x[..n], &x[n..], p.mu, p.grad_div(), &mut lx);
            for k in 0..2 * n {
                y[k] = diag * x[k] + c * lx[k];
            }
        };
        let mut vm = v.to_vec();
        cg_weighted(apply, &self.w2, &rhs, &mut vm, self.opts())?;

        let tau = 0.5 * dt;
        let b: Vec<f64> = (0..n).map(|k| h[k] + tau * w.source[k]).collect();
        let mut lap = vec![0.0; n];
        let apply_h = |x: &[f64], y: &mut [f64]| {
            neumann_laplacian_raw(&g, x, &mut lap);
            for k in 0..n {
                y[k] = x[k] - tau * p.nu1 * lap[k];
            }
        };
        // starting from b keeps every Krylov correction mean-free
        let mut hm = b.clone();
        cg_weighted(apply_h, &self.w1, &b, &mut hm, self.opts())?;
        Ok((vm, hm))
    }

    fn step_imex(&self, s: &State, dt: f64) -> Result<State> {
        let g = self.grid;
        let mut w = self.work();
        let u = s.u.to_flat();
        let v = s.ut.to_flat();
        let h = s.h.values();

        self.coupling(&v, h, s.t, &mut w);
        let (vp, hp) = self.midpoint_solve(&u, &v, h, dt, &mut w)?;
        self.coupling(&vp, &hp, s.t + 0.5 * dt, &mut w);
        let (vm, hm) = self.midpoint_solve(&u, &v, h, dt, &mut w)?;

        let u1: Vec<f64> = u.iter().zip(&vm).map(|(a, b)| a + dt * b).collect();
        let v1: Vec<f64> = v.iter().zip(&vm).map(|(a, b)| 2.0 * b - a).collect();
        let h1: Vec<f64> = h.iter().zip(&hm).map(|(a, b)| 2.0 * b - a).collect();
        self.assemble(g, &u1, &v1, h1, s.t + dt)
    }

    fn derivative(
        &self,
        u: &[f64],
        v: &[f64],
        h: &[f64],
        t: f64,
        w: &mut Work,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.grid;
        let n = g.node_count();
        let p = &self.params;
        let alpha = self.spec.linear_coefficient();
        self.coupling(v, h, t, w);
        lame_raw(&g, &u[..n], &u[n..], p.mu, p.grad_div(), &mut w.tmp);
        let acc: Vec<f64> = (0..2 * n)
            .map(|k| (w.force[k] - w.tmp[k] - alpha * v[k]) / p.rho_m)
            .collect();
        let mut lap = vec![0.0; n];
        neumann_laplacian_raw(&g, h, &mut lap);
        let hd: Vec<f64> = (0..n).map(|k| p.nu1 * lap[k] + w.source[k]).collect();
        (v.to_vec(), acc, hd)
    }

    fn step_rk4(&self, s: &State, dt: f64) -> Result<State> {
        let mut w = self.work();
        let u = s.u.to_flat();
        let v = s.ut.to_flat();
        let h = s.h.values().to_vec();
        let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + c * y).collect()
        };
        let k1 = self.derivative(&u, &v, &h, s.t, &mut w);
        let k2 = self.derivative(
            &add(&u, &k1.0, 0.5 * dt),
            &add(&v, &k1.1, 0.5 * dt),
            &add(&h, &k1.2, 0.5 * dt),
            s.t + 0.5 * dt,
            &mut w,
        );
        let k3 = self.derivative(
            &add(&u, &k2.0, 0.5 * dt),
            &add(&v, &k2.1, 0.5 * dt),
            &add(&h, &k2.2, 0.5 * dt),
            s.t + 0.5 * dt,
            &mut w,
        );
        let k4 = self.derivative(
            &add(&u, &k3.0, dt),
            &add(&v, &k3.1, dt),
            &add(&h, &k3.2, dt),
            s.t + dt,
            &mut w,
        );
        let comb = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..x.len())
                .map(|k| x[k] + dt / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]))
                .collect()
        };
        let u1 = comb(&u, &k1.0, &k2.0, &k3.0, &k4.0);
        let v1 = comb(&v, &k1.1, &k2.1, &k3.1, &k4.1);
        let h1 = comb(&h, &k1.2, &k2.2, &k3.2, &k4.2);
        self.assemble(self.grid, &u1, &v1, h1, s.t + dt)
    }

    fn assemble(&self, g: Grid2D, u: &[f64], v: &[f64], h: Vec<f64>, t: f64) -> Result<State> {
        if !(u.iter().chain(v).chain(&h).all(|x| x.is_finite())) {
            return Err(Error::Diverged {
                t,
                term: "non-finite state".into(),
            });
        }
        let mut u = VectorField2::from_flat(g, u, VectorBc::DirichletZero);
        let mut ut = VectorField2::from_flat(g, v, VectorBc::DirichletZero);
        u.enforce_bc();
        ut.enforce_bc();
        Ok(State {
            u,
            ut,
            h: ScalarField::from_values(g, h, ScalarBc::Neumann)?,
            t,
        })
    }

    /// One step of length `dt` from `s`, with the divergence check.
    pub fn step_by(&self, s: &State, dt: f64) -> Result<State> {
        self.grid.ensure_same(s.grid())?;
        let next = match self.config.scheme {
            Scheme::ImexMidpoint => self.step_imex(s, dt),
            Scheme::ExplicitRk4 => self.step_rk4(s, dt),
        }
        .map_err(|e| match e {
            Error::SolverStall {
                iterations,
                residual,
            } => Error::Diverged {
                t: s.t + dt,
                term: format!("inner solve stalled after {iterations} iterations ({residual:e})"),
            },
            e => e,
        })?;
        let e0 = energy_total(s, &self.params);
        let e1 = energy_total(&next, &self.params);
        if !(e1 <= 1e3 * (e0 + 1.0)) {
            return Err(Error::Diverged {
                t: next.t,
                term: format!("energy jumped from {e0:e} to {e1:e}"),
            });
        }
        Ok(next)
    }

    pub fn step(&self, s: &State) -> Result<State> {
        self.step_by(s, self.config.dt)
    }

    fn eps(&self) -> Result<f64> {
        let alpha = self.spec.linear_coefficient();
        Ok(match self.config.eps {
            Some(e) => e,
            None if alpha > 0.0 => default_eps(
                poincare_constant(&self.grid, &self.params)?,
                alpha,
                self.params.nu1,
            ),
            None => 0.0,
        })
    }

    /// Integrates to `t_end` and records the outcome, including divergence,
    /// in the returned trajectory.
    pub fn run(&self, state0: &State, t_end: f64) -> Result<Trajectory> {
        state0.validate()?;
        self.grid.ensure_same(state0.grid())?;
        let span = t_end - state0.t;
        if !(span >= 0.0) {
            return Err(Error::Parameter(format!(
                "t_end = {t_end} precedes the initial time {}",
                state0.t
            )));
        }
        let steps = if span == 0.0 {
            0
        } else {
            ((span / self.config.dt) - 1e-9).ceil().max(1.0) as usize
        };
        let dt = if steps == 0 {
            self.config.dt
        } else {
            span / steps as f64
        };
        let eps = self.eps()?;
        let alpha = self.spec.linear_coefficient();
        let mut samples = vec![state0.clone()];
        let mut energy = vec![EnergySample::of_state(state0, &self.params, eps, alpha)];
        let mut termination = Termination::Completed;
        let mut cur = state0.clone();
        for k in 1..=steps {
            let mut next = match self.step_by(&cur, dt) {
                Ok(s) => s,
                Err(Error::Diverged { t, term }) => {
                    termination = Termination::Diverged { t, reason: term };
                    break;
                }
                Err(e) => return Err(e),
            };
            next.t = state0.t + k as f64 * dt;
            if k % self.config.sample_every == 0 || k == steps {
                let mut row = EnergySample::of_state(&next, &self.params, eps, alpha);
                row.residual = step_residual(&cur, &next, &self.params, &self.spec, self.forcing);
                energy.push(row);
                samples.push(next.clone());
            }
            cur = next;
        }
        Ok(Trajectory {
            samples,
            energy,
            config: self.config,
            dt_used: dt,
            steps,
            termination,
        })
    }
}

/// One step of the configured scheme.
pub fn step(
    state: &State,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
) -> Result<State> {
    Integrator::new(params, spec, forcing, config)?.step(state)
}

/// Integrates to `t_end`; divergence is returned as an error.
pub fn integrate(
    state0: &State,
    t_end: f64,
    params: &MaterialParams,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
) -> Result<Trajectory> {
    let traj = Integrator::new(params, spec, forcing, config)?.run(state0, t_end)?;
    match &traj.termination {
        Termination::Completed => Ok(traj),
        Termination::Diverged { t, reason } => Err(Error::Diverged {
            t: *t,
            term: reason.clone(),
        }),
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinTrajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub termination: Termination,
}

struct GalerkinRhs<'a> {
    basis: &'a GalerkinBasis,
    params: MaterialParams,
    spec: DissipationSpec,
    forcing: &'a GriddedForcing,
}

impl GalerkinRhs<'_> {
    /// Projected coupling `(P_e F, P_h G)` at coefficient velocity `cv` and field `ch`.
    fn coupling(&self, cv: &[f64], ch: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let g = self.basis.grid();
        let n = g.node_count();
        let v = self.basis.reconstruct_elastic_raw(cv);
        let h = self.basis.reconstruct_magnetic_raw(ch);
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; 2 * n];
        self.forcing.eval_into(t, &mut f1, &mut f2);
        let mut force = vec![0.0; 2 * n];
        let mut source = vec![0.0; n];
        coupling_raw(
            g,
            &self.params,
            &self.spec,
            &v,
            &h,
            &f1,
            &f2,
            &mut force,
            &mut source,
        );
        (
            self.basis.project_elastic_raw(&force),
            self.basis.project_magnetic_raw(&source),
        )
    }
}

/// Evolves `[c, c', c~]` with the grid scheme applied in the eigenbasis: the
/// linear parts are diagonal and the coupling goes through
/// reconstruct, evaluate, project.
pub fn integrate_galerkin(
    coeffs0: &[f64],
    t0: f64,
    basis: &GalerkinBasis,
    t_end: f64,
    spec: &DissipationSpec,
    forcing: &GriddedForcing,
    config: &StepperConfig,
) -> Result<GalerkinTrajectory> {
    config.validate()?;
    spec.validate()?;
    basis.grid().ensure_same(forcing.grid())?;
    if coeffs0.len() != basis.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.state_dim(),
            found: coeffs0.len(),
        });
    }
    let params = *basis.params();
    let sys = GalerkinRhs {
        basis,
        params,
        spec: *spec,
        forcing,
    };
    let me = basis.m_elastic();
    let lam = basis.elastic_values();
    let kap: Vec<f64> = basis.magnetic_values().iter().map(|l| l - 1.0).collect();
    let alpha = spec.linear_coefficient();
    let rho = params.rho_m;

    let span = t_end - t0;
    if !(span >= 0.0) {
        return Err(Error::Parameter("t_end precedes the initial time".into()));
    }
    let steps = if span == 0.0 {
        0
    } else {
        ((span / config.dt) - 1e-9).ceil().max(1.0) as usize
    };
    let dt = if steps == 0 {
        config.dt
    } else {
        span / steps as f64
    };

    let mut out = GalerkinTrajectory {
        times: vec![t0],
        coeffs: vec![coeffs0.to_vec()],
        energy: vec![basis.coefficient_energy(coeffs0)?],
        termination: Termination::Completed,
    };
    let mut z = coeffs0.to_vec();
    for k in 1..=steps {
        let t = t0 + (k - 1) as f64 * dt;
        let (c, rest) = z.split_at(me);
        let (cv, ch) = rest.split_at(me);
        let next = match config.scheme {
            Scheme::ImexMidpoint => {
                let mid = |fe: &[f64], fh: &[f64]| -> (Vec<f64>, Vec<f64>) {
                    let vm = (0..me)
                        .map(|j| {
                            (2.0 * rho * cv[j] + dt * (fe[j] - lam[j] * c[j]))
                                / (2.0 * rho + alpha * dt + 0.5 * dt * dt * lam[j])
                        })
                        .collect();
                    let hm = (0..ch.len())
                        .map(|j| (ch[j] + 0.5 * dt * fh[j]) / (1.0 + 0.5 * dt * kap[j]))
                        .collect();
                    (vm, hm)
                };
                let (fe, fh) = sys.coupling(cv, ch, t);
                let (vp, hp) = mid(&fe, &fh);
                let (fe, fh) = sys.coupling(&vp, &hp, t + 0.5 * dt);
                let (vm, hm) = mid(&fe, &fh);
                let mut n = Vec::with_capacity(z.len());
                n.extend((0..me).map(|j| c[j] + dt * vm[j]));
                n.extend((0..me).map(|j| 2.0 * vm[j] - cv[j]));
                n.extend((0..ch.len()).map(|j| 2.0 * hm[j] - ch[j]));
                n
            }
            Scheme::ExplicitRk4 => {
                let deriv = |z: &[f64], t: f64| -> Vec<f64> {
                    let (c, rest) = z.split_at(me);
                    let (cv, ch) = rest.split_at(me);
                    let (fe, fh) = sys.coupling(cv, ch, t);
                    let mut d = cv.to_vec();
                    d.extend((0..me).map(|j| (fe[j] - lam[j] * c[j] - alpha * cv[j]) / rho));
                    d.extend((0..ch.len()).map(|j| fh[j] - kap[j] * ch[j]));
                    d
                };
                let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
                    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
                };
                let k1 = deriv(&z, t);
                let k2 = deriv(&add(&z, &k1, 0.5 * dt), t + 0.5 * dt);
                let k3 = deriv(&add(&z, &k2, 0.5 * dt), t + 0.5 * dt);
                let k4 = deriv(&add(&z, &k3, dt), t + dt);
                (0..z.len())
                    .map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect()
            }
        };
        let e_prev = *out.energy.last().unwrap();
        let e = basis.coefficient_energy(&next)?;
        let tn = t0 + k as f64 * dt;
        if next.iter().any(|x| !x.is_finite()) || !(e <= 1e3 * (e_prev + 1.0)) {
            out.termination = Termination::Diverged {
                t: tn,
                reason: "coefficient energy blowup".into(),
            };
            return Err(Error::Diverged {
                t: tn,
                term: "coefficient energy blowup".into(),
            });
        }
        z = next;
        if k % config.sample_every == 0 || k == steps {
            out.times.push(tn);
            out.coeffs.push(z.clone());
            out.energy.push(e);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Forcing;
    use std::f64::consts::PI;

    fn zero_forcing(g: Grid2D) -> GriddedForcing {
        GriddedForcing::new(&Forcing::zero(1.0), g).unwrap()
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = Grid2D::unit_square(8).unwrap();
        let f = zero_forcing(g);
        let s = step(
            &State::zeros(g),
            &MaterialParams::default(),
            &DissipationSpec::linear(0.3),
            &f,
            &StepperConfig::new(0.01),
        )
        .unwrap();
        assert_eq!(s.max_abs(), 0.0);
        assert!((s.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn magnetic_mode_decay() {
        // u = 0 and B0 = 0 decouple h; the midpoint rule gives the (1,1) Pade factor
        let n = 16;
        let g = Grid2D::unit_square(n).unwrap();
        let p = MaterialParams {
            b0: 0.0,
            nu1: 0.5,
            mu0: 1e-12,
            ..MaterialParams::default()
        };
        let f = zero_forcing(g);
        let mut s = State::zeros(g);
        s.h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, _| (PI * x).cos());
        let dt = 1e-3;
        let next = step(
            &s,
            &p,
            &DissipationSpec::none(),
            &f,
            &StepperConfig::new(dt),
        )
        .unwrap();
        let lam = 4.0 * (n * n) as f64 * (PI / (2 * n) as f64).sin().powi(2);
        let z = p.nu1 * lam * dt;
        let factor = (1.0 - z / 2.0) / (1.0 + z / 2.0);
        assert!((factor - (-z).exp()).abs() < z.powi(3));
        for (a, b) in next.h.values().iter().zip(s.h.values()) {
            assert!((a - factor * b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_horizon_single_sample() {
        let g = Grid2D::unit_square(6).unwrap();
        let f = zero_forcing(g);
        let tr = integrate(
            &State::zeros(g),
            0.0,
            &MaterialParams::default(),
            &DissipationSpec::none(),
            &f,
            &StepperConfig::new(0.1),
        )
        .unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.steps, 0);
    }

    #[test]
    fn divergence_is_reported() {
        let g = Grid2D::unit_square(8).unwrap();
        let f = zero_forcing(g);
        let mut s = State::zeros(g);
        s.h = ScalarField::from_fn(g, ScalarBc::Neumann, |x, y| {
            1e3 * (PI * x).cos() * (PI * y).cos()
        });
        s.ut = VectorField2::from_fn(g, VectorBc::DirichletZero, |x, y| {
            (1e3 * (PI * x).sin() * (PI * y).sin(), 0.0)
        });
        let cfg = StepperConfig {
            scheme: Scheme::ExplicitRk4,
            ..StepperConfig::new(0.5)
        };
        let r = integrate(
            &s,
            5.0,
            &MaterialParams::default(),
            &DissipationSpec::none(),
            &f,
            &cfg,
        );
        assert!(matches!(r, Err(ref e) if e.is_divergence()), "{r:?}");
    }

    #[test]
    fn galerkin_single_mode_oscillator() {
        // one elastic and one magnetic mode, B0 = 0 and h = 0: coupling vanishes
        let g = Grid2D::unit_square(6).unwrap();
        let p = MaterialParams {
            b0: 0.0,
            ..MaterialParams::default()
        };
        let b = GalerkinBasis::build(g, &p, 1, 2).unwrap();
        let f = zero_forcing(g);
        let alpha = 0.4;
        let lam = b.elastic_values()[0];
        let z0 = [1.0, 0.0, 0.0, 0.0];
        let t_end = 1.0;
        let run = |dt: f64| {
            let tr = integrate_galerkin(
                &z0,
                0.0,
                &b,
                t_end,
                &DissipationSpec::linear(alpha),
                &f,
                &StepperConfig::new(dt),
            )
            .unwrap();
            tr.coeffs.last().unwrap()[0]
        };
        // c'' + alpha c' + lam c = 0, c(0) = 1, c'(0) = 0
        let w = (lam - alpha * alpha / 4.0).sqrt();
        let exact = (-alpha * t_end / 2.0).exp()
            * ((w * t_end).cos() + alpha / (2.0 * w) * (w * t_end).sin());
        let e1 = (run(1e-2) - exact).abs();
        let e2 = (run(5e-3) - exact).abs();
        assert!(e2 < e1 / 3.5, "{e1} {e2}");
    }

    #[test]
    fn galerkin_full_rank_matches_grid() {
        let g = Grid2D::unit_square(6).unwrap();
        let p = MaterialParams {
            nu1: 0.5,
            ..MaterialParams::default()
        };
        let basis = GalerkinBasis::build_full(g, &p).unwrap();
        let f = zero_forcing(g);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let s0 = crate::energy::random_mode_state(g, &mut rng, 2);
        let cfg = StepperConfig::new(1e-2);
        let spec = DissipationSpec::linear(0.2);
        let tr = integrate(&s0, 0.1, &p, &spec, &f, &cfg).unwrap();
        let gt = integrate_galerkin(
            &basis.project_state(&s0).unwrap(),
            0.0,
            &basis,
            0.1,
            &spec,
            &f,
            &cfg,
        )
        .unwrap();
        let rec = basis
            .reconstruct_state(gt.coeffs.last().unwrap(), 0.1)
            .unwrap();
        let d = tr.final_state().difference(&rec);
        assert!(d.max_abs() < 1e-10, "{}", d.max_abs());
    }
}
