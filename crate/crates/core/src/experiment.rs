//! File-driven experiments: configuration, artifact directories and replay.
//!
//! An artifact directory holds `run.json` (config echo, version, constants
//! and checksums of every other artifact), `energy.csv` for experiments that
//! integrate in time, `reports/*.json` and `snapshots/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    botsenyuk_check, condition_regularity, condition_stability, disk_mode_residual,
    j1_zero_table_csv, lasalle_report, property_p_scan, BotsenyukInput, BotsenyukStatus,
    DiskModeSpec, LasalleOptions,
};
use crate::energy::{
    accumulate_ch_values, default_eps, energy_e1, energy_total, poincare_constant, ConstantsLedger,
    EnergySample, Provenance,
};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::io::{
    read_energy_csv, read_json, read_state, sha256_file, write_energy_csv, write_json, write_state,
};
use crate::model::{
    validate_h2, validate_kc, DissipationKind, DissipationSpec, Forcing, GalerkinBasis,
    GriddedForcing, MaterialParams, State,
};
use crate::periodic::{
    ball_mapping_check, check_decay_bound, find_periodic, measured_c_h, r_critical, random_state,
    run_perturbation, stability_constants, PeriodicOrbit, RcrConstants,
};
use crate::stepper::{Integrator, StepperConfig, Termination, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    FindPeriodic,
    Perturb,
    Lasalle,
    CheckConditions,
    DiskMode,
    Eigenbasis,
    Botsenyuk,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Simulate,
        ExperimentKind::FindPeriodic,
        ExperimentKind::Perturb,
        ExperimentKind::Lasalle,
        ExperimentKind::CheckConditions,
        ExperimentKind::DiskMode,
        ExperimentKind::Eigenbasis,
        ExperimentKind::Botsenyuk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::FindPeriodic => "find-periodic",
            ExperimentKind::Perturb => "perturb",
            ExperimentKind::Lasalle => "lasalle",
            ExperimentKind::CheckConditions => "check-conditions",
            ExperimentKind::DiskMode => "disk-mode",
            ExperimentKind::Eigenbasis => "eigenbasis",
            ExperimentKind::Botsenyuk => "botsenyuk",
        }
    }

    fn integrates(self) -> bool {
        matches!(
            self,
            ExperimentKind::Simulate
                | ExperimentKind::FindPeriodic
                | ExperimentKind::Perturb
                | ExperimentKind::Lasalle
        )
    }
}

/// Initial data of time-dependent experiments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    #[default]
    Zero,
    /// Seeded combination of low Fourier modes scaled to `sqrt(E)`.
    Random {
        sqrt_energy: f64,
        #[serde(default = "default_modes")]
        modes: u32,
    },
    /// `u.csv`, `ut.csv`, `h.csv` in a directory, relative to the config file.
    Snapshot { dir: PathBuf },
}

fn default_modes() -> u32 {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub radius: f64,
    #[serde(default = "default_ball_samples")]
    pub samples: usize,
}

fn default_ball_samples() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub rcr: RcrConstants,
    pub ball: Option<BallConfig>,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        PeriodicConfig {
            tol: 1e-8,
            max_iter: 30,
            rcr: RcrConstants::default(),
            ball: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    /// `E_p(0) / E(z*)`.
    pub relative_energy: f64,
    /// Horizon in forcing periods.
    pub periods: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            relative_energy: 1e-4,
            periods: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsConfig {
    pub c_mu: f64,
    pub c_small: f64,
    /// Bound on `E1`; measured as its sup over a run to `t_end` when absent.
    pub c_e: Option<f64>,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        ConditionsConfig {
            c_mu: 1.0,
            c_small: 0.5,
            c_e: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskConfig {
    pub m: usize,
    pub radial_points: usize,
    pub table_size: usize,
}

impl Default for DiskConfig {
    fn default() -> Self {
        DiskConfig {
            m: 1,
            radial_points: 2000,
            table_size: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenbasisConfig {
    pub m_elastic: usize,
    pub m_magnetic: usize,
    pub property_p_modes: usize,
}

impl Default for EigenbasisConfig {
    fn default() -> Self {
        EigenbasisConfig {
            m_elastic: 10,
            m_magnetic: 10,
            property_p_modes: 20,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("melab-out")
}

fn default_t_end() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: Grid2D,
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub dissipation: DissipationSpec,
    /// Defaults to zero forcing of period 1.
    #[serde(default)]
    pub forcing: Option<Forcing>,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Energy samples between snapshots; 0 keeps only the first and last.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub periodic: PeriodicConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub conditions: ConditionsConfig,
    #[serde(default)]
    pub disk: DiskConfig,
    #[serde(default)]
    pub eigenbasis: EigenbasisConfig,
    #[serde(default)]
    pub botsenyuk: Option<BotsenyukInput>,
    #[serde(default)]
    pub lasalle: LasalleOptions,
    /// JSON merge patches; each produces one independent run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<Value>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative snapshot directory is resolved
    /// against the file's location.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_json(&text)?;
        if let InitialData::Snapshot { dir } = &mut c.initial {
            if dir.is_relative() {
                if let Some(base) = path.parent() {
                    *dir = base.join(&*dir);
                }
            }
        }
        Ok(c)
    }

    pub fn forcing(&self) -> Forcing {
        self.forcing.clone().unwrap_or_else(|| Forcing::zero(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.dissipation.validate()?;
        self.forcing().validate()?;
        self.stepper.validate()?;
        let kind = self.experiment;
        if kind.integrates() && !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        match &self.initial {
            InitialData::Random { sqrt_energy, .. }
                if !(*sqrt_energy >= 0.0 && sqrt_energy.is_finite()) =>
            {
                return Err(Error::Config(
                    "random initial data needs a finite sqrt_energy >= 0".into(),
                ));
            }
            InitialData::Snapshot { dir } if !dir.is_dir() => {
                return Err(Error::Config(format!(
                    "snapshot directory {} does not exist",
                    dir.display()
                )));
            }
            _ => {}
        }
        if matches!(kind, ExperimentKind::FindPeriodic | ExperimentKind::Perturb) {
            if !(self.dissipation.kind != DissipationKind::None
                && self.dissipation.linear_coefficient() > 0.0)
            {
                return Err(Error::Config(
                    "periodic experiments need linear dissipation with alpha > 0".into(),
                ));
            }
            if !(self.periodic.tol > 0.0) || self.periodic.max_iter == 0 {
                return Err(Error::Config(
                    "periodic.tol and periodic.max_iter must be positive".into(),
                ));
            }
            if let Some(b) = self.periodic.ball {
                if !(b.radius > 0.0) || b.samples == 0 {
                    return Err(Error::Config(
                        "ball radius and sample count must be positive".into(),
                    ));
                }
            }
        }
        if kind == ExperimentKind::Perturb
            && !(self.perturb.relative_energy > 0.0 && self.perturb.periods > 0.0)
        {
            return Err(Error::Config(
                "perturb.relative_energy and perturb.periods must be positive".into(),
            ));
        }
        if kind == ExperimentKind::CheckConditions
            && !(self.conditions.c_mu > 0.0 && self.conditions.c_small > 0.0)
        {
            return Err(Error::Config(
                "conditions.c_mu and conditions.c_small must be positive".into(),
            ));
        }
        if kind == ExperimentKind::DiskMode {
            DiskModeSpec::new(self.disk.m, self.disk.radial_points)?;
        }
        if kind == ExperimentKind::Eigenbasis {
            let e = &self.eigenbasis;
            let (de, dm) = (2 * self.grid.interior_count(), self.grid.node_count());
            if e.m_elastic == 0 || e.m_elastic > de || e.m_magnetic == 0 || e.m_magnetic > dm {
                return Err(Error::Config(format!(
                    "eigenbasis sizes must lie in 1..={de} (elastic) and 1..={dm} (magnetic)"
                )));
            }
        }
        if kind == ExperimentKind::Botsenyuk {
            self.botsenyuk
                .as_ref()
                .ok_or_else(|| {
                    Error::Config("botsenyuk experiment needs a `botsenyuk` input".into())
                })?
                .validate()?;
        }
        Ok(())
    }
}

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success,
    Failure,
    Validation,
    Diverged,
    ConditionFailed,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::Validation => 2,
            ExitStatus::Diverged => 3,
            ExitStatus::ConditionFailed => 4,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub strict: bool,
    /// Replaces `output_dir` of the config.
    pub output: Option<PathBuf>,
    /// Root for relative output directories (the `MELAB_OUTPUT` variable).
    pub output_root: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub dir: PathBuf,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub sample: usize,
    pub t: f64,
    pub dir: String,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub melab_version: String,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub strict: bool,
    pub status: ExitStatus,
    pub message: Option<String>,
    pub constants: ConstantsLedger,
    /// `eps` and `alpha` used for the `g` column of `energy.csv`.
    pub eps: f64,
    pub alpha: f64,
    pub snapshots: Vec<SnapshotRecord>,
    /// SHA-256 of every other artifact, keyed by relative path.
    pub checksums: BTreeMap<String, String>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    strict: bool,
    ledger: ConstantsLedger,
    eps: f64,
    snapshots: Vec<SnapshotRecord>,
    findings: Vec<String>,
    diverged: Option<String>,
}

impl Ctx<'_> {
    fn report<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        write_json(
            &self.dir.join("reports").join(format!("{name}.json")),
            value,
        )
    }

    /// Records a failed check; under `--strict` it decides the exit status.
    fn finding(&mut self, msg: String) {
        self.findings.push(msg);
    }

    fn alpha(&self) -> f64 {
        self.cfg.dissipation.linear_coefficient()
    }

    fn write_trajectory(&mut self, traj: &Trajectory, tag: &str) -> Result<()> {
        write_energy_csv(&self.dir.join("energy.csv"), &traj.energy)?;
        let last = traj.samples.len() - 1;
        let every = self.cfg.snapshot_every;
        for (k, s) in traj.samples.iter().enumerate() {
            if k == 0 || k == last || (every > 0 && k % every == 0) {
                let rel = format!("snapshots/{tag}_{k:06}");
                write_state(&self.dir.join(&rel), s)?;
                self.snapshots.push(SnapshotRecord {
                    sample: k,
                    t: s.t,
                    dir: rel,
                });
            }
        }
        if let Termination::Diverged { t, reason } = &traj.termination {
            self.diverged = Some(format!("diverged at t = {t}: {reason}"));
        }
        Ok(())
    }
}

fn resolve_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    let d = opts
        .output
        .clone()
        .unwrap_or_else(|| cfg.output_dir.clone());
    match &opts.output_root {
        Some(root) if d.is_relative() => root.join(d),
        _ => d,
    }
}

fn initial_state(cfg: &ExperimentConfig) -> Result<State> {
    cfg.initial_state()
}

impl ExperimentConfig {
    /// The configured initial data on the configured grid.
    pub fn initial_state(&self) -> Result<State> {
        let cfg = self;
        Ok(match &cfg.initial {
            InitialData::Zero => State::zeros(cfg.grid),
            InitialData::Random { sqrt_energy, modes } => {
                if *sqrt_energy == 0.0 {
                    State::zeros(cfg.grid)
                } else {
                    random_state(cfg.grid, &cfg.material, *sqrt_energy, *modes, cfg.seed)
                }
            }
            InitialData::Snapshot { dir } => read_state(dir, cfg.grid, 0.0)?,
        })
    }
}

fn eps_for(cfg: &ExperimentConfig) -> Result<f64> {
    let alpha = cfg.dissipation.linear_coefficient();
    Ok(match cfg.stepper.eps {
        Some(e) => e,
        None if alpha > 0.0 => default_eps(
            poincare_constant(&cfg.grid, &cfg.material)?,
            alpha,
            cfg.material.nu1,
        ),
        None => 0.0,
    })
}

/// Runs one experiment (or the sweep it declares) into its artifact
/// directory. Validation failures and divergence are reported through the
/// status; only I/O and internal errors come back as `Err`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    run_with_jobs(cfg, opts, 1)
}

pub fn run_with_jobs(cfg: &ExperimentConfig, opts: &RunOptions, jobs: usize) -> Result<RunOutcome> {
    if cfg.sweep.is_empty() {
        run_single(cfg, opts)
    } else {
        run_sweep(cfg, opts, jobs)
    }
}

fn run_single(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let dir = resolve_dir(cfg, opts);
    if let Err(e) = cfg.validate() {
        return Ok(RunOutcome {
            status: ExitStatus::Validation,
            dir,
            message: Some(e.to_string()),
        });
    }
    std::fs::create_dir_all(&dir)?;
    let mut ctx = Ctx {
        cfg,
        dir: dir.clone(),
        strict: opts.strict,
        ledger: ConstantsLedger::new(),
        eps: 0.0,
        snapshots: Vec::new(),
        findings: Vec::new(),
        diverged: None,
    };
    let outcome = match execute(&mut ctx) {
        Ok(()) => None,
        Err(Error::Diverged { t, term }) => {
            ctx.diverged = Some(format!("diverged at t = {t}: {term}"));
            None
        }
        Err(e @ (Error::Parameter(_) | Error::Config(_))) => {
            Some((ExitStatus::Validation, e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let (status, message) = match (outcome, &ctx.diverged) {
        (Some((s, m)), _) => (s, Some(m)),
        (None, Some(d)) => (ExitStatus::Diverged, Some(d.clone())),
        (None, None) if ctx.strict && !ctx.findings.is_empty() => {
            (ExitStatus::ConditionFailed, Some(ctx.findings.join("; ")))
        }
        (None, None) if !ctx.findings.is_empty() => {
            (ExitStatus::Success, Some(ctx.findings.join("; ")))
        }
        (None, None) => (ExitStatus::Success, None),
    };
    let record = RunRecord {
        melab_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        config: cfg.clone(),
        strict: opts.strict,
        status,
        message: message.clone(),
        constants: ctx.ledger.clone(),
        eps: ctx.eps,
        alpha: ctx.alpha(),
        snapshots: ctx.snapshots.clone(),
        checksums: checksums(&dir)?,
    };
    write_json(&dir.join("run.json"), &record)?;
    Ok(RunOutcome {
        status,
        dir,
        message,
    })
}

fn checksums(dir: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, d: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(d)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                if rel != "run.json" && !rel.starts_with("replay_rerun/") {
                    out.insert(rel, sha256_file(&p)?);
                }
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    out.retain(|k, _| !k.starts_with("sweep_"));
    Ok(out)
}

fn dissipation_reports(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.cfg.dissipation;
    if spec.kind != DissipationKind::Power {
        return Ok(());
    }
    let h2 = validate_h2(&spec, 2000);
    let kc = validate_kc(&spec, 2000);
    ctx.report("dissipation", &json!({ "growth": h2, "monotonicity": kc }))?;
    if !h2.passed {
        ctx.finding("dissipation growth bounds fail".into());
    }
    if !kc.passed {
        ctx.finding(format!(
            "dissipation monotonicity constant k_c = {} fails",
            kc.k_c
        ));
    }
    Ok(())
}

fn execute(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    if cfg.experiment.integrates() {
        ctx.eps = eps_for(cfg)?;
        ctx.ledger.set(
            ConstantsLedger::EPS,
            ctx.eps,
            if cfg.stepper.eps.is_some() {
                Provenance::Configured
            } else {
                Provenance::Measured
            },
        )?;
        dissipation_reports(ctx)?;
    }
    match cfg.experiment {
        ExperimentKind::Simulate => simulate(ctx).map(|_| ()),
        ExperimentKind::Lasalle => {
            let traj = simulate(ctx)?;
            let rep = lasalle_report(&traj, &cfg.material, &cfg.lasalle);
            ctx.report("lasalle", &rep)?;
            if !rep.energy_monotone {
                ctx.finding(format!(
                    "energy increased by {:e} between samples",
                    rep.energy_max_increase
                ));
            }
            if !rep.h_small {
                ctx.finding(format!(
                    "|h| ratio {:.3e} exceeds {}",
                    rep.h_ratio, cfg.lasalle.h_ratio_threshold
                ));
            }
            Ok(())
        }
        ExperimentKind::FindPeriodic => periodic_orbit(ctx).map(|_| ()),
        ExperimentKind::Perturb => perturb(ctx),
        ExperimentKind::CheckConditions => check_conditions(ctx),
        ExperimentKind::DiskMode => {
            let rep = disk_mode_residual(
                &DiskModeSpec::new(cfg.disk.m, cfg.disk.radial_points)?,
                &cfg.material,
            )?;
            ctx.report("disk_mode", &rep)?;
            std::fs::write(
                ctx.dir.join("bessel_zeros.csv"),
                j1_zero_table_csv(cfg.disk.table_size)?,
            )?;
            Ok(())
        }
        ExperimentKind::Eigenbasis => {
            let e = cfg.eigenbasis;
            let basis = GalerkinBasis::build(cfg.grid, &cfg.material, e.m_elastic, e.m_magnetic)?;
            basis.save_csv(&ctx.dir.join("basis.csv"))?;
            ctx.report("eigenbasis", &json!({ "elastic_values": basis.elastic_values(), "magnetic_values": basis.magnetic_values() }))?;
            if e.property_p_modes > 0 {
                ctx.report(
                    "property_p",
                    &property_p_scan(
                        &cfg.grid,
                        e.property_p_modes.min(2 * cfg.grid.interior_count()),
                    )?,
                )?;
            }
            Ok(())
        }
        ExperimentKind::Botsenyuk => {
            let rep = botsenyuk_check(cfg.botsenyuk.as_ref().expect("validated"))?;
            ctx.report("botsenyuk", &rep)?;
            if rep.status != BotsenyukStatus::Certified {
                ctx.finding(format!(
                    "continuation lemma not certified: {:?}",
                    rep.status
                ));
            }
            Ok(())
        }
    }
}

fn simulate(ctx: &mut Ctx) -> Result<Trajectory> {
    let cfg = ctx.cfg;
    let forcing = GriddedForcing::new(&cfg.forcing(), cfg.grid)?;
    let z0 = initial_state(cfg)?;
    let mut stepper = cfg.stepper;
    stepper.eps = Some(ctx.eps);
    let traj = Integrator::new(&cfg.material, &cfg.dissipation, &forcing, &stepper)?
        .run(&z0, z0.t + cfg.t_end)?;
    ctx.write_trajectory(&traj, "sample")?;
    let e1_sup = traj.energy.iter().map(|r| r.e1).fold(0.0, f64::max);
    let ch = accumulate_ch_values(
        &traj.times(),
        &traj.energy.iter().map(|r| r.lh_sq).collect::<Vec<_>>(),
    );
    let m0 = z0.h.mean();
    let drift = traj
        .samples
        .iter()
        .map(|s| (s.h.mean() - m0).abs())
        .fold(0.0, f64::max);
    let res = traj
        .energy
        .iter()
        .skip(1)
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    ctx.ledger
        .set(ConstantsLedger::C_E, e1_sup, Provenance::Measured)?;
    ctx.ledger
        .set(ConstantsLedger::C_H_INT, ch.sup, Provenance::Measured)?;
    ctx.report(
        "simulate",
        &json!({
            "termination": traj.termination,
            "steps": traj.steps,
            "dt_used": traj.dt_used,
            "energy_initial": traj.energy[0].e_total,
            "energy_final": traj.energy.last().unwrap().e_total,
            "energy_residual_max": res,
            "h_mean_drift_max": drift,
            "e1_sup": e1_sup,
            "c_h": ch.sup,
        }),
    )?;
    Ok(traj)
}

fn periodic_orbit(ctx: &mut Ctx) -> Result<Option<(PeriodicOrbit, GriddedForcing)>> {
    let cfg = ctx.cfg;
    let f = cfg.forcing();
    let forcing = GriddedForcing::new(&f, cfg.grid)?;
    let alpha = ctx.alpha();
    let rcr = r_critical(
        forcing.l1_l2_norm(),
        alpha,
        cfg.material.nu1,
        f.period,
        &cfg.periodic.rcr,
    )?;
    ctx.report(
        "r_critical",
        &json!({ "f_l1_l2": forcing.l1_l2_norm(), "constants": cfg.periodic.rcr, "report": rcr }),
    )?;
    for (name, v) in [
        (ConstantsLedger::C1_CONST, cfg.periodic.rcr.c1),
        (ConstantsLedger::C2_CONST, cfg.periodic.rcr.c2),
        (ConstantsLedger::C3_CONST, cfg.periodic.rcr.c3),
    ] {
        ctx.ledger.set(name, v, Provenance::Configured)?;
    }
    if rcr.r_cr.is_finite() {
        ctx.ledger
            .set(ConstantsLedger::R_CR, rcr.r_cr, Provenance::Measured)?;
    }
    if !rcr.admissible && !forcing.is_zero() {
        let why = rcr.diagnostic.clone().unwrap_or_default();
        ctx.finding(format!("R_cr inadmissible: {why}"));
        if ctx.strict {
            return Ok(None);
        }
    }
    let z0 = initial_state(cfg)?;
    let mut stepper = cfg.stepper;
    stepper.eps = Some(ctx.eps);
    let orbit = find_periodic(
        &z0,
        &cfg.material,
        &cfg.dissipation,
        &forcing,
        &stepper,
        cfg.periodic.tol,
        cfg.periodic.max_iter,
    )?;
    ctx.write_trajectory(&orbit.trajectory, "orbit")?;
    ctx.report(
        "orbit",
        &json!({
            "residual": orbit.residual,
            "iterations": orbit.iterations,
            "converged": orbit.converged,
            "tol": cfg.periodic.tol,
            "period": f.period,
            "residual_history": orbit.residual_history,
            "energy_z_star": energy_total(&orbit.z_star, &cfg.material),
            "constants": ctx.ledger,
        }),
    )?;
    if !orbit.converged {
        ctx.finding(format!(
            "periodic search stopped at residual {:e} after {} iterations",
            orbit.residual, orbit.iterations
        ));
    }
    if let Some(b) = cfg.periodic.ball {
        let rep = ball_mapping_check(
            b.radius,
            b.samples,
            &cfg.material,
            &cfg.dissipation,
            &forcing,
            &stepper,
            cfg.seed,
        )?;
        ctx.report("ball", &rep)?;
        if rep.inside < rep.samples {
            ctx.finding(format!(
                "{} of {} ball samples left the ball",
                rep.samples - rep.inside,
                rep.samples
            ));
        }
    }
    Ok(Some((orbit, forcing)))
}

fn perturb(ctx: &mut Ctx) -> Result<()> {
    let Some((orbit, forcing)) = periodic_orbit(ctx)? else {
        return Ok(());
    };
    let cfg = ctx.cfg;
    let e_star = energy_total(&orbit.z_star, &cfg.material);
    let e_p0 = cfg.perturb.relative_energy * if e_star > 0.0 { e_star } else { 1.0 };
    let d = random_state(
        cfg.grid,
        &cfg.material,
        e_p0.sqrt(),
        3,
        cfg.seed.wrapping_add(1),
    );
    let mut stepper = cfg.stepper;
    stepper.eps = Some(ctx.eps);
    let t_end = cfg.perturb.periods * forcing.period();
    let run = run_perturbation(
        &orbit,
        &d.u,
        &d.ut,
        &d.h,
        t_end,
        &cfg.material,
        &cfg.dissipation,
        &forcing,
        &stepper,
    )?;
    let c_h = measured_c_h(&run);
    let consts = stability_constants(&cfg.grid, &cfg.material, ctx.alpha(), c_h, run.e_p[0])?;
    ctx.ledger.merge(&consts);
    let rep = check_decay_bound(&run, &consts, ctx.alpha(), cfg.material.nu1)?;
    let mut w = csv::Writer::from_path(ctx.dir.join("perturbation.csv"))?;
    w.write_record(["t", "e_p", "e_base", "lh_base_sq"])?;
    for k in 0..run.times.len() {
        w.serialize((run.times[k], run.e_p[k], run.e_base[k], run.lh_base_sq[k]))?;
    }
    w.flush()?;
    ctx.report(
        "decay",
        &json!({
            "c1": rep.c1,
            "c_h": rep.c_h,
            "e_p0": rep.e_p0,
            "bound_margin_min": rep.bound_margin_min,
            "fitted_rate": rep.fitted_rate,
            "r_squared": rep.r_squared,
            "violations": rep.violations,
            "pgoveq_residual_max": run.pgoveq_max,
        }),
    )?;
    if let Some(t) = rep.violations.first() {
        ctx.finding(format!("decay bound violated first at t = {t}"));
    }
    if !(rep.fitted_rate < 0.0) {
        ctx.finding(format!(
            "perturbation energy does not decay (rate {:e})",
            rep.fitted_rate
        ));
    }
    Ok(())
}

fn check_conditions(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let z0 = initial_state(cfg)?;
    let forcing = GriddedForcing::new(&cfg.forcing(), cfg.grid)?;
    let c_omega = poincare_constant(&cfg.grid, &cfg.material)?;
    ctx.ledger
        .set(ConstantsLedger::C_OMEGA, c_omega, Provenance::Measured)?;
    ctx.ledger.set(
        ConstantsLedger::C_MU,
        cfg.conditions.c_mu,
        Provenance::Configured,
    )?;
    let e1_0 = energy_e1(&z0, &cfg.material);
    let c_e = match cfg.conditions.c_e {
        Some(c) => {
            ctx.ledger
                .set(ConstantsLedger::C_E, c, Provenance::Configured)?;
            c
        }
        None if cfg.t_end > 0.0 => {
            ctx.eps = eps_for(cfg)?;
            simulate(ctx)?;
            ctx.ledger.require(ConstantsLedger::C_E)?
        }
        None => {
            ctx.ledger
                .set(ConstantsLedger::C_E, e1_0, Provenance::Measured)?;
            e1_0
        }
    };
    let reg = condition_regularity(
        e1_0,
        forcing.l1_h1_norm(),
        cfg.material.nu1,
        cfg.conditions.c_mu,
    )?;
    let stab = condition_stability(cfg.material.nu1, c_e, c_omega, cfg.conditions.c_small)?;
    let alpha = ctx.alpha();
    let rcr = if alpha > 0.0 {
        Some(r_critical(
            forcing.l1_l2_norm(),
            alpha,
            cfg.material.nu1,
            forcing.period(),
            &cfg.periodic.rcr,
        )?)
    } else {
        None
    };
    if !reg.satisfied {
        ctx.finding(format!(
            "regularity condition fails: lhs {:e} >= nu1^2 = {:e}",
            reg.lhs, reg.rhs
        ));
    }
    if !stab.satisfied {
        ctx.finding(format!(
            "stability condition fails: nu1 = {} <= threshold {:e}",
            stab.nu1, stab.threshold
        ));
    }
    ctx.report(
        "conditions",
        &json!({ "regularity": reg, "stability": stab, "r_critical": rcr }),
    )
}

fn merge_patch(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p.clone(),
    }
}

/// Expands the sweep into configs with their own output directories.
pub fn sweep_configs(cfg: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let mut base = cfg.clone();
    base.sweep.clear();
    let base_json = serde_json::to_value(&base)?;
    cfg.sweep
        .iter()
        .enumerate()
        .map(|(i, patch)| {
            let mut v = base_json.clone();
            merge_patch(&mut v, patch);
            let mut c: ExperimentConfig = serde_json::from_value(v)
                .map_err(|e| Error::Config(format!("sweep entry {i}: {e}")))?;
            c.sweep.clear();
            c.output_dir = PathBuf::from(format!("sweep_{i:03}"));
            Ok(c)
        })
        .collect()
}

fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions, jobs: usize) -> Result<RunOutcome> {
    let dir = resolve_dir(cfg, opts);
    let entries = match sweep_configs(cfg) {
        Ok(e) => e,
        Err(e) => {
            return Ok(RunOutcome {
                status: ExitStatus::Validation,
                dir,
                message: Some(e.to_string()),
            })
        }
    };
    std::fs::create_dir_all(&dir)?;
    let sub = |c: &ExperimentConfig| {
        let o = RunOptions {
            strict: opts.strict,
            output: Some(dir.join(&c.output_dir)),
            output_root: None,
        };
        run_single(c, &o)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| entries.par_iter().map(sub).collect());
    let mut summary = Vec::new();
    let mut worst = ExitStatus::Success;
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        if r.status.code() > worst.code() {
            worst = r.status;
        }
        summary.push(json!({ "entry": i, "dir": format!("sweep_{i:03}"), "status": r.status, "exit_code": r.status.code(), "message": r.message }));
    }
    write_json(
        &dir.join("sweep.json"),
        &json!({ "config": cfg, "entries": summary }),
    )?;
    let message = (worst != ExitStatus::Success)
        .then(|| "at least one sweep entry did not succeed; see sweep.json".to_string());
    Ok(RunOutcome {
        status: worst,
        dir,
        message,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub file: String,
    /// 1-based data row, when the file is a table.
    pub row: Option<usize>,
    pub column: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayReport {
    pub verified: bool,
    pub checksums_ok: bool,
    pub snapshots_checked: usize,
    pub mismatches: Vec<Mismatch>,
    /// Whether a re-execution reproduced `energy.csv` byte for byte.
    pub rerun_identical: Option<bool>,
}

fn energy_fields(r: &EnergySample) -> [(&'static str, f64); 6] {
    [
        ("t", r.t),
        ("e_total", r.e_total),
        ("e1", r.e1),
        ("g", r.g),
        ("grad_h_sq", r.grad_h_sq),
        ("lh_sq", r.lh_sq),
    ]
}

/// Verifies an artifact directory: file checksums, energy diagnostics
/// recomputed from the snapshots (to 1e-10) and, when asked or when
/// `energy.csv` fails its checksum, a re-execution of the stored config.
pub fn replay(dir: &Path, rerun: bool) -> Result<ReplayReport> {
    let record: RunRecord = read_json(&dir.join("run.json"))
        .map_err(|e| Error::Archive(format!("unreadable run.json: {e}")))?;
    let mut mismatches = Vec::new();
    for (rel, sum) in &record.checksums {
        let p = dir.join(rel);
        let actual = if p.is_file() {
            Some(sha256_file(&p)?)
        } else {
            None
        };
        if actual.as_deref() != Some(sum.as_str()) {
            let detail = if actual.is_some() {
                "checksum differs"
            } else {
                "file missing"
            };
            mismatches.push(Mismatch {
                file: rel.clone(),
                row: None,
                column: None,
                detail: detail.into(),
            });
        }
    }
    let checksums_ok = mismatches.is_empty();
    let energy_path = dir.join("energy.csv");
    let stored = if energy_path.is_file() {
        Some(read_energy_csv(&energy_path)?)
    } else {
        None
    };
    let mut snapshots_checked = 0;
    if let Some(rows) = &stored {
        let g = record.config.grid;
        for snap in &record.snapshots {
            let s = read_state(&dir.join(&snap.dir), g, snap.t)?;
            let fresh =
                EnergySample::of_state(&s, &record.config.material, record.eps, record.alpha);
            let Some(row) = rows.get(snap.sample) else {
                mismatches.push(Mismatch {
                    file: "energy.csv".into(),
                    row: Some(snap.sample + 1),
                    column: None,
                    detail: "row missing".into(),
                });
                continue;
            };
            for ((name, a), (_, b)) in energy_fields(row).into_iter().zip(energy_fields(&fresh)) {
                if !((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)) {
                    mismatches.push(Mismatch {
                        file: "energy.csv".into(),
                        row: Some(snap.sample + 1),
                        column: Some(name.into()),
                        detail: format!("stored {a:e}, recomputed from {} {b:e}", snap.dir),
                    });
                }
            }
            snapshots_checked += 1;
        }
    }
    let energy_tampered = mismatches
        .iter()
        .any(|m| m.file == "energy.csv" && m.row.is_none());
    let mut rerun_identical = None;
    if let (true, Some(rows)) = (rerun || energy_tampered, stored.as_ref()) {
        let scratch = dir.join("replay_rerun");
        let opts = RunOptions {
            strict: record.strict,
            output: Some(scratch.clone()),
            output_root: None,
        };
        let out = run_single(&record.config, &opts)?;
        let fresh_path = out.dir.join("energy.csv");
        let same = std::fs::read(&fresh_path)? == std::fs::read(&energy_path)?;
        if !same {
            let fresh = read_energy_csv(&fresh_path)?;
            let first = (0..rows.len().max(fresh.len())).find(|&k| rows.get(k) != fresh.get(k));
            if let Some(k) = first {
                let column = match (rows.get(k), fresh.get(k)) {
                    (Some(a), Some(b)) => {
                        let (sa, sb) = (serde_json::to_value(a)?, serde_json::to_value(b)?);
                        EnergySample::CSV_HEADER
                            .split(',')
                            .find(|c| sa[c] != sb[c])
                            .map(str::to_string)
                    }
                    _ => None,
                };
                mismatches.push(Mismatch {
                    file: "energy.csv".into(),
                    row: Some(k + 1),
                    column,
                    detail: "differs from a re-execution of run.json".into(),
                });
            }
        }
        std::fs::remove_dir_all(&scratch)?;
        rerun_identical = Some(same);
    }
    Ok(ReplayReport {
        verified: mismatches.is_empty() && rerun_identical != Some(false),
        checksums_ok,
        snapshots_checked,
        mismatches,
        rerun_identical,
    })
}
