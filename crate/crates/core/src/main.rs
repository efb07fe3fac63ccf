use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use melab::experiment::{replay, run_with_jobs, ExperimentConfig, ExperimentKind, RunOptions};

#[derive(Parser)]
#[command(name = "melab", version, about = "Magnetoelastic numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; overrides `output_dir` of the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Exit with status 4 when a checked condition fails.
    #[arg(long)]
    strict: bool,
    /// Parallel sweep entries.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the coupled system.
    Simulate(RunArgs),
    /// Picard iteration of the period map.
    FindPeriodic(RunArgs),
    /// Decay of a perturbation of the periodic orbit.
    Perturb(RunArgs),
    /// Long-run trends towards the invariant set.
    Lasalle(RunArgs),
    /// Evaluate the smallness conditions.
    CheckConditions(RunArgs),
    /// Residuals of the invariant disk mode.
    DiskMode(RunArgs),
    /// Eigenbasis export and property P scan.
    Eigenbasis(RunArgs),
    /// Continuation-lemma check of a series.
    Botsenyuk(RunArgs),
    /// Verify an artifact directory.
    Replay {
        dir: PathBuf,
        /// Re-execute the stored config and compare byte for byte.
        #[arg(long)]
        rerun: bool,
    },
}

fn run(kind: ExperimentKind, args: RunArgs) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("melab: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.experiment != kind {
        eprintln!(
            "melab: config declares `{}`, running `{}`",
            cfg.experiment.name(),
            kind.name()
        );
        cfg.experiment = kind;
    }
    let opts = RunOptions {
        strict: args.strict,
        output: args.output,
        output_root: std::env::var_os("MELAB_OUTPUT").map(PathBuf::from),
    };
    match run_with_jobs(&cfg, &opts, args.jobs) {
        Ok(out) => {
            if let Some(m) = &out.message {
                eprintln!("melab: {m}");
            }
            println!("{}", out.dir.display());
            ExitCode::from(out.status.code() as u8)
        }
        Err(e) => {
            eprintln!("melab: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::FindPeriodic(a) => (ExperimentKind::FindPeriodic, a),
        Command::Perturb(a) => (ExperimentKind::Perturb, a),
        Command::Lasalle(a) => (ExperimentKind::Lasalle, a),
        Command::CheckConditions(a) => (ExperimentKind::CheckConditions, a),
        Command::DiskMode(a) => (ExperimentKind::DiskMode, a),
        Command::Eigenbasis(a) => (ExperimentKind::Eigenbasis, a),
        Command::Botsenyuk(a) => (ExperimentKind::Botsenyuk, a),
        Command::Replay { dir, rerun } => {
            return match replay(&dir, rerun) {
                Ok(rep) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&rep).expect("report serializes")
                    );
                    ExitCode::from(if rep.verified { 0 } else { 1 })
                }
                Err(e) => {
                    eprintln!("melab: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    run(kind, args)
}
