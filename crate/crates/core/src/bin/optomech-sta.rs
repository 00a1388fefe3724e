use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use optomech_sta::experiments::{run_to_dir, ExperimentConfig, RunMode, RunOutcome};

#[derive(Parser)]
#[command(
    version,
    about = "Design and simulate invariant-based fluctuation transfer between two membranes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single transfer run: writes drives.csv and trajectory.csv.
    Transfer(RunArgs),
    /// Noiseless fidelity over a (T, phi0) grid.
    SweepFidelity(RunArgs),
    /// Minimum Zeno ratio over a (T, phi0) grid.
    SweepKmin(RunArgs),
    /// Fidelity under drive amplitude noise over a (T, phi0) grid.
    SweepNoise(RunArgs),
    /// Fidelity with decay switched on over a (T, phi0) grid.
    SweepDecay(RunArgs),
    /// Boundary, RWA and invariant diagnostics of a designed pulse.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; mode defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator steps over the pulse window.
    #[arg(long)]
    steps: Option<usize>,
    /// Worker threads for sweeps.
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn split(self) -> (RunMode, RunArgs) {
        match self {
            Command::Transfer(a) => (RunMode::Transfer, a),
            Command::SweepFidelity(a) => (RunMode::SweepFidelity, a),
            Command::SweepKmin(a) => (RunMode::SweepKmin, a),
            Command::SweepNoise(a) => (RunMode::SweepNoise, a),
            Command::SweepDecay(a) => (RunMode::SweepDecay, a),
            Command::Validate(a) => (RunMode::Validate, a),
        }
    }
}

fn load_config(mode: RunMode, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_json_file(path)?;
            if cfg.mode != mode {
                bail!(
                    "{} configures mode {:?} but the subcommand runs {:?}",
                    path.display(),
                    cfg.mode,
                    mode
                );
            }
            cfg.resolved()
        }
        None => ExperimentConfig::for_mode(mode),
    };
    if let Some(steps) = args.steps {
        cfg.integrator.steps = steps;
    }
    if let Some(workers) = args.workers {
        cfg.workers = Some(workers);
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let (mode, args) = cli.command.split();
    let cfg = load_config(mode, &args)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    let outcome = run_to_dir(&cfg, &out).with_context(|| format!("{mode:?} run failed"))?;
    match outcome {
        RunOutcome::Transfer(r) => {
            println!("fidelity          {:.6}", r.fidelity);
            println!("final n_b1        {:.6}", r.final_source_occupation);
            println!("wrote {}", out.join("drives.csv").display());
            println!("wrote {}", out.join("trajectory.csv").display());
        }
        RunOutcome::Sweep(r) => {
            let failed = r.cells.iter().filter(|c| c.value.is_nan()).count();
            println!("{} cells, {} failed", r.cells.len(), failed);
            println!("wrote {}", out.join("sweep.csv").display());
        }
        RunOutcome::Validate(report) => {
            let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
            println!(
                "boundaries        {:<4}  max residual {:.3e} (tol {})",
                mark(report.boundaries.pass),
                report.boundaries.max_residual(),
                report.boundaries.tolerance
            );
            println!(
                "rwa               {:<4}  delta0 / peak coupling = {:.3} (threshold {})",
                mark(report.rwa.pass),
                report.rwa.ratio,
                report.rwa.threshold
            );
            println!(
                "invariant         {:<4}  residual {:.3e}, phase {:.3e}",
                mark(report.invariant_pass),
                report.max_invariant_residual,
                report.lewis_riesenfeld_phase
            );
            println!("min zeno ratio    {:.4}", report.min_zeno_ratio);
            println!("wrote {}", out.join("validation.json").display());
            return Ok(report.pass());
        }
    }
    println!("wrote {}", out.join("run_meta.json").display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more diagnostics failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
