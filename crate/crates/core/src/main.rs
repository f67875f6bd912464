use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use recon::harness::{self, ExperimentConfig, ExperimentKind};
use recon::ReconError;

#[derive(Parser)]
#[command(name = "recon", version, about = "POCS reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruction from local extrema
    Fig3(RunArgs),
    /// Multi-channel time encoding with a tight-frame mixer
    Fig5(RunArgs),
    /// Iteration limit vs. the SVD pseudo-inverse
    Theorem1(RunArgs),
    /// Noise filtering by the pseudo-inverse
    Noise(RunArgs),
    /// Lookup-table Gram accuracy
    Prop4(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Use the config's full trial count.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Fig3(a) => (ExperimentKind::Fig3, a),
        Command::Fig5(a) => (ExperimentKind::Fig5, a),
        Command::Theorem1(a) => (ExperimentKind::Theorem1, a),
        Command::Noise(a) => (ExperimentKind::Noise, a),
        Command::Prop4(a) => (ExperimentKind::Prop4, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(ReconError::Calibration(msg)) => {
            eprintln!("calibration failed: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> recon::Result<bool> {
    let cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment != kind {
        return Err(ReconError::Config(format!(
            "{} is a {} config",
            args.config.display(),
            cfg.experiment.name()
        )));
    }
    let report = harness::run(&cfg, args.full)?;
    let (csv, json) = report.write(&cfg, &args.out)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!(
        "{} trials in {:.1} s → {}, {}",
        report.trials,
        report.elapsed_seconds,
        csv.display(),
        json.display()
    );
    Ok(report.passed())
}
