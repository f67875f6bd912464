//! Batch experiments: the extrema (Fig. 3) and multi-channel (Fig. 5)
//! protocols, the pseudo-inverse and noise-filtering checks, and the
//! lookup-table accuracy study. Each run yields curves for the CSV, named
//! pass/fail checks, and a JSON summary.

mod config;
mod fig3;
mod fig5;
mod noise;
mod prop4;
mod theorem1;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{
    ExperimentConfig, ExperimentKind, Fig3Params, Fig5Params, NoiseParams, Prop4Params, Theorem1Params,
};
pub use fig3::{bandlimited_linear_interpolation, run_fig3};
pub use fig5::{calibrate_threshold, run_fig5, Fig5Instance};
pub use noise::run_noise;
pub use prop4::run_prop4;
pub use theorem1::run_theorem1;

use crate::error::{ReconError, Result};
use crate::samplers::text::fmt_f64;

/// Mean and standard error over trials, one value per logged cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub arm: String,
    pub osr: f64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Curve {
    /// Averages per-trial curves, summing in trial order so the bytes are
    /// reproducible.
    pub fn from_trials(arm: &str, osr: f64, per_trial: &[Vec<f64>]) -> Result<Self> {
        let n = per_trial.first().map(Vec::len).unwrap_or(0);
        if per_trial.iter().any(|t| t.len() != n) {
            return Err(ReconError::Dimension(format!("arm {arm}: trials logged different cycle counts")));
        }
        let count = per_trial.len() as f64;
        let mut mean = vec![0.0; n];
        let mut stderr = vec![0.0; n];
        for c in 0..n {
            let m = per_trial.iter().map(|t| t[c]).sum::<f64>() / count;
            mean[c] = m;
            if per_trial.len() > 1 {
                let var = per_trial.iter().map(|t| (t[c] - m).powi(2)).sum::<f64>() / (count - 1.0);
                stderr[c] = (var / count).sqrt();
            }
        }
        Ok(Self { arm: arm.to_string(), osr, mean, stderr })
    }

    /// First cycle whose mean error is at or below `level`.
    pub fn cycles_to(&self, level: f64) -> Option<usize> {
        self.mean.iter().position(|&v| v <= level)
    }

    pub fn last(&self) -> f64 {
        *self.mean.last().unwrap_or(&f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub trials: usize,
    pub curves: Vec<Curve>,
    pub checks: Vec<Check>,
    /// Assumptions and diagnostics worth reading next to the numbers.
    pub notes: Vec<String>,
    pub extra: serde_json::Value,
    pub elapsed_seconds: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `arm,osr,cycle,mean_rel_mse,stderr`, preceded by the configuration as
    /// `#` comment lines. Timing is left out so reruns are byte-identical.
    pub fn csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = String::new();
        for line in cfg.to_toml().lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("arm,osr,cycle,mean_rel_mse,stderr\n");
        for c in &self.curves {
            for (i, (m, s)) in c.mean.iter().zip(&c.stderr).enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", c.arm, c.osr, i, fmt_f64(*m), fmt_f64(*s));
            }
        }
        out
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment.name(),
            "trials": self.trials,
            "passed": self.passed(),
            "checks": self.checks,
            "notes": self.notes,
            "final_mean_rel_mse": self.curves.iter().map(|c| (format!("{}@{}", c.arm, c.osr), c.last())).collect::<Vec<_>>(),
            "extra": self.extra,
            "elapsed_seconds": self.elapsed_seconds,
        })
    }

    /// Writes `<name>.csv` and `<name>.json` under `dir`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.experiment.name()));
        let json = dir.join(format!("{}.json", self.experiment.name()));
        std::fs::write(&csv, self.csv(cfg))?;
        let text = serde_json::to_string_pretty(&self.summary()).map_err(|e| ReconError::Parse(e.to_string()))?;
        std::fs::write(&json, text + "\n")?;
        Ok((csv, json))
    }
}

/// Runs the configured experiment. Calibration problems surface as
/// [`ReconError::Calibration`]; failed checks are reported, not raised.
pub fn run(cfg: &ExperimentConfig, full: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let mut report = match cfg.experiment {
        ExperimentKind::Fig3 => run_fig3(cfg, full),
        ExperimentKind::Fig5 => run_fig5(cfg, full),
        ExperimentKind::Theorem1 => run_theorem1(cfg, full),
        ExperimentKind::Noise => run_noise(cfg, full),
        ExperimentKind::Prop4 => run_prop4(cfg),
    }?;
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Independent random stream for one trial.
pub fn trial_rng(master: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref().ok_or_else(|| ReconError::Config(format!("missing [{name}] section")))
}
