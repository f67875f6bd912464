use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig3,
    Fig5,
    Theorem1,
    Noise,
    Prop4,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig3 => "fig3",
            Self::Fig5 => "fig5",
            Self::Theorem1 => "theorem1",
            Self::Noise => "noise",
            Self::Prop4 => "prop4",
        }
    }
}

/// One experiment. Every scientific parameter is spelled out in the file;
/// nothing falls back to a built-in default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub period: usize,
    pub rate: usize,
    pub trials: usize,
    /// Trial count used with `--full`.
    pub full_trials: usize,
    pub seed: u64,
    pub n_cycles: usize,
    pub fig3: Option<Fig3Params>,
    pub fig5: Option<Fig5Params>,
    pub theorem1: Option<Theorem1Params>,
    pub noise: Option<NoiseParams>,
    pub prop4: Option<Prop4Params>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3Params {
    /// Inputs are redrawn until they have exactly this many extrema.
    pub target_extrema: usize,
    /// Allowed deviation of the mean extrema count of unconditioned draws
    /// from the target.
    pub calibration_tolerance: f64,
    pub max_draws_per_trial: usize,
    /// Relaxation applied on odd steps (the derivative constraints); even
    /// steps use 1. One curve per entry.
    pub lambda_odd: Vec<f64>,
    pub arm_labels: Vec<String>,
    /// Guard for schedules inside `(0, 2)`; the end points run unguarded.
    pub guard_epsilon: f64,
    /// Plateau test: the λ_odd = 0 arm must end at least this factor above
    /// the λ_odd = 1 arm.
    pub plateau_factor: f64,
    pub decay_level: f64,
    pub fast_level: f64,
    pub monotone_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig5Params {
    pub sources: usize,
    pub outputs: usize,
    /// Rotation of the tight frame's source coordinates (radians).
    pub frame_rotation: f64,
    /// Channel bias as a multiple of the channel's peak amplitude.
    pub bias_factor: f64,
    /// Per-channel oversampling arms; the last one is the "solid" setting.
    pub channel_osr: Vec<f64>,
    pub arms: Vec<String>,
    pub relaxation: f64,
    pub decay_level: f64,
    /// Arm (a) at the low OSR counts as stagnating if its final error is at
    /// least this fraction of its error at mid-run.
    pub plateau_ratio: f64,
    pub monotone_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Params {
    pub osr: f64,
    pub bias_factor: f64,
    pub noise_sigma: f64,
    pub iterations: usize,
    pub checkpoints: Vec<usize>,
    pub gap_tolerance: f64,
    pub pinv_threshold: f64,
    pub max_seconds_per_instance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub osr: f64,
    pub bias_factor: f64,
    pub sigmas: Vec<f64>,
    pub pinv_threshold: f64,
    pub identity_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop4Params {
    pub pairs: usize,
    pub step: f64,
    pub min_length: f64,
    pub max_length: f64,
    pub quadrature_panels: usize,
    pub tolerance: f64,
    pub max_build_seconds: f64,
    /// Periodic-vs-aperiodic comparison: intervals shorter than this whose
    /// centres are at most `periodic_max_separation` apart.
    pub periodic_max_length: f64,
    pub periodic_max_separation: f64,
    pub periodic_tolerance: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ReconError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn effective_trials(&self, full: bool) -> usize {
        if full {
            self.full_trials
        } else {
            self.trials
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ReconError::Config(m));
        if self.trials == 0 || self.full_trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        if self.n_cycles == 0 {
            return bad("n_cycles must be ≥ 1".into());
        }
        let present = match self.experiment {
            ExperimentKind::Fig3 => self.fig3.is_some(),
            ExperimentKind::Fig5 => self.fig5.is_some(),
            ExperimentKind::Theorem1 => self.theorem1.is_some(),
            ExperimentKind::Noise => self.noise.is_some(),
            ExperimentKind::Prop4 => self.prop4.is_some(),
        };
        if !present {
            return bad(format!("missing [{}] section", self.experiment.name()));
        }
        if let Some(p) = &self.fig3 {
            if p.lambda_odd.is_empty() || p.lambda_odd.len() != p.arm_labels.len() {
                return bad("fig3: lambda_odd and arm_labels must be non-empty and of equal length".into());
            }
            for required in [0.0, 1.0] {
                if !p.lambda_odd.contains(&required) {
                    return bad(format!("fig3: the acceptance checks need a λ_odd = {required} arm"));
                }
            }
        }
        if let Some(p) = &self.fig5 {
            if p.channel_osr.is_empty() {
                return bad("fig5: channel_osr must list at least one arm".into());
            }
            if p.arms.iter().any(|a| !["a", "b", "c", "d"].contains(&a.as_str())) {
                return bad("fig5: arms are drawn from a, b, c, d".into());
            }
        }
        if let Some(p) = &self.theorem1 {
            if p.checkpoints.iter().any(|&c| c > p.iterations) || !p.checkpoints.contains(&p.iterations) {
                return bad("theorem1: checkpoints must lie in [0, iterations] and include iterations".into());
            }
        }
        if let Some(p) = &self.noise {
            if p.sigmas.is_empty() || p.sigmas.iter().any(|&s| !(s > 0.0)) {
                return bad("noise: sigmas must be positive".into());
            }
        }
        Ok(())
    }
}
