//! Reconstruction from local extrema: value and zero-derivative constraints
//! at every extremum, cyclic serial POCS with `λ = 1` on even steps and a
//! fixed `λ_odd` on odd steps.

use rand::RngCore;
use rayon::prelude::*;

use super::{section, trial_rng, Check, Curve, ExperimentConfig, ExperimentReport};
use crate::error::{ReconError, Result};
use crate::samplers::{find_extrema, sample, KernelFamily};
use crate::serial::{ConsistentSets, ControlSequence, Logging, RelaxationKind, RelaxationSchedule};
use crate::signal::{random_bandlimited, GridSignal, GridSpec, MultiSignal, SpectrumProfile, Subspace};

/// `P_𝓑` of the periodic piecewise-linear interpolation of `(times, values)`.
pub fn bandlimited_linear_interpolation(spec: GridSpec, times: &[f64], values: &[f64]) -> Result<GridSignal> {
    if times.is_empty() || times.len() != values.len() {
        return Err(ReconError::Dimension("interpolation needs matching, non-empty nodes".into()));
    }
    let period = spec.period_f64();
    let n = times.len();
    let lin = GridSignal::from_fn(spec, |t| {
        // Last node at or before t, wrapping around the period.
        let i = times.partition_point(|&s| s <= t);
        let (a, va, b, vb) = if i == 0 {
            (times[n - 1] - period, values[n - 1], times[0], values[0])
        } else if i == n {
            (times[n - 1], values[n - 1], times[0] + period, values[0])
        } else {
            (times[i - 1], values[i - 1], times[i], values[i])
        };
        va + (vb - va) * (t - a) / (b - a)
    });
    Ok(lin.project_b())
}

struct Trial {
    curves: Vec<Vec<f64>>,
    draws: Vec<usize>,
    violations: Vec<usize>,
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Trial> {
    let p = section(&cfg.fig3, "fig3")?;
    let spec = GridSpec::new(cfg.period, cfg.rate)?;
    let profile = SpectrumProfile::linear_increasing();
    let mut rng = trial_rng(cfg.seed, trial);
    let mut draws = Vec::new();
    let (x, extrema) = loop {
        if draws.len() >= p.max_draws_per_trial {
            return Err(ReconError::Calibration(format!(
                "trial {trial}: no input with {} extrema in {} draws (counts seen: mean {:.2})",
                p.target_extrema,
                draws.len(),
                draws.iter().sum::<usize>() as f64 / draws.len() as f64
            )));
        }
        let x = random_bandlimited(spec, &profile, rng.next_u64())?;
        let e = find_extrema(&x)?;
        draws.push(e.len());
        if e.len() == p.target_extrema && e.degenerate.is_empty() {
            break (x, e);
        }
    };
    let family = KernelFamily::extrema(&extrema.times, spec)?;
    let x: MultiSignal = x.into();
    let record = sample(&x, &family)?;
    let sets = ConsistentSets::from_record(&family, &record, Subspace::bandlimited(1))?;
    let u0: MultiSignal = bandlimited_linear_interpolation(spec, &extrema.times, &extrema.values)?.into();
    let steps = cfg.n_cycles * sets.len();

    let mut curves = Vec::new();
    let mut violations = Vec::new();
    for &lambda in &p.lambda_odd {
        let kind = RelaxationKind::Alternating { even: 1.0, odd: lambda };
        let guarded = lambda > 0.0 && lambda < 2.0;
        let schedule = if guarded {
            RelaxationSchedule::guarded(kind, p.guard_epsilon)?
        } else {
            RelaxationSchedule::unguarded(kind)
        };
        let trace = sets.run_serial(&u0, &ControlSequence::Cyclic, &schedule, steps, Some(&x), Logging::PerCycle)?;
        violations.push(if guarded { trace.monotonicity_violations(p.monotone_slack) } else { 0 });
        curves.push(trace.rel_mse());
    }
    Ok(Trial { curves, draws, violations })
}

pub fn run_fig3(cfg: &ExperimentConfig, full: bool) -> Result<ExperimentReport> {
    let p = section(&cfg.fig3, "fig3")?;
    let trials = cfg.effective_trials(full);
    let results = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;

    let all_draws: Vec<usize> = results.iter().flat_map(|r| r.draws.iter().copied()).collect();
    let natural_mean = all_draws.iter().sum::<usize>() as f64 / all_draws.len() as f64;
    // The input class itself must produce about the target count; the
    // redraw only removes the spread around it.
    if (natural_mean - p.target_extrema as f64).abs() > p.calibration_tolerance {
        return Err(ReconError::Calibration(format!(
            "unconditioned inputs average {natural_mean:.2} extrema, outside {} ± {}",
            p.target_extrema, p.calibration_tolerance
        )));
    }

    let card = 2 * p.target_extrema;
    let osr = card as f64 / cfg.period as f64;
    let mut curves = Vec::new();
    for (a, label) in p.arm_labels.iter().enumerate() {
        let per_trial: Vec<Vec<f64>> = results.iter().map(|r| r.curves[a].clone()).collect();
        curves.push(Curve::from_trials(label, osr, &per_trial)?);
    }
    let arm = |lambda: f64| p.lambda_odd.iter().position(|&l| l == lambda).map(|i| &curves[i]);
    let zero = arm(0.0).expect("validated");
    let one = arm(1.0).expect("validated");

    let mut checks = vec![
        Check::new(
            "lambda0_plateaus",
            zero.last() >= p.plateau_factor * one.last() && zero.last() > 0.0,
            format!(
                "final MSE λ_odd=0: {:.3e}, λ_odd=1: {:.3e} (need ≥ {}×)",
                zero.last(),
                one.last(),
                p.plateau_factor
            ),
        ),
        Check::new(
            "lambda1_decays",
            one.cycles_to(p.decay_level).is_some(),
            format!("λ_odd=1 reaches {:.0e} at cycle {:?}", p.decay_level, one.cycles_to(p.decay_level)),
        ),
    ];
    if let Some(fast) = arm(1.5) {
        let (c15, c1) = (fast.cycles_to(p.fast_level), one.cycles_to(p.fast_level));
        checks.push(Check::new(
            "lambda1.5_faster",
            matches!((c15, c1), (Some(a), Some(b)) if a < b),
            format!("cycles to {:.0e}: λ_odd=1.5 → {c15:?}, λ_odd=1 → {c1:?}", p.fast_level),
        ));
    }
    let total_violations: usize = results.iter().flat_map(|r| r.violations.iter()).sum();
    checks.push(Check::new(
        "guarded_monotone",
        total_violations == 0,
        format!("{total_violations} increases over all guarded per-trial traces (slack {:.0e})", p.monotone_slack),
    ));

    let notes = vec![
        format!(
            "inputs redrawn until exactly {} extrema; unconditioned draws averaged {natural_mean:.2} extrema ({} draws)",
            p.target_extrema,
            all_draws.len()
        ),
        "curve d runs λ_odd = 2 (the text only bounds it to (1,2])".into(),
        "u⁽⁰⁾ is the band-limited piecewise-linear interpolation of the extrema".into(),
    ];
    let extra = serde_json::json!({
        "natural_mean_extrema": natural_mean,
        "draws": all_draws.len(),
        "cycles_per_run": cfg.n_cycles,
        "cycles_to_fast_level": p.lambda_odd.iter().zip(&curves).map(|(l, c)| (l, c.cycles_to(p.fast_level))).collect::<Vec<_>>(),
    });
    Ok(ExperimentReport {
        experiment: cfg.experiment,
        trials,
        curves,
        checks,
        notes,
        extra,
        elapsed_seconds: 0.0,
    })
}
