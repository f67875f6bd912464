//! The iteration carried out on the sample vector alone: estimates are kept
//! as coefficient vectors `c` with `u⁽ⁿ⁾ = P_𝓐 u₀ + S* c`, and the residual
//! `r = s - S u⁽ⁿ⁾` is updated through the Gram matrix.

use super::pow2::{implied_lambda, rho, PowerOfTwo};
use super::{GramMatrix, SamplingOperator};
use crate::error::{dim_check, ReconError, Result};
use crate::serial::{IterationTrace, RelaxationSchedule, TraceRow};
use crate::signal::{axpy, dot, MultiSignal};

#[derive(Clone, Debug, PartialEq)]
pub enum DiscreteMode {
    /// Normalized kernels, unit step: `c += r`, `r -= Ĝ r`.
    Plain,
    /// Unnormalized kernels with per-kernel relaxation: `b = Λ H⁻² r`.
    Relaxed(RelaxationSchedule),
    /// `b_k = ρ(r_k)/ρ(‖h_k‖²)`, a signed power of two, so that `G b` needs
    /// only exponent shifts and additions.
    Multiplierless,
}

impl DiscreteMode {
    fn normalized(&self) -> bool {
        matches!(self, DiscreteMode::Plain)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOptions {
    /// Stop once `‖r̂‖₂ ≤ tol · ‖ŝ‖₂` (residual in normalized units).
    pub stop_tol: Option<f64>,
    /// Abort after this many consecutive increases of the tracked error.
    pub watchdog: usize,
    /// Rises while the tracked error is at or below this value are rounding
    /// drift around a converged state, not divergence, and are not counted.
    pub watchdog_floor: f64,
    /// Check `r = r₀ - G c` every iteration to this relative tolerance.
    pub invariant_tol: Option<f64>,
    /// Debug mode: synthesize the estimate on the grid every iteration and
    /// measure it against this truth (slow).
    pub synthesize_against: Option<MultiSignal>,
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        Self { stop_tol: None, watchdog: 50, watchdog_floor: 1e-20, invariant_tol: Some(1e-9), synthesize_against: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    /// Number of completed updates.
    pub n: usize,
    pub c: Vec<f64>,
    pub r: Vec<f64>,
    /// The last update `c⁽ⁿ⁾ - c⁽ⁿ⁻¹⁾`.
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DiscreteRun {
    pub trace: IterationTrace,
    pub state: DiscreteState,
    pub estimate: MultiSignal,
    /// Whether `c` multiplies normalized kernels.
    pub normalized: bool,
    /// Relative MSE of the grid-synthesized estimate, when requested.
    pub synthesized_rel_mse: Vec<f64>,
    /// Range of the effective relaxation of the multiplier-free updates.
    pub implied_lambda_range: Option<(f64, f64)>,
}

/// Relative MSE of `P_𝓐 u⁽ⁿ⁾` against a truth, computed from the iteration's
/// coefficient vector without synthesizing the signal.
///
/// The evaluation operator may use a different subspace than the iterated
/// one: with `P_𝓐 P_𝓑 = P_𝓐`, projecting `u₀ + Σ c_k P_𝓑 h_k` onto `𝓐`
/// gives `P_𝓐 u₀ + Σ c_k P_𝓐 h_k`.
#[derive(Clone, Debug)]
pub struct ErrorMeter {
    d0: Vec<f64>,
    rows: Vec<Vec<f64>>,
    norms: Vec<f64>,
    outside_sq: f64,
    norm_sq: f64,
}

impl ErrorMeter {
    pub fn new(eval_op: &SamplingOperator, u0: &MultiSignal, x: &MultiSignal) -> Result<Self> {
        let basis = eval_op.basis();
        let norm_sq = x.norm_sq();
        if norm_sq == 0.0 {
            return Err(ReconError::Precondition("relative error needs a non-zero truth".into()));
        }
        let cx = basis.coords(x)?;
        let cu = basis.coords(u0)?;
        let outside_sq = x.sub(&basis.synthesize(&cx)?)?.norm_sq();
        let op = eval_op.with_normalized(false);
        Ok(Self {
            d0: cu.iter().zip(&cx).map(|(a, b)| a - b).collect(),
            rows: (0..op.len()).map(|k| op.element_coords(k)).collect(),
            norms: eval_op.norms().to_vec(),
            outside_sq,
            norm_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `c` multiplies `h̃_k/‖h_k‖` if `normalized`, else `h̃_k`.
    pub fn rel_mse(&self, c: &[f64], normalized: bool) -> f64 {
        let mut d = self.d0.clone();
        for (k, &ck) in c.iter().enumerate() {
            if ck != 0.0 {
                let w = if normalized { ck / self.norms[k] } else { ck };
                axpy(&mut d, w, &self.rows[k]);
            }
        }
        (dot(&d, &d) + self.outside_sq) / self.norm_sq
    }
}

/// One multiplier-free update of an unnormalized state:
/// `b_k = ρ(r_k)/ρ(‖h_k‖²)`, `c += b`, `r -= G b`, where `G b` is formed by
/// exponent shifts and additions only.
pub fn multiplierless_update(state: &DiscreteState, gram: &GramMatrix, rho_norms: &[f64]) -> Result<DiscreteState> {
    let mut next = state.clone();
    multiplierless_step(&mut next, gram, rho_norms)?;
    next.n += 1;
    Ok(next)
}

fn multiplierless_step(state: &mut DiscreteState, gram: &GramMatrix, rho_norms: &[f64]) -> Result<()> {
    let k = gram.len();
    dim_check("state length", k, state.r.len())?;
    dim_check("ρ-norm vector", k, rho_norms.len())?;
    if gram.normalized {
        return Err(ReconError::Precondition("multiplier-free updates need the unnormalized Gram".into()));
    }
    let mut gb = vec![0.0; k];
    for i in 0..k {
        let q = PowerOfTwo::quotient(rho(state.r[i])?, rho_norms[i])?;
        state.b[i] = q.value();
        if q == PowerOfTwo::Zero {
            continue;
        }
        for (g, &gij) in gb.iter_mut().zip(gram.data.column(i).iter()) {
            *g += q.apply(gij);
        }
    }
    for i in 0..k {
        state.c[i] += state.b[i];
        state.r[i] -= gb[i];
    }
    Ok(())
}

fn estimate_coords(op: &SamplingOperator, c_u0: &[f64], c: &[f64]) -> Vec<f64> {
    let mut coords = c_u0.to_vec();
    for (i, &ci) in c.iter().enumerate() {
        if ci != 0.0 {
            axpy(&mut coords, ci, &op.element_coords(i));
        }
    }
    coords
}

fn synthesize(op: &SamplingOperator, c_u0: &[f64], c: &[f64]) -> Result<MultiSignal> {
    op.basis().synthesize(&estimate_coords(op, c_u0, c))
}

/// Runs `n_iter` updates from `u₀` for normalized samples `ŝ`.
pub fn run_discrete(
    op: &SamplingOperator,
    s_hat: &[f64],
    u0: &MultiSignal,
    n_iter: usize,
    mode: &DiscreteMode,
    meter: Option<&ErrorMeter>,
    opts: &DiscreteOptions,
) -> Result<DiscreteRun> {
    let k = op.len();
    dim_check("sample count", k, s_hat.len())?;
    if let Some(m) = meter {
        dim_check("error meter size", k, m.len())?;
    }
    if let DiscreteMode::Relaxed(schedule) = mode {
        schedule.validate(k)?;
    }
    let normalized = mode.normalized();
    let op = op.with_normalized(normalized);
    let norms = op.norms().to_vec();
    let energies: Vec<f64> = norms.iter().map(|n| n * n).collect();
    let gram: GramMatrix = op.gram();

    let c_u0 = op.basis().coords(u0)?;
    let su0 = op.apply_s_coords(&c_u0);
    let s: Vec<f64> = if normalized {
        s_hat.to_vec()
    } else {
        s_hat.iter().zip(&norms).map(|(v, n)| v * n).collect()
    };
    let r0: Vec<f64> = s.iter().zip(&su0).map(|(a, b)| a - b).collect();
    let scale0 = r0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    let mut state = DiscreteState { n: 0, c: vec![0.0; k], r: r0.clone(), b: vec![0.0; k] };
    let mut trace = IterationTrace::default();
    let mut synthesized = Vec::new();
    let mut lambda_range: Option<(f64, f64)> = None;
    let rho_norms = energies.iter().map(|&e| rho(e)).collect::<Result<Vec<_>>>()?;
    let stop_level = opts.stop_tol.map(|tol| {
        let norm_s = s_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
        tol * norm_s
    });
    let resid_norm = |r: &[f64]| -> f64 {
        r.iter()
            .zip(&norms)
            .map(|(v, n)| if normalized { v * v } else { (v / n) * (v / n) })
            .sum::<f64>()
            .sqrt()
    };

    let max_res = |r: &[f64]| -> f64 {
        r.iter()
            .zip(&norms)
            .map(|(v, n)| if normalized { v.abs() } else { v.abs() / n })
            .fold(0.0, f64::max)
    };
    let metric = |st: &DiscreteState| -> f64 {
        match meter {
            Some(m) => m.rel_mse(&st.c, normalized),
            None => dot(&st.r, &st.r),
        }
    };

    let mut prev = metric(&state);
    trace.rows.push(TraceRow {
        iter: 0,
        rel_mse: meter.map(|_| prev),
        max_residual: max_res(&state.r),
        k: None,
        lambda: None,
    });
    let mut rises = 0usize;

    for n in 0..n_iter {
        if let Some(level) = stop_level {
            if resid_norm(&state.r) <= level {
                break;
            }
        }
        let gb = match mode {
            DiscreteMode::Plain => {
                state.b.copy_from_slice(&state.r);
                Some(gram.mul_vec(&state.b))
            }
            DiscreteMode::Relaxed(schedule) => {
                for i in 0..k {
                    state.b[i] = schedule.lambda(n, i) * state.r[i] / energies[i];
                }
                Some(gram.mul_vec(&state.b))
            }
            DiscreteMode::Multiplierless => {
                for (&r, &e) in state.r.iter().zip(&energies) {
                    if r != 0.0 {
                        let l = implied_lambda(r, e)?;
                        lambda_range = Some(match lambda_range {
                            None => (l, l),
                            Some((lo, hi)) => (lo.min(l), hi.max(l)),
                        });
                    }
                }
                multiplierless_step(&mut state, &gram, &rho_norms)?;
                None
            }
        };
        if let Some(gb) = gb {
            for i in 0..k {
                state.c[i] += state.b[i];
                state.r[i] -= gb[i];
            }
        }
        state.n = n + 1;
        if state.r.iter().chain(&state.c).any(|v| !v.is_finite()) {
            return Err(ReconError::Numerical(format!("non-finite state after update {}", n + 1)));
        }
        if let Some(tol) = opts.invariant_tol {
            let gc = gram.mul_vec(&state.c);
            let drift = r0
                .iter()
                .zip(&gc)
                .zip(&state.r)
                .map(|((a, g), r)| (a - g - r).abs())
                .fold(0.0, f64::max);
            let scale = scale0.max(state.c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if drift > tol * scale {
                return Err(ReconError::Numerical(format!(
                    "residual invariant drifted by {drift:.3e} at update {}",
                    n + 1
                )));
            }
        }
        let cur = metric(&state);
        if cur > prev && cur > opts.watchdog_floor {
            rises += 1;
            if rises >= opts.watchdog {
                return Err(ReconError::Diverged(format!(
                    "error rose for {rises} consecutive updates (n = {})",
                    n + 1
                )));
            }
        } else {
            rises = 0;
        }
        prev = cur;
        trace.rows.push(TraceRow {
            iter: n + 1,
            rel_mse: meter.map(|_| cur),
            max_residual: max_res(&state.r),
            k: None,
            lambda: None,
        });
        if let Some(x) = &opts.synthesize_against {
            let u = synthesize(&op, &c_u0, &state.c)?;
            synthesized.push(u.sub(x)?.norm_sq() / x.norm_sq());
        }
    }

    let coords = estimate_coords(&op, &c_u0, &state.c);
    let estimate = op.basis().synthesize(&coords)?;
    trace.final_coords = coords;
    trace.final_estimate = Some(estimate.clone());
    Ok(DiscreteRun {
        trace,
        state,
        estimate,
        normalized,
        synthesized_rel_mse: synthesized,
        implied_lambda_range: lambda_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ortho::PinvOracle;
    use crate::samplers::{encode_if, sample, KernelFamily, SampleRecord};
    use crate::serial::{RelaxationKind, RelaxationSchedule};
    use crate::signal::{random_bandlimited, GridSpec, SpectrumProfile, Subspace};

    fn setup(osr: f64, seed: u64) -> (MultiSignal, KernelFamily, SampleRecord, SamplingOperator) {
        let spec = GridSpec::new(11, 16).unwrap();
        let x = random_bandlimited(spec, &SpectrumProfile::flat(), seed).unwrap();
        let bias = 2.0 * x.max_abs();
        let train = encode_if(&x, bias, bias / osr).unwrap();
        let fam = KernelFamily::integrate_fire(train.times(), 0.0, spec).unwrap();
        let x: MultiSignal = x.into();
        let rec = sample(&x, &fam).unwrap();
        let op = SamplingOperator::new(&fam, Subspace::bandlimited(1), true).unwrap();
        (x, fam, rec, op)
    }

    fn zero(op: &SamplingOperator) -> MultiSignal {
        MultiSignal::zeros(op.spec(), op.basis().num_channels())
    }

    #[test]
    fn plain_iteration_reaches_pseudo_inverse_limit() {
        for (osr, seed) in [(1.4, 1), (0.7, 2)] {
            let (x, _, rec, op) = setup(osr, seed);
            let oracle = PinvOracle::new(&op, PinvOracle::DEFAULT_THRESHOLD).unwrap();
            let u0 = random_bandlimited(op.spec(), &SpectrumProfile::flat(), 99).unwrap().into();
            let run = run_discrete(&op, &rec.normalized, &u0, 3000, &DiscreteMode::Plain, None, &Default::default())
                .unwrap();
            let limit = oracle.limit(&u0, &rec.normalized).unwrap();
            let gap = run.estimate.sub(&limit).unwrap().norm() / limit.norm();
            assert!(gap < 1e-6, "osr {osr}: gap {gap}");
            if osr > 1.0 {
                assert!(run.estimate.sub(&x).unwrap().norm() < 1e-6);
            }
        }
    }

    #[test]
    fn meter_agrees_with_synthesized_estimate() {
        let (x, _, rec, op) = setup(1.2, 3);
        let meter = ErrorMeter::new(&op, &zero(&op), &x).unwrap();
        for mode in [DiscreteMode::Plain, DiscreteMode::Multiplierless] {
            let opts = DiscreteOptions { synthesize_against: Some(x.clone()), ..Default::default() };
            let run = run_discrete(&op, &rec.normalized, &zero(&op), 40, &mode, Some(&meter), &opts).unwrap();
            let metered = run.trace.rel_mse();
            for (a, b) in metered[1..].iter().zip(&run.synthesized_rel_mse) {
                assert!((a - b).abs() <= 1e-10 * b.max(1e-6), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn relaxed_and_multiplierless_converge_monotonically() {
        let (x, _, rec, op) = setup(1.3, 4);
        let meter = ErrorMeter::new(&op, &zero(&op), &x).unwrap();
        let modes = [
            DiscreteMode::Relaxed(RelaxationSchedule::constant(1.3).unwrap()),
            DiscreteMode::Relaxed(RelaxationSchedule::constant(1.0).unwrap()),
            DiscreteMode::Multiplierless,
        ];
        for mode in modes {
            let run = run_discrete(&op, &rec.normalized, &zero(&op), 400, &mode, Some(&meter), &Default::default())
                .unwrap();
            let e = run.trace.rel_mse();
            assert!(*e.last().unwrap() < 1e-12, "{mode:?}: {}", e.last().unwrap());
            assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-28), "{mode:?}");
            if mode == DiscreteMode::Multiplierless {
                let (lo, hi) = run.implied_lambda_range.unwrap();
                assert!(lo > 0.5 && hi < 2.0);
                assert!(run.state.b.iter().all(|&b| b == 0.0 || b.abs() == 2f64.powi(b.abs().log2().round() as i32)));
            }
        }
    }

    #[test]
    fn stops_on_residual_tolerance() {
        let (_, _, rec, op) = setup(1.3, 5);
        let opts = DiscreteOptions { stop_tol: Some(1e-8), ..Default::default() };
        let run = run_discrete(&op, &rec.normalized, &zero(&op), 10_000, &DiscreteMode::Plain, None, &opts).unwrap();
        assert!(run.state.n < 10_000);
        assert!(run.trace.final_max_residual() <= 1e-8);
    }

    #[test]
    fn watchdog_and_non_finite_abort() {
        let (x, _, rec, op) = setup(1.3, 6);
        let meter = ErrorMeter::new(&op, &zero(&op), &x).unwrap();
        let wild = DiscreteMode::Relaxed(RelaxationSchedule::unguarded(RelaxationKind::Constant(3.0)));
        let opts = DiscreteOptions { invariant_tol: None, ..Default::default() };
        let err = run_discrete(&op, &rec.normalized, &zero(&op), 1000, &wild, Some(&meter), &opts).unwrap_err();
        assert!(matches!(err, ReconError::Diverged(_)), "{err:?}");
        let mut bad = rec.normalized.clone();
        bad[0] = f64::NAN;
        let err = run_discrete(&op, &bad, &zero(&op), 10, &DiscreteMode::Plain, None, &Default::default()).unwrap_err();
        assert!(matches!(err, ReconError::Numerical(_)));
        assert!(RelaxationSchedule::constant(2.5).is_err());
    }

    #[test]
    fn plain_mode_reproduces_signal_space_recursion() {
        let (_, _, rec, op) = setup(1.1, 7);
        let u0: MultiSignal = random_bandlimited(op.spec(), &SpectrumProfile::flat(), 70).unwrap().into();
        let run = run_discrete(&op, &rec.normalized, &u0, 50, &DiscreteMode::Plain, None, &Default::default()).unwrap();
        let mut u = u0.clone();
        for _ in 0..50 {
            u = op.papcs_step(&u, &rec.normalized).unwrap();
        }
        assert!(run.estimate.sub(&u).unwrap().norm() <= 1e-9 * u.norm());
    }

    #[test]
    fn relaxed_unnormalized_equals_relaxed_normalized() {
        let (_, _, rec, op) = setup(1.1, 8);
        let lambdas: Vec<f64> = (0..op.len()).map(|k| 0.6 + 0.9 * ((k * 5) % 7) as f64 / 6.0).collect();
        let schedule = RelaxationSchedule::guarded(RelaxationKind::PerIndex(lambdas.clone()), 1e-6).unwrap();
        let u0 = zero(&op);
        let run = run_discrete(&op, &rec.normalized, &u0, 30, &DiscreteMode::Relaxed(schedule), None, &Default::default())
            .unwrap();
        // u + Ŝ*Λ(ŝ - Ŝu) in signal space.
        let mut u = u0;
        for _ in 0..30 {
            let su = op.apply_s(&u).unwrap();
            let w: Vec<f64> = (0..op.len()).map(|k| lambdas[k] * (rec.normalized[k] - su[k])).collect();
            u = u.add_scaled(1.0, &op.apply_s_star(&w).unwrap()).unwrap();
        }
        assert!(run.estimate.sub(&u).unwrap().norm() <= 1e-10 * u.norm());
    }

    #[test]
    fn truth_as_start_is_a_fixed_point() {
        let (x, _, rec, op) = setup(1.2, 9);
        for mode in [DiscreteMode::Plain, DiscreteMode::Multiplierless] {
            let run = run_discrete(&op, &rec.normalized, &x, 20, &mode, None, &Default::default()).unwrap();
            assert!(run.state.c.iter().all(|v| v.abs() < 1e-13), "{mode:?}");
            assert!(run.state.r.iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn multiplierless_update_uses_powers_of_two() {
        use rand::{Rng, SeedableRng};
        let (_, _, _, op) = setup(1.2, 10);
        let gram = op.with_normalized(false).gram();
        let rho_norms: Vec<f64> = gram.diag_norms.iter().map(|&e| rho(e).unwrap()).collect();
        let k = gram.len();
        let zero_state = DiscreteState { n: 0, c: vec![0.0; k], r: vec![0.0; k], b: vec![0.0; k] };
        let next = multiplierless_update(&zero_state, &gram, &rho_norms).unwrap();
        assert!(next.b.iter().all(|&b| b == 0.0));
        assert_eq!((next.c, next.r), (zero_state.c.clone(), zero_state.r.clone()));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let r: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-8..3))).collect();
            let st = DiscreteState { n: 0, c: vec![0.0; k], r: r.clone(), b: vec![0.0; k] };
            let next = multiplierless_update(&st, &gram, &rho_norms).unwrap();
            for (i, &b) in next.b.iter().enumerate() {
                assert!(b != 0.0);
                assert_eq!(rho(b).unwrap(), b);
                let l = b * gram.diag_norms[i] / r[i];
                assert!(l > 0.5 && l < 2.0);
            }
        }
        assert!(multiplierless_update(&zero_state, &op.gram(), &rho_norms).is_err());
    }
}
