//! Serial POCS: projections onto the sample hyperplanes
//! `𝒮_k = {u ∈ 𝓐 : ⟨u, h_k⟩ = s_k}`, relaxation, parallel combinations,
//! greedy selection and the iteration driver.
//!
//! The driver runs in orthonormal coordinates of `𝓐`, where projecting onto
//! `𝒮_k` is a rank-one update; the signal-level operations below are the
//! reference form and share the same projected kernels.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_check, ReconError, Result};
use crate::samplers::{KernelFamily, SampleRecord};
use crate::signal::{dot, MultiSignal, Subspace, SubspaceBasis};

/// `‖h̃_k‖` at or below this carries no information inside `𝓐`.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// The consistent sets of one acquisition: projected kernels `h̃_k = P_𝓐 h_k`
/// and the samples they must reproduce.
#[derive(Debug)]
pub struct ConsistentSets {
    subspace: Subspace,
    basis: SubspaceBasis,
    coords: Vec<Vec<f64>>,
    norm_sq: Vec<f64>,
    samples: Vec<f64>,
    grids: Vec<OnceLock<MultiSignal>>,
}

impl ConsistentSets {
    pub fn new(family: &KernelFamily, samples: &[f64], subspace: Subspace) -> Result<Self> {
        dim_check("sample count", family.len(), samples.len())?;
        dim_check("channel count", family.num_channels(), subspace.num_channels())?;
        let spec = family.spec();
        let basis = subspace.basis(spec);
        let coords: Vec<Vec<f64>> = family
            .kernels()
            .iter()
            .map(|k| basis.lift_channel(k.channel, &k.band_coords(spec)))
            .collect();
        let norm_sq = coords.iter().map(|c| dot(c, c)).collect();
        let grids = (0..family.len()).map(|_| OnceLock::new()).collect();
        Ok(Self { subspace, basis, coords, norm_sq, samples: samples.to_vec(), grids })
    }

    pub fn from_record(family: &KernelFamily, record: &SampleRecord, subspace: Subspace) -> Result<Self> {
        Self::new(family, &record.raw, subspace)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Coordinates of `h̃_k`.
    pub fn kernel_coords(&self, k: usize) -> &[f64] {
        &self.coords[k]
    }

    /// `‖h̃_k‖²`.
    pub fn projected_norm_sq(&self, k: usize) -> f64 {
        self.norm_sq[k]
    }

    pub fn is_degenerate(&self, k: usize) -> bool {
        self.norm_sq[k].sqrt() <= DEGENERATE_NORM
    }

    /// `h̃_k` on the grid.
    pub fn projected_kernel(&self, k: usize) -> &MultiSignal {
        self.grids[k].get_or_init(|| self.basis.synthesize(&self.coords[k]).expect("dimension is consistent"))
    }

    /// `s_k - ⟨P_𝓐 u, h_k⟩` for a signal given by its coordinates.
    pub fn residual(&self, coords: &[f64], k: usize) -> f64 {
        self.samples[k] - dot(coords, &self.coords[k])
    }

    pub fn max_residual(&self, coords: &[f64]) -> f64 {
        (0..self.len()).map(|k| self.residual(coords, k).abs()).fold(0.0, f64::max)
    }

    /// Projection onto `𝒮_k`: `ũ + (s_k - ⟨ũ,h_k⟩)/‖h̃_k‖² h̃_k` with `ũ = P_𝓐 u`.
    pub fn project_k(&self, u: &MultiSignal, k: usize) -> Result<MultiSignal> {
        if self.is_degenerate(k) {
            return Err(ReconError::DegenerateHyperplane(k));
        }
        let pu = self.subspace.project(u)?;
        let r = self.samples[k] - pu.inner(self.projected_kernel(k))?;
        pu.add_scaled(r / self.norm_sq[k], self.projected_kernel(k))
    }

    /// `u + Σ_{k∈K} μ_k (P_k u - u)`.
    pub fn parallel_step(&self, u: &MultiSignal, indices: &[usize], mu: &[f64]) -> Result<MultiSignal> {
        if indices.is_empty() {
            return Err(ReconError::Precondition("parallel step over an empty index set".into()));
        }
        dim_check("relaxation weights", indices.len(), mu.len())?;
        let mut out = u.clone();
        for (&k, &m) in indices.iter().zip(mu) {
            let pk = self.project_k(u, k)?;
            out.axpy_mut(m, &pk.sub(u)?);
        }
        Ok(out)
    }

    /// Index of the most remote set, `argmax |s_k - ⟨u,h_k⟩| / ‖h̃_k‖`;
    /// ties go to the lowest index and degenerate sets are never chosen.
    pub fn greedy_index(&self, u: &MultiSignal) -> Result<usize> {
        let c = self.basis.coords(u)?;
        Ok(self.greedy_index_coords(&c))
    }

    fn greedy_index_coords(&self, c: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for k in 0..self.len() {
            if self.is_degenerate(k) {
                continue;
            }
            let v = self.residual(c, k).abs() / self.norm_sq[k].sqrt();
            if v > best_val {
                best = k;
                best_val = v;
            }
        }
        best
    }

    /// Runs `u⁽ⁿ⁺¹⁾ = P^{λ⁽ⁿ⁾}_{k⁽ⁿ⁾} u⁽ⁿ⁾` from `u⁽⁰⁾ = P_𝓐 x0`.
    pub fn run_serial(
        &self,
        x0: &MultiSignal,
        control: &ControlSequence,
        schedule: &RelaxationSchedule,
        n_iter: usize,
        truth: Option<&MultiSignal>,
        logging: Logging,
    ) -> Result<IterationTrace> {
        if n_iter == 0 {
            return Err(ReconError::Precondition("n_iter must be at least 1".into()));
        }
        control.validate(self.len())?;
        schedule.validate(self.len())?;
        let truth = truth.map(|x| TruthMeter::new(&self.basis, x)).transpose()?;
        let mut c = self.basis.coords(x0)?;
        let mut stream = control.stream(self.len());
        let mut trace = IterationTrace::default();
        let card = self.len();
        let log_row = |trace: &mut IterationTrace, n: usize, c: &[f64], k: Option<usize>, lambda: Option<f64>| {
            trace.rows.push(TraceRow {
                iter: n,
                rel_mse: truth.as_ref().map(|t| t.rel_error(c)),
                max_residual: self.max_residual(c),
                k,
                lambda,
            });
        };
        log_row(&mut trace, 0, &c, None, None);
        for n in 0..n_iter {
            let k = match &mut stream {
                Stream::Greedy => self.greedy_index_coords(&c),
                s => s.next_index(),
            };
            let lambda = schedule.lambda(n, k);
            if self.is_degenerate(k) {
                trace.skipped.push((n, k));
            } else {
                let r = self.residual(&c, k);
                crate::signal::axpy(&mut c, lambda * r / self.norm_sq[k], &self.coords[k]);
            }
            let done = n + 1;
            let log_now = match logging {
                Logging::PerStep => true,
                Logging::PerCycle => done % card == 0 || done == n_iter,
            };
            if log_now {
                log_row(&mut trace, done, &c, Some(k), Some(lambda));
            }
        }
        trace.final_estimate = Some(self.basis.synthesize(&c)?);
        trace.final_coords = c;
        Ok(trace)
    }
}

/// `λ P u + (1 - λ) u`, i.e. `u + λ (P u - u)`.
pub fn relax(pu: &MultiSignal, u: &MultiSignal, lambda: f64) -> Result<MultiSignal> {
    u.add_scaled(lambda, &pu.sub(u)?)
}

/// Squared distance to a fixed truth, evaluated from subspace coordinates:
/// `‖u - x‖² = ‖c_u - c_x‖² + ‖x - P_𝓐 x‖²` for `u ∈ 𝓐`.
#[derive(Clone, Debug)]
pub struct TruthMeter {
    coords: Vec<f64>,
    outside_sq: f64,
    norm_sq: f64,
}

impl TruthMeter {
    pub fn new(basis: &SubspaceBasis, x: &MultiSignal) -> Result<Self> {
        let coords = basis.coords(x)?;
        let norm_sq = x.norm_sq();
        let outside_sq = (norm_sq - dot(&coords, &coords)).max(0.0);
        if norm_sq == 0.0 {
            return Err(ReconError::Precondition("relative error needs a non-zero truth".into()));
        }
        Ok(Self { coords, outside_sq, norm_sq })
    }

    pub fn rel_error(&self, c: &[f64]) -> f64 {
        let d: f64 = c.iter().zip(&self.coords).map(|(a, b)| (a - b) * (a - b)).sum();
        (d + self.outside_sq) / self.norm_sq
    }
}

/// Order in which the sets are visited.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlSequence {
    /// `k⁽ⁿ⁾ = n mod card(Z)`.
    Cyclic,
    /// Almost cyclic: every block of `card(Z)` steps is a fresh random
    /// permutation of all indices.
    ShuffledBlocks { seed: u64 },
    /// A user pattern repeated forever; it must visit every index.
    Pattern(Vec<usize>),
    /// Independent uniform draws.
    Random { seed: u64 },
    /// The most remote set at every step.
    Greedy,
}

enum Stream {
    Cyclic { n: usize, card: usize },
    Blocks { rng: ChaCha8Rng, block: Vec<usize>, pos: usize },
    Pattern { pattern: Vec<usize>, pos: usize },
    Random { rng: ChaCha8Rng, card: usize },
    Greedy,
}

impl Stream {
    fn next_index(&mut self) -> usize {
        match self {
            Stream::Cyclic { n, card } => {
                let k = *n % *card;
                *n += 1;
                k
            }
            Stream::Blocks { rng, block, pos } => {
                if *pos == block.len() {
                    block.shuffle(rng);
                    *pos = 0;
                }
                *pos += 1;
                block[*pos - 1]
            }
            Stream::Pattern { pattern, pos } => {
                let k = pattern[*pos % pattern.len()];
                *pos += 1;
                k
            }
            Stream::Random { rng, card } => rng.random_range(0..*card),
            Stream::Greedy => unreachable!("greedy indices depend on the iterate"),
        }
    }
}

impl ControlSequence {
    pub(crate) fn validate(&self, card: usize) -> Result<()> {
        if let ControlSequence::Pattern(p) = self {
            let mut seen = vec![false; card];
            for &k in p {
                if k >= card {
                    return Err(ReconError::Config(format!("pattern index {k} out of {card}")));
                }
                seen[k] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(ReconError::Config("control pattern must visit every index".into()));
            }
        }
        Ok(())
    }

    fn stream(&self, card: usize) -> Stream {
        match self {
            Self::Cyclic => Stream::Cyclic { n: 0, card },
            Self::ShuffledBlocks { seed } => Stream::Blocks {
                rng: ChaCha8Rng::seed_from_u64(*seed),
                block: (0..card).collect(),
                pos: card,
            },
            Self::Pattern(p) => Stream::Pattern { pattern: p.clone(), pos: 0 },
            Self::Random { seed } => Stream::Random { rng: ChaCha8Rng::seed_from_u64(*seed), card },
            Self::Greedy => Stream::Greedy,
        }
    }

    /// The first `n` indices of a state-independent sequence.
    pub fn indices(&self, card: usize, n: usize) -> Result<Vec<usize>> {
        if matches!(self, Self::Greedy) {
            return Err(ReconError::Unsupported("greedy indices depend on the iterate".into()));
        }
        self.validate(card)?;
        let mut s = self.stream(card);
        Ok((0..n).map(|_| s.next_index()).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RelaxationKind {
    Constant(f64),
    /// `λ_even` at even iteration numbers `n`, `λ_odd` at odd ones.
    Alternating { even: f64, odd: f64 },
    /// One coefficient per set index.
    PerIndex(Vec<f64>),
}

/// Relaxation coefficients `λ⁽ⁿ⁾`, guarded to `[ε, 2-ε]` unless explicitly
/// unguarded.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationSchedule {
    kind: RelaxationKind,
    guard: Option<f64>,
}

impl RelaxationSchedule {
    pub fn guarded(kind: RelaxationKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(ReconError::Config(format!("guard ε = {epsilon} must lie in (0, 1]")));
        }
        let s = Self { kind, guard: Some(epsilon) };
        s.check_values()?;
        Ok(s)
    }

    /// No range check: admits the `λ = 0` and `λ = 2` experiment arms.
    pub fn unguarded(kind: RelaxationKind) -> Self {
        Self { kind, guard: None }
    }

    pub fn constant(lambda: f64) -> Result<Self> {
        Self::guarded(RelaxationKind::Constant(lambda), 1e-6)
    }

    pub fn is_guarded(&self) -> bool {
        self.guard.is_some()
    }

    pub fn kind(&self) -> &RelaxationKind {
        &self.kind
    }

    /// Whether every coefficient lies strictly inside `(0, 2)`.
    pub fn within_open_range(&self) -> bool {
        self.values().iter().all(|&l| l > 0.0 && l < 2.0)
    }

    fn values(&self) -> Vec<f64> {
        match &self.kind {
            RelaxationKind::Constant(l) => vec![*l],
            RelaxationKind::Alternating { even, odd } => vec![*even, *odd],
            RelaxationKind::PerIndex(v) => v.clone(),
        }
    }

    fn check_values(&self) -> Result<()> {
        let vals = self.values();
        if vals.iter().any(|l| !l.is_finite()) {
            return Err(ReconError::Config("relaxation coefficients must be finite".into()));
        }
        if let Some(eps) = self.guard {
            if let Some(l) = vals.iter().find(|&&l| l < eps || l > 2.0 - eps) {
                return Err(ReconError::Config(format!(
                    "λ = {l} outside the guarded range [{eps}, {}]",
                    2.0 - eps
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn validate(&self, card: usize) -> Result<()> {
        if let RelaxationKind::PerIndex(v) = &self.kind {
            dim_check("per-index relaxation", card, v.len())?;
        }
        self.check_values()
    }

    pub fn lambda(&self, n: usize, k: usize) -> f64 {
        match &self.kind {
            RelaxationKind::Constant(l) => *l,
            RelaxationKind::Alternating { even, odd } => {
                if n.is_multiple_of(2) {
                    *even
                } else {
                    *odd
                }
            }
            RelaxationKind::PerIndex(v) => v[k],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Logging {
    /// A row whenever `n` is a multiple of `card(Z)`, plus the last step.
    PerCycle,
    PerStep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// `‖u⁽ⁿ⁾ - x‖² / ‖x‖²` when the truth is known.
    pub rel_mse: Option<f64>,
    pub max_residual: f64,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    /// `(n, k)` of steps skipped because `h̃_k` vanished.
    pub skipped: Vec<(usize, usize)>,
    pub final_estimate: Option<MultiSignal>,
    pub final_coords: Vec<f64>,
}

impl IterationTrace {
    pub fn rel_mse(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rel_mse).collect()
    }

    pub fn final_rel_mse(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rel_mse)
    }

    pub fn final_max_residual(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.max_residual)
    }

    /// Error column non-increasing up to `slack` (relative to the first row).
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.monotonicity_violations(slack) == 0
    }

    pub fn monotonicity_violations(&self, slack: f64) -> usize {
        let e = self.rel_mse();
        let scale = e.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        e.windows(2).filter(|w| w[1] > w[0] + slack * scale).count()
    }

    /// First logged iteration whose error is at or below `level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.rel_mse.is_some_and(|e| e <= level)).map(|r| r.iter)
    }

    /// CSV `iter,rel_mse,max_residual,k,lambda`, preceded by `# ` comment lines.
    pub fn to_csv(&self, comment: &str) -> String {
        let mut out = String::new();
        for line in comment.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("iter,rel_mse,max_residual,k,lambda\n");
        let opt = |v: Option<f64>| v.map(crate::samplers::text::fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                opt(r.rel_mse),
                crate::samplers::text::fmt_f64(r.max_residual),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                opt(r.lambda)
            );
        }
        out
    }
}
