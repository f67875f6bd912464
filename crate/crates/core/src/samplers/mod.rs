//! Sampling kernels `h_k` and generalized samples `s_k = ⟨x, h_k⟩`.
//!
//! Kernels are kept in analytic form. Point and derivative kernels live in
//! the bandlimited space; interval (integrate-and-fire) kernels do not, and
//! their Fourier coefficients are known in closed form, so every inner
//! product against a bandlimited signal and every projected kernel is exact.

mod encode;
mod extrema;
pub mod text;

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;

use crate::error::{dim_check, ReconError, Result};
use crate::signal::{inverse_real, omega, GridSignal, GridSpec, Harmonics, MultiSignal};

pub use encode::{encode_if, SpikeTrain};
pub use extrema::{find_extrema, Extrema};

/// Relative off-diagonal level below which a family counts as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelShape {
    /// Point evaluation `x(t)`: the Dirichlet kernel centered at `time`.
    Point { time: f64 },
    /// `x^{(order)}(t)`: signed derivative of the Dirichlet kernel.
    Derivative { time: f64, order: u32 },
    /// `∫_start^end e^{-α(end-t)} x(t) dt`; `alpha = 0` is a plain integral.
    Interval { start: f64, end: f64, alpha: f64 },
}

/// A kernel acting on one channel of a multi-channel signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub channel: usize,
    pub shape: KernelShape,
}

impl Kernel {
    pub fn point(time: f64) -> Self {
        Self { channel: 0, shape: KernelShape::Point { time } }
    }

    pub fn derivative(time: f64, order: u32) -> Self {
        Self { channel: 0, shape: KernelShape::Derivative { time, order } }
    }

    pub fn interval(start: f64, end: f64, alpha: f64) -> Self {
        Self { channel: 0, shape: KernelShape::Interval { start, end, alpha } }
    }

    pub fn on_channel(mut self, channel: usize) -> Self {
        self.channel = channel;
        self
    }

    /// Whether the kernel itself is bandlimited.
    pub fn in_band(&self) -> bool {
        !matches!(self.shape, KernelShape::Interval { .. })
    }

    /// Fourier coefficient `ĥ_m = (1/T) ∫_0^T h(t) e^{-iω_m t} dt`, `m ≥ 0`.
    pub fn coeff(&self, m: usize, period: f64) -> Complex64 {
        let w = omega(m, period);
        match self.shape {
            KernelShape::Point { time } => Complex64::from_polar(1.0 / period, -w * time),
            KernelShape::Derivative { time, order } => {
                Complex64::new(0.0, -w).powu(order) * Complex64::from_polar(1.0 / period, -w * time)
            }
            KernelShape::Interval { start, end, alpha } => {
                let len = end - start;
                if m == 0 {
                    let integral = if alpha == 0.0 { len } else { -(-alpha * len).exp_m1() / alpha };
                    return Complex64::new(integral / period, 0.0);
                }
                let decay = (-alpha * len).exp();
                let num = Complex64::from_polar(1.0, -w * end) - Complex64::from_polar(decay, -w * start);
                num / (Complex64::new(alpha, -w) * period)
            }
        }
    }

    /// Coefficients of `P_𝓑 h` (harmonics `0..=H`).
    pub fn band_harmonics(&self, spec: GridSpec) -> Harmonics {
        let t = spec.period_f64();
        Harmonics::new(t, (0..=spec.max_harmonic()).map(|m| self.coeff(m, t)).collect())
    }

    /// Real coordinates of `P_𝓑 h` in the orthonormal harmonic basis.
    pub fn band_coords(&self, spec: GridSpec) -> Vec<f64> {
        self.band_harmonics(spec).real_coords()
    }

    /// Highest harmonic carried on the grid: `H` for bandlimited kernels, the
    /// largest non-Nyquist grid harmonic otherwise.
    fn coeff_limit(&self, spec: GridSpec) -> usize {
        if self.in_band() {
            spec.max_harmonic()
        } else {
            (spec.len() - 1) / 2
        }
    }

    /// Grid representer of the kernel on its own channel: for every
    /// bandlimited `x`, `Δt Σ x_i w_i = ⟨x, h⟩` exactly.
    ///
    /// Bandlimited kernels are simply sampled; interval kernels are truncated
    /// to the non-Nyquist grid harmonics.
    pub fn grid_representer(&self, spec: GridSpec) -> GridSignal {
        if self.in_band() {
            return GridSignal::from_harmonics(spec, &self.band_harmonics(spec))
                .expect("band harmonics fit the grid");
        }
        let n = spec.len();
        let t = spec.period_f64();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
        for m in 0..=self.coeff_limit(spec) {
            let c = self.coeff(m, t) * n as f64;
            spectrum[m] = c;
            if m > 0 {
                spectrum[n - m] = c.conj();
            }
        }
        spectrum[0].im = 0.0;
        GridSignal::new(spec, inverse_real(&spectrum)).expect("length matches")
    }

    /// `‖h‖²` in `L²[0,T)`.
    pub fn norm_sq(&self, spec: GridSpec) -> f64 {
        let t = spec.period_f64();
        match self.shape {
            KernelShape::Point { .. } => 1.0,
            KernelShape::Derivative { order, .. } => {
                let mut acc = if order == 0 { 1.0 } else { 0.0 };
                for m in 1..=spec.max_harmonic() {
                    acc += 2.0 * omega(m, t).powi(2 * order as i32);
                }
                acc / t
            }
            KernelShape::Interval { start, end, alpha } => {
                let len = end - start;
                if alpha == 0.0 {
                    len
                } else {
                    -(-2.0 * alpha * len).exp_m1() / (2.0 * alpha)
                }
            }
        }
    }

    /// `⟨h_j, h_k⟩` of two unprojected kernels.
    pub fn inner(&self, other: &Kernel, spec: GridSpec) -> f64 {
        if self.channel != other.channel {
            return 0.0;
        }
        if let (
            KernelShape::Interval { start: a1, end: b1, alpha: al1 },
            KernelShape::Interval { start: a2, end: b2, alpha: al2 },
        ) = (self.shape, other.shape)
        {
            let lo = a1.max(a2);
            let hi = b1.min(b2);
            if hi <= lo {
                return 0.0;
            }
            let s = al1 + al2;
            if s == 0.0 {
                return hi - lo;
            }
            let at = |t: f64| (-al1 * (b1 - t) - al2 * (b2 - t)).exp();
            return (at(hi) - at(lo)) / s;
        }
        // At least one kernel is bandlimited: the product only sees the band.
        crate::signal::dot(&self.band_coords(spec), &other.band_coords(spec))
    }

    /// `⟨x, h⟩` for a grid signal `x` with DFT `spectrum`.
    fn apply(&self, spectrum: &[Complex64], spec: GridSpec) -> f64 {
        let t = spec.period_f64();
        let mut acc = spectrum[0].re * self.coeff(0, t).re;
        for (m, u) in spectrum.iter().enumerate().take(self.coeff_limit(spec) + 1).skip(1) {
            acc += 2.0 * (u * self.coeff(m, t).conj()).re;
        }
        acc * spec.dt()
    }

    fn validate(&self, spec: GridSpec) -> Result<()> {
        let t = spec.period_f64();
        match self.shape {
            KernelShape::Point { time } | KernelShape::Derivative { time, .. } => {
                if !time.is_finite() {
                    return Err(ReconError::Precondition("kernel time must be finite".into()));
                }
            }
            KernelShape::Interval { start, end, alpha } => {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return Err(ReconError::Precondition(format!("leak α = {alpha} must be ≥ 0")));
                }
                if !(start.is_finite() && end.is_finite() && start >= 0.0 && end <= t + 1e-12 * t) {
                    return Err(ReconError::Precondition(format!(
                        "interval [{start}, {end}) must lie within one period [0, {t})"
                    )));
                }
                if end - start < spec.dt() {
                    return Err(ReconError::IntervalTooShort { start, end });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Point,
    Derivative,
    Extrema,
    IntegrateFire { alpha: f64 },
    MultichannelTem,
}

impl Scheme {
    pub fn tag(&self) -> String {
        match self {
            Self::Point => "point".into(),
            Self::Derivative => "derivative".into(),
            Self::Extrema => "extrema".into(),
            Self::IntegrateFire { alpha } => format!("integrate_fire({alpha})"),
            Self::MultichannelTem => "multichannel_tem".into(),
        }
    }
}

/// Index label of a kernel: `k`, or `(channel, j)` for multi-channel schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelLabel {
    Single(usize),
    Pair(usize, usize),
}

/// The sampling kernels `(h_k)` of one acquisition.
#[derive(Clone, Debug)]
pub struct KernelFamily {
    spec: GridSpec,
    channels: usize,
    kernels: Vec<Kernel>,
    norms: Vec<f64>,
    orthogonal: bool,
    labels: Vec<KernelLabel>,
    scheme: Scheme,
}

impl KernelFamily {
    /// Builds a family, validating every kernel and measuring orthogonality.
    pub fn new(
        spec: GridSpec,
        channels: usize,
        kernels: Vec<Kernel>,
        labels: Vec<KernelLabel>,
        scheme: Scheme,
    ) -> Result<Self> {
        if kernels.is_empty() {
            return Err(ReconError::Precondition("a kernel family needs at least one kernel".into()));
        }
        dim_check("label count", kernels.len(), labels.len())?;
        for k in &kernels {
            if k.channel >= channels {
                return Err(ReconError::Dimension(format!(
                    "kernel channel {} out of {channels}",
                    k.channel
                )));
            }
            k.validate(spec)?;
        }
        let norms: Vec<f64> = kernels.iter().map(|k| k.norm_sq(spec).sqrt()).collect();
        if let Some(k) = norms.iter().position(|&n| !(n > 0.0)) {
            return Err(ReconError::DegenerateHyperplane(k));
        }
        let mut family = Self { spec, channels, kernels, norms, orthogonal: false, labels, scheme };
        family.orthogonal = family.max_relative_off_diagonal() <= ORTHOGONALITY_TOL;
        Ok(family)
    }

    fn singles(spec: GridSpec, kernels: Vec<Kernel>, scheme: Scheme) -> Result<Self> {
        let labels = (0..kernels.len()).map(KernelLabel::Single).collect();
        Self::new(spec, 1, kernels, labels, scheme)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn kernel(&self, k: usize) -> &Kernel {
        &self.kernels[k]
    }

    /// `‖h_k‖`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn labels(&self) -> &[KernelLabel] {
        &self.labels
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Stable fingerprint of the kernel parameters, used to tie sample records
    /// to the family that produced them.
    pub fn id(&self) -> String {
        let mut h = DefaultHasher::new();
        self.spec.hash(&mut h);
        self.channels.hash(&mut h);
        for k in &self.kernels {
            k.channel.hash(&mut h);
            match k.shape {
                KernelShape::Point { time } => (0u8, time.to_bits()).hash(&mut h),
                KernelShape::Derivative { time, order } => (1u8, time.to_bits(), order).hash(&mut h),
                KernelShape::Interval { start, end, alpha } => {
                    (2u8, start.to_bits(), end.to_bits(), alpha.to_bits()).hash(&mut h)
                }
            }
        }
        format!("{}:{}:{:016x}", self.scheme.tag(), self.len(), h.finish())
    }

    /// Grid representation of kernel `k` as a multi-channel signal.
    pub fn kernel_signal(&self, k: usize) -> MultiSignal {
        let kernel = &self.kernels[k];
        let mut chans = vec![GridSignal::zeros(self.spec); self.channels];
        chans[kernel.channel] = kernel.grid_representer(self.spec);
        MultiSignal::new(chans).expect("shape is consistent")
    }

    /// `⟨h_j, h_k⟩`.
    pub fn inner(&self, j: usize, k: usize) -> f64 {
        self.kernels[j].inner(&self.kernels[k], self.spec)
    }

    /// Largest `|⟨h_j,h_k⟩| / (‖h_j‖‖h_k‖)` over `j ≠ k`.
    pub fn max_relative_off_diagonal(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                let kj = &self.kernels[j];
                let kk = &self.kernels[k];
                if kj.channel != kk.channel {
                    continue;
                }
                worst = worst.max(self.inner(j, k).abs() / (self.norms[j] * self.norms[k]));
            }
        }
        worst
    }

    /// Point kernels `x ↦ x(t_k)`.
    pub fn point(times: &[f64], spec: GridSpec) -> Result<Self> {
        Self::derivative(times, &vec![0; times.len()], spec).map(|mut f| {
            f.scheme = Scheme::Point;
            f
        })
    }

    /// Derivative kernels `x ↦ x^{(n_k)}(t_k)`.
    pub fn derivative(times: &[f64], orders: &[u32], spec: GridSpec) -> Result<Self> {
        dim_check("orders", times.len(), orders.len())?;
        reject_duplicates(times, orders, spec)?;
        let kernels = times
            .iter()
            .zip(orders)
            .map(|(&t, &n)| if n == 0 { Kernel::point(t) } else { Kernel::derivative(t, n) })
            .collect();
        Self::singles(spec, kernels, Scheme::Derivative)
    }

    /// Extrema sampling: kernel `2i` reads the value at `τ_i`, kernel `2i+1`
    /// the (vanishing) first derivative there.
    pub fn extrema(times: &[f64], spec: GridSpec) -> Result<Self> {
        let mut kernels = Vec::with_capacity(2 * times.len());
        for &t in times {
            kernels.push(Kernel::point(t));
            kernels.push(Kernel::derivative(t, 1));
        }
        let orders: Vec<u32> = (0..times.len()).map(|_| 0).collect();
        reject_duplicates(times, &orders, spec)?;
        Self::singles(spec, kernels, Scheme::Extrema)
    }

    /// Integrate-and-fire kernels on consecutive intervals `[t_{k-1}, t_k)` of
    /// the strictly increasing `partition`, weighted by `e^{-α(t_k - t)}`.
    pub fn integrate_fire(partition: &[f64], alpha: f64, spec: GridSpec) -> Result<Self> {
        let kernels = interval_kernels(partition, alpha, 0)?;
        Self::singles(spec, kernels, Scheme::IntegrateFire { alpha })
    }
}

pub(crate) fn interval_kernels(partition: &[f64], alpha: f64, channel: usize) -> Result<Vec<Kernel>> {
    if partition.len() < 2 {
        return Err(ReconError::Precondition("a partition needs at least two boundaries".into()));
    }
    if partition.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ReconError::Precondition("partition must be strictly increasing".into()));
    }
    Ok(partition
        .windows(2)
        .map(|w| Kernel::interval(w[0], w[1], alpha).on_channel(channel))
        .collect())
}

fn reject_duplicates(times: &[f64], orders: &[u32], spec: GridSpec) -> Result<()> {
    let mut keyed: Vec<(f64, u32)> = times
        .iter()
        .zip(orders)
        .map(|(&t, &n)| (spec.wrap(t), n))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if let Some(w) = keyed.windows(2).find(|w| w[0] == w[1]) {
        return Err(ReconError::Duplicate(format!("time {} with order {}", w[0].0, w[0].1)));
    }
    Ok(())
}

/// Samples `s`, their normalized version `ŝ_k = s_k/‖h_k‖`, and the additive
/// noise if any was applied.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub noise: Option<Vec<f64>>,
    pub family_id: String,
}

impl SampleRecord {
    pub fn from_raw(raw: Vec<f64>, family: &KernelFamily) -> Result<Self> {
        dim_check("sample count", family.len(), raw.len())?;
        let normalized = raw.iter().zip(family.norms()).map(|(s, n)| s / n).collect();
        Ok(Self { raw, normalized, noise: None, family_id: family.id() })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to
    /// the raw samples.
    pub fn add_noise(&self, sigma: f64, seed: u64, family: &KernelFamily) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(ReconError::Precondition(format!("noise level {sigma} must be ≥ 0")));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let dist = Normal::new(0.0, sigma).map_err(|e| ReconError::Numerical(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e: Vec<f64> = (0..self.len()).map(|_| dist.sample(&mut rng)).collect();
        let raw = self.raw.iter().zip(&e).map(|(s, e)| s + e).collect();
        let mut out = Self::from_raw(raw, family)?;
        out.noise = Some(match &self.noise {
            Some(prev) => prev.iter().zip(&e).map(|(a, b)| a + b).collect(),
            None => e,
        });
        Ok(out)
    }
}

/// `s_k = ⟨x, h_k⟩`.
pub fn sample(x: &MultiSignal, family: &KernelFamily) -> Result<SampleRecord> {
    dim_check("channel count", family.num_channels(), x.num_channels())?;
    if x.spec() != family.spec() {
        return Err(ReconError::Dimension("grid specs differ".into()));
    }
    let spectra: Vec<&[Complex64]> = x.channels().iter().map(|c| c.spectrum()).collect();
    let raw = family
        .kernels()
        .iter()
        .map(|k| k.apply(spectra[k.channel], family.spec()))
        .collect();
    SampleRecord::from_raw(raw, family)
}
