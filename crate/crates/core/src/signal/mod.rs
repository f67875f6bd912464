//! Finite model of the signal spaces: `T`-periodic real signals on a uniform
//! grid, bandlimited to the harmonics `|m| ≤ (T-1)/2` (Nyquist period 1).

mod fourier;
mod random;
mod subspace;

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;

use crate::error::{dim_check, ReconError, Result};

pub use fourier::Harmonics;
pub(crate) use fourier::{forward, inverse_real, omega};
pub use random::{random_bandlimited, SpectrumProfile};
pub use subspace::{Subspace, SubspaceBasis};
pub(crate) use subspace::apply_pointwise;

/// Relative tolerance for the out-of-band energy of a bandlimited signal.
pub const BANDLIMIT_TOL: f64 = 1e-12;

/// Period `T` (in Nyquist periods) and grid rate `R` (points per Nyquist period).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    period: usize,
    rate: usize,
}

impl GridSpec {
    pub const DEFAULT_RATE: usize = 16;

    /// Only odd periods are supported: the bandlimited space then has the
    /// symmetric harmonic range `|m| ≤ (T-1)/2`.
    pub fn new(period: usize, rate: usize) -> Result<Self> {
        if period == 0 || period.is_multiple_of(2) {
            return Err(ReconError::Unsupported(format!(
                "period {period}: only odd periods are modeled (even periods need an asymmetric Nyquist bin)"
            )));
        }
        if rate < 8 {
            return Err(ReconError::Unsupported(format!(
                "grid rate {rate} below the minimum of 8 points per Nyquist period"
            )));
        }
        Ok(Self { period, rate })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn period_f64(&self) -> f64 {
        self.period as f64
    }

    pub fn rate(&self) -> usize {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.period * self.rate
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate as f64
    }

    /// Highest in-band harmonic index `H = (T-1)/2`.
    pub fn max_harmonic(&self) -> usize {
        (self.period - 1) / 2
    }

    /// Dimension of the bandlimited space, equal to `T`.
    pub fn band_dim(&self) -> usize {
        self.period
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.rate as f64
    }

    /// Reduces `t` into `[0, T)`.
    pub fn wrap(&self, t: f64) -> f64 {
        t.rem_euclid(self.period_f64())
    }
}

/// A real `T`-periodic signal sampled at `t_i = i/R`.
///
/// Values are immutable once shared; the DFT is computed lazily and cached.
#[derive(Clone, Debug)]
pub struct GridSignal {
    spec: GridSpec,
    values: Vec<f64>,
    bandlimited: bool,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for GridSignal {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.values == other.values
    }
}

impl GridSignal {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        dim_check("grid signal length", spec.len(), values.len())?;
        Ok(Self::from_parts(spec, values, false))
    }

    pub(crate) fn from_parts(spec: GridSpec, values: Vec<f64>, bandlimited: bool) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self {
            spec,
            values,
            bandlimited,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::from_parts(spec, vec![0.0; spec.len()], true)
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(spec.time(i))).collect();
        Self::from_parts(spec, values, false)
    }

    /// Synthesizes a bandlimited signal from its harmonic coefficients.
    pub fn from_harmonics(spec: GridSpec, harmonics: &Harmonics) -> Result<Self> {
        if harmonics.max_harmonic() > spec.max_harmonic() {
            return Err(ReconError::Precondition(format!(
                "harmonic {} exceeds the band limit {}",
                harmonics.max_harmonic(),
                spec.max_harmonic()
            )));
        }
        if (harmonics.period() - spec.period_f64()).abs() > 0.0 {
            return Err(ReconError::Dimension("harmonic period differs from grid period".into()));
        }
        Ok(Self::from_parts(spec, harmonics.to_grid(spec.len()), true))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Whether the signal was produced by a band-preserving construction.
    pub fn is_marked_bandlimited(&self) -> bool {
        self.bandlimited
    }

    /// Unnormalized DFT of the grid values.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| forward(&self.values))
    }

    /// Largest out-of-band DFT magnitude relative to the largest magnitude.
    pub fn out_of_band_ratio(&self) -> f64 {
        let spec = self.spectrum();
        let h = self.spec.max_harmonic();
        let n = spec.len();
        let max_all = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max_all == 0.0 {
            return 0.0;
        }
        let max_out = spec[h + 1..n - h]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        max_out / max_all
    }

    /// Numerical bandlimitation check against [`BANDLIMIT_TOL`].
    pub fn is_bandlimited(&self) -> bool {
        self.out_of_band_ratio() <= BANDLIMIT_TOL
    }

    /// In-band harmonic coefficients `c_0..=c_H`.
    pub fn harmonics(&self) -> Harmonics {
        let spectrum = self.spectrum();
        let n = self.spec.len() as f64;
        let coeffs = spectrum[..=self.spec.max_harmonic()]
            .iter()
            .map(|c| c / n)
            .collect();
        Harmonics::new(self.spec.period_f64(), coeffs)
    }

    /// Value of the grid's trigonometric interpolant at an arbitrary time.
    ///
    /// For bandlimited signals this is exact point evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        if self.bandlimited {
            return self.harmonics().eval(t);
        }
        let spectrum = self.spectrum();
        let n = spectrum.len();
        let period = self.spec.period_f64();
        let mut acc = spectrum[0].re;
        for (m, c) in spectrum.iter().enumerate().take(n.div_ceil(2)).skip(1) {
            acc += 2.0 * (c * Complex64::from_polar(1.0, omega(m, period) * t)).re;
        }
        if n.is_multiple_of(2) {
            acc += spectrum[n / 2].re * (omega(n / 2, period) * t).cos();
        }
        acc / n as f64
    }

    /// `Δt Σ u_i v_i`.
    pub fn inner(&self, other: &GridSignal) -> Result<f64> {
        if self.spec != other.spec {
            return Err(ReconError::Dimension("grid specs differ".into()));
        }
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &GridSignal) -> f64 {
        dot(&self.values, &other.values) * self.spec.dt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner_unchecked(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Orthogonal projection onto the bandlimited space (DFT mask).
    pub fn project_b(&self) -> GridSignal {
        let h = self.spec.max_harmonic();
        let mut spectrum = self.spectrum().to_vec();
        let n = spectrum.len();
        for c in &mut spectrum[h + 1..n - h] {
            *c = Complex64::new(0.0, 0.0);
        }
        GridSignal::from_parts(self.spec, inverse_real(&spectrum), true)
    }

    /// Exact derivative of a bandlimited signal by harmonic multiplication.
    pub fn derivative(&self, order: u32) -> Result<GridSignal> {
        if !self.is_bandlimited() {
            return Err(ReconError::Precondition(
                "spectral derivative requires a bandlimited signal".into(),
            ));
        }
        if order == 0 {
            return Ok(self.clone());
        }
        GridSignal::from_harmonics(self.spec, &self.harmonics().derivative(order))
    }

    /// Re-samples a bandlimited signal on a grid of another rate.
    pub fn resample(&self, rate: usize) -> Result<GridSignal> {
        let spec = GridSpec::new(self.spec.period, rate)?;
        GridSignal::from_harmonics(spec, &self.harmonics())
    }

    pub fn scaled(&self, a: f64) -> GridSignal {
        GridSignal::from_parts(
            self.spec,
            self.values.iter().map(|v| a * v).collect(),
            self.bandlimited,
        )
    }

    /// `self + a·x`.
    pub fn add_scaled(&self, a: f64, x: &GridSignal) -> Result<GridSignal> {
        if self.spec != x.spec {
            return Err(ReconError::Dimension("grid specs differ".into()));
        }
        let mut out = self.clone();
        out.axpy_mut(a, x);
        Ok(out)
    }

    pub(crate) fn axpy_mut(&mut self, a: f64, x: &GridSignal) {
        debug_assert_eq!(self.spec, x.spec);
        for (y, xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
        self.bandlimited &= x.bandlimited;
        self.spectrum = OnceLock::new();
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators keep the loop vectorizable without changing results
    // between runs.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Periodic Dirichlet kernel `D(t) = sin(πt) / (T sin(πt/T))`, `D(0) = 1`.
///
/// It reproduces point values of the bandlimited space:
/// `⟨x, D(· - t0)⟩ = x(t0)`.
pub fn dirichlet(t: f64, period: usize) -> f64 {
    let tp = period as f64;
    // Reduce to [-T/2, T/2) so the denominator only vanishes at 0.
    let r = (t + 0.5 * tp).rem_euclid(tp) - 0.5 * tp;
    let den = (PI * r / tp).sin();
    if den.abs() < 1e-6 {
        let h = (period - 1) / 2;
        let sum: f64 = (1..=h).map(|m| (2.0 * PI * m as f64 * r / tp).cos()).sum();
        return (1.0 + 2.0 * sum) / tp;
    }
    (PI * r).sin() / (tp * den)
}

/// The reproducing kernel centered at `t0`, sampled on the grid.
pub fn dirichlet_kernel(t0: f64, spec: GridSpec) -> GridSignal {
    let values = (0..spec.len())
        .map(|i| dirichlet(spec.time(i) - t0, spec.period))
        .collect();
    GridSignal::from_parts(spec, values, true)
}

/// M-tuple of grid signals sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSignal {
    channels: Vec<GridSignal>,
}

impl From<GridSignal> for MultiSignal {
    fn from(s: GridSignal) -> Self {
        Self { channels: vec![s] }
    }
}

impl MultiSignal {
    pub fn new(channels: Vec<GridSignal>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(ReconError::Dimension("a multi-signal needs at least one channel".into()));
        };
        let spec = first.spec;
        if channels.iter().any(|c| c.spec != spec) {
            return Err(ReconError::Dimension("channels must share one grid".into()));
        }
        Ok(Self { channels })
    }

    pub fn zeros(spec: GridSpec, channels: usize) -> Self {
        Self {
            channels: vec![GridSignal::zeros(spec); channels.max(1)],
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.channels[0].spec
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, i: usize) -> &GridSignal {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[GridSignal] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<GridSignal> {
        self.channels
    }

    fn check_shape(&self, other: &MultiSignal) -> Result<()> {
        dim_check("channel count", self.num_channels(), other.num_channels())?;
        if self.spec() != other.spec() {
            return Err(ReconError::Dimension("grid specs differ".into()));
        }
        Ok(())
    }

    /// `Σ_i Δt Σ_n u^i_n v^i_n`.
    pub fn inner(&self, other: &MultiSignal) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &MultiSignal) -> f64 {
        self.channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.inner_unchecked(b))
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner_unchecked(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn project_b(&self) -> MultiSignal {
        Self {
            channels: self.channels.iter().map(GridSignal::project_b).collect(),
        }
    }

    pub fn is_bandlimited(&self) -> bool {
        self.channels.iter().all(GridSignal::is_bandlimited)
    }

    pub fn scaled(&self, a: f64) -> MultiSignal {
        Self {
            channels: self.channels.iter().map(|c| c.scaled(a)).collect(),
        }
    }

    /// `self + a·x`.
    pub fn add_scaled(&self, a: f64, x: &MultiSignal) -> Result<MultiSignal> {
        self.check_shape(x)?;
        let mut out = self.clone();
        out.axpy_mut(a, x);
        Ok(out)
    }

    pub fn sub(&self, x: &MultiSignal) -> Result<MultiSignal> {
        self.add_scaled(-1.0, x)
    }

    pub(crate) fn axpy_mut(&mut self, a: f64, x: &MultiSignal) {
        for (c, xc) in self.channels.iter_mut().zip(&x.channels) {
            c.axpy_mut(a, xc);
        }
    }

    /// Values of all channels at grid index `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c.values[i]).collect()
    }
}
