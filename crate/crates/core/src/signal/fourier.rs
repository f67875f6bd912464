//! FFT plumbing and the harmonic (trigonometric polynomial) representation
//! of periodic bandlimited signals.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock, Mutex};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

static PLANS: LazyLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut plans = PLANS.lock().unwrap_or_else(|e| e.into_inner());
    plans
        .entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// Unnormalized forward DFT of a real sequence.
pub(crate) fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(values.len(), true).process(&mut buf);
    buf
}

/// Inverse DFT scaled by 1/N, keeping the real part.
pub(crate) fn inverse_real(spectrum: &[Complex64]) -> Vec<f64> {
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    plan(n, false).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Angular frequency of harmonic `m` for a signal of period `period`.
#[inline]
pub(crate) fn omega(m: usize, period: f64) -> f64 {
    2.0 * PI * m as f64 / period
}

/// A real trigonometric polynomial of period `T`,
/// `x(t) = c_0 + 2 Re Σ_{m=1}^{H} c_m e^{i ω_m t}` with `ω_m = 2πm/T`.
///
/// Only the non-negative harmonics are stored; the negative ones are the
/// complex conjugates.
#[derive(Clone, Debug, PartialEq)]
pub struct Harmonics {
    period: f64,
    coeffs: Vec<Complex64>,
}

impl Harmonics {
    pub fn new(period: f64, coeffs: Vec<Complex64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { period, coeffs }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Coefficients `c_0..=c_H`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn max_harmonic(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0].re;
        let step = Complex64::from_polar(1.0, omega(1, self.period) * t);
        let mut phase = step;
        for c in &self.coeffs[1..] {
            acc += 2.0 * (c * phase).re;
            phase *= step;
        }
        acc
    }

    /// Derivative of the given order, exact within the harmonic model.
    pub fn derivative(&self, order: u32) -> Harmonics {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c * Complex64::new(0.0, omega(m, self.period)).powu(order))
            .collect();
        Harmonics::new(self.period, coeffs)
    }

    /// `∫_a^b x(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut acc = self.coeffs[0].re * (b - a);
        for (m, c) in self.coeffs.iter().enumerate().skip(1) {
            let w = omega(m, self.period);
            let eb = Complex64::from_polar(1.0, w * b);
            let ea = Complex64::from_polar(1.0, w * a);
            acc += 2.0 * (c * (eb - ea) / Complex64::new(0.0, w)).re;
        }
        acc
    }

    /// Samples the polynomial on a grid of `len` points spanning one period.
    pub fn to_grid(&self, len: usize) -> Vec<f64> {
        assert!(
            len > 2 * self.max_harmonic(),
            "grid too coarse for the harmonic content"
        );
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        let n = len as f64;
        spectrum[0] = Complex64::new(self.coeffs[0].re * n, 0.0);
        for (m, c) in self.coeffs.iter().enumerate().skip(1) {
            spectrum[m] = c * n;
            spectrum[len - m] = c.conj() * n;
        }
        inverse_real(&spectrum)
    }

    /// Coordinates in the orthonormal real basis
    /// `{1/√T, √(2/T) cos ω_m t, √(2/T) sin ω_m t}` of `L²[0,T)`.
    pub fn real_coords(&self) -> Vec<f64> {
        let t = self.period;
        let a = (2.0 * t).sqrt();
        let mut out = Vec::with_capacity(2 * self.max_harmonic() + 1);
        out.push(self.coeffs[0].re * t.sqrt());
        for c in &self.coeffs[1..] {
            out.push(a * c.re);
            out.push(-a * c.im);
        }
        out
    }

    pub fn from_real_coords(period: f64, coords: &[f64]) -> Harmonics {
        assert!(coords.len() % 2 == 1, "real coordinates come in odd counts");
        let a = (2.0 * period).sqrt();
        let mut coeffs = Vec::with_capacity(coords.len() / 2 + 1);
        coeffs.push(Complex64::new(coords[0] / period.sqrt(), 0.0));
        for pair in coords[1..].chunks_exact(2) {
            coeffs.push(Complex64::new(pair[0] / a, -pair[1] / a));
        }
        Harmonics::new(period, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip() {
        let v: Vec<f64> = (0..48).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let back = inverse_real(&forward(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_of_cosine() {
        // x(t) = cos(2π t / 5)
        let h = Harmonics::new(
            5.0,
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)],
        );
        let w = 2.0 * PI / 5.0;
        let exact = ((w * 1.7).sin() - (w * 0.2).sin()) / w;
        assert!((h.integral(0.2, 1.7) - exact).abs() < 1e-14);
        assert!((h.eval(1.25) - (w * 1.25).cos()).abs() < 1e-14);
    }

    #[test]
    fn real_coords_round_trip() {
        let h = Harmonics::new(
            7.0,
            vec![
                Complex64::new(0.3, 0.0),
                Complex64::new(-0.2, 0.7),
                Complex64::new(0.1, -0.4),
            ],
        );
        let back = Harmonics::from_real_coords(7.0, &h.real_coords());
        for (a, b) in h.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
