use crate::error::{ReconError, Result};
use crate::signal::{GridSignal, Harmonics};

/// Spike times of an integrate-and-fire encoder and the interval integrals
/// they reveal.
///
/// `times[0]` is the integrator reset at the start of the observation; sample
/// `j` belongs to `[times[j], times[j+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
    samples: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>, samples: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || samples.len() + 1 != times.len() {
            return Err(ReconError::Dimension(format!(
                "{} boundaries need {} interval samples, got {}",
                times.len(),
                times.len().saturating_sub(1),
                samples.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ReconError::Precondition("spike times must be strictly increasing".into()));
        }
        Ok(Self { times, samples })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn num_intervals(&self) -> usize {
        self.samples.len()
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Biased integrate-and-fire encoding over one period starting at `t = 0`.
///
/// The integrator fires at `t_j` when `∫_{t_{j-1}}^{t_j} (x + bias) = threshold`;
/// integration that has not reached the threshold by the end of the period is
/// discarded. The interval samples are `s_j = threshold - bias (t_j - t_{j-1})`.
pub fn encode_if(x: &GridSignal, bias: f64, threshold: f64) -> Result<SpikeTrain> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(ReconError::Precondition(format!("threshold {threshold} must be positive")));
    }
    let peak = x.max_abs();
    if !(bias > peak && bias.is_finite()) {
        return Err(ReconError::Precondition(format!(
            "bias {bias} must exceed max|x| = {peak} for a strictly increasing integrator"
        )));
    }
    if !x.is_bandlimited() {
        return Err(ReconError::Precondition("encoding requires a bandlimited input".into()));
    }
    let h = x.harmonics();
    let period = x.spec().period_f64();
    // The grid maximum can miss the true peak slightly; the bracket search
    // below only relies on positivity of the integrand, which is checked.
    let mut times = vec![0.0];
    let mut samples = Vec::new();
    let mut t = 0.0;
    loop {
        let Some(next) = next_spike(&h, bias, threshold, t, period)? else { break };
        samples.push(threshold - bias * (next - t));
        times.push(next);
        t = next;
    }
    if samples.len() < 2 {
        return Err(ReconError::Config(format!(
            "only {} spikes per period; lower the threshold or raise the bias",
            samples.len()
        )));
    }
    SpikeTrain::new(times, samples)
}

fn next_spike(h: &Harmonics, bias: f64, theta: f64, t0: f64, period: f64) -> Result<Option<f64>> {
    let g = |t: f64| h.integral(t0, t) + bias * (t - t0) - theta;
    let dg = |t: f64| h.eval(t) + bias;
    let step = theta / bias;
    let mut lo = t0;
    let mut hi = t0 + step;
    while g(hi) < 0.0 {
        lo = hi;
        hi += step;
        if lo >= period {
            return Ok(None);
        }
    }
    let tol = 1e-10 * theta;
    let mut t = lo + 0.5 * (hi - lo);
    // Polish well past the acceptance tolerance; Newton converges
    // quadratically, bisection keeps the iterate bracketed.
    for _ in 0..100 {
        let r = g(t);
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = dg(t);
        if d <= 0.0 {
            return Err(ReconError::Precondition(format!(
                "integrand x + bias is not positive near t = {t}; raise the bias"
            )));
        }
        let newton = t - r / d;
        let next = if newton >= lo && newton <= hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    if g(t).abs() > tol {
        return Err(ReconError::Numerical(format!("spike search did not converge after t = {t0}")));
    }
    Ok((t < period).then_some(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{random_bandlimited, GridSpec, SpectrumProfile};

    #[test]
    fn zero_input_gives_uniform_spikes() {
        let spec = GridSpec::new(41, 16).unwrap();
        let train = encode_if(&GridSignal::zeros(spec), 2.0, 0.9).unwrap();
        // floor(41 / 0.45) spikes; the unfinished tail is dropped.
        assert_eq!(train.num_intervals(), 91);
        for (k, &t) in train.times().iter().enumerate() {
            assert!((t - 0.45 * k as f64).abs() < 1e-12);
        }
        assert!(train.samples().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn samples_are_interval_integrals() {
        let spec = GridSpec::new(41, 16).unwrap();
        let x = random_bandlimited(spec, &SpectrumProfile::flat(), 2).unwrap();
        let bias = 3.0 * x.max_abs();
        let train = encode_if(&x, bias, bias / 1.2).unwrap();
        let h = x.harmonics();
        for ((a, b), s) in train.intervals().zip(train.samples()) {
            // Gauss-Legendre oracle, independent of the harmonic antiderivative.
            let quad = crate::sinc_table::gauss_legendre(|t| h.eval(t), a, b, 8);
            assert!((s - quad).abs() < 1e-9, "{s} vs {quad}");
        }
    }

    #[test]
    fn preconditions() {
        let spec = GridSpec::new(41, 16).unwrap();
        let x = random_bandlimited(spec, &SpectrumProfile::flat(), 2).unwrap();
        let peak = x.max_abs();
        assert!(matches!(encode_if(&x, 0.5 * peak, 1.0), Err(ReconError::Precondition(_))));
        assert!(matches!(encode_if(&x, 2.0 * peak, 100.0 * peak), Err(ReconError::Config(_))));
    }
}
