use crate::error::{ReconError, Result};
use crate::signal::GridSignal;

/// Local extrema of a bandlimited signal over one period.
#[derive(Clone, Debug, PartialEq)]
pub struct Extrema {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Indices of roots of `x'` where `x''` nearly vanishes as well.
    pub degenerate: Vec<usize>,
}

impl Extrema {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Roots of `x'` in `[0, T)`: detected by sign changes on the grid, refined
/// by Newton on the exact derivative with a bisection safeguard.
pub fn find_extrema(x: &GridSignal) -> Result<Extrema> {
    let spec = x.spec();
    let d1 = x.derivative(1)?;
    let h1 = d1.harmonics();
    let h2 = h1.derivative(1);
    let v = d1.values();
    let scale1 = d1.max_abs();
    if scale1 <= 1e-12 * x.max_abs() {
        return Err(ReconError::Precondition("constant signal has no isolated extrema".into()));
    }
    let scale2 = x.derivative(2)?.max_abs();
    let tol = 1e-11 * scale1;
    let n = spec.len();
    let period = spec.period_f64();
    let hx = x.harmonics();

    let mut times = Vec::new();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let root = if a == 0.0 {
            Some(spec.time(i))
        } else if a.signum() != b.signum() && b != 0.0 {
            let lo = spec.time(i);
            Some(refine(|t| h1.eval(t), |t| h2.eval(t), lo, lo + spec.dt(), tol))
        } else {
            None
        };
        if let Some(t) = root {
            let t = spec.wrap(t);
            // Roots refined in the last cell may land a rounding error short of T.
            times.push(if period - t < 1e-12 * period { 0.0 } else { t });
        }
    }
    times.sort_by(f64::total_cmp);
    // A root landing exactly on the period boundary can be found twice.
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-9 || (period - (*a - *b).abs()) < 1e-9);

    let values = times.iter().map(|&t| hx.eval(t)).collect();
    let degenerate = times
        .iter()
        .enumerate()
        .filter(|(_, &t)| h2.eval(t).abs() < 1e-8 * scale2)
        .map(|(k, _)| k)
        .collect();
    Ok(Extrema { times, values, degenerate })
}

fn refine(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let f_lo = f(lo);
    let f_hi = f(hi);
    // The grid detected a sign change, but rounding in the exact evaluation
    // can disagree when a root sits on a grid point.
    if f_lo.abs() <= tol || f_hi.abs() <= tol || f_lo.signum() == f_hi.signum() {
        return if f_lo.abs() <= f_hi.abs() { lo } else { hi };
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..30 {
        let r = f(t);
        if r.abs() <= tol {
            return t;
        }
        if r.signum() == f_lo.signum() {
            lo = t;
        } else {
            hi = t;
        }
        let d = df(t);
        let newton = if d != 0.0 { t - r / d } else { f64::NAN };
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    // Newton stalled: finish by bisection.
    while hi - lo > 1e-15 * hi.abs().max(1.0) {
        t = 0.5 * (lo + hi);
        let r = f(t);
        if r.abs() <= tol {
            return t;
        }
        if r.signum() == f_lo.signum() {
            lo = t;
        } else {
            hi = t;
        }
    }
    t
}
