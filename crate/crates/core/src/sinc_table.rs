//! Lookup-table assembly of bandlimited Gram entries for indicator kernels
//! under true (aperiodic) sinc bandlimiting.
//!
//! With `ψ(t) = ∫_0^t sinc` and `f(t) = ∫_0^t (t-τ) sinc(τ) dτ`, the entry
//! `⟨P_𝓑 1_{[a',b']}, 1_{[a,b]}⟩ = ∫_a^b ∫_{a'}^{b'} sinc(t-τ) dτ dt` is a
//! signed sum of four values of `f`, because `f'' = sinc`.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use crate::error::{ReconError, Result};
use crate::samplers::text::{fmt_f64, parse_f64};

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss–Legendre rule with `panels` equal panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        acc += s * half;
    }
    acc
}

/// `sin(πt)/(πt)`.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let x = PI * t;
        x.sin() / x
    }
}

/// `ψ(t) = ∫_0^t sinc = Si(πt)/π`.
pub fn psi(t: f64) -> f64 {
    let a = t.abs();
    let v = if a <= 1.0 {
        psi_series(a)
    } else {
        psi_series(1.0) + gauss_legendre(sinc, 1.0, a, (a - 1.0).ceil() as usize)
    };
    v.copysign(t)
}

fn psi_series(t: f64) -> f64 {
    // Si(x) = Σ (-1)^n x^{2n+1} / ((2n+1)(2n+1)!)
    let x = PI * t;
    let x2 = x * x;
    let mut term = x; // x^{2n+1}/(2n+1)!
    let mut acc = 0.0;
    for n in 0..40 {
        let k = (2 * n + 1) as f64;
        acc += term / k;
        term *= -x2 / ((k + 1.0) * (k + 2.0));
        if term.abs() < 1e-18 * acc.abs().max(1e-300) {
            break;
        }
    }
    acc / PI
}

/// `f(t) = t ψ(t) - (1 - cos πt)/π²`; even in `t`.
pub fn f_exact(t: f64) -> f64 {
    let s = (0.5 * PI * t).sin();
    t * psi(t) - 2.0 * s * s / (PI * PI)
}

/// Tabulated `f` on `[0, t_max]` with cubic Hermite interpolation; the slopes
/// are the exact `ψ` values.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupTable {
    t_max: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl LookupTable {
    pub const DEFAULT_STEP: f64 = 1.0 / 64.0;

    pub fn build(t_max: f64, step: f64) -> Result<Self> {
        if !(t_max > 0.0 && step > 0.0 && step <= 1.0 / 64.0 && t_max.is_finite()) {
            return Err(ReconError::Config(format!(
                "table needs t_max > 0 and 0 < step ≤ 1/64 (got {t_max}, {step})"
            )));
        }
        let n = (t_max / step).ceil() as usize;
        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        let mut p = 0.0;
        for i in 0..=n {
            let t = i as f64 * step;
            if i > 0 {
                p += gauss_legendre(sinc, t - step, t, 1);
            }
            let s = (0.5 * PI * t).sin();
            values.push(t * p - 2.0 * s * s / (PI * PI));
            slopes.push(p);
        }
        Ok(Self { t_max: n as f64 * step, step, values, slopes })
    }

    /// Table covering every time difference within a period `T` (`t_max = 2T`).
    pub fn for_period(period: usize) -> Result<Self> {
        Self::build(2.0 * period as f64, Self::DEFAULT_STEP)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let a = t.abs();
        if !(a <= self.t_max) {
            return Err(ReconError::TableRange { value: t, t_max: self.t_max });
        }
        let pos = a / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let s = pos - i as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h = self.step;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * self.values[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.values[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1])
    }

    /// Header `ftable,t_max,step,n`, then `f,ψ` per abscissa.
    pub fn render(&self) -> String {
        let mut out = format!("ftable,{},{},{}\n", fmt_f64(self.t_max), fmt_f64(self.step), self.len());
        for (v, s) in self.values.iter().zip(&self.slopes) {
            out.push_str(&format!("{},{}\n", fmt_f64(*v), fmt_f64(*s)));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        if header.len() != 4 || header[0] != "ftable" {
            return Err(ReconError::Parse("expected 'ftable,t_max,step,n' header".into()));
        }
        let t_max = parse_f64(header[1])?;
        let step = parse_f64(header[2])?;
        let n: usize = header[3].trim().parse().map_err(|_| ReconError::Parse("bad count".into()))?;
        let (mut values, mut slopes) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for l in lines {
            let (v, s) = l.split_once(',').ok_or_else(|| ReconError::Parse(format!("bad row '{l}'")))?;
            values.push(parse_f64(v)?);
            slopes.push(parse_f64(s)?);
        }
        if values.len() != n || n < 2 {
            return Err(ReconError::Parse(format!("expected {n} rows, found {}", values.len())));
        }
        Ok(Self { t_max, step, values, slopes })
    }
}

/// Source of `f` values for [`gram_entry_f`].
pub trait FLookup<V> {
    fn lookup(&self, t: V) -> Result<V>;
}

impl FLookup<f64> for LookupTable {
    fn lookup(&self, t: f64) -> Result<f64> {
        self.eval(t)
    }
}

/// `⟨P_𝓑 1_{[t'_{j'-1}, t'_{j'}]}, 1_{[t_{j-1}, t_j]}⟩` from four values of `f`:
/// four subtractions form the time differences, three operations combine.
pub fn gram_entry_f<V, L>(t_j: V, t_j1: V, tp_j: V, tp_j1: V, table: &L) -> Result<V>
where
    V: Copy + Add<Output = V> + Sub<Output = V>,
    L: FLookup<V>,
{
    let a = table.lookup(t_j - tp_j1)?;
    let b = table.lookup(t_j1 - tp_j1)?;
    let c = table.lookup(t_j - tp_j)?;
    let d = table.lookup(t_j1 - tp_j)?;
    Ok(a - b - c + d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::cell::Cell;

    /// Adaptive Simpson, independent of the Gauss–Legendre machinery.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn psi_basics() {
        assert_eq!(psi(0.0), 0.0);
        for t in [0.3, 1.0, 2.7, 13.1] {
            assert_eq!(psi(-t), -psi(t));
        }
        let oracle = simpson(&sinc, 0.0, 1.0, 1e-15);
        assert!((psi(1.0) - oracle).abs() < 1e-12);
        let oracle = simpson(&sinc, 0.0, 7.3, 1e-15);
        assert!((psi(7.3) - oracle).abs() < 1e-12);
        assert!((psi(40.0) - 0.5).abs() < 1e-2);
        // Si(π) = 1.851937051982466...
        assert!((psi(1.0) * PI - 1.851_937_051_982_466).abs() < 1e-14);
    }

    #[test]
    fn f_is_even_and_matches_double_integral() {
        for t in [0.2, 1.0, 3.7, 25.0] {
            assert!((f_exact(-t) - f_exact(t)).abs() < 1e-12);
            let direct = simpson(&|tau| (t - tau) * sinc(tau), 0.0, t, 1e-14);
            assert!((f_exact(t) - direct).abs() < 1e-10, "t = {t}");
        }
        // The reflection f(-t) = f(t) - t does not hold.
        assert!((f_exact(-2.0) - (f_exact(2.0) - 2.0)).abs() > 1.0);
    }

    #[test]
    fn table_accuracy() {
        let table = LookupTable::for_period(41).unwrap();
        assert_eq!(table.eval(0.0).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let t = rng.random_range(-table.t_max()..table.t_max());
            // Direct single quadrature of the repeated integral on unit panels.
            let direct = gauss_legendre(|tau| (t - tau) * sinc(tau), 0.0, t, t.abs().ceil() as usize);
            assert!((table.eval(t).unwrap() - direct).abs() < 1e-8, "t = {t}");
        }
        for t in [0.01, 0.03, 0.05] {
            let v = table.eval(t).unwrap();
            assert!((v / (0.5 * t * t) - 1.0).abs() < 1e-3);
        }
        assert!(matches!(table.eval(83.0), Err(ReconError::TableRange { .. })));
    }

    #[test]
    fn second_derivative_is_sinc() {
        let table = LookupTable::for_period(11).unwrap();
        let h = 1e-2;
        let mut t = 0.1;
        while t < table.t_max() - 0.1 {
            let d2 = (table.eval(t + h).unwrap() - 2.0 * table.eval(t).unwrap() + table.eval(t - h).unwrap()) / (h * h);
            assert!((d2 - sinc(t)).abs() < 1e-4, "t = {t}");
            t += 0.173;
        }
    }

    #[test]
    fn table_round_trips_through_text() {
        let table = LookupTable::build(3.0, 1.0 / 64.0).unwrap();
        assert_eq!(LookupTable::parse(&table.render()).unwrap(), table);
    }

    thread_local! {
        static OPS: Cell<usize> = const { Cell::new(0) };
    }

    #[derive(Clone, Copy)]
    struct Counted(f64);
    impl Add for Counted {
        type Output = Counted;
        fn add(self, o: Counted) -> Counted {
            OPS.with(|c| c.set(c.get() + 1));
            Counted(self.0 + o.0)
        }
    }
    impl Sub for Counted {
        type Output = Counted;
        fn sub(self, o: Counted) -> Counted {
            OPS.with(|c| c.set(c.get() + 1));
            Counted(self.0 - o.0)
        }
    }
    struct CountingTable(LookupTable, Cell<usize>);
    impl FLookup<Counted> for CountingTable {
        fn lookup(&self, t: Counted) -> Result<Counted> {
            self.1.set(self.1.get() + 1);
            self.0.eval(t.0).map(Counted)
        }
    }

    #[test]
    fn gram_entry_operation_count() {
        let table = CountingTable(LookupTable::for_period(11).unwrap(), Cell::new(0));
        OPS.with(|c| c.set(0));
        let v = gram_entry_f(Counted(3.0), Counted(2.0), Counted(5.5), Counted(4.0), &table).unwrap();
        assert_eq!(table.1.get(), 4);
        assert_eq!(OPS.with(|c| c.get()), 7);
        let plain = gram_entry_f(3.0, 2.0, 5.5, 4.0, &table.0).unwrap();
        assert_eq!(v.0, plain);
    }
}
