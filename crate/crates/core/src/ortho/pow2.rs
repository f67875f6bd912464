//! Power-of-two truncation for the multiplier-free iteration.

use crate::error::{ReconError, Result};

const SIGN_EXP_MASK: u64 = 0xFFF0_0000_0000_0000;
const EXP_MASK: u64 = 0x7FF0_0000_0000_0000;
const MANT_MASK: u64 = 0x000F_FFFF_FFFF_FFFF;

/// `sign(r) · 2^⌊log₂|r|⌋`, by clearing the mantissa; `ρ(0) = 0`.
///
/// Subnormals keep only their leading mantissa bit.
pub fn rho(r: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(ReconError::Numerical(format!("ρ of non-finite value {r}")));
    }
    let bits = r.to_bits();
    if bits & EXP_MASK != 0 {
        return Ok(f64::from_bits(bits & SIGN_EXP_MASK));
    }
    let mant = bits & MANT_MASK;
    if mant == 0 {
        return Ok(r);
    }
    let lead = 63 - mant.leading_zeros();
    Ok(f64::from_bits((bits & !MANT_MASK) | (1u64 << lead)))
}

/// A signed power of two `±2^exp`, or zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerOfTwo {
    Zero,
    Pow { negative: bool, exp: i32 },
}

impl PowerOfTwo {
    /// Exact for any value that is already a power of two (output of [`rho`]).
    pub fn from_rho(v: f64) -> Result<Self> {
        if v == 0.0 {
            return Ok(PowerOfTwo::Zero);
        }
        let exp = exponent(v.abs());
        if v.abs() != shift(1.0, exp) {
            return Err(ReconError::Precondition(format!("{v} is not a power of two")));
        }
        Ok(PowerOfTwo::Pow { negative: v < 0.0, exp })
    }

    /// `ρ(num)/ρ(den)` as an exponent difference.
    pub fn ratio(num: f64, den: f64) -> Result<Self> {
        Self::quotient(rho(num)?, rho(den)?)
    }

    /// Quotient of two values that are already signed powers of two (or a
    /// zero numerator).
    pub fn quotient(num: f64, den: f64) -> Result<Self> {
        match (Self::from_rho(num)?, Self::from_rho(den)?) {
            (_, PowerOfTwo::Zero) => Err(ReconError::Numerical("ρ ratio with zero denominator".into())),
            (PowerOfTwo::Zero, _) => Ok(PowerOfTwo::Zero),
            (PowerOfTwo::Pow { negative: a, exp: ea }, PowerOfTwo::Pow { negative: b, exp: eb }) => {
                Ok(PowerOfTwo::Pow { negative: a != b, exp: ea - eb })
            }
        }
    }

    pub fn value(self) -> f64 {
        match self {
            PowerOfTwo::Zero => 0.0,
            PowerOfTwo::Pow { negative, exp } => shift(if negative { -1.0 } else { 1.0 }, exp),
        }
    }

    /// `self · x` by sign flip and exponent shift.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            PowerOfTwo::Zero => 0.0,
            PowerOfTwo::Pow { negative, exp } => {
                let y = shift(x, exp);
                if negative {
                    -y
                } else {
                    y
                }
            }
        }
    }
}

fn exponent(a: f64) -> i32 {
    let bits = a.to_bits();
    let e = ((bits & EXP_MASK) >> 52) as i32;
    if e != 0 {
        e - 1023
    } else {
        let mant = bits & MANT_MASK;
        (63 - mant.leading_zeros() as i32) - 1074
    }
}

/// `x · 2^e` by adding to the exponent field; falls back to exact scaling
/// only when the input or result leaves the normal range.
pub fn shift(x: f64, e: i32) -> f64 {
    let bits = x.to_bits();
    let biased = ((bits & EXP_MASK) >> 52) as i32;
    if biased != 0 && biased != 0x7FF {
        let next = biased + e;
        if (1..0x7FF).contains(&next) {
            return f64::from_bits((bits & !EXP_MASK) | ((next as u64) << 52));
        }
    }
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    // Split so that neither factor overflows.
    let half = e / 2;
    x * 2f64.powi(half) * 2f64.powi(e - half)
}

/// Effective per-kernel relaxation `(ρ(r)/r)·(‖h‖²/ρ(‖h‖²))`; lies in `(1/2, 2)`.
pub fn implied_lambda(r: f64, norm_sq: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(1.0);
    }
    Ok(rho(r)? / r * (norm_sq / rho(norm_sq)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(rho(5.0).unwrap(), 4.0);
        assert_eq!(rho(0.3).unwrap(), 0.25);
        assert_eq!(rho(0.75).unwrap(), 0.5);
        for m in -1074..1024 {
            let p = shift(1.0, m);
            assert_eq!(rho(p).unwrap(), p);
        }
        assert_eq!(rho(-3.0).unwrap(), -2.0);
        assert_eq!(rho(0.0).unwrap(), 0.0);
        assert_eq!(rho(1.0).unwrap(), 1.0);
        assert!(rho(f64::NAN).is_err());
        assert!(rho(f64::INFINITY).is_err());
        let sub = f64::from_bits(0b1011);
        assert_eq!(rho(sub).unwrap(), f64::from_bits(0b1000));
        assert_eq!(rho(f64::MIN_POSITIVE * 1.5).unwrap(), f64::MIN_POSITIVE);
    }

    #[test]
    fn power_of_two_arithmetic() {
        let q = PowerOfTwo::ratio(0.75, 3.0).unwrap();
        assert_eq!(q, PowerOfTwo::Pow { negative: false, exp: -2 });
        assert_eq!(q.value(), 0.25);
        assert_eq!(q.apply(3.0), 0.75);
        assert_eq!(PowerOfTwo::ratio(-5.0, 0.3).unwrap().value(), -16.0);
        assert_eq!(PowerOfTwo::ratio(0.0, 2.0).unwrap(), PowerOfTwo::Zero);
        assert!(PowerOfTwo::ratio(1.0, 0.0).is_err());
        assert_eq!(shift(1.0, -1074), f64::from_bits(1));
        assert_eq!(shift(f64::from_bits(1), 1074), 1.0);
        assert_eq!(shift(1.5, 1023), 1.5 * 2f64.powi(1023));
    }

    #[test]
    fn rho_ratio_over_a_million_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        for _ in 0..1_000_000 {
            let r: f64 = rng.random_range(-1.0..1.0) * shift(1.0, rng.random_range(-60..60));
            if r == 0.0 {
                continue;
            }
            let q = rho(r).unwrap() / r;
            assert!(q > 0.5 && q <= 1.0, "{r}");
        }
    }

    proptest! {
        #[test]
        fn rho_brackets_its_argument(r in prop_oneof![-1e300f64..1e300, -1e-300f64..1e-300]) {
            let p = rho(r).unwrap();
            if r == 0.0 {
                prop_assert_eq!(p, 0.0);
            } else {
                prop_assert!(p.signum() == r.signum());
                prop_assert!(p.abs() <= r.abs() && r.abs() < 2.0 * p.abs());
                let e = exponent(p.abs());
                prop_assert_eq!(p.abs(), shift(1.0, e));
            }
        }

        #[test]
        fn implied_lambda_in_open_range(r in -1e6f64..1e6, n in 1e-6f64..1e6) {
            prop_assume!(r != 0.0);
            let l = implied_lambda(r, n).unwrap();
            prop_assert!(l > 0.5 && l < 2.0);
        }

        #[test]
        fn shift_matches_scaling(x in -1e10f64..1e10, e in -60i32..60) {
            prop_assert_eq!(shift(x, e), x * 2f64.powi(e));
        }
    }
}
