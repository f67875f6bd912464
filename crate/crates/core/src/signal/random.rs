use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GridSignal, GridSpec, Harmonics};
use crate::error::{ReconError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumShape {
    Flat,
    /// Amplitude weight proportional to the harmonic index `m`.
    LinearIncreasing,
}

impl FromStr for SpectrumShape {
    type Err = ReconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Self::Flat),
            "linear-increasing" | "linear_increasing" => Ok(Self::LinearIncreasing),
            other => Err(ReconError::Config(format!("unknown spectrum profile '{other}'"))),
        }
    }
}

/// Shape of the random harmonic amplitudes plus the weight of the DC term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumProfile {
    pub shape: SpectrumShape,
    pub dc_weight: f64,
}

impl SpectrumProfile {
    pub fn flat() -> Self {
        Self { shape: SpectrumShape::Flat, dc_weight: 1.0 }
    }

    pub fn linear_increasing() -> Self {
        Self { shape: SpectrumShape::LinearIncreasing, dc_weight: 0.0 }
    }

    /// Amplitude weight of harmonic `m ≥ 1`.
    pub fn weight(&self, m: usize) -> f64 {
        match self.shape {
            SpectrumShape::Flat => 1.0,
            SpectrumShape::LinearIncreasing => m as f64,
        }
    }
}

/// Random real bandlimited signal of unit `L²` norm.
///
/// Each real coordinate (DC, and cosine/sine of every harmonic) is an
/// independent standard normal scaled by the profile weight, so the result is
/// a deterministic function of `(spec, profile, seed)`.
pub fn random_bandlimited(spec: GridSpec, profile: &SpectrumProfile, seed: u64) -> Result<GridSignal> {
    if !(profile.dc_weight.is_finite() && profile.dc_weight >= 0.0) {
        return Err(ReconError::Config("DC weight must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spec.max_harmonic();
    let mut coords = Vec::with_capacity(2 * h + 1);
    let g: f64 = StandardNormal.sample(&mut rng);
    coords.push(profile.dc_weight * g);
    for m in 1..=h {
        let w = profile.weight(m);
        let gc: f64 = StandardNormal.sample(&mut rng);
        let gs: f64 = StandardNormal.sample(&mut rng);
        coords.push(w * gc);
        coords.push(w * gs);
    }
    let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ReconError::Config("spectrum profile has no energy".into()));
    }
    coords.iter_mut().for_each(|c| *c /= norm);
    GridSignal::from_harmonics(spec, &Harmonics::from_real_coords(spec.period_f64(), &coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let spec = GridSpec::new(41, 16).unwrap();
        let a = random_bandlimited(spec, &SpectrumProfile::linear_increasing(), 7).unwrap();
        let b = random_bandlimited(spec, &SpectrumProfile::linear_increasing(), 7).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert!(a.is_bandlimited());
        assert!(a.harmonics().coeffs()[0].norm() < 1e-15);
    }

    #[test]
    fn flat_profile_spreads_energy_evenly() {
        let spec = GridSpec::new(11, 8).unwrap();
        let mut energy = vec![0.0; 11];
        let trials = 10_000;
        for seed in 0..trials {
            let x = random_bandlimited(spec, &SpectrumProfile::flat(), seed).unwrap();
            for (e, c) in energy.iter_mut().zip(x.harmonics().real_coords()) {
                *e += c * c;
            }
        }
        // Each of the 11 real coordinates carries 1/11 of the unit energy on average.
        for e in &energy {
            let mean = e / trials as f64;
            assert!((mean * 11.0 - 1.0).abs() < 0.05, "{mean}");
        }
    }

    #[test]
    fn unknown_profile_is_a_config_error() {
        assert!(matches!("pink".parse::<SpectrumShape>(), Err(ReconError::Config(_))));
        assert_eq!("flat".parse::<SpectrumShape>().unwrap(), SpectrumShape::Flat);
    }
}
