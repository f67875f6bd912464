use nalgebra::{DMatrix, SymmetricEigen};

use super::{dot, GridSignal, GridSpec, Harmonics, MultiSignal};
use crate::error::{dim_check, ReconError, Result};

/// The closed subspace `𝓐` the unknown signal is known to lie in.
#[derive(Clone, Debug, PartialEq)]
pub enum Subspace {
    /// `𝓑^M`: every channel bandlimited, no cross-channel constraint.
    Bandlimited { channels: usize },
    /// Bandlimited channels whose pointwise vector value lies in the range of
    /// the symmetric idempotent `projector`.
    Mixed { projector: DMatrix<f64> },
}

impl Subspace {
    pub fn bandlimited(channels: usize) -> Self {
        Self::Bandlimited { channels: channels.max(1) }
    }

    /// Accepts a symmetric idempotent matrix (tolerance 1e-10).
    pub fn mixed(projector: DMatrix<f64>) -> Result<Self> {
        if !projector.is_square() || projector.nrows() == 0 {
            return Err(ReconError::Dimension("projector must be square and non-empty".into()));
        }
        let sym = (&projector - projector.transpose()).amax();
        let idem = (&projector * &projector - &projector).amax();
        if sym > 1e-10 || idem > 1e-10 {
            return Err(ReconError::Precondition(format!(
                "matrix is not an orthogonal projector (asymmetry {sym:.1e}, idempotence defect {idem:.1e})"
            )));
        }
        Ok(Self::Mixed { projector })
    }

    pub fn num_channels(&self) -> usize {
        match self {
            Self::Bandlimited { channels } => *channels,
            Self::Mixed { projector } => projector.nrows(),
        }
    }

    /// Pointwise channel projector (identity for `𝓑^M`).
    pub fn channel_projector(&self) -> DMatrix<f64> {
        match self {
            Self::Bandlimited { channels } => DMatrix::identity(*channels, *channels),
            Self::Mixed { projector } => projector.clone(),
        }
    }

    /// `P_𝓐 u`: band-limit every channel, then apply the channel projector at
    /// every grid point. The two steps commute.
    pub fn project(&self, u: &MultiSignal) -> Result<MultiSignal> {
        dim_check("channel count", self.num_channels(), u.num_channels())?;
        let banded = u.project_b();
        match self {
            Self::Bandlimited { .. } => Ok(banded),
            Self::Mixed { projector } => Ok(apply_pointwise(projector, &banded)),
        }
    }

    /// Orthonormal coordinate system of the subspace on the given grid.
    pub fn basis(&self, spec: GridSpec) -> SubspaceBasis {
        let q = match self {
            Self::Bandlimited { channels } => DMatrix::identity(*channels, *channels),
            Self::Mixed { projector } => range_basis(projector),
        };
        SubspaceBasis { spec, q }
    }
}

/// Applies the matrix `p` (`rows × u.num_channels()`) to the channel vector
/// at every grid point.
pub(crate) fn apply_pointwise(p: &DMatrix<f64>, u: &MultiSignal) -> MultiSignal {
    let spec = u.spec();
    debug_assert_eq!(p.ncols(), u.num_channels());
    let m = p.nrows();
    let mut out = vec![vec![0.0; spec.len()]; m];
    for (i, row) in out.iter_mut().enumerate() {
        for (k, ch) in u.channels().iter().enumerate() {
            let w = p[(i, k)];
            if w != 0.0 {
                super::axpy(row, w, ch.values());
            }
        }
    }
    let marked = u.channels().iter().all(|c| c.is_marked_bandlimited());
    MultiSignal::new(
        out.into_iter()
            .map(|v| GridSignal::from_parts(spec, v, marked))
            .collect(),
    )
    .expect("shape preserved")
}

/// Orthonormal basis of `range(p)` for a projector `p`, as columns.
fn range_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let mut cols: Vec<usize> = (0..p.nrows()).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    cols.sort_unstable();
    let mut q = DMatrix::zeros(p.nrows(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        let mut v = eig.eigenvectors.column(c).clone_owned();
        // Fix the sign so the basis is reproducible across platforms.
        if let Some(pivot) = v.iter().copied().find(|x| x.abs() > 1e-8) {
            if pivot < 0.0 {
                v.neg_mut();
            }
        }
        q.set_column(j, &v);
    }
    q
}

/// Orthonormal coordinates of a subspace of `𝓑^M`.
///
/// The basis is `q_l ⊗ e_b`, where `q_l` runs over an orthonormal basis of the
/// channel range and `e_b` over the real harmonic basis
/// `{1/√T, √(2/T) cos, √(2/T) sin}`; coordinate `l·T + b`.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    spec: GridSpec,
    q: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.q.ncols() * self.spec.band_dim()
    }

    pub fn num_channels(&self) -> usize {
        self.q.nrows()
    }

    /// Channel-range basis as matrix columns.
    pub fn channel_basis(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Coordinates of `P_𝓐 u`.
    pub fn coords(&self, u: &MultiSignal) -> Result<Vec<f64>> {
        dim_check("channel count", self.num_channels(), u.num_channels())?;
        if u.spec() != self.spec {
            return Err(ReconError::Dimension("grid specs differ".into()));
        }
        let per_channel: Vec<Vec<f64>> = u
            .channels()
            .iter()
            .map(|c| c.harmonics().real_coords())
            .collect();
        Ok(self.combine(&per_channel))
    }

    /// Coordinates of `P_𝓐 (h e_channel)` from the real band coordinates of
    /// the scalar `P_𝓑 h`.
    pub fn lift_channel(&self, channel: usize, band_coords: &[f64]) -> Vec<f64> {
        let t = self.spec.band_dim();
        debug_assert_eq!(band_coords.len(), t);
        let mut out = vec![0.0; self.dim()];
        for l in 0..self.q.ncols() {
            let w = self.q[(channel, l)];
            if w != 0.0 {
                super::axpy(&mut out[l * t..(l + 1) * t], w, band_coords);
            }
        }
        out
    }

    fn combine(&self, per_channel: &[Vec<f64>]) -> Vec<f64> {
        let t = self.spec.band_dim();
        let mut out = vec![0.0; self.dim()];
        for (i, a) in per_channel.iter().enumerate() {
            for l in 0..self.q.ncols() {
                let w = self.q[(i, l)];
                if w != 0.0 {
                    super::axpy(&mut out[l * t..(l + 1) * t], w, a);
                }
            }
        }
        out
    }

    /// Real band coordinates of every channel of the signal with the given
    /// subspace coordinates.
    pub fn channel_coords(&self, coords: &[f64]) -> Vec<Vec<f64>> {
        let t = self.spec.band_dim();
        (0..self.num_channels())
            .map(|i| {
                let mut a = vec![0.0; t];
                for l in 0..self.q.ncols() {
                    let w = self.q[(i, l)];
                    if w != 0.0 {
                        super::axpy(&mut a, w, &coords[l * t..(l + 1) * t]);
                    }
                }
                a
            })
            .collect()
    }

    pub fn synthesize(&self, coords: &[f64]) -> Result<MultiSignal> {
        dim_check("subspace coordinates", self.dim(), coords.len())?;
        let period = self.spec.period_f64();
        let channels = self
            .channel_coords(coords)
            .iter()
            .map(|a| {
                GridSignal::from_harmonics(self.spec, &Harmonics::from_real_coords(period, a))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiSignal::new(channels)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, b)
    }
}
