//! Multi-channel time encoding: `N` sources mixed by a full-rank `M × N`
//! matrix `A`, each of the `M` outputs encoded by its own integrate-and-fire
//! device, and the sources recovered as `y = A⁺ x`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{dim_check, ReconError, Result};
use crate::ortho::GramMatrix;
use crate::samplers::text::{parse_matrix, parse_channel_spikes, render_channel_spikes, render_matrix};
use crate::samplers::{encode_if, interval_kernels, KernelFamily, KernelLabel, Scheme, SpikeTrain};
use crate::signal::{apply_pointwise, dot, GridSignal, GridSpec, Harmonics, MultiSignal, Subspace};

/// `A`, its pseudo-inverse and the projector `P = AA⁺` onto its range.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix {
    a: DMatrix<f64>,
    a_pinv: DMatrix<f64>,
    p: DMatrix<f64>,
}

impl MixingMatrix {
    /// Any full-rank `M × N` matrix with `M ≥ N`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if n == 0 || m < n {
            return Err(ReconError::Dimension(format!("mixing matrix must be M×N with M ≥ N ≥ 1, got {m}×{n}")));
        }
        let ata = a.transpose() * &a;
        let eig = SymmetricEigen::new(ata.clone());
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        if !(lo > 1e-12 * hi) {
            return Err(ReconError::Precondition("mixing matrix is rank deficient".into()));
        }
        let inv = ata
            .cholesky()
            .ok_or_else(|| ReconError::Numerical("AᵀA is not positive definite".into()))?
            .inverse();
        let a_pinv = inv * a.transpose();
        let mut p = &a * &a_pinv;
        p = (&p + p.transpose()) * 0.5;
        Ok(Self { a, a_pinv, p })
    }

    /// Unit-norm rows forming a tight frame, `AᵀA = (M/N)·I`.
    ///
    /// `N = 2` gives the equiangular frame at angles `2πi/M` (the
    /// Mercedes-Benz frame for `M = 3`); larger `N` uses the harmonic frame
    /// built from the first `⌊N/2⌋` DFT frequencies (plus a constant column
    /// for odd `N`). `M = N` gives the identity.
    pub fn tight_frame(m: usize, n: usize) -> Result<Self> {
        if n == 0 || m < n {
            return Err(ReconError::Dimension(format!("tight frame needs M ≥ N ≥ 1, got M={m}, N={n}")));
        }
        if m == n {
            return Self::new(DMatrix::identity(m, m));
        }
        let tau = std::f64::consts::TAU;
        let mut a = DMatrix::zeros(m, n);
        let scale = (2.0 / n as f64).sqrt();
        let mut col = 0;
        if n % 2 == 1 {
            a.column_mut(0).fill(1.0 / (n as f64).sqrt());
            col = 1;
        }
        for k in 1..=n / 2 {
            for i in 0..m {
                let phase = tau * (i * k) as f64 / m as f64;
                a[(i, col)] = scale * phase.cos();
                a[(i, col + 1)] = scale * phase.sin();
            }
            col += 2;
        }
        Self::new(a)
    }

    /// `A R(θ)` for a planar rotation of the source coordinates (`N = 2`),
    /// which leaves the range of `A` and hence `P` unchanged.
    pub fn rotated_sources(&self, theta: f64) -> Result<Self> {
        if self.num_sources() != 2 {
            return Err(ReconError::Unsupported("source rotation is defined for N = 2".into()));
        }
        let (s, c) = theta.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        Self::new(&self.a * r)
    }

    /// `R(θ) A`: rotates the output coordinates (requires `M = 3`, about the
    /// axis `(1,1,1)/√3`, which maps a harmonic frame to another tight frame).
    pub fn rotated_outputs(&self, theta: f64) -> Result<Self> {
        let m = self.num_outputs();
        let axis = vec![1.0 / (m as f64).sqrt(); m];
        if m != 3 {
            return Err(ReconError::Unsupported("output rotation is defined for M = 3".into()));
        }
        let (s, c) = theta.sin_cos();
        let k = DMatrix::from_row_slice(3, 3, &[0.0, -axis[2], axis[1], axis[2], 0.0, -axis[0], -axis[1], axis[0], 0.0]);
        let r = DMatrix::identity(3, 3) + &k * s + &k * &k * (1.0 - c);
        Self::new(r * &self.a)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a_pinv(&self) -> &DMatrix<f64> {
        &self.a_pinv
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// `M`.
    pub fn num_outputs(&self) -> usize {
        self.a.nrows()
    }

    /// `N`.
    pub fn num_sources(&self) -> usize {
        self.a.ncols()
    }

    /// `𝓐 = {x ∈ 𝓑^M : x(t) ∈ ran A}`.
    pub fn subspace(&self) -> Result<Subspace> {
        Subspace::mixed(self.p.clone())
    }

    /// `x(t) = A y(t)`.
    pub fn mix(&self, y: &MultiSignal) -> Result<MultiSignal> {
        dim_check("source count", self.num_sources(), y.num_channels())?;
        Ok(apply_pointwise(&self.a, y))
    }

    /// `y(t) = A⁺ x(t)`.
    pub fn unmix(&self, x: &MultiSignal) -> Result<MultiSignal> {
        dim_check("output count", self.num_outputs(), x.num_channels())?;
        Ok(apply_pointwise(&self.a_pinv, x))
    }

    /// Header `mixing,M,N`, then the rows of `A`.
    pub fn render(&self) -> String {
        let header = format!("mixing,{},{}", self.num_outputs(), self.num_sources());
        render_matrix(&header, self.a.nrows(), self.a.ncols(), |i, j| self.a[(i, j)])
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, rows) = parse_matrix(text)?;
        let f: Vec<&str> = header.split(',').collect();
        if f.len() != 3 || f[0] != "mixing" {
            return Err(ReconError::Parse("expected 'mixing,M,N' header".into()));
        }
        let m: usize = f[1].parse().map_err(|_| ReconError::Parse("bad M".into()))?;
        let n: usize = f[2].parse().map_err(|_| ReconError::Parse("bad N".into()))?;
        if rows.len() != m || rows.iter().any(|r| r.len() != n) {
            return Err(ReconError::Parse(format!("expected {m} rows of {n} values")));
        }
        Self::new(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
    }
}

/// `P_𝓐 u`: band-limit each channel, then apply `P` pointwise.
pub fn project_a_multichannel(u: &MultiSignal, mix: &MixingMatrix) -> Result<MultiSignal> {
    mix.subspace()?.project(u)
}

/// One spike train per output channel; kernel `(i, j)` sits at flat index
/// `offset(i) + j` (channel-major).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpikeSet {
    trains: Vec<SpikeTrain>,
}

impl ChannelSpikeSet {
    pub fn new(trains: Vec<SpikeTrain>) -> Result<Self> {
        if trains.is_empty() {
            return Err(ReconError::Precondition("no channels".into()));
        }
        Ok(Self { trains })
    }

    pub fn num_channels(&self) -> usize {
        self.trains.len()
    }

    pub fn trains(&self) -> &[SpikeTrain] {
        &self.trains
    }

    pub fn train(&self, i: usize) -> &SpikeTrain {
        &self.trains[i]
    }

    pub fn total_intervals(&self) -> usize {
        self.trains.iter().map(|t| t.num_intervals()).sum()
    }

    pub fn offset(&self, channel: usize) -> usize {
        self.trains[..channel].iter().map(|t| t.num_intervals()).sum()
    }

    pub fn flat_index(&self, channel: usize, j: usize) -> usize {
        self.offset(channel) + j
    }

    /// Interval integrals in flat order.
    pub fn samples(&self) -> Vec<f64> {
        self.trains.iter().flat_map(|t| t.samples().iter().copied()).collect()
    }

    pub fn render(&self, spec: GridSpec) -> String {
        render_channel_spikes(&self.trains, spec)
    }

    pub fn parse(text: &str) -> Result<(GridSpec, Self)> {
        let (spec, trains) = parse_channel_spikes(text)?;
        Ok((spec, Self::new(trains)?))
    }
}

/// Encodes every channel of `x` independently (in parallel).
pub fn encode_channels(x: &MultiSignal, bias: &[f64], threshold: &[f64]) -> Result<ChannelSpikeSet> {
    dim_check("bias count", x.num_channels(), bias.len())?;
    dim_check("threshold count", x.num_channels(), threshold.len())?;
    let trains = (0..x.num_channels())
        .into_par_iter()
        .map(|i| encode_if(x.channel(i), bias[i], threshold[i]))
        .collect::<Result<Vec<_>>>()?;
    ChannelSpikeSet::new(trains)
}

/// Indicator kernels `h_{i,j} = 1_{[t^i_{j-1}, t^i_j)} e_i`, channel-major.
pub fn mc_kernels(spikes: &ChannelSpikeSet, spec: GridSpec, m: usize) -> Result<KernelFamily> {
    dim_check("channel count", m, spikes.num_channels())?;
    let mut kernels = Vec::with_capacity(spikes.total_intervals());
    let mut labels = Vec::with_capacity(spikes.total_intervals());
    for (i, train) in spikes.trains().iter().enumerate() {
        let ks = interval_kernels(train.times(), 0.0, i)?;
        labels.extend((0..ks.len()).map(|j| KernelLabel::Pair(i, j)));
        kernels.extend(ks);
    }
    KernelFamily::new(spec, m, kernels, labels, Scheme::MultichannelTem)
}

fn channel_band_coords(family: &KernelFamily) -> Vec<Vec<f64>> {
    let spec = family.spec();
    family.kernels().iter().map(|k| k.band_coords(spec)).collect()
}

/// `⟨h̃̂_{i',j'}, ĥ_{i,j}⟩ = ⟨P_𝓑 h^{i'}_{j'}, h^i_j⟩ / (‖h^{i'}_{j'}‖‖h^i_j‖) · p_{ii'}`.
pub fn mc_gram_entry(family: &KernelFamily, mix: &MixingMatrix, a: (usize, usize), b: (usize, usize)) -> Result<f64> {
    let find = |(i, j): (usize, usize)| {
        family
            .labels()
            .iter()
            .position(|l| *l == KernelLabel::Pair(i, j))
            .ok_or_else(|| ReconError::Dimension(format!("no kernel ({i},{j})")))
    };
    let (ka, kb) = (find(a)?, find(b)?);
    let spec = family.spec();
    let ca = family.kernel(ka).band_coords(spec);
    let cb = family.kernel(kb).band_coords(spec);
    let scalar = dot(&ca, &cb) / (family.norms()[ka] * family.norms()[kb]);
    Ok(scalar * mix.projector()[(a.0, b.0)])
}

/// The whole Gram matrix from the factorized entries: one scalar
/// band-limited cross-correlation per kernel pair, times `p_{ii'}`.
pub fn mc_gram(family: &KernelFamily, p: &DMatrix<f64>, normalized: bool) -> GramMatrix {
    let coords = channel_band_coords(family);
    let ch: Vec<usize> = family.kernels().iter().map(|k| k.channel).collect();
    let norms = family.norms();
    let n = family.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|j| {
                    let pij = p[(ch[k], ch[j])];
                    if pij == 0.0 {
                        return 0.0;
                    }
                    let g = dot(&coords[k], &coords[j]) * pij;
                    if normalized {
                        g / (norms[k] * norms[j])
                    } else {
                        g
                    }
                })
                .collect()
        })
        .collect();
    GramMatrix {
        data: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
        normalized,
        diag_norms: norms.iter().map(|v| v * v).collect(),
    }
}

/// `x̂ = Σ_i (P_𝓑 c^i) P e_i` and `ŷ = Σ_i (P_𝓑 c^i) A⁺P e_i`, where
/// `c^i = Σ_j c_{i,j} ĥ^i_j` is piecewise constant (or `Σ_j c_{i,j} h^i_j`
/// when `normalized` is false). The band-limiting is done exactly in the
/// Fourier domain.
pub fn synthesize_output(
    c: &[f64],
    family: &KernelFamily,
    mix: &MixingMatrix,
    normalized: bool,
) -> Result<(MultiSignal, MultiSignal)> {
    dim_check("coefficient vector", family.len(), c.len())?;
    dim_check("channel count", mix.num_outputs(), family.num_channels())?;
    let spec = family.spec();
    let m = mix.num_outputs();
    let mut per_channel = vec![vec![Complex64::new(0.0, 0.0); spec.max_harmonic() + 1]; m];
    for (k, kernel) in family.kernels().iter().enumerate() {
        let w = if normalized { c[k] / family.norms()[k] } else { c[k] };
        if w == 0.0 {
            continue;
        }
        let h = kernel.band_harmonics(spec);
        for (acc, v) in per_channel[kernel.channel].iter_mut().zip(h.coeffs()) {
            *acc += v * w;
        }
    }
    let smooth: Vec<GridSignal> = per_channel
        .into_iter()
        .map(|coeffs| GridSignal::from_harmonics(spec, &Harmonics::new(spec.period_f64(), coeffs)))
        .collect::<Result<_>>()?;
    let smooth = MultiSignal::new(smooth)?;
    let x_hat = apply_pointwise(mix.projector(), &smooth);
    let y_hat = apply_pointwise(&(mix.a_pinv() * mix.projector()), &smooth);
    Ok((x_hat, y_hat))
}
