use nalgebra::{DMatrix, DVector};

use super::SamplingOperator;
use crate::error::{dim_check, ReconError, Result};
use crate::signal::MultiSignal;

/// Reference solution through the SVD of the normalized operator `Ŝ`,
/// written as a `K × dim 𝓐` matrix in subspace coordinates.
#[derive(Clone, Debug)]
pub struct PinvOracle {
    op: SamplingOperator,
    matrix: DMatrix<f64>,
    svd: Svd,
    cutoff: f64,
}

impl PinvOracle {
    pub const DEFAULT_THRESHOLD: f64 = 1e-10;

    /// Singular values below `rel_threshold · σ_max` are treated as zero.
    pub fn new(op: &SamplingOperator, rel_threshold: f64) -> Result<Self> {
        if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
            return Err(ReconError::Config(format!("pinv threshold {rel_threshold} outside (0,1)")));
        }
        let op = op.with_normalized(true);
        let k = op.len();
        let d = op.basis().dim();
        let rows: Vec<Vec<f64>> = (0..k).map(|i| op.element_coords(i)).collect();
        let matrix = DMatrix::from_fn(k, d, |i, j| rows[i][j]);
        let svd = Svd::jacobi(&matrix);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        if !(smax > 0.0) {
            return Err(ReconError::DegenerateSampling("operator vanishes on the subspace".into()));
        }
        Ok(Self { op, matrix, svd, cutoff: rel_threshold * smax })
    }

    pub fn rank(&self) -> usize {
        self.svd.singular_values.iter().filter(|&&s| s > self.cutoff).count()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// `‖Ŝ⁺‖ = 1/σ_min` over the retained singular values.
    pub fn pinv_norm(&self) -> f64 {
        let smin = self
            .svd
            .singular_values
            .iter()
            .copied()
            .filter(|&s| s > self.cutoff)
            .fold(f64::INFINITY, f64::min);
        1.0 / smin
    }

    fn pinv_apply(&self, s: &[f64]) -> Vec<f64> {
        let u = &self.svd.u;
        let vt = &self.svd.v_t;
        let s = DVector::from_column_slice(s);
        let mut w = u.transpose() * s;
        for (wi, &sv) in w.iter_mut().zip(self.svd.singular_values.iter()) {
            *wi = if sv > self.cutoff { *wi / sv } else { 0.0 };
        }
        (vt.transpose() * w).iter().copied().collect()
    }

    /// Coordinates of `Ŝ⁺ ŝ`, the minimum-norm least-squares solution.
    pub fn solve_coords(&self, s_hat: &[f64]) -> Result<Vec<f64>> {
        dim_check("sample count", self.op.len(), s_hat.len())?;
        Ok(self.pinv_apply(s_hat))
    }

    pub fn solve(&self, s_hat: &[f64]) -> Result<MultiSignal> {
        self.op.basis().synthesize(&self.solve_coords(s_hat)?)
    }

    /// `P_{N(Ŝ)} u₀ + Ŝ⁺ ŝ`: the limit of the iteration started at `u₀ ∈ 𝓐`.
    pub fn limit(&self, u0: &MultiSignal, s_hat: &[f64]) -> Result<MultiSignal> {
        dim_check("sample count", self.op.len(), s_hat.len())?;
        let c0 = self.op.basis().coords(u0)?;
        let su0: Vec<f64> = (&self.matrix * DVector::from_column_slice(&c0)).iter().copied().collect();
        let r: Vec<f64> = s_hat.iter().zip(&su0).map(|(a, b)| a - b).collect();
        let dc = self.pinv_apply(&r);
        let c: Vec<f64> = c0.iter().zip(&dc).map(|(a, b)| a + b).collect();
        self.op.basis().synthesize(&c)
    }

    /// `ŜŜ⁺ ŝ`: the part of `ŝ` the operator can reproduce.
    pub fn project_onto_range(&self, s_hat: &[f64]) -> Result<Vec<f64>> {
        dim_check("sample count", self.op.len(), s_hat.len())?;
        let u = &self.svd.u;
        let s = DVector::from_column_slice(s_hat);
        let mut w = u.transpose() * s;
        for (wi, &sv) in w.iter_mut().zip(self.svd.singular_values.iter()) {
            if sv <= self.cutoff {
                *wi = 0.0;
            }
        }
        Ok((u * w).iter().copied().collect())
    }
}

/// Thin SVD `A = U diag(σ) Vᵀ` by one-sided Jacobi rotations.
///
/// nalgebra's bidiagonal SVD reconstructs some of the operator matrices here
/// only to ~1e-9; Jacobi keeps every singular triplet to working precision.
#[derive(Clone, Debug)]
struct Svd {
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    v_t: DMatrix<f64>,
}

impl Svd {
    fn jacobi(a: &DMatrix<f64>) -> Self {
        if a.nrows() < a.ncols() {
            let t = Self::jacobi(&a.transpose());
            return Self { u: t.v_t.transpose(), singular_values: t.singular_values, v_t: t.u.transpose() };
        }
        let n = a.ncols();
        let mut w = a.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha = w.column(p).norm_squared();
                    let beta = w.column(q).norm_squared();
                    let gamma = w.column(p).dot(&w.column(q));
                    if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for m in [&mut w, &mut v] {
                        for i in 0..m.nrows() {
                            let (x, y) = (m[(i, p)], m[(i, q)]);
                            m[(i, p)] = c * x - s * y;
                            m[(i, q)] = s * x + c * y;
                        }
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let sigma = DVector::from_fn(n, |j, _| w.column(j).norm());
        let mut u = w;
        for j in 0..n {
            if sigma[j] > 0.0 {
                let s = sigma[j];
                u.column_mut(j).scale_mut(1.0 / s);
            }
        }
        Self { u, singular_values: sigma, v_t: v.transpose() }
    }
}
