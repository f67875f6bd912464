//! Orthogonal-kernel engine: the sampling operator `S` (or its normalized
//! form `Ŝ`) restricted to `𝓐`, its adjoint, the Gram matrix `SS*`, the
//! discrete-time iterations and the pseudo-inverse oracle.

mod discrete;
mod pinv;
mod pow2;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{dim_check, ReconError, Result};
use crate::samplers::text::{parse_matrix, render_matrix};
use crate::samplers::KernelFamily;
use crate::signal::{axpy, dot, GridSpec, MultiSignal, Subspace, SubspaceBasis};

pub use discrete::{multiplierless_update, run_discrete, DiscreteMode, DiscreteOptions, DiscreteRun, DiscreteState, ErrorMeter};
pub use pinv::PinvOracle;
pub use pow2::{implied_lambda, rho, shift, PowerOfTwo};

/// `S u = (⟨u, h_k⟩)_k` on `𝓐` and `S* c = Σ c_k h̃_k`, or their normalized
/// versions with `ĥ_k = h_k/‖h_k‖`.
#[derive(Clone, Debug)]
pub struct SamplingOperator {
    spec: GridSpec,
    subspace: Subspace,
    basis: SubspaceBasis,
    /// Subspace coordinates of `h̃_k = P_𝓐 h_k` (unnormalized).
    coords: Vec<Vec<f64>>,
    /// `‖h_k‖`.
    norms: Vec<f64>,
    normalized: bool,
}

impl SamplingOperator {
    /// Refuses non-orthogonal families: the closed-form projection onto the
    /// consistent set only holds for orthogonal kernels.
    pub fn new(family: &KernelFamily, subspace: Subspace, normalized: bool) -> Result<Self> {
        if !family.is_orthogonal() {
            return Err(ReconError::NonOrthogonal);
        }
        dim_check("channel count", family.num_channels(), subspace.num_channels())?;
        let spec = family.spec();
        let basis = subspace.basis(spec);
        let coords = family
            .kernels()
            .iter()
            .map(|k| basis.lift_channel(k.channel, &k.band_coords(spec)))
            .collect();
        Ok(Self { spec, subspace, basis, coords, norms: family.norms().to_vec(), normalized })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The same kernels with the other normalization convention.
    pub fn with_normalized(&self, normalized: bool) -> Self {
        Self { normalized, ..self.clone() }
    }

    /// `‖h_k‖`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    fn scale(&self, k: usize) -> f64 {
        if self.normalized {
            1.0 / self.norms[k]
        } else {
            1.0
        }
    }

    /// Coordinates of the `k`-th synthesis element (`h̃_k`, or `h̃_k/‖h_k‖`).
    pub fn element_coords(&self, k: usize) -> Vec<f64> {
        let s = self.scale(k);
        self.coords[k].iter().map(|v| v * s).collect()
    }

    /// `μ_k = ‖h̃_k‖² / ‖h_k‖²`.
    pub fn mu(&self) -> Vec<f64> {
        self.coords
            .iter()
            .zip(&self.norms)
            .map(|(c, n)| dot(c, c) / (n * n))
            .collect()
    }

    pub fn apply_s_coords(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|k| dot(u, &self.coords[k]) * self.scale(k)).collect()
    }

    /// `(⟨u, h_k⟩)_k` for `u ∈ 𝓐`; a signal outside `𝓐` is read through `P_𝓐`.
    pub fn apply_s(&self, u: &MultiSignal) -> Result<Vec<f64>> {
        Ok(self.apply_s_coords(&self.basis.coords(u)?))
    }

    pub fn apply_s_star_coords(&self, c: &[f64]) -> Result<Vec<f64>> {
        dim_check("coefficient vector", self.len(), c.len())?;
        let mut out = vec![0.0; self.basis.dim()];
        for (k, &ck) in c.iter().enumerate() {
            if ck != 0.0 {
                axpy(&mut out, ck * self.scale(k), &self.coords[k]);
            }
        }
        Ok(out)
    }

    /// `Σ c_k h̃_k` (normalized: `Σ c_k h̃_k/‖h_k‖`).
    pub fn apply_s_star(&self, c: &[f64]) -> Result<MultiSignal> {
        self.basis.synthesize(&self.apply_s_star_coords(c)?)
    }

    /// `G[k,k'] = ⟨h̃_{k'}, h_k⟩`, assembled in parallel over rows.
    pub fn gram(&self) -> GramMatrix {
        let n = self.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| (0..n).map(|j| dot(&self.coords[k], &self.coords[j]) * self.scale(k) * self.scale(j)).collect())
            .collect();
        GramMatrix {
            data: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
            normalized: self.normalized,
            diag_norms: self.norms.iter().map(|v| v * v).collect(),
        }
    }

    /// `u + Ŝ*(ŝ - Ŝu)`: the projection onto the consistent set followed by
    /// `P_𝓐`, for `u ∈ 𝓐` and normalized samples `ŝ`.
    pub fn papcs_step(&self, u: &MultiSignal, s_hat: &[f64]) -> Result<MultiSignal> {
        dim_check("sample count", self.len(), s_hat.len())?;
        let op = self.with_normalized(true);
        let su = op.apply_s(u)?;
        let r: Vec<f64> = s_hat.iter().zip(&su).map(|(s, v)| s - v).collect();
        u.add_scaled(1.0, &op.apply_s_star(&r)?)
    }
}

/// Dense symmetric Gram matrix with the kernel energies `H² = diag(‖h_k‖²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub data: DMatrix<f64>,
    pub normalized: bool,
    pub diag_norms: Vec<f64>,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn to_normalized(&self) -> GramMatrix {
        if self.normalized {
            return self.clone();
        }
        let n: Vec<f64> = self.diag_norms.iter().map(|v| v.sqrt()).collect();
        GramMatrix {
            data: DMatrix::from_fn(self.len(), self.len(), |i, j| self.data[(i, j)] / (n[i] * n[j])),
            normalized: true,
            diag_norms: self.diag_norms.clone(),
        }
    }

    pub fn to_unnormalized(&self) -> GramMatrix {
        if !self.normalized {
            return self.clone();
        }
        let n: Vec<f64> = self.diag_norms.iter().map(|v| v.sqrt()).collect();
        GramMatrix {
            data: DMatrix::from_fn(self.len(), self.len(), |i, j| self.data[(i, j)] * n[i] * n[j]),
            normalized: false,
            diag_norms: self.diag_norms.clone(),
        }
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.data - self.data.transpose()).amax()
    }

    /// Largest eigenvalue, i.e. `‖Ŝ‖²` for the normalized matrix.
    pub fn max_eigenvalue(&self) -> f64 {
        let sym = (&self.data + self.data.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.max()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                let col = self.data.column(j);
                axpy(&mut out, vj, col.as_slice());
            }
        }
        out
    }

    /// Header `gram,normalized,n`, then the rows.
    pub fn render(&self) -> String {
        let header = format!("gram,{},{}", self.normalized, self.len());
        let mut out = render_matrix(&header, self.len(), self.len(), |i, j| self.data[(i, j)]);
        out.push_str(&render_matrix("norms", 1, self.len(), |_, j| self.diag_norms[j]).replacen("norms\n", "", 1));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, rows) = parse_matrix(text)?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 3 || fields[0] != "gram" {
            return Err(ReconError::Parse("expected 'gram,normalized,n' header".into()));
        }
        let normalized = fields[1]
            .parse()
            .map_err(|_| ReconError::Parse(format!("bad normalized flag '{}'", fields[1])))?;
        let n: usize = fields[2].parse().map_err(|_| ReconError::Parse("bad size".into()))?;
        if rows.len() != n + 1 || rows.iter().any(|r| r.len() != n) {
            return Err(ReconError::Parse(format!("expected {n} rows of {n} plus the norm row")));
        }
        Ok(GramMatrix {
            data: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
            normalized,
            diag_norms: rows[n].clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{encode_if, sample, KernelFamily};
    use crate::serial::ConsistentSets;
    use crate::signal::{random_bandlimited, SpectrumProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, osr: f64) -> (MultiSignal, KernelFamily) {
        let spec = GridSpec::new(11, 16).unwrap();
        let x = random_bandlimited(spec, &SpectrumProfile::flat(), seed).unwrap();
        let bias = 2.0 * x.max_abs();
        let train = encode_if(&x, bias, bias / osr).unwrap();
        let fam = KernelFamily::integrate_fire(train.times(), 0.0, spec).unwrap();
        (x.into(), fam)
    }

    fn random_in_a(op: &SamplingOperator, rng: &mut ChaCha8Rng) -> MultiSignal {
        let c: Vec<f64> = (0..op.basis().dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        op.basis().synthesize(&c).unwrap()
    }

    #[test]
    fn refuses_non_orthogonal_families() {
        let spec = GridSpec::new(11, 16).unwrap();
        let fam = KernelFamily::point(&[0.0, 0.5], spec).unwrap();
        assert!(matches!(
            SamplingOperator::new(&fam, Subspace::bandlimited(1), true),
            Err(ReconError::NonOrthogonal)
        ));
    }

    #[test]
    fn normalized_samples_of_truth() {
        let (x, fam) = instance(1, 1.2);
        let op = SamplingOperator::new(&fam, Subspace::bandlimited(1), true).unwrap();
        let rec = sample(&x, &fam).unwrap();
        for (a, b) in op.apply_s(&x).unwrap().iter().zip(&rec.normalized) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(op.apply_s(&MultiSignal::zeros(op.spec(), 1)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjointness_and_bessel() {
        let (_, fam) = instance(2, 1.3);
        let op = SamplingOperator::new(&fam, Subspace::bandlimited(1), true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = random_in_a(&op, &mut rng);
            let c: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let su = op.apply_s(&u).unwrap();
            let lhs = dot(&su, &c);
            let rhs = u.inner(&op.apply_s_star(&c).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * (lhs.abs().max(rhs.abs())).max(1e-300) + 1e-14);
            assert!(dot(&su, &su).sqrt() <= u.norm() * (1.0 + 1e-12));
        }
        let g = op.gram();
        assert!(g.asymmetry() < 1e-12);
        assert!(g.max_eigenvalue() <= 1.0 + 1e-9);
        let e0 = op.apply_s_star(&[1.0].iter().chain(&vec![0.0; op.len() - 1]).copied().collect::<Vec<_>>()).unwrap();
        let h0 = op.basis().synthesize(&op.element_coords(0)).unwrap();
        assert!(e0.sub(&h0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn gram_matches_explicitly_projected_kernels() {
        let (_, fam) = instance(4, 1.2);
        let op = SamplingOperator::new(&fam, Subspace::bandlimited(1), false).unwrap();
        let g = op.gram();
        for k in 0..fam.len() {
            let hk = fam.kernel_signal(k);
            for j in 0..fam.len() {
                let hj_proj = fam.kernel_signal(j).project_b();
                let direct = hj_proj.inner(&hk).unwrap();
                assert!((g.data[(k, j)] - direct).abs() < 1e-11, "{k},{j}");
            }
        }
        let gn = g.to_normalized();
        for k in 0..fam.len() {
            for j in 0..fam.len() {
                let expect = g.data[(k, j)] / (fam.norms()[k] * fam.norms()[j]);
                assert!((gn.data[(k, j)] - expect).abs() < 1e-15);
            }
        }
        let back = gn.to_unnormalized();
        assert!((back.data.clone() - g.data.clone()).amax() < 1e-13);
        assert_eq!(GramMatrix::parse(&g.render()).unwrap(), g);
    }

    #[test]
    fn orthonormal_kernels_inside_the_subspace_give_identity() {
        // Dirichlet kernels at integer times are orthonormal and bandlimited.
        let spec = GridSpec::new(11, 16).unwrap();
        let times: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let fam = KernelFamily::point(&times, spec).unwrap();
        let op = SamplingOperator::new(&fam, Subspace::bandlimited(1), true).unwrap();
        let g = op.gram();
        assert!((g.data - DMatrix::<f64>::identity(11, 11)).amax() < 1e-12);
    }

    #[test]
    fn papcs_step_is_the_weighted_parallel_projection() {
        let (x, fam) = instance(5, 1.2);
        let op = SamplingOperator::new(&fam, Subspace::bandlimited(1), true).unwrap();
        let rec = sample(&x, &fam).unwrap();
        let sets = ConsistentSets::from_record(&fam, &rec, Subspace::bandlimited(1)).unwrap();
        let mu = op.mu();
        assert!(mu.iter().all(|&m| m > 0.0 && m <= 1.0));
        let all: Vec<usize> = (0..fam.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_in_a(&op, &mut rng);
            let a = op.papcs_step(&u, &rec.normalized).unwrap();
            let b = sets.parallel_step(&u, &all, &mu).unwrap();
            assert!(a.sub(&b).unwrap().norm() <= 1e-10 * a.norm());
            assert!(a.sub(&x).unwrap().norm() <= u.sub(&x).unwrap().norm());
        }
        let fixed = op.papcs_step(&x, &rec.normalized).unwrap();
        assert!(fixed.sub(&x).unwrap().norm() < 1e-12);
    }
}
