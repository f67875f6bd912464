use proptest::prelude::*;

use recon::harness::calibrate_threshold;
use recon::multichannel::MixingMatrix;
use recon::ortho::{run_discrete, DiscreteMode, ErrorMeter, PowerOfTwo, SamplingOperator};
use recon::samplers::{encode_if, sample, KernelFamily};
use recon::serial::{ConsistentSets, ControlSequence, Logging, RelaxationKind, RelaxationSchedule};
use recon::signal::{random_bandlimited, GridSpec, MultiSignal, SpectrumProfile, Subspace};

fn if_family(period: usize, osr: f64, seed: u64) -> (MultiSignal, KernelFamily) {
    let spec = GridSpec::new(period, 16).unwrap();
    let x = random_bandlimited(spec, &SpectrumProfile::flat(), seed).unwrap();
    let k = (osr * spec.period_f64()).round() as usize;
    let bias = 2.0 * x.max_abs();
    let train = encode_if(&x, bias, calibrate_threshold(&x, bias, k).unwrap()).unwrap();
    (x.into(), KernelFamily::integrate_fire(train.times(), 0.0, spec).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projections_are_idempotent_and_consistent(seed in 0u64..1000, osr in 0.6..1.6f64, k in 0usize..6) {
        let (x, family) = if_family(15, osr, seed);
        let sets = ConsistentSets::from_record(&family, &sample(&x, &family).unwrap(), Subspace::bandlimited(1)).unwrap();
        let k = k % sets.len();
        let u: MultiSignal = random_bandlimited(x.spec(), &SpectrumProfile::flat(), seed + 1).unwrap().into();
        let p = sets.project_k(&u, k).unwrap();
        let pp = sets.project_k(&p, k).unwrap();
        prop_assert!(pp.sub(&p).unwrap().norm() <= 1e-12 * p.norm().max(1.0));
        // Lands on the hyperplane, and the truth is no farther than before.
        let coords = sets.basis().coords(&p).unwrap();
        prop_assert!(sets.residual(&coords, k).abs() <= 1e-10);
        prop_assert!(p.sub(&x).unwrap().norm() <= u.sub(&x).unwrap().norm() + 1e-12);
    }

    #[test]
    fn guarded_serial_runs_never_increase_the_error(seed in 0u64..1000, lambda in 0.05..1.95f64, shuffle in any::<bool>()) {
        let (x, family) = if_family(15, 1.2, seed);
        let sets = ConsistentSets::from_record(&family, &sample(&x, &family).unwrap(), Subspace::bandlimited(1)).unwrap();
        let control = if shuffle { ControlSequence::ShuffledBlocks { seed } } else { ControlSequence::Cyclic };
        let schedule = RelaxationSchedule::guarded(RelaxationKind::Constant(lambda), 1e-3).unwrap();
        let u0 = MultiSignal::zeros(x.spec(), 1);
        let trace = sets.run_serial(&u0, &control, &schedule, 10 * sets.len(), Some(&x), Logging::PerStep).unwrap();
        prop_assert_eq!(trace.monotonicity_violations(1e-12), 0);
    }

    #[test]
    fn adjoint_identity_and_bessel_bound(seed in 0u64..1000, osr in 0.6..2.0f64) {
        let (_, family) = if_family(15, osr, seed);
        let op = SamplingOperator::new(&family, Subspace::bandlimited(1), true).unwrap();
        let u: MultiSignal = random_bandlimited(op.spec(), &SpectrumProfile::flat(), seed + 7).unwrap().into();
        let c: Vec<f64> = (0..op.len()).map(|i| ((i as f64 + 1.0) * 0.37 + seed as f64).sin()).collect();
        let lhs: f64 = op.apply_s(&u).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs = u.inner(&op.apply_s_star(&c).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-3));
        let gram = op.gram();
        prop_assert!(gram.asymmetry() <= 1e-12);
        prop_assert!(gram.max_eigenvalue() <= 1.0 + 1e-9);
    }

    #[test]
    fn gram_normalization_is_diagonal_scaling(seed in 0u64..1000) {
        let (_, family) = if_family(11, 1.3, seed);
        let op = SamplingOperator::new(&family, Subspace::bandlimited(1), false).unwrap();
        let raw = op.gram();
        let hat = raw.to_normalized();
        let n = family.norms();
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                prop_assert!((hat.data[(i, j)] - raw.data[(i, j)] / (n[i] * n[j])).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn tight_frames_give_orthogonal_projectors(m in 2usize..7, n in 1usize..7) {
        prop_assume!(n <= m);
        let mix = MixingMatrix::tight_frame(m, n).unwrap();
        let p = mix.projector();
        prop_assert!((p * p - p).amax() <= 1e-12);
        prop_assert!((p - p.transpose()).amax() <= 1e-12);
        let id = mix.a_pinv() * mix.a();
        prop_assert!((id - nalgebra::DMatrix::identity(n, n)).amax() <= 1e-12);
        // Tight: AᵀA is a multiple of the identity.
        let ata = mix.a().transpose() * mix.a();
        prop_assert!((&ata - nalgebra::DMatrix::identity(n, n) * ata[(0, 0)]).amax() <= 1e-12);
    }

    #[test]
    fn power_of_two_quotients(num in -1e6..1e6f64, den in 1e-6..1e6f64) {
        prop_assume!(num != 0.0);
        let q = PowerOfTwo::ratio(num, den).unwrap();
        let v = q.value();
        prop_assert_eq!(v.abs().log2().fract(), 0.0);
        prop_assert!(v.signum() == num.signum());
        // Within a factor of two either way of the true quotient.
        let r = v / (num / den);
        prop_assert!(r > 0.25 && r < 4.0);
    }

    #[test]
    fn relaxed_discrete_runs_are_monotone(seed in 0u64..1000, lambda in 0.2..1.8f64) {
        let (x, family) = if_family(15, 1.3, seed);
        let op = SamplingOperator::new(&family, Subspace::bandlimited(1), false).unwrap();
        let s = sample(&x, &family).unwrap();
        let u0 = MultiSignal::zeros(x.spec(), 1);
        let meter = ErrorMeter::new(&op, &u0, &x).unwrap();
        let mode = DiscreteMode::Relaxed(RelaxationSchedule::constant(lambda).unwrap());
        let run = run_discrete(&op, &s.normalized, &u0, 100, &mode, Some(&meter), &Default::default()).unwrap();
        prop_assert_eq!(run.trace.monotonicity_violations(1e-12), 0);
    }
}
