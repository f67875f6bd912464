use proptest::prelude::*;

use recon::samplers::Kernel;
use recon::signal::GridSpec;
use recon::sinc_table::{gram_entry_f, LookupTable};

/// `∫_a^b ∫_c^d sinc(t − τ) dτ dt`, evaluated once to 20 digits with mpmath
/// and frozen here.
const BOXES: [((f64, f64, f64, f64), f64); 5] = [
    ((0.0, 1.0, 0.0, 1.0), 0.773_695_009_902_816_2),
    ((0.0, 1.0, 2.0, 3.5), 0.004_748_847_246_385_327_7),
    ((0.3, 0.8, 10.0, 12.0), -0.000_192_609_974_292_243_04),
    ((5.0, 5.25, 5.1, 7.9), 0.137_144_425_586_071_81),
    ((0.0, 2.0, 30.0, 31.0), 6.406_015_110_190_406e-6),
];

fn table() -> LookupTable {
    LookupTable::for_period(41).unwrap()
}

fn entry(t: &LookupTable, (a, b, c, d): (f64, f64, f64, f64)) -> f64 {
    gram_entry_f(b, a, d, c, t).unwrap()
}

#[test]
fn matches_frozen_box_integrals() {
    let t = table();
    for (iv, want) in BOXES {
        let got = entry(&t, iv);
        assert!((got - want).abs() <= 1e-9, "{iv:?}: {got} vs {want}");
    }
}

#[test]
fn identical_unit_intervals() {
    // ⟨P_𝓑 1_[0,1], 1_[0,1]⟩ = 2 f(1) = 2(Si(π)/π − 2/π²).
    let t = table();
    assert!((entry(&t, (0.0, 1.0, 0.0, 1.0)) - 2.0 * t.eval(1.0).unwrap()).abs() < 1e-15);
    assert!((entry(&t, (0.0, 1.0, 0.0, 1.0)) - BOXES[0].1).abs() <= 1e-6);
}

#[test]
fn far_intervals_decay() {
    let t = table();
    let mut a = 0.0;
    while a < 20.0 {
        for len in [0.25, 1.0, 3.0] {
            let v = entry(&t, (a, a + len, a + len + 20.0, a + 2.0 * len + 20.0));
            assert!(v.abs() <= 0.05, "gap 20 at {a}: {v}");
        }
        a += 0.37;
    }
}

#[test]
fn close_to_the_periodic_model_for_short_nearby_intervals() {
    let spec = GridSpec::new(41, 16).unwrap();
    let t = table();
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let a = 10.0 + 0.13 * i as f64;
        let c = a + 0.5 + 0.09 * i as f64;
        let (b, d) = (a + 0.6, c + 0.9);
        let (p, q) = (Kernel::interval(a, b, 0.0).band_coords(spec), Kernel::interval(c, d, 0.0).band_coords(spec));
        let periodic: f64 = p.iter().zip(&q).map(|(u, v)| u * v).sum();
        worst = worst.max((entry(&t, (a, b, c, d)) - periodic).abs());
    }
    assert!(worst <= 1e-3, "{worst}");
}

proptest! {
    #[test]
    fn symmetric_under_swapping_intervals(
        a in 0.0..30.0f64, la in 0.05..5.0f64, c in 0.0..30.0f64, lc in 0.05..5.0f64,
    ) {
        let t = table();
        let x = entry(&t, (a, a + la, c, c + lc));
        let y = entry(&t, (c, c + lc, a, a + la));
        prop_assert!((x - y).abs() <= 1e-12);
    }

    #[test]
    fn bounded_by_the_product_of_lengths(
        a in 0.0..30.0f64, la in 0.05..5.0f64, c in 0.0..30.0f64, lc in 0.05..5.0f64,
    ) {
        // |⟨P_𝓑 h, h'⟩| ≤ ‖h‖‖h'‖ = √(la·lc).
        let t = table();
        let x = entry(&t, (a, a + la, c, c + lc));
        prop_assert!(x.abs() <= (la * lc).sqrt() + 1e-9);
    }
}
