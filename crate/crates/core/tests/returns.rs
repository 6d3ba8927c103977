mod common;

use common::brute_force_returns;
use pendulum_core::seeded_rng;
use pendulum_core::training::{discounted_returns, normalize_returns};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn matches_brute_force_sum() {
    let mut rng = seeded_rng(31);
    for i in 0..300 {
        let gamma = [0.5, 0.9, 0.99][i % 3];
        let len = rng.random_range(1..=500);
        let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = discounted_returns(&rewards, gamma).unwrap();
        let slow = brute_force_returns(&rewards, gamma);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }
}

proptest! {
    #[test]
    fn normalized_has_zero_mean_unit_std(v in prop::collection::vec(-1.0e3..1.0e3f64, 2..200)) {
        let n = normalize_returns(&v).unwrap();
        let len = n.len() as f64;
        let mean_in = v.iter().sum::<f64>() / len;
        let std_in = (v.iter().map(|x| (x - mean_in).powi(2)).sum::<f64>() / len).sqrt();
        prop_assume!(std_in > 1e-6);
        let mean = n.iter().sum::<f64>() / len;
        let std = (n.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len).sqrt();
        prop_assert!(mean.abs() < 1e-12);
        prop_assert!((std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_invariant(v in prop::collection::vec(-10.0..10.0f64, 2..100), c in -100.0..100.0f64) {
        let a = normalize_returns(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = normalize_returns(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
