use bridgesens::calibration::{benchmark_envelope, residual_envelope};
use bridgesens::data::fractional_ranks;
use bridgesens::envelope::xi_pointwise;
use bridgesens::gcomp::{delta_bar_draw, DeltaPrior};
use bridgesens::linear_bayes::{nig_update, PriorSpec};
use bridgesens::seed::substream;
use bridgesens::summation::compensated_sum;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #[test]
    fn xi_is_monotone_and_bounded(eta in 0.0..100.0f64, g1 in 1.0..1e6f64, g2 in 1.0..1e6f64, scale in 1.0..10.0f64) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let a = xi_pointwise(eta, lo).unwrap();
        let b = xi_pointwise(eta, hi).unwrap();
        prop_assert!(0.0 <= a && a <= b && b <= eta);
        prop_assert!(xi_pointwise(eta * scale, lo).unwrap() >= a);
        prop_assert_eq!(xi_pointwise(eta, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn calibrated_envelopes_are_monotone(
        eta in 0.0..10.0f64, gamma in 1.0..20.0f64, l in 1.0..5.0f64, k in 1.0..5.0f64,
        sigma in 0.0..5.0f64, share in 0.0..1.0f64, g in 1.0..50.0f64,
    ) {
        let base = benchmark_envelope(eta, gamma, l, k).unwrap();
        prop_assert!(benchmark_envelope(eta, gamma, l * 1.5, k).unwrap() >= base);
        prop_assert!(benchmark_envelope(eta, gamma, l, k * 1.5).unwrap() >= base);
        let r = residual_envelope(sigma, share, g).unwrap();
        prop_assert!(residual_envelope(sigma, (share * 1.1).min(1.0), g).unwrap() >= r);
        prop_assert!(residual_envelope(sigma, share, g * 2.0).unwrap() >= r);
    }

    #[test]
    fn ranks_are_invariant_to_increasing_maps(values in prop::collection::vec(-50.0..50.0f64, 1..60)) {
        let r = fractional_ranks(&values);
        let mapped: Vec<f64> = values.iter().map(|v| v.exp()).collect();
        prop_assert_eq!(&r, &fractional_ranks(&mapped));
        let shifted: Vec<f64> = values.iter().map(|v| 3.0 * v + 1.0).collect();
        prop_assert_eq!(&r, &fractional_ranks(&shifted));
        prop_assert!(r.iter().all(|&x| x > 0.0 && x <= 1.0));
        prop_assert!(r.contains(&1.0));
    }

    #[test]
    fn compensated_sum_ignores_order(mut values in prop::collection::vec(-1e6..1e6f64, 0..200), seed in any::<u64>()) {
        let forward = compensated_sum(values.iter().copied());
        let mut rng = substream(seed, &[]);
        use rand::seq::SliceRandom;
        values.shuffle(&mut rng);
        let shuffled = compensated_sum(values.iter().copied());
        let mag: f64 = values.iter().map(|v| v.abs()).sum();
        prop_assert!((forward - shuffled).abs() <= 1e-15 * mag.max(1.0));
    }

    #[test]
    fn empty_update_is_identity(q in 1usize..6) {
        let prior = PriorSpec::default().build(q).unwrap();
        let post = nig_update(&prior, &DMatrix::zeros(0, q), &DVector::zeros(0)).unwrap();
        prop_assert_eq!(post, prior);
    }

    #[test]
    fn correction_draws_stay_in_the_envelope(xi in 0.0..10.0f64, a in 0.1..5.0f64, b in 0.1..5.0f64, seed in any::<u64>()) {
        let mut rng = substream(seed, &[1]);
        for prior in [DeltaPrior::Uniform, DeltaPrior::Beta { shape1: a, shape2: b }, DeltaPrior::EndpointLower, DeltaPrior::EndpointUpper] {
            let d = delta_bar_draw(xi, &prior, &mut rng).unwrap();
            prop_assert!(d.abs() <= xi);
        }
    }
}
