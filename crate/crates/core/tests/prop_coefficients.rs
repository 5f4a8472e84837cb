//! Möbius inversion, consistency inequalities and calibration.

mod common;

use proptest::prelude::*;
use xvar::calibration::project_to_consistent;
use xvar::subset::all_subsets;
use xvar::{check_consistency, mobius_invert, ExtremalCoefficients, MobiusWeights, SubsetFamily, SubsetId};

/// Mask-indexed weights for dimension `d` with a zero first entry.
fn weights(d: usize, raw: &[f64]) -> Vec<f64> {
    let mut beta = raw[..1usize << d].to_vec();
    beta[0] = 0.0;
    beta
}

/// `Σ_{L ⊇ J} (-1)^{|L∖J|+1} max_{j∈L} x_j` over non-empty `L`.
fn alternating_max(x: &[f64], j: u32) -> f64 {
    let d = x.len();
    let full = (1u32 << d) - 1;
    (1..=full)
        .filter(|l| l & j == j)
        .map(|l| {
            let sign = if (l & !j).count_ones() % 2 == 0 { -1.0 } else { 1.0 };
            let m = (0..d).filter(|k| l & (1 << k) != 0).map(|k| x[k]).fold(0.0, f64::max);
            sign * m
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mobius_round_trip(d in 1usize..=6, raw in prop::collection::vec(0.0f64..2.0, 64)) {
        let beta = weights(d, &raw);
        let theta = MobiusWeights::from_dense(d, beta.clone()).unwrap().coefficients();
        let back = mobius_invert(&theta).unwrap();
        for (a, b) in back.as_dense().iter().zip(&beta) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn consistency_matches_weight_signs(
        d in 1usize..=5,
        mags in prop::collection::vec(0.05f64..2.0, 32),
        signs in prop::collection::vec(prop::bool::weighted(0.15), 32),
    ) {
        let raw: Vec<f64> = mags.iter().zip(&signs).map(|(m, neg)| if *neg { -m } else { *m }).collect();
        let beta = weights(d, &raw);
        let negative = beta.iter().filter(|b| **b < 0.0).count();
        let theta = MobiusWeights::from_dense(d, beta).unwrap().coefficients();
        let violations = check_consistency(&theta);
        prop_assert_eq!(violations.len(), negative);
        prop_assert_eq!(mobius_invert(&theta).is_ok(), negative == 0);
    }

    #[test]
    fn alternating_max_is_nonnegative(x in prop::collection::vec(0.0f64..10.0, 1..=6), pick in any::<u32>()) {
        let d = x.len();
        let full = (1u32 << d) - 1;
        // proper subsets only, including the empty set
        let j = pick % full;
        prop_assert!(alternating_max(&x, j) >= -1e-12);
    }

    #[test]
    fn calibration_output_is_valid_and_idempotent(
        d in 2usize..=5,
        noise in prop::collection::vec(-0.3f64..0.3, 32),
        raw in prop::collection::vec(0.0f64..1.0, 32),
    ) {
        let beta = weights(d, &raw);
        let truth = MobiusWeights::from_dense(d, beta).unwrap().coefficients();
        let sets = all_subsets(d).unwrap();
        let noisy = SubsetFamily::raw(
            d,
            sets.iter().enumerate().map(|(i, s)| {
                let c = truth.get(*s).unwrap();
                // singletons stay observed exactly
                (*s, if s.is_singleton() { c } else { (c + noise[i % noise.len()]).max(0.5) })
            }),
        ).unwrap();
        let first = project_to_consistent(&noisy, 0.0).unwrap();
        prop_assert!(first.weights.min_weight() >= 0.0);
        prop_assert!(check_consistency(&ExtremalCoefficients::from(&first.family)).is_empty());
        let second = project_to_consistent(&first.family, 0.0).unwrap();
        for (a, b) in first.family.entries().iter().zip(second.family.entries()) {
            prop_assert!((a.c - b.c).abs() < 1e-8, "{} moved from {} to {}", a.set, a.c, b.c);
        }
    }

    #[test]
    fn calibration_residual_grows_with_ridge(
        noise in prop::collection::vec(-0.4f64..0.4, 6),
        l1 in 1e-8f64..1e-2,
        factor in 1.0f64..100.0,
    ) {
        let d = 4;
        let pairs: Vec<(SubsetId, f64)> = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
            .enumerate()
            .map(|(k, (i, j))| (SubsetId::from_indices(&[i + 1, j + 1], d).unwrap(), 1.5 + noise[k]))
            .collect();
        let family = SubsetFamily::raw(
            d,
            (0..d).map(|j| (SubsetId::singleton(j, d).unwrap(), 1.0)).chain(pairs),
        ).unwrap();
        let small = project_to_consistent(&family, l1).unwrap().fit_residual;
        let large = project_to_consistent(&family, l1 * factor).unwrap().fit_residual;
        prop_assert!(small <= large + 1e-9, "residual {small} at {l1} above {large} at {}", l1 * factor);
    }
}

#[test]
fn industry_pairs_need_little_calibration() {
    let raw = common::bivariate_family();
    let cal = project_to_consistent(&raw, xvar::calibration::DEFAULT_LAMBDA).unwrap();
    let worst = raw
        .entries()
        .iter()
        .map(|e| (cal.family.get(e.set).unwrap() - e.c).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.01, "largest calibration change {worst}");
}
