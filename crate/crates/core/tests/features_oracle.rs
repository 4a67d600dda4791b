use hazlingam_core::features::{compute_features, Feature, EPS};

#[path = "support/features_reference.rs"]
mod features_reference;
use features_reference::reference;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn random_window(rng: &mut ChaCha8Rng, t: usize) -> Vec<f64> {
    let mut level: f64 = rng.random_range(1.0..20.0);
    (0..t)
        .map(|_| {
            level = (level + rng.random_range(-1.0..1.0)).abs() + 0.01;
            level
        })
        .collect()
}

#[test]
fn matches_reference_on_random_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..50 {
        let w = random_window(&mut rng, 90);
        let got = compute_features(&w).unwrap();
        let want = reference(&w);
        for f in Feature::ALL {
            let (a, b) = (got.get(f), want[f as usize]);
            assert!(close(a, b, 1e-12), "{f}: {a} vs {b}");
        }
    }
}

#[test]
fn exact_values_on_simple_series() {
    let constant = compute_features(&[4.0; 90]).unwrap();
    assert_eq!(constant.get(Feature::Std), 0.0);
    assert_eq!(constant.get(Feature::Skewness), 0.0);
    assert_eq!(constant.get(Feature::Kurtosis), 0.0);
    assert_eq!(constant.get(Feature::RollingStd30dMean), 0.0);
    let linear: Vec<f64> = (1..=90).map(|t| 2.0 * t as f64).collect();
    let f = compute_features(&linear).unwrap();
    assert_eq!(f.get(Feature::TrendSlope90d), 2.0);
    assert_eq!(f.get(Feature::RecentChangeRate), 2.0);
    assert_eq!(f.get(Feature::DiffMean), 2.0);
    assert_eq!(f.get(Feature::MaxDrawdown), 0.0);
    let falling: Vec<f64> = (1..=90).rev().map(f64::from).collect();
    let f = compute_features(&falling).unwrap();
    assert!(close(f.get(Feature::MaxDrawdown), 89.0 / (90.0 + EPS), 1e-15));
    for f in Feature::ALL {
        let r = reference(&falling)[f as usize];
        assert!(close(compute_features(&falling).unwrap().get(f), r, 1e-12), "{f}");
    }
}

#[test]
fn symmetric_series_has_no_skew() {
    let w: Vec<f64> = (0..90).map(|i| ((i % 10) as f64 - 4.5).powi(3)).collect();
    assert!(compute_features(&w).unwrap().get(Feature::Skewness).abs() < 1e-12);
}

const SHIFT_INVARIANT: [Feature; 11] = [
    Feature::Std,
    Feature::Iqr,
    Feature::Skewness,
    Feature::Kurtosis,
    Feature::TrendSlope90d,
    Feature::RecentChangeRate,
    Feature::DiffMean,
    Feature::DiffAbsMean,
    Feature::RollingStd7dMean,
    Feature::RollingStd14dMean,
    Feature::RollingStd30dMean,
];

const SHIFT_EQUIVARIANT: [Feature; 8] = [
    Feature::Mean,
    Feature::Min,
    Feature::Max,
    Feature::Q25,
    Feature::Q50,
    Feature::Q75,
    Feature::TrendIntercept,
    Feature::RecentVsPastDiff,
];

const SCALED: [Feature; 10] = [
    Feature::Std,
    Feature::Iqr,
    Feature::TrendSlope90d,
    Feature::RecentChangeRate,
    Feature::DiffMean,
    Feature::DiffAbsMean,
    Feature::RollingStd7dMean,
    Feature::RollingStd14dMean,
    Feature::RollingStd30dMean,
    Feature::RecentVsPastDiff,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shift_equivariance(seed in any::<u64>(), c in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_window(&mut rng, 90);
        let moved: Vec<f64> = w.iter().map(|v| v + c).collect();
        let (a, b) = (compute_features(&w).unwrap(), compute_features(&moved).unwrap());
        for f in SHIFT_INVARIANT {
            prop_assert!(close(b.get(f), a.get(f), 1e-8), "{} changed under shift", f);
        }
        for f in SHIFT_EQUIVARIANT {
            prop_assert!(close(b.get(f), a.get(f) + if f == Feature::RecentVsPastDiff { 0.0 } else { c }, 1e-9), "{}", f);
        }
        // cv follows its own formula
        prop_assert!(close(b.get(Feature::Cv), b.get(Feature::Std) / (b.get(Feature::Mean).abs() + EPS), 1e-12));
    }

    #[test]
    fn scale_equivariance(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_window(&mut rng, 90);
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        let (a, b) = (compute_features(&w).unwrap(), compute_features(&scaled).unwrap());
        for f in SCALED {
            prop_assert!(close(b.get(f), c * a.get(f), 1e-9), "{} not scaled", f);
        }
        for f in [Feature::Skewness, Feature::Kurtosis, Feature::RecentVsPastRatio, Feature::Cv] {
            prop_assert!(close(b.get(f), a.get(f), 1e-6), "{} not invariant", f);
        }
    }

    #[test]
    fn quantiles_are_ordered(values in prop::collection::vec(-1e6f64..1e6, 31..200)) {
        let f = compute_features(&values).unwrap();
        prop_assert!(f.get(Feature::Min) <= f.get(Feature::Q25));
        prop_assert!(f.get(Feature::Q25) <= f.get(Feature::Q50));
        prop_assert!(f.get(Feature::Q50) <= f.get(Feature::Q75));
        prop_assert!(f.get(Feature::Q75) <= f.get(Feature::Max));
        prop_assert!(f.get(Feature::Std) >= 0.0 && f.get(Feature::Iqr) >= 0.0);
        for w in [Feature::RollingStd7dMean, Feature::RollingStd14dMean, Feature::RollingStd30dMean] {
            prop_assert!(f.get(w) >= 0.0);
        }
    }

    #[test]
    fn drawdown_bounded_for_positive_series(values in prop::collection::vec(1e-3f64..1e3, 31..120)) {
        let f = compute_features(&values).unwrap();
        prop_assert!((0.0..=1.0).contains(&f.get(Feature::MaxDrawdown)));
        prop_assert!(f.get(Feature::MeanDrawdown) <= f.get(Feature::MaxDrawdown));
    }
}
