use std::sync::Arc;

use hazlingam_core::data::{build_transitions, Dataset, HealthState, InspectionRecord};
use hazlingam_core::effects::RandomEffectEstimate;
use hazlingam_core::features::FeatureMatrix;
use hazlingam_core::grouping::{assign_groups, build_group_datasets, Group};
use hazlingam_core::hazard::{log_likelihood, HazardModel, PriorSpec};
use hazlingam_core::synth::{generate_hazard_data, generate_lingam_scenario, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn estimates(u: &[f64]) -> Vec<RandomEffectEstimate> {
    u.iter()
        .enumerate()
        .map(|(i, &u)| RandomEffectEstimate { pump_id: format!("P{i}"), u_mean: u, hdi_low: u, hdi_high: u })
        .collect()
}

proptest! {
    #[test]
    fn groups_partition_pumps(u in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 1..60)) {
        let est = estimates(&u);
        let m = FeatureMatrix {
            pump_ids: est.iter().map(|e| e.pump_id.clone()).collect(),
            names: vec!["f".into()],
            rows: vec![vec![1.0]; u.len()],
        };
        let (pos, neg) = build_group_datasets(&m, &assign_groups(&est)).unwrap();
        prop_assert_eq!(pos.len() + neg.len(), u.len());
        prop_assert!(pos.target.iter().all(|&v| v > 0.0));
        prop_assert!(neg.target.iter().all(|&v| v <= 0.0));
        let mut ids: Vec<_> = pos.pump_ids.iter().chain(&neg.pump_ids).cloned().collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), u.len());
    }

    #[test]
    fn raising_u_never_demotes(u in prop::collection::vec(-2.0f64..2.0, 1..40), delta in 1e-9f64..3.0) {
        let before = assign_groups(&estimates(&u));
        let raised: Vec<f64> = u.iter().map(|v| v + delta).collect();
        let after = assign_groups(&estimates(&raised));
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(!(b.group == Group::Positive && a.group == Group::Negative));
        }
    }
}

#[test]
fn homogeneous_hazard_matches_binomial_rate() {
    let cfg = SynthConfig {
        n_pumps: 400,
        sigma_u: 0.0,
        beta: vec![0.0],
        log_lambda0: vec![-6.0; 8],
        interval_log_sd: 0.0,
        seed: 3,
        ..SynthConfig::default()
    };
    let h = generate_hazard_data(&cfg).unwrap();
    let p = 1.0 - (-(-6.0f64).exp() * 90.0).exp();
    let first: Vec<_> = h.dataset.observations.iter().filter(|o| o.state_index == 1).collect();
    let n = first.len() as f64;
    let rate = first.iter().filter(|o| o.y).count() as f64 / n;
    assert!(first.iter().all(|o| o.delta_t == 90.0));
    assert!((rate - p).abs() < 3.0 * (p * (1.0 - p) / n).sqrt(), "rate {rate} vs {p}");
}

#[test]
fn planted_effect_visible_to_simple_regression() {
    let s = generate_lingam_scenario(&SynthConfig { seed: 4, ..SynthConfig::default() }).unwrap();
    let j = s.features.column_index("std").unwrap();
    let n = s.truth.u.len() / 2;
    let x: Vec<f64> = s.features.rows[..n].iter().map(|r| r[j]).collect();
    let y = &s.target[..n];
    let (mx, my) = (x.iter().sum::<f64>() / n as f64, y.iter().sum::<f64>() / n as f64);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    assert!((sxy / sxx - 1.5).abs() < 0.1);
}

#[test]
fn null_scenario_target_is_unrelated() {
    let mut cfg = SynthConfig { seed: 5, ..SynthConfig::default() };
    cfg.scenario.strong_effects.clear();
    let s = generate_lingam_scenario(&cfg).unwrap();
    let n = s.target.len() / 2;
    for j in 0..s.features.n_features() {
        let x: Vec<f64> = s.features.rows[..n].iter().map(|r| r[j]).collect();
        let y = &s.target[..n];
        let (mx, my) = (x.iter().sum::<f64>() / n as f64, y.iter().sum::<f64>() / n as f64);
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n as f64;
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((cov / (sx * sy)).abs() < 0.1);
    }
}

#[test]
fn planted_contrast_is_at_least_100() {
    let cfg = SynthConfig::default();
    let strong = cfg.scenario.strong_effects.values().fold(0.0f64, |m, v| m.max(v.abs()));
    let null = cfg.scenario.null_effects.values().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(null == 0.0 || strong / null >= 100.0);
}

#[test]
fn truth_beats_random_perturbations() {
    let mut wins = 0;
    for trial in 0..100u64 {
        let h = generate_hazard_data(&SynthConfig { seed: 10_000 + trial, ..SynthConfig::default() }).unwrap();
        let truth = h.truth.params.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut step = || if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut p = truth.clone();
        p.log_lambda0.iter_mut().for_each(|v| *v += step());
        p.beta.iter_mut().for_each(|v| *v += step());
        p.u_raw.iter_mut().for_each(|v| *v += step());
        p.sigma_u = (p.sigma_u.ln() + step()).exp();
        if log_likelihood(&truth, &h.dataset) > log_likelihood(&p, &h.dataset) {
            wins += 1;
        }
    }
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn generated_data_round_trips_through_csv() {
    let h = generate_hazard_data(&SynthConfig { seed: 6, ..SynthConfig::default() }).unwrap();
    let mut buf = Vec::new();
    h.dataset.write_transitions_csv(&mut buf).unwrap();
    assert_eq!(Dataset::read_transitions_csv(buf.as_slice(), h.dataset.n_pumps).unwrap(), h.dataset);
    let model = HazardModel::new(Arc::new(h.dataset.clone()), PriorSpec::default());
    assert_eq!(model.layout().dim(), 8 + 1 + 30 + 1);
}

proptest! {
    #[test]
    fn observation_counts_are_conserved(states in prop::collection::vec(prop::collection::vec(1u8..=8, 1..12), 1..8)) {
        let mut records = Vec::new();
        let mut intervals = 0;
        for (i, seq) in states.iter().enumerate() {
            intervals += seq.len() - 1;
            for (k, &s) in seq.iter().enumerate() {
                records.push(InspectionRecord { pump_id: format!("P{i}"), day: 30 * k as u32, state: HealthState::new(s).unwrap() });
            }
        }
        let built = build_transitions(&records, &[]).unwrap();
        prop_assert_eq!(built.dataset.len() + built.dropped.total(), intervals);
        let decreases: usize = states.iter().map(|s| s.windows(2).filter(|w| w[0] < 8 && w[1] < w[0]).count()).sum();
        prop_assert_eq!(built.dropped.state_decreases, decreases);
        let mut buf = Vec::new();
        built.dataset.write_transitions_csv(&mut buf).unwrap();
        prop_assert_eq!(Dataset::read_transitions_csv(buf.as_slice(), built.dataset.n_pumps).unwrap(), built.dataset);
    }
}
