//! Synthetic data with known ground truth.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`: the hazard
//! generator uses stream 0 and the causal scenario stream 1, so both are
//! reproducible bit for bit on every platform.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{build_transitions, CovariateSeries, Dataset, HealthState, InspectionRecord, N_STATES};
use crate::error::SynthError;
use crate::features::{default_active, FeatureMatrix};
use crate::grouping::Group;
use crate::hazard::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_pumps: usize,
    pub n_days: u32,
    /// 0 or 1; the hazard ignores the daily series when 0.
    pub n_covariates: usize,
    pub sigma_u: f64,
    /// One entry per state; the last belongs to the absorbing state and is
    /// never used.
    pub log_lambda0: Vec<f64>,
    pub beta: Vec<f64>,
    pub initial_state: u8,
    pub interval_min: u32,
    pub interval_median: f64,
    pub interval_max: u32,
    /// Standard deviation of the log inspection interval.
    pub interval_log_sd: f64,
    pub ar_coef: f64,
    pub ar_noise_sd: f64,
    /// Level added to the daily series.
    pub covariate_level: f64,
    pub scenario: ScenarioConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_pumps: 30,
            n_days: 650,
            n_covariates: 1,
            sigma_u: 1.0,
            log_lambda0: vec![-5.6, -5.5, -5.4, -5.5, -5.6, -5.4, -5.5, -5.5],
            beta: vec![0.5],
            initial_state: 1,
            interval_min: 7,
            interval_median: 90.0,
            interval_max: 365,
            interval_log_sd: 0.5,
            ar_coef: 0.9,
            ar_noise_sd: 0.3,
            covariate_level: 2.0,
            scenario: ScenarioConfig::default(),
            seed: 0,
        }
    }
}

/// Two groups of feature rows and targets drawn from a shared feature SEM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_per_group: usize,
    /// Probability of each lower-triangular edge among the features.
    pub edge_prob: f64,
    pub edge_min: f64,
    pub edge_max: f64,
    /// Direct effects on the target in the strong (`ū ≤ 0`) group.
    pub strong_effects: BTreeMap<String, f64>,
    /// Direct effects on the target in the null (`ū > 0`) group.
    pub null_effects: BTreeMap<String, f64>,
    /// Half-width of the uniform target noise in each group.
    pub strong_noise: f64,
    pub null_noise: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_per_group: 2000,
            edge_prob: 0.2,
            edge_min: 0.3,
            edge_max: 0.8,
            strong_effects: BTreeMap::from([("std".to_string(), 1.5)]),
            null_effects: BTreeMap::new(),
            strong_noise: 0.5,
            null_noise: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_pumps == 0 {
            return bad("n_pumps must be positive");
        }
        if self.n_covariates > 1 {
            return bad("n_covariates must be 0 or 1");
        }
        if self.beta.len() != self.n_covariates {
            return bad("beta must have n_covariates entries");
        }
        if self.log_lambda0.len() != N_STATES {
            return bad("log_lambda0 needs one entry per state");
        }
        if !(self.sigma_u >= 0.0) {
            return bad("sigma_u must be non-negative");
        }
        if self.interval_min == 0 || self.interval_min > self.interval_max {
            return bad("interval bounds must satisfy 0 < min <= max");
        }
        if self.n_days <= self.interval_max {
            return bad("study length must exceed the longest inspection interval");
        }
        if !(self.interval_median > 0.0) || !(self.interval_log_sd >= 0.0) || !(self.ar_noise_sd >= 0.0) {
            return bad("interval median, log sd and AR noise must be valid");
        }
        if !(self.ar_coef.abs() < 1.0) {
            return bad("ar_coef must lie in (-1, 1)");
        }
        if HealthState::new(self.initial_state).is_err() {
            return bad("initial_state outside 1..=8");
        }
        let names = default_active();
        let known = |k: &String| names.iter().any(|f| f.name() == k);
        let s = &self.scenario;
        if let Some(k) = s.strong_effects.keys().chain(s.null_effects.keys()).find(|k| !known(k)) {
            return Err(SynthError::InvalidConfig(format!("planted effect on unknown feature '{k}'")));
        }
        if !(0.0..=1.0).contains(&s.edge_prob) || s.edge_min > s.edge_max {
            return bad("scenario edge settings are invalid");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffects {
    pub group: Group,
    pub effects: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub pump_ids: Vec<String>,
    /// True random effect (hazard data) or target value (scenario) per pump.
    pub u: Vec<f64>,
    pub params: Option<ModelParams>,
    pub planted: Vec<PlantedEffects>,
    /// Feature-to-feature effects of the scenario SEM, `[from][to]`.
    pub feature_adjacency: Option<Vec<Vec<f64>>>,
}

impl GroundTruth {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[derive(Debug, Clone)]
pub struct HazardData {
    pub dataset: Dataset,
    pub records: Vec<InspectionRecord>,
    pub covariates: Vec<CovariateSeries>,
    pub truth: GroundTruth,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn pump_id(i: usize) -> String {
    format!("P{:03}", i + 1)
}

/// Simulates inspection histories and daily covariates from the hazard
/// model. Each interval moves a pump at most one state.
pub fn generate_hazard_data(config: &SynthConfig) -> Result<HazardData, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_days = config.n_days as usize;
    let mut records = Vec::new();
    let mut covariates = Vec::with_capacity(config.n_pumps);
    let mut u_raw = Vec::with_capacity(config.n_pumps);
    let stationary_sd = config.ar_noise_sd / (1.0 - config.ar_coef * config.ar_coef).sqrt();

    for i in 0..config.n_pumps {
        let id = pump_id(i);
        let z = normal(&mut rng);
        u_raw.push(z);
        let u = z * config.sigma_u;

        let mut level = stationary_sd * normal(&mut rng);
        let mut values = Vec::with_capacity(n_days);
        for _ in 0..n_days {
            values.push(config.covariate_level + level);
            level = config.ar_coef * level + config.ar_noise_sd * normal(&mut rng);
        }

        let mut day = 0u32;
        let mut state = config.initial_state;
        records.push(InspectionRecord { pump_id: id.clone(), day, state: HealthState::new(state)? });
        loop {
            let draw = (config.interval_median.ln() + config.interval_log_sd * normal(&mut rng)).exp().round();
            let interval = (draw as u32).clamp(config.interval_min, config.interval_max);
            let next = day + interval;
            if next >= config.n_days {
                break;
            }
            if (state as usize) < N_STATES {
                let x: f64 = if config.n_covariates == 1 {
                    values[day as usize..next as usize].iter().sum::<f64>() / interval as f64
                } else {
                    0.0
                };
                let eta = config.log_lambda0[state as usize - 1] + config.beta.first().map_or(0.0, |b| b * x) + u;
                let prob = -(-eta.exp() * interval as f64).exp_m1();
                if rng.random::<f64>() < prob {
                    state += 1;
                }
            }
            day = next;
            records.push(InspectionRecord { pump_id: id.clone(), day, state: HealthState::new(state)? });
        }
        covariates.push(CovariateSeries::new(id, 0, values)?);
    }

    let used = if config.n_covariates == 1 { covariates.as_slice() } else { &[] };
    let dataset = build_transitions(&records, used)?.dataset;
    let truth = GroundTruth {
        seed: config.seed,
        pump_ids: (0..config.n_pumps).map(pump_id).collect(),
        u: u_raw.iter().map(|z| z * config.sigma_u).collect(),
        params: Some(ModelParams {
            log_lambda0: config.log_lambda0.clone(),
            beta: config.beta.clone(),
            u_raw,
            sigma_u: config.sigma_u,
        }),
        planted: Vec::new(),
        feature_adjacency: None,
    };
    Ok(HazardData { dataset, records, covariates, truth })
}

#[derive(Debug, Clone)]
pub struct LingamScenario {
    /// Strong-group rows first, then null-group rows.
    pub features: FeatureMatrix,
    pub target: Vec<f64>,
    pub truth: GroundTruth,
}

/// Draws feature rows for two groups from one sparse lower-triangular SEM
/// with uniform noise, and a target per group from its planted effects.
///
/// Strong-group targets are shifted so their maximum is exactly 0 and
/// null-group targets so their minimum is 0.02, which makes the sign rule
/// reproduce the two groups.
pub fn generate_lingam_scenario(config: &SynthConfig) -> Result<LingamScenario, SynthError> {
    config.validate()?;
    let s = &config.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let active = default_active();
    let names: Vec<String> = active.iter().map(|f| f.name().to_string()).collect();
    let d = names.len();

    let mut adjacency = vec![vec![0.0; d]; d];
    for j in 0..d {
        for row in adjacency.iter_mut().take(j) {
            if rng.random::<f64>() < s.edge_prob {
                let w = rng.random_range(s.edge_min..=s.edge_max);
                row[j] = if rng.random::<bool>() { w } else { -w };
            }
        }
    }
    let noise_scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();

    let mut rows = Vec::with_capacity(2 * s.n_per_group);
    let mut target = Vec::with_capacity(2 * s.n_per_group);
    for (effects, noise, group) in
        [(&s.strong_effects, s.strong_noise, Group::Negative), (&s.null_effects, s.null_noise, Group::Positive)]
    {
        let planted: Vec<(usize, f64)> =
            effects.iter().map(|(k, &v)| (names.iter().position(|n| n == k).expect("validated name"), v)).collect();
        let mut u = Vec::with_capacity(s.n_per_group);
        for _ in 0..s.n_per_group {
            let mut x = vec![0.0; d];
            for j in 0..d {
                let parents: f64 = (0..j).map(|i| adjacency[i][j] * x[i]).sum();
                x[j] = parents + noise_scale[j] * rng.random_range(-1.0..1.0);
            }
            u.push(planted.iter().map(|&(j, b)| b * x[j]).sum::<f64>() + noise * rng.random_range(-1.0..1.0));
            rows.push(x);
        }
        let shift = match group {
            Group::Negative => -u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Group::Positive => 0.02 - u.iter().copied().fold(f64::INFINITY, f64::min),
        };
        target.extend(u.iter().map(|v| v + shift));
    }
    let pump_ids: Vec<String> = (0..rows.len()).map(pump_id).collect();
    let truth = GroundTruth {
        seed: config.seed,
        pump_ids: pump_ids.clone(),
        u: target.clone(),
        params: None,
        planted: vec![
            PlantedEffects { group: Group::Negative, effects: s.strong_effects.clone() },
            PlantedEffects { group: Group::Positive, effects: s.null_effects.clone() },
        ],
        feature_adjacency: Some(adjacency),
    };
    Ok(LingamScenario { features: FeatureMatrix { pump_ids, names, rows }, target, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SynthConfig::default().validate().unwrap();
        let bad = SynthConfig { n_pumps: 0, ..SynthConfig::default() };
        assert!(bad.validate().is_err());
        let mut bad = SynthConfig::default();
        bad.scenario.strong_effects.insert("nonsense".into(), 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identical_seeds_identical_data() {
        let c = SynthConfig { seed: 5, ..SynthConfig::default() };
        let a = generate_hazard_data(&c).unwrap();
        let b = generate_hazard_data(&c).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.records, b.records);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn vanishing_hazard_has_no_transitions() {
        let c = SynthConfig { log_lambda0: vec![-20.0; 8], beta: vec![0.0], sigma_u: 0.0, ..SynthConfig::default() };
        let h = generate_hazard_data(&c).unwrap();
        assert!(!h.dataset.is_empty());
        assert_eq!(h.dataset.transition_count(), 0);
    }

    #[test]
    fn inspections_respect_interval_bounds() {
        let h = generate_hazard_data(&SynthConfig::default()).unwrap();
        for pair in h.records.windows(2).filter(|p| p[0].pump_id == p[1].pump_id) {
            let gap = pair[1].day - pair[0].day;
            assert!((7..=365).contains(&gap));
            assert!(pair[1].state >= pair[0].state);
        }
        assert_eq!(h.covariates[0].values.len(), 650);
    }

    #[test]
    fn scenario_groups_follow_sign_rule() {
        let mut c = SynthConfig::default();
        c.scenario.n_per_group = 200;
        let s = generate_lingam_scenario(&c).unwrap();
        let (strong, null) = s.target.split_at(200);
        assert!(strong.iter().all(|&u| u <= 0.0));
        assert!(strong.contains(&0.0));
        assert!(null.iter().all(|&u| u > 0.0));
        assert_eq!(s.features.n_features(), 22);
        let adj = s.truth.feature_adjacency.unwrap();
        for (i, row) in adj.iter().enumerate() {
            assert!(row[..=i].iter().all(|&w| w == 0.0));
        }
    }
}
