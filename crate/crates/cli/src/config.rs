//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 0
//!
//! [data]            # omit inspections/timeseries to use synthetic data
//! inspections = "inspections.csv"
//! timeseries = "timeseries.csv"
//!
//! [synth]           # SynthConfig fields, e.g. n_pumps = 30
//! [prior]         # mu_log_lambda0 = -5, sd_log_lambda0 = 2, sd_beta = 1, sigma_u_scale = 1
//! [sampler]         # n_draws = 2000, n_tune = 1000, n_chains = 8, target_accept = 0.95
//! [features]        # window = 90, active = ["mean", "std", ...]
//! [lingam]          # n_bootstrap = 1000, ica = { tol = 1e-4, max_iter = 200 }
//! [run]             # out = "out", threads = 0, hdi_mass = 0.95, svg = false
//! ```
//!
//! The top-level `seed` replaces the seed of every stage.

use std::path::{Path, PathBuf};

use hazlingam_core::features::{default_active, parse_active, Feature, DEFAULT_WINDOW, MIN_WINDOW};
use hazlingam_core::hazard::PriorSpec;
use hazlingam_core::lingam::LingamConfig;
use hazlingam_core::synth::SynthConfig;
use hazlingam_nuts::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub inspections: Option<PathBuf>,
    pub timeseries: Option<PathBuf>,
    /// Precomputed features CSV for `group`/`discover`.
    pub features: Option<PathBuf>,
    /// Precomputed random-effect CSV for `group`/`discover`.
    pub u_estimates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub window: usize,
    /// Last day of the window; defaults to the last day every series covers.
    pub window_end: Option<u32>,
    /// Exported feature names; empty means the default 22.
    pub active: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, window_end: None, active: Vec::new() }
    }
}

impl FeatureConfig {
    pub fn active_features(&self) -> Result<Vec<Feature>, CliError> {
        if self.active.is_empty() {
            Ok(default_active())
        } else {
            parse_active(&self.active).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Worker threads for chains and bootstrap; 0 uses every core.
    pub threads: usize,
    pub hdi_mass: f64,
    /// Also render SVG figures.
    pub svg: bool,
    /// Effects listed per group in the report.
    pub top_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { out: PathBuf::from("out"), threads: 0, hdi_mass: 0.95, svg: false, top_k: 10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub features: FeatureConfig,
    pub lingam: LingamConfig,
    pub run: RunConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Copies the top-level seed into every stage.
    pub fn propagate_seed(&mut self) {
        self.synth.seed = self.seed;
        self.sampler.seed = self.seed;
        self.lingam.seed = self.seed;
    }

    pub fn uses_synthetic_data(&self) -> bool {
        self.data.inspections.is_none() && self.data.timeseries.is_none()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.data.inspections.is_some() != self.data.timeseries.is_some() {
            return bad("data.inspections and data.timeseries must be given together".into());
        }
        if self.data.features.is_some() != self.data.u_estimates.is_some() {
            return bad("data.features and data.u_estimates must be given together".into());
        }
        for p in [&self.data.inspections, &self.data.timeseries, &self.data.features, &self.data.u_estimates]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        if self.uses_synthetic_data() {
            self.synth.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !self.prior.is_valid() {
            return bad("prior scales must be positive".into());
        }
        self.sampler.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.features.window < MIN_WINDOW {
            return bad(format!("features.window must be at least {MIN_WINDOW}"));
        }
        self.features.active_features()?;
        if !(self.lingam.ica.tol > 0.0) || self.lingam.ica.max_iter == 0 {
            return bad("lingam.ica needs tol > 0 and max_iter > 0".into());
        }
        if !(self.run.hdi_mass > 0.0 && self.run.hdi_mass < 1.0) {
            return bad("run.hdi_mass must lie in (0, 1)".into());
        }
        Ok(())
    }
}
