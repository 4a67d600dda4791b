//! The pipeline stages. Each stage reads its inputs from files, replaces
//! its own output directory and writes every artifact it produces there.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use hazlingam_core::data::{
    build_transitions, ingest_inspections, ingest_timeseries, write_inspections_csv, write_timeseries_csv,
};
use hazlingam_core::effects::{extract_random_effects, read_effects_csv, write_effects_csv, RandomEffectEstimate};
use hazlingam_core::features::{extract_features, FeatureMatrix};
use hazlingam_core::grouping::{assign_groups, build_group_datasets, write_groups_csv, GroupAssignment, GroupSummary};
use hazlingam_core::lingam::discover;
use hazlingam_core::synth::{generate_hazard_data, generate_lingam_scenario};
use hazlingam_core::{HazardModel, SynthError};
use hazlingam_nuts::export::{write_draws_csv, DiagnosticsReport};
use hazlingam_nuts::sample;
use serde::{Deserialize, Serialize};

use crate::cache;
use crate::config::PipelineConfig;
use crate::error::{CliError, StageContext};
use crate::figures;
use crate::report::{build_report, RunReport};

pub const SYNTH_DIR: &str = "synth";
pub const SCENARIO_DIR: &str = "scenario";
pub const FIT_DIR: &str = "fit";
pub const FEATURES_DIR: &str = "features";
pub const GROUP_DIR: &str = "group";
pub const DISCOVER_DIR: &str = "discover";
pub const STATUS_FILE: &str = "status.json";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";

/// Counts from building the transition dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_pumps: usize,
    pub n_observations: usize,
    pub n_transitions: usize,
    pub dropped_state_decreases: usize,
    pub dropped_absorbing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: usize,
    pub window_end: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStatus {
    pub summary: GroupSummary,
    pub ran: bool,
    pub reason: Option<String>,
}

/// Written by `discover` next to the per-group results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverStatus {
    pub n_pumps: usize,
    pub n_features: usize,
    /// The random effects came from this run's hazard fit.
    pub from_fit: bool,
    pub groups: Vec<GroupStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub cached: bool,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub diagnostics: DiagnosticsReport,
    pub estimates: Vec<RandomEffectEstimate>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: RunReport,
    pub timings: Vec<StageTiming>,
}

fn write_file<E: Into<crate::error::BoxError>>(
    stage: &'static str,
    path: &Path,
    f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).stage(stage)?;
    fs::write(path, buf)
        .map_err(|e| CliError::Stage { stage, source: format!("cannot write {}: {e}", path.display()).into() })
}

fn write_json<T: Serialize>(stage: &'static str, path: &Path, value: &T) -> Result<(), CliError> {
    write_file(stage, path, |buf| serde_json::to_writer_pretty(buf, value))
}

fn open(stage: &'static str, path: &Path) -> Result<BufReader<File>, CliError> {
    if !path.is_file() {
        return Err(CliError::Input { stage, message: format!("missing input file {}", path.display()) });
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input { stage, message: format!("cannot open {}: {e}", path.display()) })
}

fn require(stage: &'static str, path: &Path) -> Result<(), CliError> {
    open(stage, path).map(drop)
}

fn labelled<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{}: {e}", path.display())
}

pub struct Pipeline {
    pub config: PipelineConfig,
    /// Use the causal scenario instead of the hazard data.
    pub scenario: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, scenario: bool) -> Self {
        Self { config, scenario }
    }

    pub fn out(&self) -> &Path {
        &self.config.run.out
    }

    pub fn stage_dir(&self, name: &str) -> PathBuf {
        self.out().join(name)
    }

    fn fresh_dir(&self, stage: &'static str, name: &str) -> Result<PathBuf, CliError> {
        let dir = self.stage_dir(name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::Stage {
                stage,
                source: format!("cannot clear {}: {e}", dir.display()).into(),
            })?;
        }
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Stage { stage, source: format!("cannot create {}: {e}", dir.display()).into() })?;
        Ok(dir)
    }

    pub fn inspections_path(&self) -> PathBuf {
        self.config.data.inspections.clone().unwrap_or_else(|| self.stage_dir(SYNTH_DIR).join("inspections.csv"))
    }

    pub fn timeseries_path(&self) -> PathBuf {
        self.config.data.timeseries.clone().unwrap_or_else(|| self.stage_dir(SYNTH_DIR).join("timeseries.csv"))
    }

    pub fn features_path(&self) -> PathBuf {
        if self.scenario {
            return self.stage_dir(SCENARIO_DIR).join("features.csv");
        }
        self.config.data.features.clone().unwrap_or_else(|| self.stage_dir(FEATURES_DIR).join("features.csv"))
    }

    pub fn u_estimates_path(&self) -> PathBuf {
        if self.scenario {
            return self.stage_dir(SCENARIO_DIR).join("u_estimates.csv");
        }
        self.config.data.u_estimates.clone().unwrap_or_else(|| self.fit_u_path())
    }

    fn fit_u_path(&self) -> PathBuf {
        self.stage_dir(FIT_DIR).join("u_estimates.csv")
    }

    /// Writes synthetic hazard data, or the causal scenario.
    pub fn synth(&self) -> Result<(), CliError> {
        const STAGE: &str = "synth";
        let invalid = |e: SynthError| match e {
            SynthError::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Stage { stage: STAGE, source: other.into() },
        };
        if self.scenario {
            let s = generate_lingam_scenario(&self.config.synth).map_err(invalid)?;
            let dir = self.fresh_dir(STAGE, SCENARIO_DIR)?;
            write_file(STAGE, &dir.join("features.csv"), |b| s.features.write_csv(b))?;
            let estimates: Vec<RandomEffectEstimate> = s
                .features
                .pump_ids
                .iter()
                .zip(&s.target)
                .map(|(id, &u)| RandomEffectEstimate { pump_id: id.clone(), u_mean: u, hdi_low: u, hdi_high: u })
                .collect();
            write_file(STAGE, &dir.join("u_estimates.csv"), |b| write_effects_csv(b, &estimates))?;
            return write_json(STAGE, &dir.join("ground_truth.json"), &s.truth);
        }
        let data = generate_hazard_data(&self.config.synth).map_err(invalid)?;
        let dir = self.fresh_dir(STAGE, SYNTH_DIR)?;
        write_file(STAGE, &dir.join("inspections.csv"), |b| write_inspections_csv(b, &data.records))?;
        write_file(STAGE, &dir.join("timeseries.csv"), |b| write_timeseries_csv(b, &data.covariates))?;
        write_json(STAGE, &dir.join("ground_truth.json"), &data.truth)
    }

    /// Builds transitions, samples the posterior and summarizes `u`.
    pub fn fit(&self) -> Result<FitOutcome, CliError> {
        const STAGE: &str = "fit";
        let (ip, tp) = (self.inspections_path(), self.timeseries_path());
        let (ir, tr) = (open(STAGE, &ip)?, open(STAGE, &tp)?);
        let records = ingest_inspections(ir).map_err(labelled(&ip)).stage(STAGE)?;
        let series = ingest_timeseries(tr).map_err(labelled(&tp)).stage(STAGE)?;
        let build = build_transitions(&records, &series).stage(STAGE)?;
        let dir = self.fresh_dir(STAGE, FIT_DIR)?;
        write_file(STAGE, &dir.join("transitions.csv"), |b| build.dataset.write_transitions_csv(b))?;
        let summary = IngestSummary {
            n_pumps: build.dataset.n_pumps,
            n_observations: build.dataset.len(),
            n_transitions: build.dataset.transition_count(),
            dropped_state_decreases: build.dropped.state_decreases,
            dropped_absorbing: build.dropped.absorbing,
        };
        write_json(STAGE, &dir.join("ingest.json"), &summary)?;

        let model = HazardModel::new(Arc::new(build.dataset), self.config.prior);
        let layout = model.layout();
        let started = Instant::now();
        let samples = sample(&model, layout.dim(), &self.config.sampler).stage(STAGE)?;
        log::info!("sampled {} chains in {:.1} s", samples.n_chains, started.elapsed().as_secs_f64());
        let names = layout.names();
        write_file(STAGE, &dir.join("draws.csv"), |b| write_draws_csv(b, &samples, &names))?;
        let diagnostics = DiagnosticsReport::new(&samples, &names);
        write_file(STAGE, &dir.join("diagnostics.json"), |b| diagnostics.write_json(b))?;
        let estimates = extract_random_effects(&samples, &layout, &build.pump_ids, self.config.run.hdi_mass);
        write_file(STAGE, &dir.join("u_estimates.csv"), |b| write_effects_csv(b, &estimates))?;
        for w in crate::report::diagnostic_warnings(&diagnostics) {
            log::warn!("{w}");
        }
        Ok(FitOutcome { diagnostics, estimates })
    }

    /// Window features of every covariate series.
    pub fn features(&self) -> Result<FeatureMatrix, CliError> {
        const STAGE: &str = "features";
        let tp = self.timeseries_path();
        let series = ingest_timeseries(open(STAGE, &tp)?).map_err(labelled(&tp)).stage(STAGE)?;
        let active = self.config.features.active_features()?;
        let window = self.config.features.window;
        let window_end = match self.config.features.window_end {
            Some(end) => end,
            None => series.iter().map(|s| s.last_day()).min().flatten().ok_or_else(|| CliError::Stage {
                stage: STAGE,
                source: "no covariate values to build features from".into(),
            })?,
        };
        let matrix = extract_features(&series, window_end, window, &active).stage(STAGE)?;
        let dir = self.fresh_dir(STAGE, FEATURES_DIR)?;
        write_file(STAGE, &dir.join("features.csv"), |b| matrix.write_csv(b))?;
        write_json(STAGE, &dir.join("window.json"), &WindowSummary { window, window_end })?;
        Ok(matrix)
    }

    fn load_grouping(&self, stage: &'static str) -> Result<(FeatureMatrix, Vec<GroupAssignment>), CliError> {
        let (fp, up) = (self.features_path(), self.u_estimates_path());
        let (fr, ur) = (open(stage, &fp)?, open(stage, &up)?);
        let features = FeatureMatrix::read_csv(fr).map_err(labelled(&fp)).stage(stage)?;
        let estimates = read_effects_csv(ur).map_err(labelled(&up)).stage(stage)?;
        Ok((features, assign_groups(&estimates)))
    }

    /// Sign-rule groups and their sizes.
    pub fn group(&self) -> Result<Vec<GroupSummary>, CliError> {
        const STAGE: &str = "group";
        let (features, assignments) = self.load_grouping(STAGE)?;
        let (pos, neg) = build_group_datasets(&features, &assignments).stage(STAGE)?;
        let total = assignments.len();
        let summaries = vec![pos.summary(total), neg.summary(total)];
        let dir = self.fresh_dir(STAGE, GROUP_DIR)?;
        write_file(STAGE, &dir.join("groups.csv"), |b| write_groups_csv(b, &assignments))?;
        write_json(STAGE, &dir.join("summary.json"), &summaries)?;
        Ok(summaries)
    }

    /// Causal discovery in each sufficiently large group, then the report.
    pub fn discover(&self) -> Result<RunReport, CliError> {
        const STAGE: &str = "discover";
        let (features, assignments) = self.load_grouping(STAGE)?;
        let (pos, neg) = build_group_datasets(&features, &assignments).stage(STAGE)?;
        let total = assignments.len();
        let dir = self.fresh_dir(STAGE, DISCOVER_DIR)?;
        let mut groups = Vec::new();
        let mut models = Vec::new();
        for ds in [pos, neg] {
            let summary = ds.summary(total);
            if !ds.is_sufficient() {
                let reason = format!("{} members, at least {} needed", ds.len(), ds.min_size());
                log::warn!("{} group skipped: {reason}", ds.group);
                groups.push(GroupStatus { summary, ran: false, reason: Some(reason) });
                continue;
            }
            let started = Instant::now();
            match discover(&ds, &self.config.lingam) {
                Ok(model) => {
                    log::info!("{} group: {} rows in {:.1} s", ds.group, ds.len(), started.elapsed().as_secs_f64());
                    let gdir = dir.join(ds.group.label());
                    fs::create_dir_all(&gdir).stage(STAGE)?;
                    write_file(STAGE, &gdir.join("adjacency.csv"), |b| model.write_adjacency_csv(b))?;
                    write_file(STAGE, &gdir.join("order.json"), |b| model.write_order_json(b))?;
                    write_file(STAGE, &gdir.join("effects.csv"), |b| model.write_effects_csv(b))?;
                    write_json(STAGE, &gdir.join("model.json"), &model)?;
                    groups.push(GroupStatus { summary, ran: true, reason: None });
                    models.push((ds.group, model));
                }
                Err(e) => {
                    log::warn!("{} group skipped: {e}", ds.group);
                    groups.push(GroupStatus { summary, ran: false, reason: Some(e.to_string()) });
                }
            }
        }
        let status = DiscoverStatus {
            n_pumps: total,
            n_features: features.n_features(),
            from_fit: !self.scenario && self.u_estimates_path() == self.fit_u_path(),
            groups,
        };
        write_json(STAGE, &dir.join(STATUS_FILE), &status)?;
        figures::write_figures(&dir.join("figures"), &assignments, &models, self.config.run.top_k, self.config.run.svg)
            .stage(STAGE)?;
        self.report()
    }

    /// Rebuilds `report.json` from the persisted artifacts.
    pub fn report(&self) -> Result<RunReport, CliError> {
        const STAGE: &str = "report";
        let report = build_report(self.out(), self.config.run.top_k)?;
        write_json(STAGE, &self.out().join(REPORT_FILE), &report)?;
        Ok(report)
    }

    /// Runs every stage in order, skipping stages whose cached outputs are
    /// intact and were produced from the same settings and inputs.
    pub fn run_all(&self) -> Result<PipelineOutcome, CliError> {
        let c = &self.config;
        let mut timings = Vec::new();
        if self.scenario {
            self.cached("synth", SCENARIO_DIR, &c.synth, &[], &mut timings, || self.synth())?;
        } else {
            if c.uses_synthetic_data() {
                self.cached("synth", SYNTH_DIR, &c.synth, &[], &mut timings, || self.synth())?;
            }
            let (ip, tp) = (self.inspections_path(), self.timeseries_path());
            let fit_key = (&c.prior, &c.sampler, c.run.hdi_mass);
            self.cached("fit", FIT_DIR, &fit_key, &[&ip, &tp], &mut timings, || self.fit().map(drop))?;
            self.cached("features", FEATURES_DIR, &c.features, &[&tp], &mut timings, || self.features().map(drop))?;
        }
        let (fp, up) = (self.features_path(), self.u_estimates_path());
        self.cached("group", GROUP_DIR, &(), &[&fp, &up], &mut timings, || self.group().map(drop))?;
        let discover_key = (&c.lingam, c.run.top_k, c.run.svg, self.scenario);
        self.cached("discover", DISCOVER_DIR, &discover_key, &[&fp, &up], &mut timings, || self.discover().map(drop))?;
        let started = Instant::now();
        let report = self.report()?;
        timings.push(StageTiming { stage: "report".into(), seconds: started.elapsed().as_secs_f64(), cached: false });
        write_json("report", &self.out().join(TIMINGS_FILE), &timings)?;
        Ok(PipelineOutcome { report, timings })
    }

    fn cached<K: Serialize>(
        &self,
        stage: &'static str,
        dir_name: &str,
        settings: &K,
        inputs: &[&Path],
        timings: &mut Vec<StageTiming>,
        run: impl FnOnce() -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        for p in inputs {
            require(stage, p)?;
        }
        let key = cache::stage_key(&(stage, settings), inputs).stage(stage)?;
        let dir = self.stage_dir(dir_name);
        let started = Instant::now();
        let cached = cache::is_fresh(&dir, &key);
        if cached {
            log::info!("{stage}: outputs up to date, skipped");
        } else {
            log::info!("{stage}: running");
            run()?;
            cache::record(&dir, &key).stage(stage)?;
        }
        timings.push(StageTiming { stage: stage.into(), seconds: started.elapsed().as_secs_f64(), cached });
        Ok(())
    }
}
