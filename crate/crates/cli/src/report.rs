//! The run report, rebuilt from the files the stages persisted.

use std::fs;
use std::path::Path;

use hazlingam_core::grouping::{Group, GroupSummary};
use hazlingam_core::lingam::{CausalModel, TargetEffect};
use hazlingam_nuts::export::DiagnosticsReport;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::stages::{DiscoverStatus, DISCOVER_DIR, FIT_DIR, GROUP_DIR, STATUS_FILE};

pub const RHAT_LIMIT: f64 = 1.01;
pub const ESS_LIMIT: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSummary {
    pub n_chains: usize,
    pub n_draws: usize,
    pub max_rhat: f64,
    pub min_ess_bulk: f64,
    pub total_divergences: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: Group,
    pub ran: bool,
    pub skip_reason: Option<String>,
    pub n_bootstrap: usize,
    pub ica_converged: Option<bool>,
    pub dropped_features: Vec<String>,
    /// Largest `|effect|` on `u`, standardized.
    pub max_abs_effect: Option<f64>,
    /// Largest `|effect|` on `u` in raw units.
    pub max_abs_effect_raw: Option<f64>,
    /// Every raw-unit CI on `u` contains 0 (needs a bootstrap).
    pub all_cis_contain_zero: Option<bool>,
    pub top_effects: Vec<TargetEffect>,
}

/// Ratio of the larger to the smaller per-group max `|effect|` (raw units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRatio {
    pub larger: Group,
    pub smaller: Group,
    pub max_abs_larger: f64,
    pub max_abs_smaller: f64,
    /// `None` when the smaller maximum is exactly 0.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sampler: Option<SamplerSummary>,
    pub n_pumps: usize,
    pub n_features: usize,
    pub groups: Vec<GroupSummary>,
    pub discovery: Vec<GroupReport>,
    /// Only when both groups ran.
    pub gap_ratio: Option<GapRatio>,
}

impl RunReport {
    pub fn has_warnings(&self) -> bool {
        self.sampler.as_ref().is_some_and(|s| !s.warnings.is_empty())
    }

    pub fn group(&self, g: Group) -> Option<&GroupReport> {
        self.discovery.iter().find(|r| r.group == g)
    }
}

pub fn diagnostic_warnings(d: &DiagnosticsReport) -> Vec<String> {
    let mut out = Vec::new();
    if !(d.max_rhat < RHAT_LIMIT) {
        let worst = d.parameters.iter().max_by(|a, b| a.rhat.total_cmp(&b.rhat)).map_or("", |p| p.name.as_str());
        out.push(format!("max R-hat {:.4} (at {worst}) is not below {RHAT_LIMIT}", d.max_rhat));
    }
    if d.total_divergences > 0 {
        out.push(format!("{} divergent transitions after warmup", d.total_divergences));
    }
    if d.min_ess_bulk < ESS_LIMIT {
        out.push(format!("min bulk ESS {:.0} is below {ESS_LIMIT}", d.min_ess_bulk));
    }
    out
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read(path)
        .map_err(|e| CliError::Input { stage: "report", message: format!("cannot read {}: {e}", path.display()) })?;
    serde_json::from_slice(&text)
        .map_err(|e| CliError::Stage { stage: "report", source: format!("{}: {e}", path.display()).into() })
}

fn gap_ratio(a: (Group, f64), b: (Group, f64)) -> GapRatio {
    let (hi, lo) = if a.1 >= b.1 { (a, b) } else { (b, a) };
    GapRatio {
        larger: hi.0,
        smaller: lo.0,
        max_abs_larger: hi.1,
        max_abs_smaller: lo.1,
        ratio: (lo.1 > 0.0).then(|| hi.1 / lo.1),
    }
}

fn group_report(group: Group, model: Option<&CausalModel>, reason: Option<String>, top_k: usize) -> GroupReport {
    let Some(m) = model else {
        return GroupReport {
            group,
            ran: false,
            skip_reason: reason,
            n_bootstrap: 0,
            ica_converged: None,
            dropped_features: Vec::new(),
            max_abs_effect: None,
            max_abs_effect_raw: None,
            all_cis_contain_zero: None,
            top_effects: Vec::new(),
        };
    };
    let effects = m.effects_to_target();
    let max_of = |f: fn(&TargetEffect) -> f64| effects.iter().map(|e| f(e).abs()).fold(0.0, f64::max);
    let all_zero = effects.iter().map(TargetEffect::ci_raw_contains_zero).collect::<Option<Vec<bool>>>();
    GroupReport {
        group,
        ran: true,
        skip_reason: None,
        n_bootstrap: m.bootstrap.as_ref().map_or(0, |b| b.n_resamples),
        ica_converged: Some(m.ica_converged),
        dropped_features: m.dropped.clone(),
        max_abs_effect: Some(max_of(|e| e.effect)),
        max_abs_effect_raw: Some(max_of(|e| e.effect_raw)),
        all_cis_contain_zero: all_zero.map(|v| v.into_iter().all(|z| z)),
        top_effects: effects.into_iter().take(top_k).collect(),
    }
}

/// Reads the persisted artifacts below `out` and assembles the report.
pub fn build_report(out: &Path, top_k: usize) -> Result<RunReport, CliError> {
    let status_path = out.join(DISCOVER_DIR).join(STATUS_FILE);
    let diagnostics_path = out.join(FIT_DIR).join("diagnostics.json");
    let (status, groups) = if status_path.is_file() {
        let s: DiscoverStatus = read_json(&status_path)?;
        let groups = s.groups.iter().map(|g| g.summary.clone()).collect();
        (Some(s), groups)
    } else {
        let path = out.join(GROUP_DIR).join("summary.json");
        if !path.is_file() {
            return Err(CliError::Input {
                stage: "report",
                message: format!("no group or discover results below {}", out.display()),
            });
        }
        (None, read_json::<Vec<GroupSummary>>(&path)?)
    };
    let use_fit = status.as_ref().is_none_or(|s| s.from_fit);
    let sampler = if use_fit && diagnostics_path.is_file() {
        let d: DiagnosticsReport = read_json(&diagnostics_path)?;
        Some(SamplerSummary {
            n_chains: d.n_chains,
            n_draws: d.n_draws,
            max_rhat: d.max_rhat,
            min_ess_bulk: d.min_ess_bulk,
            total_divergences: d.total_divergences,
            warnings: diagnostic_warnings(&d),
        })
    } else {
        None
    };

    let mut discovery = Vec::new();
    if let Some(s) = &status {
        for g in &s.groups {
            let group = g.summary.group;
            let model: Option<CausalModel> = if g.ran {
                Some(read_json(&out.join(DISCOVER_DIR).join(group.label()).join("model.json"))?)
            } else {
                None
            };
            discovery.push(group_report(group, model.as_ref(), g.reason.clone(), top_k));
        }
    }
    let ran: Vec<(Group, f64)> = discovery.iter().filter_map(|r| r.max_abs_effect_raw.map(|m| (r.group, m))).collect();
    let gap_ratio = (ran.len() == 2).then(|| gap_ratio(ran[0], ran[1]));

    Ok(RunReport {
        sampler,
        n_pumps: groups.iter().map(|g| g.count).sum(),
        n_features: status.as_ref().map_or(0, |s| s.n_features),
        groups,
        discovery,
        gap_ratio,
    })
}
