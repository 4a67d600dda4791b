//! Sign-based split of pumps into faster (`ū > 0`) and slower (`ū ≤ 0`)
//! than average deterioration.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::effects::RandomEffectEstimate;
use crate::error::GroupingError;
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Positive,
    Negative,
}

impl Group {
    pub fn of(u_mean: f64) -> Self {
        if u_mean > 0.0 {
            Group::Positive
        } else {
            Group::Negative
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::Positive => "positive",
            Group::Negative => "negative",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub pump_index: usize,
    pub pump_id: String,
    pub u_mean: f64,
    pub group: Group,
}

pub fn assign_groups(estimates: &[RandomEffectEstimate]) -> Vec<GroupAssignment> {
    estimates
        .iter()
        .enumerate()
        .map(|(pump_index, e)| GroupAssignment {
            pump_index,
            pump_id: e.pump_id.clone(),
            u_mean: e.u_mean,
            group: Group::of(e.u_mean),
        })
        .collect()
}

pub fn write_groups_csv<W: Write>(writer: W, assignments: &[GroupAssignment]) -> Result<(), GroupingError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pump_id", "u_mean", "group"])?;
    for a in assignments {
        w.write_record([a.pump_id.as_str(), &a.u_mean.to_string(), a.group.label()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Feature rows and targets of one group's members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDataset {
    pub group: Group,
    pub pump_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl GroupDataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Groups need at least `d + 2` members for causal discovery.
    pub fn min_size(&self) -> usize {
        self.feature_names.len() + 2
    }

    pub fn is_sufficient(&self) -> bool {
        self.len() >= self.min_size()
    }

    pub fn summary(&self, total: usize) -> GroupSummary {
        let (lo, hi) =
            self.target.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)));
        GroupSummary {
            group: self.group,
            count: self.len(),
            share: if total == 0 { 0.0 } else { self.len() as f64 / total as f64 },
            u_min: (!self.is_empty()).then_some(lo),
            u_max: (!self.is_empty()).then_some(hi),
            sufficient: self.is_sufficient(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Group,
    pub count: usize,
    pub share: f64,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
    /// Whether the group is large enough for causal discovery.
    pub sufficient: bool,
}

/// Splits the feature rows by group. Members keep the feature matrix's row
/// order.
pub fn build_group_datasets(
    features: &FeatureMatrix,
    assignments: &[GroupAssignment],
) -> Result<(GroupDataset, GroupDataset), GroupingError> {
    let by_id: HashMap<&str, &GroupAssignment> = assignments.iter().map(|a| (a.pump_id.as_str(), a)).collect();
    let rows: HashMap<&str, usize> = features.pump_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if let Some(a) = assignments.iter().find(|a| !rows.contains_key(a.pump_id.as_str())) {
        return Err(GroupingError::MissingFeatures(a.pump_id.clone()));
    }
    let empty = |group| GroupDataset {
        group,
        pump_ids: Vec::new(),
        feature_names: features.names.clone(),
        features: Vec::new(),
        target: Vec::new(),
    };
    let (mut pos, mut neg) = (empty(Group::Positive), empty(Group::Negative));
    for (id, row) in features.pump_ids.iter().zip(&features.rows) {
        let a = by_id.get(id.as_str()).ok_or_else(|| GroupingError::MissingEstimate(id.clone()))?;
        let g = if a.group == Group::Positive { &mut pos } else { &mut neg };
        g.pump_ids.push(id.clone());
        g.features.push(row.clone());
        g.target.push(a.u_mean);
    }
    for g in [&pos, &neg] {
        if g.is_empty() {
            log::warn!("{} group is empty", g.group);
        } else if !g.is_sufficient() {
            log::warn!(
                "{} group has {} members, fewer than the {} needed for causal discovery",
                g.group,
                g.len(),
                g.min_size()
            );
        }
    }
    Ok((pos, neg))
}
