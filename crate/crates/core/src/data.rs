//! Inspection records, daily covariate series and the transition
//! observations derived from them.
//!
//! Three CSV layouts are read and written here:
//!
//! * inspections: `pump_id,day,state`
//! * timeseries: `pump_id,day,value`
//! * transitions: `pump_index,state_index,delta_t,y,x0,...,x{p-1}`
//!
//! Days are integer offsets from the start of the study.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Number of ordered health states. State 1 is pristine, state 8 absorbing.
pub const N_STATES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct HealthState(u8);

impl HealthState {
    pub fn new(value: u8) -> Result<Self, DataError> {
        if (1..=N_STATES as u8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(DataError::StateOutOfRange { value: value as i64, line: None })
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_absorbing(self) -> bool {
        self.0 as usize == N_STATES
    }
}

impl TryFrom<u8> for HealthState {
    type Error = DataError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<HealthState> for u8 {
    fn from(s: HealthState) -> u8 {
        s.0
    }
}

impl fmt::Display for HealthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspectionRecord {
    pub pump_id: String,
    pub day: u32,
    pub state: HealthState,
}

/// One pump's daily measurements over a contiguous run of days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSeries {
    pub pump_id: String,
    pub first_day: u32,
    pub values: Vec<f64>,
}

impl CovariateSeries {
    pub fn new(pump_id: impl Into<String>, first_day: u32, values: Vec<f64>) -> Result<Self, DataError> {
        let pump_id = pump_id.into();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteCovariate { pump_id, day: first_day + pos as u32 });
        }
        Ok(Self { pump_id, first_day, values })
    }

    /// Last covered day (inclusive).
    pub fn last_day(&self) -> Option<u32> {
        (!self.values.is_empty()).then(|| self.first_day + self.values.len() as u32 - 1)
    }

    pub fn value_on(&self, day: u32) -> Option<f64> {
        day.checked_sub(self.first_day).and_then(|i| self.values.get(i as usize).copied())
    }

    /// Values for days `start..end`, if all are covered.
    pub fn span(&self, start: u32, end: u32) -> Option<&[f64]> {
        let lo = start.checked_sub(self.first_day)? as usize;
        let hi = end.checked_sub(self.first_day)? as usize;
        (hi <= self.values.len() && lo <= hi).then(|| &self.values[lo..hi])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionObservation {
    pub pump_index: usize,
    /// Starting state, always below the absorbing state.
    pub state_index: u8,
    pub delta_t: f64,
    pub y: bool,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub observations: Vec<TransitionObservation>,
    pub n_pumps: usize,
    pub n_states: usize,
    pub n_covariates: usize,
}

impl Dataset {
    pub fn new(
        observations: Vec<TransitionObservation>,
        n_pumps: usize,
        n_states: usize,
        n_covariates: usize,
    ) -> Result<Self, DataError> {
        for (row, obs) in observations.iter().enumerate() {
            let problem = if obs.pump_index >= n_pumps {
                Some(format!("pump_index {} outside 0..{n_pumps}", obs.pump_index))
            } else if obs.state_index < 1 || obs.state_index as usize >= n_states {
                Some(format!("state_index {} outside 1..{}", obs.state_index, n_states - 1))
            } else if !(obs.delta_t > 0.0) || !obs.delta_t.is_finite() {
                Some(format!("delta_t {} is not positive", obs.delta_t))
            } else if obs.x.len() != n_covariates {
                Some(format!("{} covariates, expected {n_covariates}", obs.x.len()))
            } else if obs.x.iter().any(|v| !v.is_finite()) {
                Some("non-finite covariate".to_string())
            } else {
                None
            };
            if let Some(msg) = problem {
                return Err(DataError::InvalidObservation { row, msg });
            }
        }
        Ok(Self { observations, n_pumps, n_states, n_covariates })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.observations.iter().filter(|o| o.y).count()
    }

    pub fn write_transitions_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> =
            ["pump_index", "state_index", "delta_t", "y"].iter().map(|s| s.to_string()).collect();
        header.extend((0..self.n_covariates).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for obs in &self.observations {
            let mut row = vec![
                obs.pump_index.to_string(),
                obs.state_index.to_string(),
                obs.delta_t.to_string(),
                u8::from(obs.y).to_string(),
            ];
            row.extend(obs.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a transitions CSV. The pump count is not stored in the file and
    /// must be supplied.
    pub fn read_transitions_csv<R: Read>(reader: R, n_pumps: usize) -> Result<Self, DataError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let fixed = ["pump_index", "state_index", "delta_t", "y"];
        if header.len() < 4 || header.iter().take(4).ne(fixed.iter().copied()) {
            return Err(DataError::Header { expected: "pump_index,state_index,delta_t,y,x0,...".into() });
        }
        let p = header.len() - 4;
        for (j, name) in header.iter().skip(4).enumerate() {
            if name != format!("x{j}") {
                return Err(DataError::Header { expected: format!("covariate column x{j}") });
            }
        }
        let mut observations = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let bad = |what: &str| DataError::Malformed { line, msg: what.to_string() };
            let pump_index = rec[0].trim().parse().map_err(|_| bad("pump_index"))?;
            let state_index = rec[1].trim().parse().map_err(|_| bad("state_index"))?;
            let delta_t = rec[2].trim().parse().map_err(|_| bad("delta_t"))?;
            let y = match rec[3].trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad("y must be 0 or 1")),
            };
            let x = (0..p)
                .map(|j| rec[4 + j].trim().parse::<f64>().map_err(|_| bad("covariate")))
                .collect::<Result<Vec<_>, _>>()?;
            observations.push(TransitionObservation { pump_index, state_index, delta_t, y, x });
        }
        Self::new(observations, n_pumps, N_STATES, p)
    }
}

/// Reads the inspections CSV, grouping records by pump (in order of first
/// appearance) and sorting each pump's records by day.
pub fn ingest_inspections<R: Read>(reader: R) -> Result<Vec<InspectionRecord>, DataError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(["pump_id", "day", "state"]) {
        return Err(DataError::Header { expected: "pump_id,day,state".into() });
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_pump: BTreeMap<String, Vec<(usize, InspectionRecord)>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::Malformed { line, msg: e.to_string() })?;
        if rec.len() != 3 {
            return Err(DataError::Malformed { line, msg: format!("expected 3 fields, got {}", rec.len()) });
        }
        let pump_id = rec[0].to_string();
        if pump_id.is_empty() {
            return Err(DataError::Malformed { line, msg: "empty pump_id".into() });
        }
        let day: u32 =
            rec[1].parse().map_err(|_| DataError::Malformed { line, msg: format!("bad day '{}'", &rec[1]) })?;
        let raw: i64 =
            rec[2].parse().map_err(|_| DataError::Malformed { line, msg: format!("bad state '{}'", &rec[2]) })?;
        if raw < 1 || raw > N_STATES as i64 {
            return Err(DataError::StateOutOfRange { value: raw, line: Some(line) });
        }
        let state = HealthState(raw as u8);
        let entry = by_pump.entry(pump_id.clone()).or_insert_with(|| {
            order.push(pump_id.clone());
            Vec::new()
        });
        if let Some((prev_line, prev)) = entry.last() {
            if day <= prev.day {
                return Err(DataError::NonMonotoneDays {
                    pump_id,
                    line,
                    day,
                    previous_line: *prev_line,
                    previous_day: prev.day,
                });
            }
        }
        entry.push((line, InspectionRecord { pump_id, day, state }));
    }
    Ok(order.iter().flat_map(|id| by_pump.remove(id).unwrap_or_default().into_iter().map(|(_, r)| r)).collect())
}

/// Reads the timeseries CSV into one contiguous daily series per pump.
pub fn ingest_timeseries<R: Read>(reader: R) -> Result<Vec<CovariateSeries>, DataError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(["pump_id", "day", "value"]) {
        return Err(DataError::Header { expected: "pump_id,day,value".into() });
    }
    let mut series: Vec<CovariateSeries> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::Malformed { line, msg: e.to_string() })?;
        if rec.len() != 3 {
            return Err(DataError::Malformed { line, msg: format!("expected 3 fields, got {}", rec.len()) });
        }
        let pump_id = &rec[0];
        let day: u32 =
            rec[1].parse().map_err(|_| DataError::Malformed { line, msg: format!("bad day '{}'", &rec[1]) })?;
        let value: f64 =
            rec[2].parse().map_err(|_| DataError::Malformed { line, msg: format!("bad value '{}'", &rec[2]) })?;
        if !value.is_finite() {
            return Err(DataError::NonFiniteCovariate { pump_id: pump_id.to_string(), day });
        }
        match index.get(pump_id) {
            Some(&k) => {
                let s = &mut series[k];
                let expected = s.first_day + s.values.len() as u32;
                if day != expected {
                    return Err(DataError::Malformed {
                        line,
                        msg: format!(
                            "pump {pump_id}: expected day {expected}, got {day} (series must be daily and sorted)"
                        ),
                    });
                }
                s.values.push(value);
            }
            None => {
                index.insert(pump_id.to_string(), series.len());
                series.push(CovariateSeries { pump_id: pump_id.to_string(), first_day: day, values: vec![value] });
            }
        }
    }
    Ok(series)
}

pub fn write_inspections_csv<W: Write>(writer: W, records: &[InspectionRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pump_id", "day", "state"])?;
    for r in records {
        w.write_record([r.pump_id.as_str(), &r.day.to_string(), &r.state.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeseries_csv<W: Write>(writer: W, series: &[CovariateSeries]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pump_id", "day", "value"])?;
    for s in series {
        for (k, v) in s.values.iter().enumerate() {
            w.write_record([s.pump_id.as_str(), &(s.first_day + k as u32).to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Intervals excluded while building transitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// Intervals whose end state is below the start state (repairs).
    pub state_decreases: usize,
    /// Intervals starting in the absorbing state.
    pub absorbing: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.state_decreases + self.absorbing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBuild {
    pub dataset: Dataset,
    /// Pump identifiers in `pump_index` order.
    pub pump_ids: Vec<String>,
    pub dropped: DropCounts,
}

/// Turns consecutive inspection pairs into transition observations.
///
/// Pumps are indexed in order of first appearance in `records`. With an
/// empty `covariates` slice the dataset has no covariates; otherwise every
/// pump needs a series covering each interval `[start, end)`, and the
/// interval covariate is the mean of those daily values.
pub fn build_transitions(
    records: &[InspectionRecord],
    covariates: &[CovariateSeries],
) -> Result<TransitionBuild, DataError> {
    let p = usize::from(!covariates.is_empty());
    let series: BTreeMap<&str, &CovariateSeries> = covariates.iter().map(|s| (s.pump_id.as_str(), s)).collect();

    let mut pump_ids: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<&InspectionRecord>> = BTreeMap::new();
    for r in records {
        let entry = grouped.entry(r.pump_id.as_str()).or_insert_with(|| {
            pump_ids.push(r.pump_id.clone());
            Vec::new()
        });
        entry.push(r);
    }

    let mut observations = Vec::new();
    let mut dropped = DropCounts::default();
    for (pump_index, id) in pump_ids.iter().enumerate() {
        let mut recs = grouped.remove(id.as_str()).unwrap_or_default();
        recs.sort_by_key(|r| r.day);
        for pair in recs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b.day <= a.day {
                return Err(DataError::NonMonotoneDays {
                    pump_id: id.clone(),
                    line: 0,
                    day: b.day,
                    previous_line: 0,
                    previous_day: a.day,
                });
            }
            if a.state.is_absorbing() {
                dropped.absorbing += 1;
                continue;
            }
            if b.state < a.state {
                dropped.state_decreases += 1;
                continue;
            }
            let x = if p == 0 {
                Vec::new()
            } else {
                let s = series.get(id.as_str()).ok_or_else(|| DataError::MissingCovariates {
                    pump_id: id.clone(),
                    start: a.day,
                    end: b.day,
                })?;
                let vals = s.span(a.day, b.day).ok_or_else(|| DataError::MissingCovariates {
                    pump_id: id.clone(),
                    start: a.day,
                    end: b.day,
                })?;
                vec![vals.iter().sum::<f64>() / vals.len() as f64]
            };
            observations.push(TransitionObservation {
                pump_index,
                state_index: a.state.value(),
                delta_t: (b.day - a.day) as f64,
                y: b.state > a.state,
                x,
            });
        }
    }
    if dropped.total() > 0 {
        log::info!(
            "dropped {} intervals ({} state decreases, {} from absorbing state)",
            dropped.total(),
            dropped.state_decreases,
            dropped.absorbing
        );
    }
    let dataset = Dataset::new(observations, pump_ids.len(), N_STATES, p)?;
    Ok(TransitionBuild { dataset, pump_ids, dropped })
}
