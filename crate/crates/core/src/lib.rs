//! Two-stage analysis of equipment deterioration.
//!
//! Stage one fits a hierarchical hazard model to inspection histories and
//! extracts per-pump random effects ([`hazard`], [`effects`]). Stage two
//! engineers time-series features ([`features`]), splits pumps by the sign
//! of their random effect ([`grouping`]) and runs ICA-based LiNGAM causal
//! discovery inside each group ([`lingam`]). [`synth`] produces data with
//! known ground truth for every stage.

// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod effects;
pub mod error;
pub mod features;
pub mod grouping;
pub mod hazard;
pub mod lingam;
pub mod synth;

pub use data::{
    build_transitions, ingest_inspections, ingest_timeseries, CovariateSeries, Dataset, DropCounts, HealthState,
    InspectionRecord, TransitionBuild, TransitionObservation, N_STATES,
};
pub use error::{DataError, FeatureError, GroupingError, LingamError, SynthError};
pub use hazard::{HazardModel, ModelParams, ParamLayout, PriorSpec, UnconstrainedParams};
