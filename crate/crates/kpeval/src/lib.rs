//! kpeval — a toolkit that scores 2D pose-estimation outputs against
//! keypoint ground-truth annotations.
//!
//! The library is organized around a canonical 17-keypoint skeleton
//! ([`skeleton::KeypointId`]). Method outputs in assorted on-disk formats are
//! mapped onto that skeleton ([`schema`], [`ingest`]), one detection per frame
//! is selected ([`select`]), and the metric suite ([`metrics`]) is computed
//! and aggregated into reports and figures ([`report`], [`plot`]).
//!
//! The [`harness`] module generates synthetic fixtures with analytically
//! known metric values; the test suite checks the main path against them and
//! against independently coded oracles.

pub mod config;
pub mod dataset;
pub mod events;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod plot;
pub mod pose;
pub mod report;
pub mod run;
pub mod schema;
pub mod select;
pub mod skeleton;

pub use dataset::{EvalScope, FrameRecord, NormalizationMode, SequenceDataset};
pub use pose::{CanonicalPose, GroundTruthPose, Keypoint2D, KeypointSlots, Role};
pub use schema::{SchemaMap, ScorePolicy};
pub use skeleton::{KeypointId, SigmaTable};
