//! The quantitative metric suite: keypoint similarity, AP/AR over the ten
//! similarity thresholds, torso-normalized errors, missing data, redundancy
//! inputs, the combined performance score, and the correlation /
//! reliability statistics.

pub mod apar;
pub mod corr;
pub mod cpe;
pub mod missing;
pub mod nmh;
pub mod oks;

use thiserror::Error;

pub use apar::{ap_ar, ApArResult, EvaluatedFrame, RankedDetection, OKS_THRESHOLDS};
pub use corr::{detection_score, icc, icc_per_keypoint_axis, spearman, Axis, SpearmanResult};
pub use cpe::{cpe, CpeResult, DEFAULT_CPE_COEFFICIENT};
pub use missing::{missing_data, MissingDataReport};
pub use nmh::{
    nmh_errors, nmh_length_image, nmh_length_sequence, NmhError, NmhNormalizer, NormalizerSource,
};
pub use oks::{bbox_scale, keypoint_similarity, oks, OksBreakdown};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("degenerate object scale: {0}")]
    DegenerateScale(String),
    #[error("no keypoint present in both detection and ground truth")]
    NoCommonKeypoints,
    #[error("no frame provides a torso length to normalize with")]
    NoNormalizer,
    #[error("need at least {needed} paired values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("{0} has zero variance; the statistic is undefined")]
    ZeroVariance(String),
}
