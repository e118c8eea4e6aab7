//! Torso-normalized keypoint errors.
//!
//! The normalizer is the Neck-MidHip length: the distance between the
//! shoulder midpoint and the hip midpoint of the ground truth. Depending on
//! the dataset it is either the median over a whole sequence or each
//! image's own length. Each commonly present keypoint contributes its
//! Euclidean error divided by the normalizer.

use serde::Serialize;

use super::MetricsError;
use crate::dataset::{EvalScope, SequenceDataset};
use crate::pose::{derive_virtual_points, CanonicalPose, GroundTruthPose};
use crate::skeleton::CANONICAL_COUNT;

/// Where a normalizer value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerSource {
    SequenceMedian,
    ThisImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NmhNormalizer {
    /// Torso length in pixels.
    pub value: f64,
    pub source: NormalizerSource,
}

/// Per-keypoint torso-relative errors for one (detection, ground truth)
/// pair. Entries exist exactly for keypoints present in both.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmhError {
    /// Fraction of the torso length, canonical order.
    pub per_keypoint: [Option<f64>; CANONICAL_COUNT],
    pub normalizer: f64,
    pub source: NormalizerSource,
}

impl NmhError {
    pub fn measurements(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.per_keypoint
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|v| (i, v)))
    }
}

/// Torso length of one annotation, when both virtual points derive.
pub fn nmh_length_image(gt: &GroundTruthPose) -> Option<f64> {
    let v = derive_virtual_points(&gt.keypoints);
    match (v.neck, v.midhip) {
        (Some(neck), Some(midhip)) => Some(neck.distance(&midhip)),
        _ => None,
    }
}

/// Median torso length over a sequence's in-scope ground truths.
///
/// Frames where the length cannot be derived contribute nothing; an even
/// number of defined lengths averages the central pair.
pub fn nmh_length_sequence(
    dataset: &SequenceDataset,
    scope: EvalScope,
) -> Result<f64, MetricsError> {
    let mut lengths: Vec<f64> = dataset
        .frames
        .iter()
        .flat_map(|f| f.ground_truths.iter())
        .filter(|gt| scope.includes(gt.role))
        .filter_map(nmh_length_image)
        .collect();
    if lengths.is_empty() {
        return Err(MetricsError::NoNormalizer);
    }
    lengths.sort_by(|a, b| a.partial_cmp(b).expect("lengths are finite"));
    let n = lengths.len();
    Ok(if n % 2 == 1 {
        lengths[n / 2]
    } else {
        (lengths[n / 2 - 1] + lengths[n / 2]) / 2.0
    })
}

/// Torso-relative errors of a detection against one ground truth.
pub fn nmh_errors(
    det: &CanonicalPose,
    gt: &GroundTruthPose,
    normalizer: NmhNormalizer,
) -> Result<NmhError, MetricsError> {
    if normalizer.value <= 0.0 || normalizer.value.is_nan() {
        return Err(MetricsError::DegenerateScale(format!(
            "normalizer {} px",
            normalizer.value
        )));
    }
    let mut per_keypoint = [None; CANONICAL_COUNT];
    for (i, slot) in per_keypoint.iter_mut().enumerate() {
        if let (Some(d), Some(g)) = (&det.keypoints[i], &gt.keypoints[i]) {
            *slot = Some(d.distance(g) / normalizer.value);
        }
    }
    Ok(NmhError {
        per_keypoint,
        normalizer: normalizer.value,
        source: normalizer.source,
    })
}
