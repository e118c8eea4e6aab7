//! Keypoint similarity and its per-detection aggregate.
//!
//! For a keypoint at distance `d` from its annotation, with object scale `s`
//! and falloff coefficient `c`, the similarity is `exp(-d^2 / (2 s^2 c^2))`.
//! The object scale is the square root of the bounding-box area spanned by
//! the annotated keypoints; the falloff is twice the per-keypoint sigma (see
//! [`SigmaTable`]). The per-detection value is the unweighted mean over
//! keypoints present in both detection and ground truth.

use serde::Serialize;

use super::MetricsError;
use crate::pose::{CanonicalPose, GroundTruthPose};
use crate::skeleton::{KeypointId, SigmaTable, CANONICAL_COUNT};

/// Similarity of one keypoint pair. Strictly decreasing in `d`, 1 iff d = 0.
pub fn keypoint_similarity(d: f64, s: f64, c: f64) -> Result<f64, MetricsError> {
    if s <= 0.0 || s.is_nan() {
        return Err(MetricsError::DegenerateScale(format!("scale s = {s}")));
    }
    debug_assert!(d >= 0.0 && c > 0.0);
    Ok((-d * d / (2.0 * s * s * c * c)).exp())
}

/// Object scale from the annotated keypoints: sqrt of the area of their
/// axis-aligned bounding box. Needs at least two keypoints spanning nonzero
/// extent on both axes.
pub fn bbox_scale(gt: &GroundTruthPose) -> Result<f64, MetricsError> {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    let mut n = 0usize;
    for kp in gt.keypoints.iter().flatten() {
        min_x = min_x.min(kp.x);
        max_x = max_x.max(kp.x);
        min_y = min_y.min(kp.y);
        max_y = max_y.max(kp.y);
        n += 1;
    }
    if n < 2 {
        return Err(MetricsError::DegenerateScale(format!(
            "{n} annotated keypoint(s) cannot span a bounding box"
        )));
    }
    let (dx, dy) = (max_x - min_x, max_y - min_y);
    if dx <= 0.0 || dy <= 0.0 {
        return Err(MetricsError::DegenerateScale(format!(
            "bounding box extent {dx} x {dy}"
        )));
    }
    Ok((dx * dy).sqrt())
}

/// Per-detection similarity with its per-keypoint terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OksBreakdown {
    /// Similarity per commonly present keypoint, canonical order.
    pub per_keypoint: [Option<f64>; CANONICAL_COUNT],
    /// Unweighted mean of the present terms.
    pub oks: f64,
    /// Number of keypoints present in both detection and ground truth.
    pub k_used: usize,
    /// Object scale used, in pixels.
    pub scale: f64,
}

impl OksBreakdown {
    pub fn term(&self, id: KeypointId) -> Option<f64> {
        id.canonical_index().and_then(|i| self.per_keypoint[i])
    }
}

/// Similarity of a detection against one ground truth.
pub fn oks(
    det: &CanonicalPose,
    gt: &GroundTruthPose,
    sigma: &SigmaTable,
) -> Result<OksBreakdown, MetricsError> {
    let scale = bbox_scale(gt)?;
    let mut per_keypoint = [None; CANONICAL_COUNT];
    let mut sum = 0.0;
    let mut k_used = 0usize;
    for (i, slot) in per_keypoint.iter_mut().enumerate() {
        if let (Some(d), Some(g)) = (&det.keypoints[i], &gt.keypoints[i]) {
            let ks = keypoint_similarity(d.distance(g), scale, sigma.falloff_at(i))?;
            *slot = Some(ks);
            sum += ks;
            k_used += 1;
        }
    }
    if k_used == 0 {
        return Err(MetricsError::NoCommonKeypoints);
    }
    Ok(OksBreakdown {
        per_keypoint,
        oks: sum / k_used as f64,
        k_used,
        scale,
    })
}
