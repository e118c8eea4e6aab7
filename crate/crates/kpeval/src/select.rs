//! Detection selection, redundancy accounting, role-aware matching, and
//! mixture-of-experts averaging.

use serde::Serialize;

use crate::dataset::{EvalScope, FrameRecord, SequenceDataset};
use crate::metrics::oks::{oks, OksBreakdown};
use crate::pose::{empty_slots, CanonicalPose, GroundTruthPose, Keypoint2D, Role};
use crate::skeleton::SigmaTable;

/// How one detection is chosen per frame when a method emits several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// The first-ranked detection the method output.
    FirstRank,
    /// The detection with the highest score; methods without scores fall
    /// back to rank order. Score ties break toward the lower rank.
    HighestScore,
    /// The detection with the smallest mean Euclidean distance to the ground
    /// truth over commonly present keypoints. Needs ground truth; it is the
    /// best the method could offer, unavailable in deployment.
    OracleBest,
}

impl SelectionStrategy {
    pub fn parse(s: &str) -> Option<SelectionStrategy> {
        match s {
            "first" => Some(SelectionStrategy::FirstRank),
            "score" => Some(SelectionStrategy::HighestScore),
            "oracle" => Some(SelectionStrategy::OracleBest),
            _ => None,
        }
    }
}

/// Mean Euclidean distance over keypoints present in both poses.
pub fn mean_common_distance(det: &CanonicalPose, gt: &GroundTruthPose) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (d, g) in det.keypoints.iter().zip(&gt.keypoints) {
        if let (Some(d), Some(g)) = (d, g) {
            sum += d.distance(g);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Select one detection from a frame under the given strategy.
///
/// Returns `None` only when the frame has no detections. `OracleBest`
/// requires ground truth; when `gt` is absent (e.g. a frame without an
/// in-scope annotation) it degrades to rank order, as does a detection set
/// with no commonly present keypoints.
pub fn select_detection<'a>(
    frame: &'a FrameRecord,
    strategy: SelectionStrategy,
    gt: Option<&GroundTruthPose>,
) -> Option<&'a CanonicalPose> {
    let dets = &frame.detections;
    if dets.is_empty() {
        return None;
    }
    let by_rank = || dets.iter().min_by_key(|d| d.rank);
    match strategy {
        SelectionStrategy::FirstRank => by_rank(),
        SelectionStrategy::HighestScore => {
            if dets.iter().all(|d| d.score.is_none()) {
                return by_rank();
            }
            dets.iter().filter(|d| d.score.is_some()).min_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.rank.cmp(&b.rank))
            })
        }
        SelectionStrategy::OracleBest => {
            let gt = match gt {
                Some(gt) => gt,
                None => return by_rank(),
            };
            let best = dets
                .iter()
                .filter_map(|d| mean_common_distance(d, gt).map(|dist| (d, dist)))
                .min_by(|a, b| {
                    a.1.partial_cmp(&b.1)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.0.rank.cmp(&b.0.rank))
                });
            best.map(|(d, _)| d).or_else(by_rank)
        }
    }
}

/// Redundant-detection accounting for one method over one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyReport {
    /// Expected detections summed over frames that have at least one.
    pub expected: u64,
    /// Detections the method provided in total.
    pub provided: u64,
    pub frames_with_any_detection: u64,
    /// `100 * (provided - expected) / frames_with_any_detection`; may be
    /// negative in multi-person scenes; absent when nothing was detected.
    pub redundant_percent: Option<f64>,
    /// Negative ratios on multi-person data are not a foolproof measure; the
    /// flag marks reports where that caveat applies.
    pub multi_person_caveat: bool,
}

/// Compute the redundancy report from per-frame detection counts.
pub fn redundancy(dataset: &SequenceDataset, per_frame_counts: &[usize]) -> RedundancyReport {
    assert_eq!(
        per_frame_counts.len(),
        dataset.frames.len(),
        "counts must align with frames"
    );
    let provided: u64 = per_frame_counts.iter().map(|&c| c as u64).sum();
    let detected = per_frame_counts.iter().filter(|&&c| c > 0).count() as u64;
    let expected = detected * u64::from(dataset.expected_persons);
    let redundant_percent =
        (detected > 0).then(|| 100.0 * (provided as f64 - expected as f64) / detected as f64);
    RedundancyReport {
        expected,
        provided,
        frames_with_any_detection: detected,
        redundant_percent,
        multi_person_caveat: dataset.expected_persons > 1,
    }
}

/// One matched (detection, ground truth) pair with its similarity.
#[derive(Debug, Clone)]
pub struct MatchedPair {
    pub detection: usize,
    pub ground_truth: usize,
    pub oks: OksBreakdown,
}

/// Result of the greedy one-to-one frame matching.
#[derive(Debug, Clone, Default)]
pub struct FrameAssignment {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_ground_truths: Vec<usize>,
    /// Ground truths that cannot be scored at all (out of evaluation scope,
    /// or too few annotated keypoints to define an object scale).
    pub excluded_ground_truths: Vec<usize>,
}

/// Greedy one-to-one assignment of detections to ground truths.
///
/// Candidate pairs with strictly positive similarity are claimed in
/// descending similarity order (ties broken by detection score, unscored
/// last, then rank, then ground-truth index), so on a single-annotation
/// frame the matched detection is exactly the argmax-similarity one, and a
/// threshold applied to a matched pair later agrees with re-matching at
/// that threshold on such frames. Adult ground truths are excluded under
/// infant scope.
pub fn assign_to_ground_truths(
    frame: &FrameRecord,
    sigma: &SigmaTable,
    scope: EvalScope,
) -> FrameAssignment {
    let mut out = FrameAssignment::default();
    let mut gt_available = Vec::new();
    for (gi, gt) in frame.ground_truths.iter().enumerate() {
        if !scope.includes(gt.role) || crate::metrics::oks::bbox_scale(gt).is_err() {
            out.excluded_ground_truths.push(gi);
        } else {
            gt_available.push(gi);
        }
    }

    let mut candidates: Vec<(usize, usize, OksBreakdown)> = Vec::new();
    for (di, det) in frame.detections.iter().enumerate() {
        for &gi in &gt_available {
            if let Ok(b) = oks(det, &frame.ground_truths[gi], sigma) {
                if b.oks > 0.0 {
                    candidates.push((di, gi, b));
                }
            }
        }
    }
    candidates.sort_by(|(da, ga, a), (db, gb, b)| {
        b.oks
            .partial_cmp(&a.oks)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                let (sa, sb) = (frame.detections[*da].score, frame.detections[*db].score);
                match (sa, sb) {
                    (Some(x), Some(y)) => y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => std::cmp::Ordering::Equal,
                }
            })
            .then(frame.detections[*da].rank.cmp(&frame.detections[*db].rank))
            .then(ga.cmp(gb))
    });

    let mut det_taken = vec![false; frame.detections.len()];
    let mut gt_taken = vec![false; frame.ground_truths.len()];
    for (di, gi, b) in candidates {
        if det_taken[di] || gt_taken[gi] {
            continue;
        }
        det_taken[di] = true;
        gt_taken[gi] = true;
        out.pairs.push(MatchedPair {
            detection: di,
            ground_truth: gi,
            oks: b,
        });
    }
    for (di, taken) in det_taken.iter().enumerate() {
        if !taken {
            out.unmatched_detections.push(di);
        }
    }
    for &gi in &gt_available {
        if !gt_taken[gi] {
            out.unmatched_ground_truths.push(gi);
        }
    }
    out.pairs.sort_by_key(|p| p.detection);
    out
}

/// Average the selected detections of several methods into one pose.
///
/// Per keypoint, the unweighted mean of coordinates over the methods where
/// it is present; absent only when absent everywhere. The averaged pose has
/// no score: confidence scales are not comparable across methods.
pub fn mixture_average(selected: &[Option<CanonicalPose>]) -> Option<CanonicalPose> {
    let present: Vec<&CanonicalPose> = selected.iter().flatten().collect();
    if present.is_empty() {
        return None;
    }
    let mut slots = empty_slots();
    for (i, slot) in slots.iter_mut().enumerate() {
        let points: Vec<&Keypoint2D> = present
            .iter()
            .filter_map(|p| p.keypoints[i].as_ref())
            .collect();
        if points.is_empty() {
            continue;
        }
        // Mean anchored on the first point, so identical inputs average to
        // exactly themselves.
        let n = points.len() as f64;
        let anchor = points[0];
        *slot = Some(Keypoint2D::new(
            anchor.x + points.iter().map(|k| k.x - anchor.x).sum::<f64>() / n,
            anchor.y + points.iter().map(|k| k.y - anchor.y).sum::<f64>() / n,
        ));
    }
    if slots.iter().all(|s| s.is_none()) {
        return None;
    }
    Some(CanonicalPose {
        keypoints: slots,
        score: None,
        rank: 0,
        role: Role::Unknown,
    })
}
