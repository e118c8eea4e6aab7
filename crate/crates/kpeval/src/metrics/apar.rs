//! Average precision and average recall over the ten similarity thresholds
//! 0.50, 0.55, ..., 0.95.
//!
//! Detections are ranked globally by score across the dataset (unscored
//! ones after all scored ones, ordered by frame id then rank). At each
//! threshold a matched detection whose pair similarity exceeds the
//! threshold is a true positive and every other detection a false positive;
//! ground truths not covered by a true positive count as false negatives.
//! Precision is the area under the precision-recall curve with 101-point
//! interpolation; recall is TP / (TP + FN). Both are averaged over the ten
//! thresholds and reported on a 0-100 scale.

use serde::Serialize;

/// The ten evaluation thresholds.
pub const OKS_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// One detection as seen by the protocol: its ranking keys and the
/// similarity of the ground-truth pair it was assigned to, if any.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedDetection {
    pub score: Option<f64>,
    pub rank: usize,
    pub matched_oks: Option<f64>,
}

/// Everything the protocol needs from one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedFrame {
    pub frame_id: String,
    /// In-scope, scorable ground truths on this frame.
    pub gt_count: usize,
    pub detections: Vec<RankedDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApArResult {
    /// 0-100.
    pub ap: f64,
    /// 0-100.
    pub ar: f64,
    /// Per threshold: (threshold, interpolated precision area, recall).
    pub per_threshold: Vec<(f64, f64, f64)>,
}

/// Run the threshold protocol over a set of evaluated frames.
pub fn ap_ar(frames: &[EvaluatedFrame]) -> ApArResult {
    let total_gt: usize = frames.iter().map(|f| f.gt_count).sum();

    // Global ranking: scored detections by descending score (ties by frame
    // id then rank), then unscored detections by (frame id, rank).
    let mut order: Vec<(&EvaluatedFrame, &RankedDetection)> = frames
        .iter()
        .flat_map(|f| f.detections.iter().map(move |d| (f, d)))
        .collect();
    order.sort_by(|(fa, da), (fb, db)| match (da.score, db.score) {
        (Some(sa), Some(sb)) => sb
            .partial_cmp(&sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| fa.frame_id.cmp(&fb.frame_id))
            .then(da.rank.cmp(&db.rank)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => fa.frame_id.cmp(&fb.frame_id).then(da.rank.cmp(&db.rank)),
    });

    let mut per_threshold = Vec::with_capacity(OKS_THRESHOLDS.len());
    let mut ap_sum = 0.0;
    let mut ar_sum = 0.0;
    for &t in &OKS_THRESHOLDS {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut precision = Vec::with_capacity(order.len());
        let mut recall = Vec::with_capacity(order.len());
        for (_, det) in &order {
            if det.matched_oks.is_some_and(|o| o > t) {
                tp += 1;
            } else {
                fp += 1;
            }
            precision.push(tp as f64 / (tp + fp) as f64);
            recall.push(if total_gt > 0 {
                tp as f64 / total_gt as f64
            } else {
                0.0
            });
        }
        // Monotone envelope from the right, then 101-point interpolation.
        for i in (0..precision.len().saturating_sub(1)).rev() {
            precision[i] = precision[i].max(precision[i + 1]);
        }
        let mut area = 0.0;
        if total_gt > 0 {
            let mut idx = 0usize;
            for r in 0..=100 {
                let r = r as f64 / 100.0;
                while idx < recall.len() && recall[idx] < r {
                    idx += 1;
                }
                if idx < recall.len() {
                    area += precision[idx];
                }
            }
            area /= 101.0;
        }
        let recall_t = if total_gt > 0 {
            tp as f64 / total_gt as f64
        } else {
            0.0
        };
        ap_sum += area;
        ar_sum += recall_t;
        per_threshold.push((t, area, recall_t));
    }
    let n = OKS_THRESHOLDS.len() as f64;
    ApArResult {
        ap: 100.0 * ap_sum / n,
        ar: 100.0 * ar_sum / n,
        per_threshold,
    }
}
