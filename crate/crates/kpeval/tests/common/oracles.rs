//! Independently coded reference implementations for small instances.
//!
//! These re-derive each statistic from its published definition over plain
//! primitive data, sharing no code with the library. They are deliberately
//! written in the the same arithmetic expression shapes (distance as a
//! rooted sum of squares, left-associated kernel denominator) so that
//! protocol-level results can be compared exactly, while all protocol logic
//! (matching, ranking, cumulation, interpolation, ANOVA) is re-implemented
//! from scratch.

/// One keypoint slot: present coordinates or absent.
pub type Slot = Option<(f64, f64)>;

#[derive(Debug, Clone)]
pub struct OracleDetection {
    pub score: Option<f64>,
    pub rank: usize,
    pub keypoints: Vec<Slot>,
}

#[derive(Debug, Clone)]
pub struct OracleFrame {
    pub frame_id: String,
    pub ground_truths: Vec<Vec<Slot>>,
    pub detections: Vec<OracleDetection>,
}

#[derive(Debug, PartialEq)]
pub struct InstanceTooLarge(pub String);

const MAX_FRAMES: usize = 1000;
const MAX_DETECTIONS: usize = 5;
const MAX_PAIRS: usize = 50;

/// Object scale: sqrt of the bounding-box area over present annotations.
fn oracle_scale(gt: &[Slot]) -> Option<f64> {
    let present: Vec<(f64, f64)> = gt.iter().flatten().copied().collect();
    if present.len() < 2 {
        return None;
    }
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (x, y) in present {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let (dx, dy) = (max_x - min_x, max_y - min_y);
    if dx <= 0.0 || dy <= 0.0 {
        return None;
    }
    Some((dx * dy).sqrt())
}

/// Term-by-term similarity of a detection against one annotation: for each
/// keypoint present in both, exp(-d^2 / (2 s^2 c^2)) with c twice the
/// keypoint's sigma; the result is the plain mean of the terms.
pub fn oracle_oks(det: &[Slot], gt: &[Slot], sigmas: &[f64]) -> Option<f64> {
    let s = oracle_scale(gt)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for k in 0..sigmas.len() {
        if let (Some((dx, dy)), Some((gx, gy))) = (det[k], gt[k]) {
            let d = ((dx - gx).powi(2) + (dy - gy).powi(2)).sqrt();
            let c = 2.0 * sigmas[k];
            sum += (-d * d / (2.0 * s * s * c * c)).exp();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// The full threshold protocol on a small instance: greedy matching per
/// frame, global score ranking, explicit precision-recall integration with
/// 101 recall points, averaged over thresholds 0.50..0.95.
pub fn oracle_ap_ar(
    frames: &[OracleFrame],
    sigmas: &[f64],
) -> Result<(f64, f64), InstanceTooLarge> {
    if frames.len() > MAX_FRAMES {
        return Err(InstanceTooLarge(format!("{} frames", frames.len())));
    }
    for f in frames {
        if f.detections.len() > MAX_DETECTIONS {
            return Err(InstanceTooLarge(format!(
                "{} detections on {}",
                f.detections.len(),
                f.frame_id
            )));
        }
    }

    // Greedy matching per frame by repeated extraction of the best
    // remaining pair: highest similarity first, ties broken by detection
    // score (unscored last), then rank, then annotation index. Only pairs
    // with strictly positive similarity qualify.
    struct Ranked {
        frame_id: String,
        rank: usize,
        score: Option<f64>,
        matched: Option<f64>,
    }
    let mut all: Vec<Ranked> = Vec::new();
    let mut total_gt = 0usize;
    for frame in frames {
        let scorable: Vec<usize> = (0..frame.ground_truths.len())
            .filter(|&g| oracle_scale(&frame.ground_truths[g]).is_some())
            .collect();
        total_gt += scorable.len();

        let mut det_matched: Vec<Option<f64>> = vec![None; frame.detections.len()];
        let mut det_taken = vec![false; frame.detections.len()];
        let mut gt_taken = vec![false; frame.ground_truths.len()];
        loop {
            // Scan every remaining pair and keep the best under the tie
            // ordering (score descending, unscored last, rank, gt index).
            let mut best: Option<(usize, usize, f64)> = None;
            for (di, det) in frame.detections.iter().enumerate() {
                if det_taken[di] {
                    continue;
                }
                for &gi in &scorable {
                    if gt_taken[gi] {
                        continue;
                    }
                    let Some(v) = oracle_oks(&det.keypoints, &frame.ground_truths[gi], sigmas)
                    else {
                        continue;
                    };
                    if v <= 0.0 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bdi, bgi, bv)) => {
                            let cur = &frame.detections[bdi];
                            if v != bv {
                                v > bv
                            } else {
                                let score_order = match (det.score, cur.score) {
                                    (Some(x), Some(y)) if x != y => Some(x > y),
                                    (Some(_), None) => Some(true),
                                    (None, Some(_)) => Some(false),
                                    _ => None,
                                };
                                match score_order {
                                    Some(o) => o,
                                    None => (det.rank, gi) < (cur.rank, bgi),
                                }
                            }
                        }
                    };
                    if better {
                        best = Some((di, gi, v));
                    }
                }
            }
            match best {
                Some((di, gi, v)) => {
                    det_taken[di] = true;
                    gt_taken[gi] = true;
                    det_matched[di] = Some(v);
                }
                None => break,
            }
        }
        for (di, det) in frame.detections.iter().enumerate() {
            all.push(Ranked {
                frame_id: frame.frame_id.clone(),
                rank: det.rank,
                score: det.score,
                matched: det_matched[di],
            });
        }
    }

    // Global ranking across the dataset.
    all.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y
            .partial_cmp(&x)
            .unwrap()
            .then_with(|| a.frame_id.cmp(&b.frame_id))
            .then(a.rank.cmp(&b.rank)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.frame_id.cmp(&b.frame_id).then(a.rank.cmp(&b.rank)),
    });

    let mut ap_sum = 0.0;
    let mut ar_sum = 0.0;
    for threshold in [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95] {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut precision = Vec::with_capacity(all.len());
        let mut recall = Vec::with_capacity(all.len());
        for det in &all {
            if det.matched.is_some_and(|v| v > threshold) {
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
        for i in (0..precision.len().saturating_sub(1)).rev() {
            if precision[i + 1] > precision[i] {
                precision[i] = precision[i + 1];
            }
        }
        let mut area = 0.0;
        if total_gt > 0 {
            for r in 0..=100 {
                let want = r as f64 / 100.0;
                let mut found = None;
                for (i, rec) in recall.iter().enumerate() {
                    if *rec >= want {
                        found = Some(i);
                        break;
                    }
                }
                if let Some(i) = found {
                    area += precision[i];
                }
            }
            area /= 101.0;
        }
        ap_sum += area;
        ar_sum += if total_gt > 0 {
            tp as f64 / total_gt as f64
        } else {
            0.0
        };
    }
    Ok((100.0 * ap_sum / 10.0, 100.0 * ar_sum / 10.0))
}

/// Naive O(n^2) ranking (average positions on ties) followed by a textbook
/// Pearson correlation of the rank vectors.
pub fn oracle_spearman(xs: &[f64], ys: &[f64]) -> Result<f64, InstanceTooLarge> {
    if xs.len() > MAX_PAIRS {
        return Err(InstanceTooLarge(format!("{} pairs", xs.len())));
    }
    fn naive_ranks(values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mut ranks = vec![0.0; n];
        for i in 0..n {
            let mut below = 0usize;
            let mut equal = 0usize;
            for j in 0..n {
                if values[j] < values[i] {
                    below += 1;
                } else if values[j] == values[i] {
                    equal += 1;
                }
            }
            // Average of positions below+1 ..= below+equal.
            ranks[i] = below as f64 + (equal as f64 + 1.0) / 2.0;
        }
        ranks
    }
    let rx = naive_ranks(xs);
    let ry = naive_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..rx.len() {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    Ok(num / (dx * dy).sqrt())
}

/// Two-way ANOVA mean squares for two raters, consistency form:
/// (MS_rows - MS_err) / (MS_rows + MS_err).
pub fn oracle_icc(a: &[f64], b: &[f64]) -> Result<f64, InstanceTooLarge> {
    if a.len() > MAX_PAIRS {
        return Err(InstanceTooLarge(format!("{} targets", a.len())));
    }
    let n = a.len() as f64;
    let grand: f64 = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (2.0 * n);
    let mean_a: f64 = a.iter().sum::<f64>() / n;
    let mean_b: f64 = b.iter().sum::<f64>() / n;

    let mut ss_total = 0.0;
    let mut ss_rows = 0.0;
    for i in 0..a.len() {
        let row = (a[i] + b[i]) / 2.0;
        ss_rows += 2.0 * (row - grand) * (row - grand);
        ss_total += (a[i] - grand) * (a[i] - grand) + (b[i] - grand) * (b[i] - grand);
    }
    let ss_cols = n * ((mean_a - grand) * (mean_a - grand) + (mean_b - grand) * (mean_b - grand));
    let ss_err = ss_total - ss_rows - ss_cols;
    let ms_rows = ss_rows / (n - 1.0);
    let ms_err = ss_err / (n - 1.0);
    Ok((ms_rows - ms_err) / (ms_rows + ms_err))
}
