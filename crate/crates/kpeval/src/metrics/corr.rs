//! Score extraction, rank correlation, and inter-coder reliability.

use serde::Serialize;

use super::MetricsError;
use crate::pose::CanonicalPose;
use crate::schema::{resolve_score, RawDetection, ScorePolicy};

/// Whole-detection score under a policy. `NativeScore` and
/// `DetectorBoxScore` read the stored score (the policy was applied when
/// the detection was mapped); `MedianOfConfidences` recomputes from the
/// present keypoints' confidences.
pub fn detection_score(det: &CanonicalPose, policy: ScorePolicy) -> Option<f64> {
    match policy {
        ScorePolicy::NativeScore | ScorePolicy::DetectorBoxScore => det.score,
        ScorePolicy::NoScore => None,
        ScorePolicy::MedianOfConfidences => {
            let raw = RawDetection::default();
            resolve_score(&det.keypoints, &raw, ScorePolicy::MedianOfConfidences)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpearmanResult {
    /// Rank correlation coefficient in [-1, 1].
    pub rho: f64,
    /// Two-sided p from the t approximation with n-2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

/// Mid-ranks: 1-based ranks with ties receiving the average of the ranks
/// they span.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricsError> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(MetricsError::ZeroVariance("xs".into()));
    }
    if syy == 0.0 {
        return Err(MetricsError::ZeroVariance("ys".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank-order correlation with a two-sided t-approximation p-value.
///
/// Ranks use averaged positions on ties; pairs with an absent score or
/// similarity must be filtered out by the caller.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<SpearmanResult, MetricsError> {
    assert_eq!(xs.len(), ys.len(), "paired inputs must have equal length");
    let n = xs.len();
    if n < 3 {
        return Err(MetricsError::InsufficientData { needed: 3, got: n });
    }
    let rho = pearson(&mid_ranks(xs), &mid_ranks(ys))?;
    // Guard the boundary where 1 - rho^2 underflows to zero or below.
    let denom = 1.0 - rho * rho;
    let p_value = if denom <= 0.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho.abs() * (df / denom).sqrt();
        student_t_two_sided_p(t, df)
    };
    Ok(SpearmanResult { rho, p_value, n })
}

/// Two-way mixed, single-measure, consistency intraclass correlation for
/// two raters over `n` paired targets.
///
/// From the two-way ANOVA decomposition: with between-target mean square
/// `MS_R` and residual mean square `MS_E`, the coefficient is
/// `(MS_R - MS_E) / (MS_R + (k-1) MS_E)` with k = 2 raters. A constant
/// offset between raters does not lower it.
pub fn icc(coder_a: &[f64], coder_b: &[f64]) -> Result<f64, MetricsError> {
    assert_eq!(
        coder_a.len(),
        coder_b.len(),
        "paired inputs must have equal length"
    );
    let n = coder_a.len();
    if n < 3 {
        return Err(MetricsError::InsufficientData { needed: 3, got: n });
    }
    let k = 2.0;
    let nf = n as f64;
    let grand = (coder_a.iter().sum::<f64>() + coder_b.iter().sum::<f64>()) / (nf * k);
    let col_a = coder_a.iter().sum::<f64>() / nf;
    let col_b = coder_b.iter().sum::<f64>() / nf;

    let mut ss_total = 0.0;
    let mut ss_rows = 0.0;
    for i in 0..n {
        let row_mean = (coder_a[i] + coder_b[i]) / 2.0;
        ss_rows += k * (row_mean - grand).powi(2);
        ss_total += (coder_a[i] - grand).powi(2) + (coder_b[i] - grand).powi(2);
    }
    let ss_cols = nf * ((col_a - grand).powi(2) + (col_b - grand).powi(2));
    let ss_err = ss_total - ss_rows - ss_cols;

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_err = ss_err / ((nf - 1.0) * (k - 1.0));
    let denom = ms_rows + (k - 1.0) * ms_err;
    if denom == 0.0 {
        return Err(MetricsError::ZeroVariance("both coders".into()));
    }
    Ok((ms_rows - ms_err) / denom)
}

/// Reliability of two coders' annotations, one coefficient per keypoint and
/// per axis. Frames are paired by id; a (keypoint, axis) entry appears when
/// both coders placed that keypoint on at least three shared frames.
pub fn icc_per_keypoint_axis(
    coder_a: &crate::dataset::SequenceDataset,
    coder_b: &crate::dataset::SequenceDataset,
) -> Vec<(crate::skeleton::KeypointId, Axis, f64)> {
    use crate::skeleton::{KeypointId, CANONICAL_COUNT};
    let mut xs: Vec<(Vec<f64>, Vec<f64>)> = vec![Default::default(); CANONICAL_COUNT];
    let mut ys: Vec<(Vec<f64>, Vec<f64>)> = vec![Default::default(); CANONICAL_COUNT];
    for frame_a in &coder_a.frames {
        let Some(frame_b) = coder_b.frame(&frame_a.frame_id) else {
            continue;
        };
        for (gt_a, gt_b) in frame_a.ground_truths.iter().zip(&frame_b.ground_truths) {
            for i in 0..CANONICAL_COUNT {
                if let (Some(a), Some(b)) = (&gt_a.keypoints[i], &gt_b.keypoints[i]) {
                    xs[i].0.push(a.x);
                    xs[i].1.push(b.x);
                    ys[i].0.push(a.y);
                    ys[i].1.push(b.y);
                }
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..CANONICAL_COUNT {
        let id = KeypointId::from_canonical_index(i).unwrap();
        if let Ok(v) = icc(&xs[i].0, &xs[i].1) {
            out.push((id, Axis::X, v));
        }
        if let Ok(v) = icc(&ys[i].0, &ys[i].1) {
            out.push((id, Axis::Y, v));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
}

// --- Student's t tail probability via the regularized incomplete beta ---

/// Two-sided p-value for |t| with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection for the left half-plane.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
