//! Aggregation of per-frame outcomes into per-method tables.
//!
//! Means pool frame-level measurements with equal weight per measurement;
//! standard deviations are sample (n-1). Where a dataset groups several
//! sequences, the mean of per-sequence means is also emitted, labeled
//! separately, since the two conventions differ.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::ingest::Warning;
use crate::metrics::apar::{ap_ar, EvaluatedFrame};
use crate::metrics::cpe::{cpe, CpeResult};
use crate::metrics::nmh::NmhError;
use crate::metrics::spearman;
use crate::select::RedundancyReport;
use crate::skeleton::{KeypointId, CANONICAL_COUNT};

/// Outcome of evaluating one detection against one ground-truth target.
#[derive(Debug, Clone, Default)]
pub struct TargetOutcome {
    /// Similarity of the selected detection against this target.
    pub oks: Option<f64>,
    /// Torso-relative errors of the selected detection.
    pub nmh: Option<NmhError>,
    /// Score of the selected detection.
    pub score: Option<f64>,
}

/// Everything measured on one frame for one method.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub frame_id: String,
    /// One entry per evaluated ground truth (one for single-infant frames).
    pub targets: Vec<TargetOutcome>,
    pub detection_count: usize,
    /// Expressible keypoints absent from the selected detection; `None`
    /// when the frame has no detection at all.
    pub missing_keypoints: Option<usize>,
    /// Input to the AP/AR protocol.
    pub eval: EvaluatedFrame,
}

/// Per-(method, sequence) evaluation results, ready for aggregation.
#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    pub method: String,
    pub dataset_id: String,
    pub sequence_id: String,
    pub input_mode: String,
    pub expected_persons: u32,
    /// The method's native keypoint count (not the canonical count).
    pub native_keypoint_count: usize,
    pub frames: Vec<FrameOutcome>,
}

/// Grouping granularity for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Dataset,
    Sequence,
}

/// A mean with its sample count and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

fn stat(values: &[f64]) -> Stat {
    let n = values.len();
    if n == 0 {
        return Stat::default();
    }
    // Canonical summation order, so aggregation does not depend on frame
    // input order even at the last ulp.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Some(var.sqrt())
    } else {
        None
    };
    Stat {
        mean: Some(mean),
        std,
        n,
    }
}

/// One aggregated row: a method over a group of frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub method: String,
    pub dataset: String,
    pub grouping: Grouping,
    /// Dataset id, or `dataset/sequence` for sequence-level rows.
    pub group_id: String,
    pub input_mode: String,
    pub frames: usize,
    pub detections: usize,
    pub matched_pairs: usize,
    pub oks: Stat,
    /// Mean of per-sequence mean similarities (absent for single-sequence
    /// groups, where it equals the pooled mean).
    pub oks_mean_of_sequences: Option<f64>,
    pub ap: f64,
    pub ar: f64,
    /// Torso-relative error in percent, pooled over (frame, keypoint).
    pub nmh: Stat,
    pub nmh_mean_of_sequences: Option<f64>,
    /// Per-keypoint mean torso-relative error in percent.
    pub nmh_per_keypoint: Vec<KeypointStat>,
    pub missing_percent: f64,
    pub missing_detections: usize,
    pub missing_keypoints: usize,
    pub redundant_percent: Option<f64>,
    pub redundancy_caveat: bool,
    pub cpe: Option<f64>,
    pub cpe_f_nmh: Option<f64>,
    pub cpe_f_missing: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub spearman_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeypointStat {
    pub keypoint: KeypointId,
    /// Percent of torso length.
    pub mean: f64,
    pub n: usize,
}

/// Provenance carried by every emitted report file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportProvenance {
    pub toolkit_version: String,
    pub sigma_fingerprint: String,
    pub cpe_coefficient: f64,
    pub selection: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub report_version: u32,
    pub provenance: ReportProvenance,
    pub reports: Vec<MetricReport>,
}

pub const REPORT_VERSION: u32 = 1;

/// Aggregate per-sequence outcomes into one report per (method, group).
///
/// All inputs must come from the same selection strategy. Empty groups
/// produce no report, only a warning.
pub fn aggregate(
    outcomes: &[SequenceOutcome],
    grouping: Grouping,
    cpe_c: f64,
) -> (Vec<MetricReport>, Vec<Warning>) {
    let mut groups: BTreeMap<(String, String), Vec<&SequenceOutcome>> = BTreeMap::new();
    for o in outcomes {
        let group_id = match grouping {
            Grouping::Dataset => o.dataset_id.clone(),
            Grouping::Sequence => format!("{}/{}", o.dataset_id, o.sequence_id),
        };
        groups
            .entry((o.method.clone(), group_id))
            .or_default()
            .push(o);
    }

    let mut warnings = Vec::new();
    let mut reports = Vec::new();
    for ((method, group_id), members) in groups {
        let frame_count: usize = members.iter().map(|m| m.frames.len()).sum();
        if frame_count == 0 {
            warnings.push(
                Warning::new("empty_group", "group has no frames; no report emitted")
                    .with("method", method.clone())
                    .with("group", group_id.clone()),
            );
            continue;
        }

        // Pool frame-level measurements across member sequences.
        let mut oks_values = Vec::new();
        let mut nmh_values = Vec::new();
        let mut per_kp: [Vec<f64>; CANONICAL_COUNT] = std::array::from_fn(|_| Vec::new());
        let mut score_oks_pairs: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut eval_frames = Vec::new();
        let mut detections = 0usize;
        let mut matched_pairs = 0usize;
        let mut missing_detections = 0usize;
        let mut missing_keypoints = 0usize;
        let mut oks_seq_means = Vec::new();
        let mut nmh_seq_means = Vec::new();
        let mut redundancy_acc = RedundancyAccumulator::default();

        for seq in &members {
            let mut seq_oks = Vec::new();
            let mut seq_nmh = Vec::new();
            for frame in &seq.frames {
                detections += frame.detection_count;
                matched_pairs += frame
                    .eval
                    .detections
                    .iter()
                    .filter(|d| d.matched_oks.is_some())
                    .count();
                match frame.missing_keypoints {
                    Some(k) => missing_keypoints += k,
                    None => missing_detections += 1,
                }
                redundancy_acc.add(frame.detection_count, seq.expected_persons);
                for target in &frame.targets {
                    if let Some(o) = target.oks {
                        oks_values.push(o);
                        seq_oks.push(o);
                        if let Some(s) = target.score {
                            score_oks_pairs.0.push(s);
                            score_oks_pairs.1.push(o);
                        }
                    }
                    if let Some(nmh) = &target.nmh {
                        for (i, e) in nmh.measurements() {
                            let pct = 100.0 * e;
                            nmh_values.push(pct);
                            seq_nmh.push(pct);
                            per_kp[i].push(pct);
                        }
                    }
                }
                eval_frames.push(frame.eval.clone());
            }
            if let Stat { mean: Some(m), .. } = stat(&seq_oks) {
                oks_seq_means.push(m);
            }
            if let Stat { mean: Some(m), .. } = stat(&seq_nmh) {
                nmh_seq_means.push(m);
            }
        }

        // Deterministic reduction order: sort the pooled protocol frames.
        eval_frames.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
        let apar = ap_ar(&eval_frames);

        let native_kp = members
            .iter()
            .map(|m| m.native_keypoint_count)
            .max()
            .unwrap_or(CANONICAL_COUNT);
        let missing_numer = missing_detections * native_kp + missing_keypoints;
        let missing_denom = frame_count * native_kp;
        let missing_percent = 100.0 * missing_numer as f64 / missing_denom as f64;

        let oks_stat = stat(&oks_values);
        let nmh_stat = stat(&nmh_values);
        let cpe_result: Option<CpeResult> = nmh_stat
            .mean
            .map(|nmh_mean| cpe(nmh_mean, missing_percent, cpe_c));

        // Canonical pair order for the correlation, same reason as stat().
        let mut pairs: Vec<(f64, f64)> = score_oks_pairs
            .0
            .iter()
            .copied()
            .zip(score_oks_pairs.1.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let sp = match spearman(&xs, &ys) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(
                    Warning::new("correlation_unavailable", e.to_string())
                        .with("method", method.clone())
                        .with("group", group_id.clone()),
                );
                None
            }
        };

        let multi_sequence = members.len() > 1;
        reports.push(MetricReport {
            method,
            dataset: members[0].dataset_id.clone(),
            grouping,
            group_id,
            input_mode: members[0].input_mode.clone(),
            frames: frame_count,
            detections,
            matched_pairs,
            oks: oks_stat,
            oks_mean_of_sequences: multi_sequence.then(|| stat(&oks_seq_means).mean).flatten(),
            ap: apar.ap,
            ar: apar.ar,
            nmh: nmh_stat,
            nmh_mean_of_sequences: multi_sequence.then(|| stat(&nmh_seq_means).mean).flatten(),
            nmh_per_keypoint: (0..CANONICAL_COUNT)
                .filter_map(|i| {
                    let s = stat(&per_kp[i]);
                    s.mean.map(|mean| KeypointStat {
                        keypoint: KeypointId::from_canonical_index(i).unwrap(),
                        mean,
                        n: s.n,
                    })
                })
                .collect(),
            missing_percent,
            missing_detections,
            missing_keypoints,
            redundant_percent: redundancy_acc.percent(),
            redundancy_caveat: redundancy_acc.caveat,
            cpe: cpe_result.as_ref().map(|c| c.cpe),
            cpe_f_nmh: cpe_result.as_ref().map(|c| c.f_nmh),
            cpe_f_missing: cpe_result.as_ref().map(|c| c.f_missing),
            spearman_rho: sp.map(|s| s.rho),
            spearman_p: sp.map(|s| s.p_value),
            spearman_n: sp.map(|s| s.n).unwrap_or(0),
        });
    }
    (reports, warnings)
}

#[derive(Default)]
struct RedundancyAccumulator {
    provided: u64,
    expected_on_detected: u64,
    frames_with_any: u64,
    caveat: bool,
}

impl RedundancyAccumulator {
    fn add(&mut self, count: usize, expected_persons: u32) {
        self.provided += count as u64;
        if count > 0 {
            self.frames_with_any += 1;
            self.expected_on_detected += u64::from(expected_persons);
        }
        if expected_persons > 1 {
            self.caveat = true;
        }
    }

    fn percent(&self) -> Option<f64> {
        (self.frames_with_any > 0).then(|| {
            100.0 * (self.provided as f64 - self.expected_on_detected as f64)
                / self.frames_with_any as f64
        })
    }
}

impl From<&RedundancyAccumulator> for RedundancyReport {
    fn from(acc: &RedundancyAccumulator) -> Self {
        RedundancyReport {
            expected: acc.expected_on_detected,
            provided: acc.provided,
            frames_with_any_detection: acc.frames_with_any,
            redundant_percent: acc.percent(),
            multi_person_caveat: acc.caveat,
        }
    }
}

// --- emission ---

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(v) => format!("{v:.decimals$}"),
        None => String::new(),
    }
}

/// Render reports to a file. CSV uses a fixed column order and the table
/// rendering precisions (similarity 2 decimals, AP/AR 1, torso errors 1,
/// combined score 2); JSON carries full precision plus provenance.
pub fn emit_tables(
    reports: &[MetricReport],
    provenance: &ReportProvenance,
    format: TableFormat,
    path: &Path,
) -> std::io::Result<()> {
    let mut sorted: Vec<&MetricReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        (a.grouping as u8, &a.group_id, &a.method).cmp(&(b.grouping as u8, &b.group_id, &b.method))
    });
    match format {
        TableFormat::Json => {
            let doc = ReportDocument {
                report_version: REPORT_VERSION,
                provenance: provenance.clone(),
                reports: sorted.into_iter().cloned().collect(),
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("serializable report");
            text.push('\n');
            std::fs::write(path, text)
        }
        TableFormat::Csv => {
            let mut out = Vec::new();
            let mut header: Vec<String> = [
                "method",
                "dataset",
                "grouping",
                "group_id",
                "input_mode",
                "frames",
                "detections",
                "matched_pairs",
                "oks_mean",
                "oks_std",
                "oks_n",
                "ap",
                "ar",
                "nmh_mean",
                "nmh_std",
                "nmh_n",
                "missing_percent",
                "redundant_percent",
                "redundancy_caveat",
                "cpe",
                "spearman_rho",
                "spearman_p",
            ]
            .map(String::from)
            .to_vec();
            for i in 0..CANONICAL_COUNT {
                header.push(format!(
                    "nmh_{}",
                    KeypointId::from_canonical_index(i).unwrap()
                ));
            }
            header.extend([
                "toolkit_version".to_string(),
                "sigma_fingerprint".to_string(),
                "cpe_coefficient".to_string(),
            ]);
            writeln!(out, "{}", header.join(","))?;
            for r in sorted {
                let mut row = vec![
                    r.method.clone(),
                    r.dataset.clone(),
                    match r.grouping {
                        Grouping::Dataset => "dataset".into(),
                        Grouping::Sequence => "sequence".into(),
                    },
                    r.group_id.clone(),
                    r.input_mode.clone(),
                    r.frames.to_string(),
                    r.detections.to_string(),
                    r.matched_pairs.to_string(),
                    fmt_opt(r.oks.mean, 2),
                    fmt_opt(r.oks.std, 2),
                    r.oks.n.to_string(),
                    format!("{:.1}", r.ap),
                    format!("{:.1}", r.ar),
                    fmt_opt(r.nmh.mean, 1),
                    fmt_opt(r.nmh.std, 1),
                    r.nmh.n.to_string(),
                    format!("{:.1}", r.missing_percent),
                    fmt_opt(r.redundant_percent, 1),
                    r.redundancy_caveat.to_string(),
                    fmt_opt(r.cpe, 2),
                    fmt_opt(r.spearman_rho, 2),
                    fmt_opt(r.spearman_p, 4),
                ];
                let mut per_kp = [None; CANONICAL_COUNT];
                for ks in &r.nmh_per_keypoint {
                    per_kp[ks.keypoint.canonical_index().unwrap()] = Some(ks.mean);
                }
                for v in per_kp {
                    row.push(fmt_opt(v, 1));
                }
                row.extend([
                    provenance.toolkit_version.clone(),
                    provenance.sigma_fingerprint.clone(),
                    format!("{}", provenance.cpe_coefficient),
                ]);
                writeln!(out, "{}", row.join(","))?;
            }
            std::fs::write(path, out)
        }
    }
}
