//! Parsers for ground-truth annotation files and method detection outputs.
//!
//! CanonicalJson is the interchange format; the other formats convert to the
//! same in-memory types on parse. Coordinates are accepted as real-valued
//! pixels without rounding; files are UTF-8 with `.` as the decimal point.

mod canonical_json;
mod coco_json;
mod per_frame_dir;
mod wide_csv;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical_json::{emit_canonical_json, parse_canonical_json};

use crate::dataset::SequenceDataset;
use crate::pose::CanonicalPose;
use crate::schema::{SchemaError, SchemaMap};

/// Supported on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatKind {
    /// One JSON document per sequence carrying ground truths and detections.
    CanonicalJson,
    /// Flat JSON array of `{image_id, keypoints: [51 floats], score}`.
    CocoResultJson,
    /// A directory of `<frame_id>.json` files, each with a `people` array of
    /// flat x,y,conf triples in native order.
    PerFrameJsonDirectory,
    /// One row per frame: `frame_id,<name>_x,<name>_y,<name>_conf,...`.
    WideCsv,
}

impl FormatKind {
    pub fn parse(s: &str) -> Option<FormatKind> {
        match s {
            "canonical" | "canonical_json" => Some(FormatKind::CanonicalJson),
            "coco" | "coco_result_json" => Some(FormatKind::CocoResultJson),
            "per_frame" | "per_frame_json_directory" => Some(FormatKind::PerFrameJsonDirectory),
            "wide_csv" | "csv" => Some(FormatKind::WideCsv),
            _ => None,
        }
    }
}

/// Detections from one method for one sequence, keyed by frame id.
///
/// A frame id missing from `frames` means the source file had no entry for
/// it; an empty list means the method explicitly produced nothing. Both
/// count as missing detections downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub method_name: String,
    /// Absent when the source format does not carry a sequence id.
    pub sequence_id: Option<String>,
    pub frames: BTreeMap<String, Vec<CanonicalPose>>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {locus}: {message}")]
    Parse {
        path: String,
        locus: String,
        message: String,
    },
    #[error("duplicate frame id `{0}`")]
    DuplicateFrameId(String),
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("sequence mismatch: dataset is `{dataset}`, detections are for `{detections}`")]
    SequenceMismatch { dataset: String, detections: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub(crate) fn parse_err(
    path: &Path,
    locus: impl Into<String>,
    message: impl Into<String>,
) -> IngestError {
    IngestError::Parse {
        path: path.display().to_string(),
        locus: locus.into(),
        message: message.into(),
    }
}

/// A non-fatal condition reported on a side channel; never changes results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
    pub context: BTreeMap<String, String>,
}

impl Warning {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Warning {
            code: code.to_string(),
            message: message.into(),
            context: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }
}

/// Parse a ground-truth file into a dataset.
///
/// Annotated keypoints are marked present; everything else is absent. Roles
/// come from a role field when the format carries one, else Infant.
pub fn parse_ground_truth(path: &Path, format: FormatKind) -> Result<SequenceDataset, IngestError> {
    let dataset = match format {
        FormatKind::CanonicalJson => parse_canonical_json(path)?,
        FormatKind::WideCsv => wide_csv::parse_ground_truth(path)?,
        FormatKind::PerFrameJsonDirectory => per_frame_dir::parse_ground_truth(path)?,
        FormatKind::CocoResultJson => {
            return Err(parse_err(
                path,
                "-",
                "coco result json carries detections, not ground truth",
            ))
        }
    };
    if dataset.frames.is_empty() {
        return Err(IngestError::EmptyDataset(path.display().to_string()));
    }
    Ok(dataset)
}

/// Parse a detection file, mapping every raw detection through `schema`.
///
/// Ranks are taken from the file when present, else assigned by file order;
/// either way the per-frame lists end up sorted with ranks contiguous from
/// zero. Detections that map to zero canonical keypoints are dropped with a
/// warning (an empty detection is absence, not a pose).
pub fn parse_detections(
    path: &Path,
    format: FormatKind,
    schema: &SchemaMap,
) -> Result<(DetectionFile, Vec<Warning>), IngestError> {
    schema.validate()?;
    match format {
        FormatKind::CanonicalJson => canonical_json::parse_detections(path, schema),
        FormatKind::WideCsv => wide_csv::parse_detections(path, schema),
        FormatKind::PerFrameJsonDirectory => per_frame_dir::parse_detections(path, schema),
        FormatKind::CocoResultJson => coco_json::parse_detections(path, schema),
    }
}

/// Re-rank a frame's detections: honor stored ranks (stable on ties), then
/// reassign contiguously from zero.
pub(crate) fn normalize_ranks(detections: &mut [CanonicalPose]) {
    detections.sort_by_key(|d| d.rank);
    for (i, det) in detections.iter_mut().enumerate() {
        det.rank = i;
    }
}

/// Merge a detection file into a dataset.
///
/// Every frame gets the detections recorded for its id; frames with no entry
/// get an empty list. Frame ids in `det` that the dataset does not know are
/// reported as orphans and left out.
pub fn align(
    dataset: &SequenceDataset,
    det: &DetectionFile,
) -> Result<(SequenceDataset, Vec<Warning>), IngestError> {
    if let Some(det_seq) = &det.sequence_id {
        if *det_seq != dataset.sequence_id {
            return Err(IngestError::SequenceMismatch {
                dataset: dataset.sequence_id.clone(),
                detections: det_seq.clone(),
            });
        }
    }
    let mut warnings = Vec::new();
    let mut merged = dataset.clone();
    let known: std::collections::BTreeSet<&str> =
        dataset.frames.iter().map(|f| f.frame_id.as_str()).collect();
    for frame in &mut merged.frames {
        frame.detections = det.frames.get(&frame.frame_id).cloned().unwrap_or_default();
    }
    for frame_id in det.frames.keys() {
        if !known.contains(frame_id.as_str()) {
            warnings.push(
                Warning::new(
                    "orphan_frame",
                    "detection frame id not present in ground truth",
                )
                .with("frame_id", frame_id.clone())
                .with("method", det.method_name.clone()),
            );
        }
    }
    Ok((merged, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FrameRecord;
    use crate::pose::{empty_slots, Keypoint2D, Role};

    fn pose(rank: usize) -> CanonicalPose {
        let mut slots = empty_slots();
        slots[0] = Some(Keypoint2D::new(1.0, 1.0));
        CanonicalPose {
            keypoints: slots,
            score: None,
            rank,
            role: Role::Unknown,
        }
    }

    fn dataset(ids: &[&str]) -> SequenceDataset {
        let mut d = SequenceDataset::new("seq");
        d.frames = ids.iter().map(|id| FrameRecord::new(*id)).collect();
        d
    }

    #[test]
    fn align_fills_all_frames() {
        let d = dataset(&["f0", "f1"]);
        let det = DetectionFile {
            method_name: "m".into(),
            sequence_id: Some("seq".into()),
            frames: [
                ("f0".to_string(), vec![pose(0)]),
                ("f1".to_string(), vec![pose(0)]),
            ]
            .into_iter()
            .collect(),
        };
        let (merged, warnings) = align(&d, &det).unwrap();
        assert!(warnings.is_empty());
        assert!(merged.frames.iter().all(|f| f.detections.len() == 1));
    }

    #[test]
    fn align_missing_frames_get_empty_lists() {
        let ids: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
        let d = dataset(&ids.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        let det = DetectionFile {
            method_name: "m".into(),
            sequence_id: Some("seq".into()),
            frames: ids[..7]
                .iter()
                .map(|id| (id.clone(), vec![pose(0)]))
                .collect(),
        };
        let (merged, warnings) = align(&d, &det).unwrap();
        assert!(warnings.is_empty());
        let empty = merged
            .frames
            .iter()
            .filter(|f| f.detections.is_empty())
            .count();
        assert_eq!(empty, 3);
    }

    #[test]
    fn align_reports_orphans_and_leaves_them_out() {
        let d = dataset(&["f0"]);
        let det = DetectionFile {
            method_name: "m".into(),
            sequence_id: Some("seq".into()),
            frames: [
                ("f0".to_string(), vec![pose(0)]),
                ("ghost".to_string(), vec![pose(0)]),
            ]
            .into_iter()
            .collect(),
        };
        let (merged, warnings) = align(&d, &det).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].code, "orphan_frame");
        assert_eq!(merged.frames.len(), 1);
        assert_eq!(merged.frames[0].detections.len(), 1);
    }

    #[test]
    fn align_rejects_sequence_mismatch() {
        let d = dataset(&["f0"]);
        let det = DetectionFile {
            method_name: "m".into(),
            sequence_id: Some("other".into()),
            frames: BTreeMap::new(),
        };
        assert!(matches!(
            align(&d, &det),
            Err(IngestError::SequenceMismatch { .. })
        ));
    }

    #[test]
    fn align_preserves_frame_order() {
        let d = dataset(&["z", "a", "m"]);
        let det = DetectionFile {
            method_name: "m".into(),
            sequence_id: None,
            frames: BTreeMap::new(),
        };
        let (merged, _) = align(&d, &det).unwrap();
        let order: Vec<&str> = merged.frames.iter().map(|f| f.frame_id.as_str()).collect();
        assert_eq!(order, vec!["z", "a", "m"]);
    }

    #[test]
    fn normalize_ranks_sorts_and_reassigns() {
        let mut dets = vec![pose(5), pose(2), pose(9)];
        normalize_ranks(&mut dets);
        let ranks: Vec<usize> = dets.iter().map(|d| d.rank).collect();
        assert_eq!(ranks, vec![0, 1, 2]);
    }
}
