//! Wide CSV: one row per frame, columns `frame_id,<name>_x,<name>_y[,<name>_conf],...`
//! with canonical keypoint names. An empty cell is an absent coordinate.

use std::collections::BTreeMap;
use std::path::Path;

use super::{normalize_ranks, parse_err, DetectionFile, IngestError, Warning};
use crate::dataset::{FrameRecord, SequenceDataset};
use crate::pose::{empty_slots, GroundTruthPose, Keypoint2D, Role};
use crate::schema::{map_to_canonical, RawDetection, RawKeypoint, SchemaMap};
use crate::skeleton::{KeypointId, CANONICAL_COUNT};

struct Columns {
    /// Per canonical index: (x column, y column, optional conf column).
    slots: Vec<(usize, usize, usize, Option<usize>)>,
    frame_id: usize,
    role: Option<usize>,
    score: Option<usize>,
}

fn map_header(path: &Path, headers: &csv::StringRecord) -> Result<Columns, IngestError> {
    let find = |name: &str| headers.iter().position(|h| h == name);
    let frame_id =
        find("frame_id").ok_or_else(|| parse_err(path, "header", "missing `frame_id` column"))?;
    let mut slots = Vec::new();
    for i in 0..CANONICAL_COUNT {
        let id = KeypointId::from_canonical_index(i).unwrap();
        let x = find(&format!("{}_x", id.name()));
        let y = find(&format!("{}_y", id.name()));
        match (x, y) {
            (Some(x), Some(y)) => {
                slots.push((i, x, y, find(&format!("{}_conf", id.name()))));
            }
            (None, None) => {}
            _ => {
                return Err(parse_err(
                    path,
                    "header",
                    format!("keypoint `{}` has only one of _x/_y columns", id.name()),
                ))
            }
        }
    }
    if slots.is_empty() {
        return Err(parse_err(
            path,
            "header",
            "no canonical keypoint columns found",
        ));
    }
    Ok(Columns {
        slots,
        frame_id,
        role: find("role"),
        score: find("score"),
    })
}

fn cell_value(
    path: &Path,
    line: usize,
    record: &csv::StringRecord,
    idx: usize,
) -> Result<Option<f64>, IngestError> {
    let cell = record.get(idx).unwrap_or("").trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|e| {
        parse_err(
            path,
            format!("record {line}"),
            format!("bad number `{cell}`: {e}"),
        )
    })
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, "-", e.to_string()))
}

fn sequence_id_from(path: &Path) -> Option<String> {
    path.file_stem().map(|s| s.to_string_lossy().to_string())
}

/// Parse a wide CSV of ground-truth annotations: one pose per row.
pub fn parse_ground_truth(path: &Path) -> Result<SequenceDataset, IngestError> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, "header", e.to_string()))?
        .clone();
    let cols = map_header(path, &headers)?;

    let mut dataset = SequenceDataset::new(sequence_id_from(path).unwrap_or_default());
    let mut seen = std::collections::BTreeSet::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| parse_err(path, format!("record {line}"), e.to_string()))?;
        let frame_id = record.get(cols.frame_id).unwrap_or("").to_string();
        if frame_id.is_empty() {
            return Err(parse_err(path, format!("record {line}"), "empty frame_id"));
        }
        if !seen.insert(frame_id.clone()) {
            return Err(IngestError::DuplicateFrameId(frame_id));
        }
        let mut slots = empty_slots();
        for &(slot, xc, yc, _) in &cols.slots {
            let x = cell_value(path, line, &record, xc)?;
            let y = cell_value(path, line, &record, yc)?;
            if let (Some(x), Some(y)) = (x, y) {
                slots[slot] = Some(Keypoint2D::new(x, y));
            }
        }
        let role = match cols.role.map(|c| record.get(c).unwrap_or("").trim()) {
            Some("adult") => Role::Adult,
            _ => Role::Infant,
        };
        let mut frame = FrameRecord::new(frame_id);
        frame.ground_truths.push(GroundTruthPose::new(slots, role));
        dataset.frames.push(frame);
    }
    Ok(dataset)
}

/// Parse a wide CSV of detections. Multiple rows with the same frame id are
/// multiple detections, ranked by row order; an optional `score` column
/// feeds the native-score policy. Columns carry canonical names, so the
/// schema must describe a 17-slot canonical-ordered layout.
pub fn parse_detections(
    path: &Path,
    schema: &SchemaMap,
) -> Result<(DetectionFile, Vec<Warning>), IngestError> {
    if schema.native_count != CANONICAL_COUNT {
        return Err(IngestError::Schema(crate::schema::SchemaError::Mismatch {
            expected: schema.native_count,
            got: CANONICAL_COUNT,
        }));
    }
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, "header", e.to_string()))?
        .clone();
    let cols = map_header(path, &headers)?;

    let mut warnings = Vec::new();
    let mut frames: BTreeMap<String, Vec<crate::pose::CanonicalPose>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| parse_err(path, format!("record {line}"), e.to_string()))?;
        let frame_id = record.get(cols.frame_id).unwrap_or("").to_string();
        if frame_id.is_empty() {
            return Err(parse_err(path, format!("record {line}"), "empty frame_id"));
        }
        let mut native: Vec<Option<RawKeypoint>> = vec![None; CANONICAL_COUNT];
        for &(slot, xc, yc, conf_c) in &cols.slots {
            let x = cell_value(path, line, &record, xc)?;
            let y = cell_value(path, line, &record, yc)?;
            let confidence = match conf_c {
                Some(c) => cell_value(path, line, &record, c)?,
                None => None,
            };
            if let (Some(x), Some(y)) = (x, y) {
                if confidence == Some(0.0) && x == 0.0 && y == 0.0 {
                    continue; // sentinel
                }
                if let Some(c) = confidence {
                    if !c.is_finite() || c < 0.0 {
                        return Err(parse_err(
                            path,
                            format!("record {line}"),
                            format!("confidence must be finite and >= 0, got {c}"),
                        ));
                    }
                }
                native[slot] = Some(RawKeypoint { x, y, confidence });
            }
        }
        let score = match cols.score {
            Some(c) => cell_value(path, line, &record, c)?,
            None => None,
        };
        let raw = RawDetection {
            keypoints: native,
            score,
            box_score: None,
            rank: None,
        };
        let entry = frames.entry(frame_id.clone()).or_default();
        match map_to_canonical(&raw, schema)? {
            Some(mut pose) => {
                pose.rank = entry.len();
                entry.push(pose);
            }
            None => warnings.push(
                Warning::new("empty_detection", "row mapped to zero keypoints")
                    .with("frame_id", frame_id),
            ),
        }
    }
    for dets in frames.values_mut() {
        normalize_ranks(dets);
    }
    Ok((
        DetectionFile {
            method_name: schema.method_name.clone(),
            sequence_id: None,
            frames,
        },
        warnings,
    ))
}
