//! Per-frame JSON directory: one `<frame_id>.json` per frame, each holding a
//! `people` array of flat `[x0,y0,c0, x1,y1,c1, ...]` keypoint arrays in the
//! method's native order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{normalize_ranks, parse_err, DetectionFile, IngestError, Warning};
use crate::dataset::{FrameRecord, SequenceDataset};
use crate::pose::{empty_slots, GroundTruthPose, Keypoint2D, Role};
use crate::schema::{map_to_canonical, RawDetection, RawKeypoint, SchemaMap};
use crate::skeleton::CANONICAL_COUNT;

#[derive(Deserialize)]
struct FrameDoc {
    people: Vec<Vec<f64>>,
}

fn frame_files(dir: &Path) -> Result<Vec<(String, std::path::PathBuf)>, IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| IngestError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let frame_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            files.push((frame_id, path));
        }
    }
    files.sort();
    Ok(files)
}

fn read_frame(path: &Path) -> Result<FrameDoc, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| parse_err(path, format!("line {}", e.line()), e.to_string()))
}

fn flat_to_raw(
    path: &Path,
    flat: &[f64],
    native_count: usize,
) -> Result<Vec<Option<RawKeypoint>>, IngestError> {
    if flat.len() != native_count * 3 {
        return Err(parse_err(
            path,
            "people",
            format!(
                "flat keypoint array has {} values, expected {} (3 x {})",
                flat.len(),
                native_count * 3,
                native_count
            ),
        ));
    }
    flat.chunks_exact(3)
        .map(|t| {
            let (x, y, c) = (t[0], t[1], t[2]);
            if c == 0.0 && x == 0.0 && y == 0.0 {
                Ok(None) // sentinel for an undetected keypoint
            } else if !c.is_finite() || c < 0.0 {
                Err(parse_err(
                    path,
                    "people",
                    format!("confidence must be finite and >= 0, got {c}"),
                ))
            } else {
                Ok(Some(RawKeypoint {
                    x,
                    y,
                    confidence: Some(c),
                }))
            }
        })
        .collect()
}

/// Parse detections from a per-frame directory.
pub fn parse_detections(
    dir: &Path,
    schema: &SchemaMap,
) -> Result<(DetectionFile, Vec<Warning>), IngestError> {
    let mut warnings = Vec::new();
    let mut frames: BTreeMap<String, Vec<crate::pose::CanonicalPose>> = BTreeMap::new();
    for (frame_id, path) in frame_files(dir)? {
        let doc = read_frame(&path)?;
        let mut dets = Vec::with_capacity(doc.people.len());
        for flat in &doc.people {
            let raw = RawDetection {
                keypoints: flat_to_raw(&path, flat, schema.native_count)?,
                score: None,
                box_score: None,
                rank: None,
            };
            match map_to_canonical(&raw, schema)? {
                Some(mut pose) => {
                    pose.rank = dets.len();
                    dets.push(pose);
                }
                None => warnings.push(
                    Warning::new("empty_detection", "person entry mapped to zero keypoints")
                        .with("frame_id", frame_id.clone()),
                ),
            }
        }
        normalize_ranks(&mut dets);
        frames.insert(frame_id, dets);
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

/// Parse ground truth from a per-frame directory. The flat arrays must be in
/// canonical order (17 triples); one pose per `people` entry, role Infant.
pub fn parse_ground_truth(dir: &Path) -> Result<SequenceDataset, IngestError> {
    let mut dataset = SequenceDataset::new(
        dir.file_name()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default(),
    );
    for (frame_id, path) in frame_files(dir)? {
        let doc = read_frame(&path)?;
        let mut frame = FrameRecord::new(frame_id);
        for flat in &doc.people {
            let raw = flat_to_raw(&path, flat, CANONICAL_COUNT)?;
            let mut slots = empty_slots();
            for (i, kp) in raw.iter().enumerate() {
                if let Some(k) = kp {
                    slots[i] = Some(Keypoint2D::new(k.x, k.y));
                }
            }
            frame
                .ground_truths
                .push(GroundTruthPose::new(slots, Role::Infant));
        }
        dataset.frames.push(frame);
    }
    Ok(dataset)
}
