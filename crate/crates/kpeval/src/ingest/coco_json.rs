//! COCO result JSON: a flat array of detection records, each with an
//! `image_id`, a 51-value keypoint array (17 x,y,conf triples in canonical
//! order) and a `score`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{normalize_ranks, parse_err, DetectionFile, IngestError, Warning};
use crate::schema::{map_to_canonical, RawDetection, RawKeypoint, SchemaError, SchemaMap};
use crate::skeleton::CANONICAL_COUNT;

#[derive(Deserialize)]
struct CocoRecord {
    image_id: serde_json::Value,
    keypoints: Vec<f64>,
    #[serde(default)]
    score: Option<f64>,
}

fn image_id_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

pub fn parse_detections(
    path: &Path,
    schema: &SchemaMap,
) -> Result<(DetectionFile, Vec<Warning>), IngestError> {
    if schema.native_count != CANONICAL_COUNT {
        return Err(IngestError::Schema(SchemaError::Mismatch {
            expected: schema.native_count,
            got: CANONICAL_COUNT,
        }));
    }
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let records: Vec<CocoRecord> = serde_json::from_str(&text)
        .map_err(|e| parse_err(path, format!("line {}", e.line()), e.to_string()))?;

    let mut warnings = Vec::new();
    let mut frames: BTreeMap<String, Vec<crate::pose::CanonicalPose>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        let frame_id = image_id_string(&rec.image_id).ok_or_else(|| {
            parse_err(
                path,
                format!("record {i}"),
                "image_id must be a number or string",
            )
        })?;
        if rec.keypoints.len() != CANONICAL_COUNT * 3 {
            return Err(parse_err(
                path,
                format!("record {i}"),
                format!(
                    "keypoints array has {} values, expected 51",
                    rec.keypoints.len()
                ),
            ));
        }
        let keypoints: Vec<Option<RawKeypoint>> = rec
            .keypoints
            .chunks_exact(3)
            .map(|t| {
                let (x, y, c) = (t[0], t[1], t[2]);
                if c == 0.0 && x == 0.0 && y == 0.0 {
                    Ok(None)
                } else if !c.is_finite() || c < 0.0 {
                    Err(parse_err(
                        path,
                        format!("record {i}"),
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
            .collect::<Result<_, _>>()?;
        let raw = RawDetection {
            keypoints,
            score: rec.score,
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
                Warning::new("empty_detection", "record mapped to zero keypoints")
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
