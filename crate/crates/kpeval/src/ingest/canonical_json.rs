//! The CanonicalJson interchange format: one UTF-8 document per sequence.
//!
//! ```json
//! { "sequence_id": "s", "expected_persons": 1, "normalization": "median",
//!   "frames": [ { "frame_id": "f0", "width": 640, "height": 480,
//!     "ground_truths": [ { "role": "infant", "keypoints": [ [x,y], null, ... ] } ],
//!     "detections":    [ { "rank": 0, "score": 0.9, "keypoints": [ [x,y,c], null, ... ] } ] } ] }
//! ```
//!
//! Keypoint arrays always hold 17 entries in canonical order; `null` encodes
//! an absent keypoint. Detection entries are `[x,y,c]`, or `[x,y]` when the
//! method carries no confidence. An optional `metadata` string map may
//! follow `normalization`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_ranks, parse_err, DetectionFile, IngestError, Warning};
use crate::dataset::{FrameRecord, NormalizationMode, SequenceDataset};
use crate::pose::{empty_slots, CanonicalPose, GroundTruthPose, Keypoint2D, Role};
use crate::schema::{resolve_score, RawDetection, RawKeypoint, SchemaError, SchemaMap};
use crate::skeleton::CANONICAL_COUNT;

#[derive(Serialize, Deserialize)]
struct DocSequence {
    sequence_id: String,
    expected_persons: u32,
    normalization: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
    frames: Vec<DocFrame>,
}

#[derive(Serialize, Deserialize)]
struct DocFrame {
    frame_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
    ground_truths: Vec<DocGroundTruth>,
    detections: Vec<DocDetection>,
}

#[derive(Serialize, Deserialize)]
struct DocGroundTruth {
    role: String,
    keypoints: Vec<Option<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct DocDetection {
    rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    keypoints: Vec<Option<Vec<f64>>>,
}

fn read_doc(path: &Path) -> Result<DocSequence, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| parse_err(path, format!("line {}", e.line()), e.to_string()))
}

fn role_from_str(path: &Path, frame: &str, s: &str) -> Result<Role, IngestError> {
    match s {
        "infant" => Ok(Role::Infant),
        "adult" => Ok(Role::Adult),
        other => Err(parse_err(
            path,
            format!("frame {frame}"),
            format!("unknown role `{other}` (expected `infant` or `adult`)"),
        )),
    }
}

fn check_slot_count(path: &Path, frame: &str, n: usize) -> Result<(), IngestError> {
    if n != CANONICAL_COUNT {
        return Err(parse_err(
            path,
            format!("frame {frame}"),
            format!("keypoint array has {n} entries, expected {CANONICAL_COUNT}"),
        ));
    }
    Ok(())
}

fn detection_to_raw(
    path: &Path,
    frame: &str,
    det: &DocDetection,
) -> Result<RawDetection, IngestError> {
    check_slot_count(path, frame, det.keypoints.len())?;
    let mut keypoints = Vec::with_capacity(CANONICAL_COUNT);
    for slot in &det.keypoints {
        let kp = match slot {
            None => None,
            Some(values) => match values.as_slice() {
                [x, y] => Some(RawKeypoint {
                    x: *x,
                    y: *y,
                    confidence: None,
                }),
                [x, y, c] => {
                    // Sentinel: zero confidence at the origin means absent.
                    if *c == 0.0 && *x == 0.0 && *y == 0.0 {
                        None
                    } else {
                        if !c.is_finite() || *c < 0.0 {
                            return Err(parse_err(
                                path,
                                format!("frame {frame}"),
                                format!("confidence must be finite and >= 0, got {c}"),
                            ));
                        }
                        Some(RawKeypoint {
                            x: *x,
                            y: *y,
                            confidence: Some(*c),
                        })
                    }
                }
                other => {
                    return Err(parse_err(
                        path,
                        format!("frame {frame}"),
                        format!(
                            "detection keypoint must be [x,y] or [x,y,conf], got {} values",
                            other.len()
                        ),
                    ))
                }
            },
        };
        keypoints.push(kp);
    }
    Ok(RawDetection {
        keypoints,
        score: det.score,
        box_score: None,
        rank: Some(det.rank),
    })
}

/// Parse a full CanonicalJson document: ground truths and detections.
pub fn parse_canonical_json(path: &Path) -> Result<SequenceDataset, IngestError> {
    let doc = read_doc(path)?;
    let normalization = match doc.normalization.as_str() {
        "median" => NormalizationMode::PerSequenceMedian,
        "per_image" => NormalizationMode::PerImage,
        other => {
            return Err(parse_err(
                path,
                "normalization",
                format!("unknown mode `{other}` (expected `median` or `per_image`)"),
            ))
        }
    };

    let mut dataset = SequenceDataset::new(doc.sequence_id);
    dataset.normalization = normalization;
    dataset.expected_persons = doc.expected_persons;
    dataset.metadata = doc.metadata;

    let mut seen = std::collections::BTreeSet::new();
    for frame in &doc.frames {
        if !seen.insert(frame.frame_id.clone()) {
            return Err(IngestError::DuplicateFrameId(frame.frame_id.clone()));
        }
        let mut record = FrameRecord::new(frame.frame_id.clone());
        record.width = frame.width;
        record.height = frame.height;
        for gt in &frame.ground_truths {
            check_slot_count(path, &frame.frame_id, gt.keypoints.len())?;
            let mut slots = empty_slots();
            for (i, slot) in gt.keypoints.iter().enumerate() {
                if let Some([x, y]) = slot {
                    slots[i] = Some(Keypoint2D::new(*x, *y));
                }
            }
            record.ground_truths.push(GroundTruthPose::new(
                slots,
                role_from_str(path, &frame.frame_id, &gt.role)?,
            ));
        }
        for det in &frame.detections {
            let raw = detection_to_raw(path, &frame.frame_id, det)?;
            let mut slots = empty_slots();
            for (i, kp) in raw.keypoints.iter().enumerate() {
                if let Some(k) = kp {
                    slots[i] = Some(Keypoint2D {
                        x: k.x,
                        y: k.y,
                        confidence: k.confidence,
                    });
                }
            }
            if slots.iter().all(|s| s.is_none()) {
                continue; // empty detections are absence
            }
            record.detections.push(CanonicalPose {
                keypoints: slots,
                score: det.score,
                rank: det.rank,
                role: Role::Unknown,
            });
        }
        normalize_ranks(&mut record.detections);
        dataset.frames.push(record);
    }
    Ok(dataset)
}

/// Read only the detections out of a CanonicalJson document.
///
/// The geometry is already canonical, so `schema` must describe a
/// 17-keypoint layout; its score policy is re-applied to each detection.
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
    let dataset = parse_canonical_json(path)?;
    let mut warnings = Vec::new();
    let mut frames = std::collections::BTreeMap::new();
    for frame in &dataset.frames {
        let mut out = Vec::with_capacity(frame.detections.len());
        for det in &frame.detections {
            let raw = RawDetection {
                keypoints: det
                    .keypoints
                    .iter()
                    .map(|s| {
                        s.map(|k| RawKeypoint {
                            x: k.x,
                            y: k.y,
                            confidence: k.confidence,
                        })
                    })
                    .collect(),
                score: det.score,
                box_score: None,
                rank: Some(det.rank),
            };
            let score = resolve_score(&det.keypoints, &raw, schema.score_policy);
            let mut pose = det.clone();
            pose.score = score;
            out.push(pose);
        }
        if out.is_empty() && !frame.detections.is_empty() {
            warnings.push(
                Warning::new("empty_detection", "detection with no keypoints dropped")
                    .with("frame_id", frame.frame_id.clone()),
            );
        }
        frames.insert(frame.frame_id.clone(), out);
    }
    Ok((
        DetectionFile {
            method_name: schema.method_name.clone(),
            sequence_id: Some(dataset.sequence_id.clone()),
            frames,
        },
        warnings,
    ))
}

/// Write a dataset as a CanonicalJson document. Parsing the result yields a
/// value-identical dataset; emitting twice yields identical bytes.
pub fn emit_canonical_json(dataset: &SequenceDataset, path: &Path) -> Result<(), IngestError> {
    let doc = DocSequence {
        sequence_id: dataset.sequence_id.clone(),
        expected_persons: dataset.expected_persons,
        normalization: match dataset.normalization {
            NormalizationMode::PerSequenceMedian => "median".to_string(),
            NormalizationMode::PerImage => "per_image".to_string(),
        },
        metadata: dataset.metadata.clone(),
        frames: dataset
            .frames
            .iter()
            .map(|frame| DocFrame {
                frame_id: frame.frame_id.clone(),
                width: frame.width,
                height: frame.height,
                ground_truths: frame
                    .ground_truths
                    .iter()
                    .map(|gt| DocGroundTruth {
                        role: match gt.role {
                            Role::Adult => "adult".to_string(),
                            _ => "infant".to_string(),
                        },
                        keypoints: gt.keypoints.iter().map(|s| s.map(|k| [k.x, k.y])).collect(),
                    })
                    .collect(),
                detections: frame
                    .detections
                    .iter()
                    .map(|det| DocDetection {
                        rank: det.rank,
                        score: det.score,
                        keypoints: det
                            .keypoints
                            .iter()
                            .map(|s| {
                                s.map(|k| match k.confidence {
                                    Some(c) => vec![k.x, k.y, c],
                                    None => vec![k.x, k.y],
                                })
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable document");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FormatKind;
    use crate::schema::ScorePolicy;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("kpeval_canonical_json_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    fn minimal_doc() -> String {
        let mut gt_slots: Vec<String> = vec!["null".into(); 17];
        gt_slots[0] = "[10.0,20.0]".into();
        gt_slots[5] = "[30.0,40.0]".into();
        format!(
            r#"{{"sequence_id":"s1","expected_persons":1,"normalization":"median",
                "frames":[{{"frame_id":"f0","ground_truths":[{{"role":"infant","keypoints":[{}]}}],
                "detections":[]}}]}}"#,
            gt_slots.join(",")
        )
    }

    #[test]
    fn minimal_document_parses() {
        let path = write_temp("minimal.json", &minimal_doc());
        let ds = crate::ingest::parse_ground_truth(&path, FormatKind::CanonicalJson).unwrap();
        assert_eq!(ds.frames.len(), 1);
        assert_eq!(ds.frames[0].ground_truths[0].annotated_count(), 2);
    }

    #[test]
    fn duplicate_frame_id_is_rejected() {
        let nulls = vec!["null"; 17].join(",");
        let doc = format!(
            r#"{{"sequence_id":"s1","expected_persons":1,"normalization":"median",
                "frames":[
                  {{"frame_id":"f0","ground_truths":[{{"role":"infant","keypoints":[{nulls}]}}],"detections":[]}},
                  {{"frame_id":"f0","ground_truths":[],"detections":[]}}]}}"#
        );
        let path = write_temp("dup.json", &doc);
        assert!(matches!(
            parse_canonical_json(&path),
            Err(IngestError::DuplicateFrameId(id)) if id == "f0"
        ));
    }

    #[test]
    fn two_detections_get_file_order_ranks() {
        let mut det_slots: Vec<String> = vec!["null".into(); 17];
        det_slots[0] = "[1.0,2.0,0.5]".into();
        let kp = det_slots.join(",");
        let doc = format!(
            r#"{{"sequence_id":"s1","expected_persons":1,"normalization":"median",
                "frames":[{{"frame_id":"f0","ground_truths":[],
                "detections":[
                  {{"rank":0,"score":0.9,"keypoints":[{kp}]}},
                  {{"rank":1,"score":0.4,"keypoints":[{kp}]}}]}}]}}"#
        );
        let path = write_temp("two_dets.json", &doc);
        let ds = parse_canonical_json(&path).unwrap();
        let ranks: Vec<usize> = ds.frames[0].detections.iter().map(|d| d.rank).collect();
        assert_eq!(ranks, vec![0, 1]);
        assert_eq!(ds.frames[0].detections[0].score, Some(0.9));
    }

    #[test]
    fn sentinel_triple_means_absent() {
        let mut det_slots: Vec<String> = vec!["null".into(); 17];
        det_slots[0] = "[0.0,0.0,0.0]".into();
        det_slots[1] = "[5.0,5.0,0.8]".into();
        let kp = det_slots.join(",");
        let doc = format!(
            r#"{{"sequence_id":"s1","expected_persons":1,"normalization":"median",
                "frames":[{{"frame_id":"f0","ground_truths":[],
                "detections":[{{"rank":0,"keypoints":[{kp}]}}]}}]}}"#
        );
        let path = write_temp("sentinel.json", &doc);
        let ds = parse_canonical_json(&path).unwrap();
        let det = &ds.frames[0].detections[0];
        assert_eq!(det.present_count(), 1);
        assert!(det.keypoints[0].is_none());
    }

    #[test]
    fn negative_confidence_is_rejected() {
        let mut det_slots: Vec<String> = vec!["null".into(); 17];
        det_slots[0] = "[1.0,2.0,-0.5]".into();
        let kp = det_slots.join(",");
        let doc = format!(
            r#"{{"sequence_id":"s1","expected_persons":1,"normalization":"median",
                "frames":[{{"frame_id":"f0","ground_truths":[],
                "detections":[{{"rank":0,"keypoints":[{kp}]}}]}}]}}"#
        );
        let path = write_temp("neg_conf.json", &doc);
        assert!(matches!(
            parse_canonical_json(&path),
            Err(IngestError::Parse { .. })
        ));
    }

    #[test]
    fn zero_frames_is_an_empty_dataset() {
        let doc =
            r#"{"sequence_id":"s1","expected_persons":1,"normalization":"median","frames":[]}"#;
        let path = write_temp("empty.json", doc);
        assert!(matches!(
            crate::ingest::parse_ground_truth(&path, FormatKind::CanonicalJson),
            Err(IngestError::EmptyDataset(_))
        ));
    }

    #[test]
    fn emit_parse_round_trips() {
        let path = write_temp("roundtrip_in.json", &minimal_doc());
        let ds = parse_canonical_json(&path).unwrap();
        let out = std::env::temp_dir().join("kpeval_canonical_json_tests/roundtrip_out.json");
        emit_canonical_json(&ds, &out).unwrap();
        let ds2 = parse_canonical_json(&out).unwrap();
        assert_eq!(ds, ds2);
        // Emission is byte-deterministic.
        let bytes1 = std::fs::read(&out).unwrap();
        emit_canonical_json(&ds2, &out).unwrap();
        assert_eq!(bytes1, std::fs::read(&out).unwrap());
    }

    #[test]
    fn detections_reader_applies_score_policy() {
        let mut det_slots: Vec<String> = vec!["null".into(); 17];
        det_slots[0] = "[1.0,2.0,0.2]".into();
        det_slots[1] = "[1.0,2.0,0.6]".into();
        det_slots[2] = "[1.0,2.0,1.0]".into();
        let kp = det_slots.join(",");
        let doc = format!(
            r#"{{"sequence_id":"s1","expected_persons":1,"normalization":"median",
                "frames":[{{"frame_id":"f0","ground_truths":[],
                "detections":[{{"rank":0,"score":0.11,"keypoints":[{kp}]}}]}}]}}"#
        );
        let path = write_temp("score_policy.json", &doc);
        let schema = SchemaMap::identity("m", ScorePolicy::MedianOfConfidences);
        let (det, _) = parse_detections(&path, &schema).unwrap();
        assert_eq!(det.frames["f0"][0].score, Some(0.6));
        let schema_none = SchemaMap::identity("m", ScorePolicy::NoScore);
        let (det_none, _) = parse_detections(&path, &schema_none).unwrap();
        assert_eq!(det_none.frames["f0"][0].score, None);
    }

    #[test]
    fn zero_detections_frame_is_an_empty_list() {
        let path = write_temp("empty_frame.json", &minimal_doc());
        let schema = SchemaMap::identity("m", ScorePolicy::NativeScore);
        let (det, _) = parse_detections(&path, &schema).unwrap();
        assert_eq!(det.frames["f0"], Vec::<CanonicalPose>::new());
    }
}
