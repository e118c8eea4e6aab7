//! Declarative mapping from a method's native keypoint layout onto the
//! canonical skeleton.
//!
//! Methods emit 14, 17, 18 or 33 keypoints in their own orders. A
//! [`SchemaMap`] names, for each canonical keypoint, which native index (or
//! average of native indices) supplies it, and which score policy applies to
//! whole detections. Schema files are plain text:
//!
//! ```text
//! # OpenPose BODY-18; native index 1 (its own neck) is unmapped and drops.
//! method = openpose
//! native_count = 18
//! score_policy = median_confidence
//! map 0 -> nose
//! map 14 -> right_eye
//! composite left_hip <- 11
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{empty_slots, CanonicalPose, Keypoint2D, Role};
use crate::skeleton::{KeypointId, CANONICAL_COUNT, REAL_KEYPOINTS};

/// How a whole-detection score is obtained for a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScorePolicy {
    /// The method emits a score per detection; use it as stored.
    #[default]
    NativeScore,
    /// Median of the present keypoints' confidences stands in for a score.
    MedianOfConfidences,
    /// Score of the bounding box supplied by the method's detector.
    DetectorBoxScore,
    /// The method provides neither scores nor confidences.
    NoScore,
}

impl ScorePolicy {
    pub fn parse(s: &str) -> Option<ScorePolicy> {
        match s {
            "native" | "native_score" => Some(ScorePolicy::NativeScore),
            "median_confidence" | "median_of_confidences" => Some(ScorePolicy::MedianOfConfidences),
            "box_score" | "detector_box_score" => Some(ScorePolicy::DetectorBoxScore),
            "none" | "no_score" => Some(ScorePolicy::NoScore),
            _ => None,
        }
    }
}

/// One native keypoint as read from a method output file, before mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawKeypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: Option<f64>,
}

/// One raw detection: native keypoints plus whatever per-detection values
/// the source format carried.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawDetection {
    pub keypoints: Vec<Option<RawKeypoint>>,
    pub score: Option<f64>,
    /// Detector bounding-box score, when the format carries one.
    pub box_score: Option<f64>,
    pub rank: Option<usize>,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema mismatch: schema expects {expected} native keypoints, record has {got}")]
    Mismatch { expected: usize, got: usize },
    #[error("schema entry points at native index {index}, but native_count is {native_count}")]
    InvalidIndex { index: usize, native_count: usize },
    #[error("canonical keypoint {0} is mapped more than once")]
    DuplicateTarget(KeypointId),
    #[error("virtual keypoint {0} cannot be a mapping target")]
    VirtualTarget(KeypointId),
    #[error("composite entry for {0} has no source indices")]
    EmptyComposite(KeypointId),
    #[error("failed to read schema file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema file {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Declarative native-to-canonical keypoint mapping for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaMap {
    pub method_name: String,
    pub native_count: usize,
    /// (native index, canonical target) pairs.
    pub entries: Vec<(usize, KeypointId)>,
    /// Canonical targets produced as the average of several native points.
    pub composite_entries: Vec<(KeypointId, Vec<usize>)>,
    pub score_policy: ScorePolicy,
}

impl SchemaMap {
    /// The 17-keypoint identity layout (native order = canonical order).
    pub fn identity(method_name: impl Into<String>, score_policy: ScorePolicy) -> Self {
        SchemaMap {
            method_name: method_name.into(),
            native_count: CANONICAL_COUNT,
            entries: REAL_KEYPOINTS
                .iter()
                .enumerate()
                .map(|(i, id)| (i, *id))
                .collect(),
            composite_entries: Vec::new(),
            score_policy,
        }
    }

    /// Validate index bounds, target uniqueness and non-virtual targets.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = [false; CANONICAL_COUNT];
        let mut check_target = |id: KeypointId| -> Result<usize, SchemaError> {
            let idx = id.canonical_index().ok_or(SchemaError::VirtualTarget(id))?;
            if seen[idx] {
                return Err(SchemaError::DuplicateTarget(id));
            }
            seen[idx] = true;
            Ok(idx)
        };
        for &(native, id) in &self.entries {
            check_target(id)?;
            if native >= self.native_count {
                return Err(SchemaError::InvalidIndex {
                    index: native,
                    native_count: self.native_count,
                });
            }
        }
        for (id, sources) in &self.composite_entries {
            check_target(*id)?;
            if sources.is_empty() {
                return Err(SchemaError::EmptyComposite(*id));
            }
            for &native in sources {
                if native >= self.native_count {
                    return Err(SchemaError::InvalidIndex {
                        index: native,
                        native_count: self.native_count,
                    });
                }
            }
        }
        Ok(())
    }

    /// Which canonical keypoints this schema can express at all. Missing-data
    /// accounting only counts absences inside this set.
    pub fn expressible(&self) -> [bool; CANONICAL_COUNT] {
        let mut out = [false; CANONICAL_COUNT];
        for &(_, id) in &self.entries {
            if let Some(i) = id.canonical_index() {
                out[i] = true;
            }
        }
        for (id, _) in &self.composite_entries {
            if let Some(i) = id.canonical_index() {
                out[i] = true;
            }
        }
        out
    }

    /// Parse a schema file (see module docs for the format).
    pub fn from_file(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut method_name = String::new();
        let mut native_count = None;
        let mut score_policy = ScorePolicy::NativeScore;
        let mut entries = Vec::new();
        let mut composite_entries: Vec<(KeypointId, Vec<usize>)> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| SchemaError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message,
            };
            if let Some(rest) = line.strip_prefix("map ") {
                let (idx, name) = rest
                    .split_once("->")
                    .ok_or_else(|| err("expected `map <index> -> <name>`".into()))?;
                let index: usize = idx
                    .trim()
                    .parse()
                    .map_err(|e| err(format!("bad native index `{}`: {}", idx.trim(), e)))?;
                let id = KeypointId::from_name(name.trim())
                    .ok_or_else(|| err(format!("unknown keypoint `{}`", name.trim())))?;
                entries.push((index, id));
            } else if let Some(rest) = line.strip_prefix("composite ") {
                let (name, idxs) = rest
                    .split_once("<-")
                    .ok_or_else(|| err("expected `composite <name> <- <indices>`".into()))?;
                let id = KeypointId::from_name(name.trim())
                    .ok_or_else(|| err(format!("unknown keypoint `{}`", name.trim())))?;
                let sources = idxs
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|e| err(format!("bad native index `{}`: {}", t, e)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                composite_entries.push((id, sources));
            } else if let Some((key, value)) = line.split_once('=') {
                match key.trim() {
                    "method" => method_name = value.trim().to_string(),
                    "native_count" => {
                        native_count = Some(value.trim().parse().map_err(|e| {
                            err(format!("bad native_count `{}`: {}", value.trim(), e))
                        })?)
                    }
                    "score_policy" => {
                        score_policy = ScorePolicy::parse(value.trim()).ok_or_else(|| {
                            err(format!("unknown score_policy `{}`", value.trim()))
                        })?
                    }
                    other => return Err(err(format!("unknown key `{}`", other))),
                }
            } else {
                return Err(err(format!("cannot parse line `{}`", line)));
            }
        }
        let native_count = native_count.ok_or_else(|| SchemaError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: "missing `native_count`".into(),
        })?;
        let schema = SchemaMap {
            method_name,
            native_count,
            entries,
            composite_entries,
            score_policy,
        };
        schema.validate()?;
        Ok(schema)
    }
}

/// Median over a slice of confidences; even counts average the central pair.
fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("confidences are finite"));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Map one raw detection through a schema onto the canonical skeleton.
///
/// Composite targets average their source points and are present only when
/// every source is; their confidence is the mean of the source confidences
/// when all sources carry one. Unmapped canonical keypoints stay absent.
/// Returns `Ok(None)` when no keypoint maps (an empty detection).
pub fn map_to_canonical(
    raw: &RawDetection,
    schema: &SchemaMap,
) -> Result<Option<CanonicalPose>, SchemaError> {
    schema.validate()?;
    if raw.keypoints.len() != schema.native_count {
        return Err(SchemaError::Mismatch {
            expected: schema.native_count,
            got: raw.keypoints.len(),
        });
    }

    let mut slots = empty_slots();
    for &(native, id) in &schema.entries {
        if let Some(kp) = raw.keypoints[native] {
            slots[id.canonical_index().expect("validated non-virtual")] = Some(Keypoint2D {
                x: kp.x,
                y: kp.y,
                confidence: kp.confidence,
            });
        }
    }
    for (id, sources) in &schema.composite_entries {
        let points: Vec<RawKeypoint> = sources.iter().filter_map(|&i| raw.keypoints[i]).collect();
        if points.len() != sources.len() {
            continue; // present only if all sources present
        }
        let n = points.len() as f64;
        let x = points.iter().map(|p| p.x).sum::<f64>() / n;
        let y = points.iter().map(|p| p.y).sum::<f64>() / n;
        let confidence = if points.iter().all(|p| p.confidence.is_some()) {
            Some(points.iter().map(|p| p.confidence.unwrap()).sum::<f64>() / n)
        } else {
            None
        };
        slots[id.canonical_index().expect("validated non-virtual")] =
            Some(Keypoint2D { x, y, confidence });
    }

    if slots.iter().all(|s| s.is_none()) {
        return Ok(None);
    }

    let score = resolve_score(&slots, raw, schema.score_policy);
    Ok(Some(CanonicalPose {
        keypoints: slots,
        score,
        rank: raw.rank.unwrap_or(0),
        role: Role::Unknown,
    }))
}

/// Apply a score policy to a mapped pose.
///
/// None of the wire formats carries a separate box-score field, so methods
/// whose score IS their detector's box score store it in the ordinary score
/// slot; the `DetectorBoxScore` policy falls back to it accordingly.
pub fn resolve_score(
    slots: &crate::pose::KeypointSlots,
    raw: &RawDetection,
    policy: ScorePolicy,
) -> Option<f64> {
    match policy {
        ScorePolicy::NativeScore => raw.score,
        ScorePolicy::DetectorBoxScore => raw.box_score.or(raw.score),
        ScorePolicy::NoScore => None,
        ScorePolicy::MedianOfConfidences => {
            let mut confs: Vec<f64> = slots
                .iter()
                .flatten()
                .filter_map(|k| k.confidence)
                .collect();
            median(&mut confs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(points: Vec<Option<(f64, f64, f64)>>) -> RawDetection {
        RawDetection {
            keypoints: points
                .into_iter()
                .map(|p| {
                    p.map(|(x, y, c)| RawKeypoint {
                        x,
                        y,
                        confidence: Some(c),
                    })
                })
                .collect(),
            score: Some(0.9),
            box_score: None,
            rank: Some(0),
        }
    }

    #[test]
    fn identity_map_is_identity() {
        let schema = SchemaMap::identity("m", ScorePolicy::NativeScore);
        let det = raw((0..17)
            .map(|i| Some((i as f64, 2.0 * i as f64, 0.5)))
            .collect());
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        assert_eq!(pose.present_count(), 17);
        for i in 0..17 {
            let kp = pose.keypoints[i].unwrap();
            assert_eq!((kp.x, kp.y), (i as f64, 2.0 * i as f64));
        }
        assert_eq!(pose.score, Some(0.9));
    }

    #[test]
    fn partial_schema_leaves_unmapped_absent() {
        // 14-keypoint layout lacking nose and both ears.
        let targets = [
            KeypointId::LEye,
            KeypointId::REye,
            KeypointId::LShoulder,
            KeypointId::RShoulder,
            KeypointId::LElbow,
            KeypointId::RElbow,
            KeypointId::LWrist,
            KeypointId::RWrist,
            KeypointId::LHip,
            KeypointId::RHip,
            KeypointId::LKnee,
            KeypointId::RKnee,
            KeypointId::LAnkle,
            KeypointId::RAnkle,
        ];
        let schema = SchemaMap {
            method_name: "m14".into(),
            native_count: 14,
            entries: targets.iter().enumerate().map(|(i, id)| (i, *id)).collect(),
            composite_entries: vec![],
            score_policy: ScorePolicy::NoScore,
        };
        let det = raw((0..14).map(|i| Some((i as f64, i as f64, 1.0))).collect());
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        assert!(pose.keypoint(KeypointId::Nose).is_none());
        assert!(pose.keypoint(KeypointId::LEar).is_none());
        assert!(pose.keypoint(KeypointId::REar).is_none());
        assert_eq!(pose.present_count(), 14);
        assert_eq!(pose.score, None);
        let expressible = schema.expressible();
        assert_eq!(expressible.iter().filter(|&&e| e).count(), 14);
        assert!(!expressible[KeypointId::Nose.canonical_index().unwrap()]);
    }

    #[test]
    fn composite_averages_sources() {
        let schema = SchemaMap {
            method_name: "m".into(),
            native_count: 2,
            entries: vec![],
            composite_entries: vec![(KeypointId::LHip, vec![0, 1])],
            score_policy: ScorePolicy::MedianOfConfidences,
        };
        let det = raw(vec![Some((0.0, 0.0, 0.4)), Some((2.0, 2.0, 0.8))]);
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        let hip = pose.keypoint(KeypointId::LHip).unwrap();
        assert_eq!((hip.x, hip.y), (1.0, 1.0));
        assert_eq!(hip.confidence, Some(0.6000000000000001));
    }

    #[test]
    fn composite_absent_when_any_source_missing() {
        let schema = SchemaMap {
            method_name: "m".into(),
            native_count: 2,
            entries: vec![],
            composite_entries: vec![(KeypointId::LHip, vec![0, 1])],
            score_policy: ScorePolicy::NoScore,
        };
        let det = raw(vec![Some((0.0, 0.0, 0.4)), None]);
        assert!(map_to_canonical(&det, &schema).unwrap().is_none());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let schema = SchemaMap::identity("m", ScorePolicy::NativeScore);
        let det = raw(vec![Some((0.0, 0.0, 1.0)); 5]);
        assert!(matches!(
            map_to_canonical(&det, &schema),
            Err(SchemaError::Mismatch {
                expected: 17,
                got: 5
            })
        ));
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let schema = SchemaMap {
            method_name: "m".into(),
            native_count: 3,
            entries: vec![(7, KeypointId::Nose)],
            composite_entries: vec![],
            score_policy: ScorePolicy::NoScore,
        };
        assert!(matches!(
            schema.validate(),
            Err(SchemaError::InvalidIndex {
                index: 7,
                native_count: 3
            })
        ));
    }

    #[test]
    fn duplicate_and_virtual_targets_rejected() {
        let dup = SchemaMap {
            method_name: "m".into(),
            native_count: 4,
            entries: vec![(0, KeypointId::Nose), (1, KeypointId::Nose)],
            composite_entries: vec![],
            score_policy: ScorePolicy::NoScore,
        };
        assert!(matches!(
            dup.validate(),
            Err(SchemaError::DuplicateTarget(_))
        ));
        let virt = SchemaMap {
            method_name: "m".into(),
            native_count: 4,
            entries: vec![(0, KeypointId::Neck)],
            composite_entries: vec![],
            score_policy: ScorePolicy::NoScore,
        };
        assert!(matches!(
            virt.validate(),
            Err(SchemaError::VirtualTarget(_))
        ));
    }

    #[test]
    fn identity_map_is_idempotent() {
        let schema = SchemaMap::identity("m", ScorePolicy::NativeScore);
        let det = raw((0..17)
            .map(|i| {
                if i % 3 == 0 {
                    None
                } else {
                    Some((i as f64, 1.0, 0.7))
                }
            })
            .collect());
        let once = map_to_canonical(&det, &schema).unwrap().unwrap();
        // Feed the mapped pose back through as a raw detection.
        let again_raw = RawDetection {
            keypoints: once
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
            score: once.score,
            box_score: None,
            rank: Some(once.rank),
        };
        let twice = map_to_canonical(&again_raw, &schema).unwrap().unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn present_set_is_image_of_native_present() {
        let schema = SchemaMap::identity("m", ScorePolicy::NoScore);
        let det = raw((0..17)
            .map(|i| if i < 5 { Some((1.0, 1.0, 1.0)) } else { None })
            .collect());
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        assert_eq!(pose.present_count(), 5);
    }

    #[test]
    fn box_score_policy_falls_back_to_the_stored_score() {
        let schema = SchemaMap {
            method_name: "m".into(),
            native_count: 1,
            entries: vec![(0, KeypointId::Nose)],
            composite_entries: vec![],
            score_policy: ScorePolicy::DetectorBoxScore,
        };
        let mut det = raw(vec![Some((1.0, 2.0, 0.9))]);
        det.box_score = Some(0.77);
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        assert_eq!(pose.score, Some(0.77));
        let det = raw(vec![Some((1.0, 2.0, 0.9))]); // box_score absent
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        assert_eq!(pose.score, Some(0.9)); // raw() stores score 0.9
    }

    #[test]
    fn median_of_confidences_policy() {
        let schema = SchemaMap {
            method_name: "m".into(),
            native_count: 3,
            entries: vec![
                (0, KeypointId::Nose),
                (1, KeypointId::LEye),
                (2, KeypointId::REye),
            ],
            composite_entries: vec![],
            score_policy: ScorePolicy::MedianOfConfidences,
        };
        let det = raw(vec![
            Some((0.0, 0.0, 0.2)),
            Some((1.0, 1.0, 0.6)),
            Some((2.0, 2.0, 1.0)),
        ]);
        let pose = map_to_canonical(&det, &schema).unwrap().unwrap();
        assert_eq!(pose.score, Some(0.6));
    }
}
