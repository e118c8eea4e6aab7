//! The canonical skeleton: keypoint identifiers, their fixed order, and the
//! per-keypoint falloff table used by the keypoint-similarity metric.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of real keypoints on the canonical skeleton.
pub const CANONICAL_COUNT: usize = 17;

/// Identifier of a canonical keypoint.
///
/// The first 17 variants are real keypoints with a stable serialized index
/// 0..=16. `Neck` and `MidHip` are virtual: they never appear in ingested
/// data and are only produced by derivation from shoulder / hip midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointId {
    Nose,
    LEye,
    REye,
    LEar,
    REar,
    LShoulder,
    RShoulder,
    LElbow,
    RElbow,
    LWrist,
    RWrist,
    LHip,
    RHip,
    LKnee,
    RKnee,
    LAnkle,
    RAnkle,
    Neck,
    MidHip,
}

/// The 17 real keypoints in canonical order.
pub const REAL_KEYPOINTS: [KeypointId; CANONICAL_COUNT] = [
    KeypointId::Nose,
    KeypointId::LEye,
    KeypointId::REye,
    KeypointId::LEar,
    KeypointId::REar,
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

impl KeypointId {
    /// Serialized index of a real keypoint, `None` for the virtual ones.
    pub fn canonical_index(self) -> Option<usize> {
        match self {
            KeypointId::Neck | KeypointId::MidHip => None,
            _ => Some(self as usize),
        }
    }

    /// Real keypoint at canonical index `i` (0..=16).
    pub fn from_canonical_index(i: usize) -> Option<KeypointId> {
        REAL_KEYPOINTS.get(i).copied()
    }

    pub fn is_virtual(self) -> bool {
        matches!(self, KeypointId::Neck | KeypointId::MidHip)
    }

    /// Canonical name, used in CSV headers, schema files and sigma overrides.
    pub fn name(self) -> &'static str {
        match self {
            KeypointId::Nose => "nose",
            KeypointId::LEye => "left_eye",
            KeypointId::REye => "right_eye",
            KeypointId::LEar => "left_ear",
            KeypointId::REar => "right_ear",
            KeypointId::LShoulder => "left_shoulder",
            KeypointId::RShoulder => "right_shoulder",
            KeypointId::LElbow => "left_elbow",
            KeypointId::RElbow => "right_elbow",
            KeypointId::LWrist => "left_wrist",
            KeypointId::RWrist => "right_wrist",
            KeypointId::LHip => "left_hip",
            KeypointId::RHip => "right_hip",
            KeypointId::LKnee => "left_knee",
            KeypointId::RKnee => "right_knee",
            KeypointId::LAnkle => "left_ankle",
            KeypointId::RAnkle => "right_ankle",
            KeypointId::Neck => "neck",
            KeypointId::MidHip => "mid_hip",
        }
    }

    pub fn from_name(name: &str) -> Option<KeypointId> {
        REAL_KEYPOINTS
            .iter()
            .copied()
            .chain([KeypointId::Neck, KeypointId::MidHip])
            .find(|id| id.name() == name)
    }
}

impl fmt::Display for KeypointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-keypoint sigma constants published for COCO keypoint evaluation.
///
/// Indexed in canonical order. The keypoint-similarity kernel uses a falloff
/// coefficient of `2 * sigma` (see [`SigmaTable::falloff_at`]).
pub const COCO_SIGMAS: [f64; CANONICAL_COUNT] = [
    0.026, // nose
    0.025, // left_eye
    0.025, // right_eye
    0.035, // left_ear
    0.035, // right_ear
    0.079, // left_shoulder
    0.079, // right_shoulder
    0.072, // left_elbow
    0.072, // right_elbow
    0.062, // left_wrist
    0.062, // right_wrist
    0.107, // left_hip
    0.107, // right_hip
    0.087, // left_knee
    0.087, // right_knee
    0.089, // left_ankle
    0.089, // right_ankle
];

#[derive(Debug, Error)]
pub enum SigmaError {
    #[error("failed to read sigma file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("sigma file {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("sigma for {0} must be positive, got {1}")]
    NonPositive(KeypointId, f64),
}

/// Per-keypoint falloff table for the keypoint-similarity kernel.
///
/// Stores one positive sigma per real keypoint. Defaults to the published
/// COCO constants; overridable from a text file of `keypoint_name = value`
/// lines (`#` starts a comment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTable {
    sigmas: [f64; CANONICAL_COUNT],
}

impl Default for SigmaTable {
    fn default() -> Self {
        SigmaTable {
            sigmas: COCO_SIGMAS,
        }
    }
}

impl SigmaTable {
    pub fn new(sigmas: [f64; CANONICAL_COUNT]) -> Result<Self, SigmaError> {
        for (i, &s) in sigmas.iter().enumerate() {
            if s <= 0.0 || !s.is_finite() {
                return Err(SigmaError::NonPositive(REAL_KEYPOINTS[i], s));
            }
        }
        Ok(SigmaTable { sigmas })
    }

    /// Load overrides from a `keypoint_name = value` file on top of the
    /// default table. Keypoints not named keep their default sigma.
    pub fn from_file(path: &Path) -> Result<Self, SigmaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SigmaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut sigmas = COCO_SIGMAS;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| SigmaError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message,
            };
            let (name, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `keypoint_name = value`".into()))?;
            let id = KeypointId::from_name(name.trim())
                .ok_or_else(|| parse_err(format!("unknown keypoint name `{}`", name.trim())))?;
            let idx = id
                .canonical_index()
                .ok_or_else(|| parse_err(format!("virtual keypoint `{}` has no sigma", id)))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad value `{}`: {}", value.trim(), e)))?;
            sigmas[idx] = v;
        }
        SigmaTable::new(sigmas)
    }

    pub fn sigma(&self, id: KeypointId) -> Option<f64> {
        id.canonical_index().map(|i| self.sigmas[i])
    }

    pub fn sigma_at(&self, index: usize) -> f64 {
        self.sigmas[index]
    }

    /// Falloff coefficient for the similarity kernel: `2 * sigma`.
    pub fn falloff_at(&self, index: usize) -> f64 {
        2.0 * self.sigmas[index]
    }

    /// FNV-1a hash over the sigma bit patterns, for report provenance.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for s in &self.sigmas {
            for b in s.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}
