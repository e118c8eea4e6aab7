//! Pose types on the canonical skeleton and virtual-point derivation.

use serde::{Deserialize, Serialize};

use crate::skeleton::{KeypointId, CANONICAL_COUNT};

/// A present 2D keypoint in pixel coordinates. Absence is expressed as
/// `None` in a [`KeypointSlots`] array, so every `Keypoint2D` value is
/// meaningful by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint2D {
    pub x: f64,
    pub y: f64,
    /// Method-native confidence, finite and >= 0 when present. Not clamped
    /// to `[0,1]`; scales differ between methods.
    pub confidence: Option<f64>,
}

impl Keypoint2D {
    pub fn new(x: f64, y: f64) -> Self {
        Keypoint2D {
            x,
            y,
            confidence: None,
        }
    }

    pub fn with_confidence(x: f64, y: f64, confidence: f64) -> Self {
        Keypoint2D {
            x,
            y,
            confidence: Some(confidence),
        }
    }

    pub fn distance(&self, other: &Keypoint2D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One slot per real canonical keypoint, in canonical order.
pub type KeypointSlots = [Option<Keypoint2D>; CANONICAL_COUNT];

/// Role of an annotated or detected person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Infant,
    Adult,
    #[default]
    Unknown,
}

/// One detection: a full set of estimated keypoints for one person in one
/// image, mapped onto the canonical skeleton.
///
/// Invariants: at least one keypoint is present (empty detections are
/// represented as absence of any pose for the frame); `rank` values within a
/// frame's detection list are unique and contiguous from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPose {
    pub keypoints: KeypointSlots,
    /// Whole-detection score, set according to the method's score policy.
    pub score: Option<f64>,
    /// Output order of the method, 0 = first.
    pub rank: usize,
    pub role: Role,
}

impl CanonicalPose {
    pub fn present_count(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_some()).count()
    }

    pub fn keypoint(&self, id: KeypointId) -> Option<&Keypoint2D> {
        id.canonical_index()
            .and_then(|i| self.keypoints[i].as_ref())
    }
}

/// A human-coded annotation on the canonical skeleton. Occluded keypoints
/// are not annotated, so `present` means "the coder placed it".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPose {
    pub keypoints: KeypointSlots,
    pub role: Role,
}

impl GroundTruthPose {
    pub fn new(keypoints: KeypointSlots, role: Role) -> Self {
        GroundTruthPose { keypoints, role }
    }

    /// Number of keypoints the coder placed.
    pub fn annotated_count(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_some()).count()
    }

    pub fn keypoint(&self, id: KeypointId) -> Option<&Keypoint2D> {
        id.canonical_index()
            .and_then(|i| self.keypoints[i].as_ref())
    }
}

/// Derived virtual points: shoulder midpoint (neck) and hip midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualPoints {
    pub neck: Option<Keypoint2D>,
    pub midhip: Option<Keypoint2D>,
}

/// Derive the virtual Neck and MidHip points as the midpoints of the
/// shoulder and hip pairs. A midpoint is absent whenever either operand is
/// absent; absence is a value, not an error.
pub fn derive_virtual_points(keypoints: &KeypointSlots) -> VirtualPoints {
    let midpoint = |a: KeypointId, b: KeypointId| -> Option<Keypoint2D> {
        let pa = keypoints[a.canonical_index()?]?;
        let pb = keypoints[b.canonical_index()?]?;
        Some(Keypoint2D::new((pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0))
    };
    VirtualPoints {
        neck: midpoint(KeypointId::LShoulder, KeypointId::RShoulder),
        midhip: midpoint(KeypointId::LHip, KeypointId::RHip),
    }
}

/// Empty slot array helper.
pub fn empty_slots() -> KeypointSlots {
    [None; CANONICAL_COUNT]
}
