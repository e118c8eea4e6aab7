//! Frame and sequence containers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pose::{CanonicalPose, GroundTruthPose};

/// How Neck-MidHip errors are normalized for a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// One torso length per sequence: the median over all frames where it is
    /// derivable from ground truth.
    PerSequenceMedian,
    /// Each frame normalized by its own ground-truth torso length; frames
    /// where it cannot be derived carry no error measurements.
    PerImage,
}

/// Which ground-truth roles are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalScope {
    #[default]
    Infant,
    All,
}

impl EvalScope {
    pub fn includes(self, role: crate::pose::Role) -> bool {
        match self {
            EvalScope::All => true,
            EvalScope::Infant => role != crate::pose::Role::Adult,
        }
    }
}

/// One image: its ground truths and every detection a method emitted for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub ground_truths: Vec<GroundTruthPose>,
    /// Sorted by rank, unique and contiguous from 0.
    pub detections: Vec<CanonicalPose>,
}

impl FrameRecord {
    pub fn new(frame_id: impl Into<String>) -> Self {
        FrameRecord {
            frame_id: frame_id.into(),
            width: None,
            height: None,
            ground_truths: Vec::new(),
            detections: Vec::new(),
        }
    }
}

/// An ordered set of frames with its normalization policy and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    pub sequence_id: String,
    pub frames: Vec<FrameRecord>,
    pub normalization: NormalizationMode,
    /// Persons expected per frame (1 for single-infant recordings).
    pub expected_persons: u32,
    /// Free-form sequence metadata (infant id, age, difficulty label, ...).
    pub metadata: BTreeMap<String, String>,
}

impl SequenceDataset {
    pub fn new(sequence_id: impl Into<String>) -> Self {
        SequenceDataset {
            sequence_id: sequence_id.into(),
            frames: Vec::new(),
            normalization: NormalizationMode::PerSequenceMedian,
            expected_persons: 1,
            metadata: BTreeMap::new(),
        }
    }

    pub fn frame(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }
}
