//! Missing-data accounting.
//!
//! A method can fail in two ways: it produces nothing for a frame (a missing
//! detection, equivalent to missing every keypoint of that frame) or it
//! produces a detection that lacks individual keypoints. With `N` frames and
//! a native keypoint count `m_kp`, the percentage is
//! `100 * (missing_detections * m_kp + missing_keypoints) / (N * m_kp)`.

use serde::Serialize;

use crate::pose::CanonicalPose;
use crate::skeleton::CANONICAL_COUNT;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingDataReport {
    pub images: usize,
    /// The method's native keypoint count, which may exceed the number of
    /// canonical keypoints its schema can express.
    pub method_keypoint_count: usize,
    pub missing_detections: usize,
    pub missing_keypoints: usize,
    pub percent: f64,
}

impl MissingDataReport {
    /// Exact numerator of the percentage, in keypoint units.
    pub fn numerator(&self) -> u64 {
        (self.missing_detections * self.method_keypoint_count + self.missing_keypoints) as u64
    }

    /// Exact denominator of the percentage, in keypoint units.
    pub fn denominator(&self) -> u64 {
        (self.images * self.method_keypoint_count) as u64
    }
}

/// Count missing data over the per-frame selected detections.
///
/// `selected` holds one entry per frame: the detection chosen for it, absent
/// when the method produced nothing. Keypoint absences are counted only over
/// the canonical slots the method's schema can express (`expressible`);
/// a 17-slot mask of `true` for identity layouts.
pub fn missing_data(
    selected: &[Option<&CanonicalPose>],
    method_keypoint_count: usize,
    expressible: &[bool; CANONICAL_COUNT],
) -> MissingDataReport {
    assert!(
        method_keypoint_count > 0,
        "a method provides at least one keypoint"
    );
    let images = selected.len();
    let mut missing_detections = 0usize;
    let mut missing_keypoints = 0usize;
    for sel in selected {
        match sel {
            None => missing_detections += 1,
            Some(pose) => {
                missing_keypoints += (0..CANONICAL_COUNT)
                    .filter(|&i| expressible[i] && pose.keypoints[i].is_none())
                    .count();
            }
        }
    }
    let numer = missing_detections * method_keypoint_count + missing_keypoints;
    let denom = images * method_keypoint_count;
    let percent = if denom > 0 {
        100.0 * numer as f64 / denom as f64
    } else {
        0.0
    };
    MissingDataReport {
        images,
        method_keypoint_count,
        missing_detections,
        missing_keypoints,
        percent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{empty_slots, Keypoint2D, Role};

    fn pose_with_n_present(n: usize) -> CanonicalPose {
        let mut slots = empty_slots();
        for slot in slots.iter_mut().take(n) {
            *slot = Some(Keypoint2D::new(1.0, 1.0));
        }
        CanonicalPose {
            keypoints: slots,
            score: None,
            rank: 0,
            role: Role::Unknown,
        }
    }

    #[test]
    fn hand_evaluated_example() {
        // 100 frames, 17 native keypoints, 2 missing detections and 10
        // missing keypoints spread over the rest.
        let full = pose_with_n_present(17);
        let short = pose_with_n_present(12); // 5 missing each
        let mut selected: Vec<Option<&CanonicalPose>> = vec![Some(&full); 100];
        selected[3] = None;
        selected[47] = None;
        selected[10] = Some(&short);
        selected[20] = Some(&short);
        let rep = missing_data(&selected, 17, &[true; CANONICAL_COUNT]);
        assert_eq!(rep.missing_detections, 2);
        assert_eq!(rep.missing_keypoints, 10);
        assert_eq!(rep.numerator(), 44);
        assert_eq!(rep.denominator(), 1700);
        assert!((rep.percent - 100.0 * 44.0 / 1700.0).abs() < 1e-12);
        assert!((rep.percent - 2.588235294117647).abs() < 1e-12);
    }

    #[test]
    fn nothing_missing_is_zero() {
        let full = pose_with_n_present(17);
        let selected: Vec<Option<&CanonicalPose>> = vec![Some(&full); 10];
        let rep = missing_data(&selected, 17, &[true; CANONICAL_COUNT]);
        assert_eq!(rep.percent, 0.0);
    }

    #[test]
    fn everything_missing_is_one_hundred() {
        let selected: Vec<Option<&CanonicalPose>> = vec![None; 10];
        let rep = missing_data(&selected, 17, &[true; CANONICAL_COUNT]);
        assert_eq!(rep.percent, 100.0);
    }

    #[test]
    fn unexpressible_slots_do_not_count() {
        // A 14-keypoint method cannot express 3 canonical slots; their
        // absence is structural, not missing data.
        let mut expressible = [true; CANONICAL_COUNT];
        expressible[0] = false;
        expressible[3] = false;
        expressible[4] = false;
        let mut slots = empty_slots();
        for (i, slot) in slots.iter_mut().enumerate() {
            if expressible[i] {
                *slot = Some(Keypoint2D::new(1.0, 1.0));
            }
        }
        let pose = CanonicalPose {
            keypoints: slots,
            score: None,
            rank: 0,
            role: Role::Unknown,
        };
        let selected: Vec<Option<&CanonicalPose>> = vec![Some(&pose); 5];
        let rep = missing_data(&selected, 14, &expressible);
        assert_eq!(rep.missing_keypoints, 0);
        assert_eq!(rep.percent, 0.0);
    }

    #[test]
    fn decomposition_is_additive() {
        let short = pose_with_n_present(10);
        let mut selected: Vec<Option<&CanonicalPose>> = vec![Some(&short); 8];
        selected[0] = None;
        let rep = missing_data(&selected, 17, &[true; CANONICAL_COUNT]);
        let det_part = rep.missing_detections as u64 * 17;
        let kp_part = rep.missing_keypoints as u64;
        assert_eq!(det_part + kp_part, rep.numerator());
        assert!(rep.percent > 0.0 && rep.percent < 100.0);
    }
}
