//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)] // each test target uses a different subset

pub mod oracles;

use std::path::PathBuf;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use kpeval::pose::{empty_slots, CanonicalPose, GroundTruthPose, Keypoint2D, Role};

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

pub fn config_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("config")
        .join(rel)
}

/// Fresh scratch directory under the target-adjacent temp root.
pub fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("kpeval_it")
        .join(format!("{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

pub fn slots_to_oracle(slots: &kpeval::pose::KeypointSlots) -> Vec<oracles::Slot> {
    slots.iter().map(|s| s.map(|k| (k.x, k.y))).collect()
}

/// Random ground truth with at least `min_present` keypoints and a
/// guaranteed nonzero bounding-box extent.
pub fn random_gt(rng: &mut ChaCha8Rng, min_present: usize) -> GroundTruthPose {
    loop {
        let mut slots = empty_slots();
        let mut present = 0;
        for slot in slots.iter_mut() {
            if rng.random_bool(0.8) {
                *slot = Some(Keypoint2D::new(
                    rng.random_range(0.0..400.0),
                    rng.random_range(0.0..300.0),
                ));
                present += 1;
            }
        }
        let gt = GroundTruthPose::new(slots, Role::Infant);
        if present >= min_present && kpeval::metrics::bbox_scale(&gt).is_ok() {
            return gt;
        }
    }
}

/// Random detection sharing at least one keypoint with `gt`: each annotated
/// keypoint is detected with probability `hit`, offset by up to `spread`.
pub fn random_detection(
    rng: &mut ChaCha8Rng,
    gt: &GroundTruthPose,
    hit: f64,
    spread: f64,
    rank: usize,
) -> CanonicalPose {
    loop {
        let mut slots = empty_slots();
        let mut any_common = false;
        for (i, slot) in slots.iter_mut().enumerate() {
            match gt.keypoints[i] {
                Some(g) if rng.random_bool(hit) => {
                    *slot = Some(Keypoint2D::with_confidence(
                        g.x + rng.random_range(-spread..spread),
                        g.y + rng.random_range(-spread..spread),
                        rng.random_range(0.0..1.0),
                    ));
                    any_common = true;
                }
                _ => {
                    if rng.random_bool(0.1) {
                        *slot = Some(Keypoint2D::with_confidence(
                            rng.random_range(0.0..400.0),
                            rng.random_range(0.0..300.0),
                            rng.random_range(0.0..1.0),
                        ));
                    }
                }
            }
        }
        if any_common {
            return CanonicalPose {
                keypoints: slots,
                score: None,
                rank,
                role: Role::Unknown,
            };
        }
    }
}
