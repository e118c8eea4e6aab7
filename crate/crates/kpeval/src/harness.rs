//! Synthetic fixture generation with analytically known metric values.
//!
//! Fixtures use a fixed base skeleton translated randomly per frame (the
//! metrics are translation invariant), with detections derived from the
//! ground truth by radial jitter, keypoint drops, detection drops and
//! duplicate decoys. Fixed-distance jitter carries exact expected
//! similarity and torso-error values computed from the model parameters;
//! probabilistic failures carry exact expected missing-data and redundancy
//! values computed from the realized draws, not the probabilities.
//!
//! All randomness comes from ChaCha8 seeded once, so equal seeds give
//! value-identical fixtures on every platform.

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FrameRecord, SequenceDataset};
use crate::ingest::DetectionFile;
use crate::pose::{empty_slots, CanonicalPose, GroundTruthPose, Keypoint2D, Role};
use crate::skeleton::{SigmaTable, CANONICAL_COUNT};

/// Radial keypoint offset model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Jitter {
    None,
    /// Every detected keypoint lands exactly this fraction of the torso
    /// length away from its annotation, in a random direction.
    FixedTorsoFraction(f64),
    /// Frame i of n gets the fixed fraction `max * (i+1) / n`: exact like
    /// the fixed model, but with per-frame distinct error levels, which a
    /// score model can rank against.
    FrameRamp {
        max: f64,
    },
    /// Uniform radial offset in [0, max] torso fractions. No exact
    /// similarity expectation; missing-data and redundancy stay exact.
    RandomTorsoFraction {
        max: f64,
    },
}

impl Jitter {
    fn is_exact(self) -> bool {
        !matches!(self, Jitter::RandomTorsoFraction { .. })
    }
}

/// How detection scores are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScoreModel {
    /// Score equals the detection's analytic similarity: rank correlation
    /// with measured similarity is exactly +1 given distinct error levels.
    PerfectlyCorrelated,
    /// Score is one minus the analytic similarity: rank correlation -1.
    Anticorrelated,
    Constant(f64),
    Noisy,
    NoScores,
}

/// Failure model for one synthetic method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub jitter: Jitter,
    pub drop_keypoint_prob: f64,
    pub drop_detection_prob: f64,
    pub duplicate_detection_prob: f64,
    pub score_model: ScoreModel,
}

impl ErrorModel {
    pub fn perfect() -> Self {
        ErrorModel {
            jitter: Jitter::None,
            drop_keypoint_prob: 0.0,
            drop_detection_prob: 0.0,
            duplicate_detection_prob: 0.0,
            score_model: ScoreModel::PerfectlyCorrelated,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("drop_keypoint_prob", self.drop_keypoint_prob),
            ("drop_detection_prob", self.drop_detection_prob),
            ("duplicate_detection_prob", self.duplicate_detection_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0,1], got {p}"));
            }
        }
        match self.jitter {
            Jitter::FixedTorsoFraction(f) if f < 0.0 => {
                Err(format!("jitter fraction must be >= 0, got {f}"))
            }
            Jitter::FrameRamp { max } | Jitter::RandomTorsoFraction { max } if max < 0.0 => {
                Err(format!("jitter bound must be >= 0, got {max}"))
            }
            _ => Ok(()),
        }
    }
}

/// Metric values the generated instance is guaranteed to produce, where the
/// model admits an exact expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMetrics {
    pub oks_mean: Option<f64>,
    /// Percent of torso length.
    pub nmh_mean_percent: Option<f64>,
    pub missing_percent: f64,
    /// Exact integer numerator/denominator of the missing-data ratio.
    pub missing_numerator: u64,
    pub missing_denominator: u64,
    pub redundancy_percent: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub cpe: Option<f64>,
    pub ap: Option<f64>,
    pub ar: Option<f64>,
}

/// A generated instance: annotations, one method's detections, expectations.
#[derive(Debug, Clone)]
pub struct GeneratedFixture {
    pub dataset: SequenceDataset,
    pub detections: DetectionFile,
    pub expected: ExpectedMetrics,
}

/// Torso length of the base skeleton, in pixels.
const BASE_TORSO: f64 = 190.0;

/// Base skeleton in pixels: the supine reference layout.
fn base_skeleton() -> [(f64, f64); CANONICAL_COUNT] {
    crate::plot::DEFAULT_REFERENCE_POSE
}

/// Generate a synthetic sequence for one method under a failure model.
///
/// Equal seeds produce value-identical outputs.
pub fn generate(seed: u64, n_frames: usize, model: &ErrorModel) -> GeneratedFixture {
    assert!(n_frames >= 1, "need at least one frame");
    model.validate().expect("valid model");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = SigmaTable::default();
    let base = base_skeleton();

    // Torso length and object scale of the base pose are translation
    // invariant, so the per-frame analytic terms are constants.
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &base {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let scale = ((max_x - min_x) * (max_y - min_y)).sqrt();

    // Per-keypoint similarity at a fixed offset d: exp(-d^2 / (2 s^2 c^2)).
    let ks_at = |d: f64, k: usize| -> f64 {
        let c = sigma.falloff_at(k);
        (-d * d / (2.0 * scale * scale * c * c)).exp()
    };

    let mut dataset = SequenceDataset::new(format!("synthetic-{seed}"));
    dataset
        .metadata
        .insert("generator_seed".into(), seed.to_string());
    let mut det_frames: BTreeMap<String, Vec<CanonicalPose>> = BTreeMap::new();

    let mut frame_oks: Vec<f64> = Vec::new(); // analytic per-frame similarity
    let mut nmh_sum = 0.0;
    let mut nmh_count = 0u64;
    let mut missing_detections = 0u64;
    let mut missing_keypoints = 0u64;
    let mut provided = 0u64;
    let mut frames_with_any = 0u64;

    for fi in 0..n_frames {
        let frame_id = format!("f{fi:04}");
        let tx = rng.random_range(0.0..200.0);
        let ty = rng.random_range(0.0..100.0);

        let mut gt_slots = empty_slots();
        for (k, &(x, y)) in base.iter().enumerate() {
            gt_slots[k] = Some(Keypoint2D::new(x + tx, y + ty));
        }
        let mut frame = FrameRecord::new(frame_id.clone());
        frame.width = Some(900);
        frame.height = Some(700);
        frame
            .ground_truths
            .push(GroundTruthPose::new(gt_slots, Role::Infant));
        dataset.frames.push(frame);

        // Draw the per-frame failure events in a fixed order.
        let dropped = rng.random_bool(model.drop_detection_prob);
        let duplicated = rng.random_bool(model.duplicate_detection_prob);
        let mut kp_drop = [false; CANONICAL_COUNT];
        for flag in kp_drop.iter_mut() {
            *flag = rng.random_bool(model.drop_keypoint_prob);
        }
        let mut angles = [0.0f64; CANONICAL_COUNT];
        for a in angles.iter_mut() {
            *a = rng.random_range(0.0..std::f64::consts::TAU);
        }
        let noisy_score: f64 = rng.random_range(0.0..1.0);
        let mut random_d = [0.0f64; CANONICAL_COUNT];
        for d in random_d.iter_mut() {
            *d = rng.random_range(0.0..=1.0);
        }

        if dropped {
            missing_detections += 1;
            det_frames.insert(frame_id, Vec::new());
            continue;
        }

        let frame_fraction = match model.jitter {
            Jitter::None => 0.0,
            Jitter::FixedTorsoFraction(f) => f,
            Jitter::FrameRamp { max } => max * (fi + 1) as f64 / n_frames as f64,
            Jitter::RandomTorsoFraction { .. } => f64::NAN, // per keypoint below
        };

        let mut det_slots = empty_slots();
        let mut ks_sum = 0.0;
        let mut ks_n = 0u32;
        for k in 0..CANONICAL_COUNT {
            if kp_drop[k] {
                missing_keypoints += 1;
                continue;
            }
            let gt = gt_slots[k].unwrap();
            let fraction = match model.jitter {
                Jitter::RandomTorsoFraction { max } => random_d[k] * max,
                _ => frame_fraction,
            };
            let d = fraction * BASE_TORSO;
            det_slots[k] = Some(Keypoint2D::with_confidence(
                gt.x + d * angles[k].cos(),
                gt.y + d * angles[k].sin(),
                1.0,
            ));
            if model.jitter.is_exact() {
                nmh_sum += fraction;
                nmh_count += 1;
                ks_sum += ks_at(d, k);
                ks_n += 1;
            }
        }

        if det_slots.iter().all(|s| s.is_none()) {
            // Every keypoint dropped: the frame has no detection after all,
            // which is a missing detection, not 17 missing keypoints.
            missing_keypoints -= kp_drop.iter().filter(|&&d| d).count() as u64;
            missing_detections += 1;
            det_frames.insert(frame_id, Vec::new());
            continue;
        }

        let analytic_oks = (ks_n > 0).then(|| ks_sum / f64::from(ks_n));
        if let Some(v) = analytic_oks {
            frame_oks.push(v);
        }

        let score = match model.score_model {
            ScoreModel::PerfectlyCorrelated => analytic_oks,
            ScoreModel::Anticorrelated => analytic_oks.map(|o| 1.0 - o),
            ScoreModel::Constant(v) => Some(v),
            ScoreModel::Noisy => Some(noisy_score),
            ScoreModel::NoScores => None,
        };

        let mut dets = vec![CanonicalPose {
            keypoints: det_slots,
            score,
            rank: 0,
            role: Role::Unknown,
        }];
        if duplicated {
            // A decoy far from the annotation, strictly lower score.
            let mut decoy = empty_slots();
            for (k, slot) in gt_slots.iter().enumerate() {
                let gt = slot.unwrap();
                decoy[k] = Some(Keypoint2D::with_confidence(
                    gt.x + 5000.0,
                    gt.y + 5000.0,
                    0.1,
                ));
            }
            dets.push(CanonicalPose {
                keypoints: decoy,
                score: score.map(|s| s * 0.1),
                rank: 1,
                role: Role::Unknown,
            });
        }
        provided += dets.len() as u64;
        frames_with_any += 1;
        det_frames.insert(frame_id, dets);
    }

    let missing_numerator = missing_detections * CANONICAL_COUNT as u64 + missing_keypoints;
    let missing_denominator = n_frames as u64 * CANONICAL_COUNT as u64;
    let missing_percent = 100.0 * missing_numerator as f64 / missing_denominator as f64;

    let redundancy_percent = (frames_with_any > 0)
        .then(|| 100.0 * (provided as f64 - frames_with_any as f64) / frames_with_any as f64);

    let exact = model.jitter.is_exact();
    let oks_mean = (exact && !frame_oks.is_empty())
        .then(|| frame_oks.iter().sum::<f64>() / frame_oks.len() as f64);
    let nmh_mean_percent = (exact && nmh_count > 0).then(|| 100.0 * nmh_sum / nmh_count as f64);

    // Rank correlation is exactly +/-1 when scores are a strictly monotone
    // function of the per-frame similarity and the similarities are well
    // separated (so measured ranks cannot differ from analytic ranks).
    let spearman_rho = match model.score_model {
        ScoreModel::PerfectlyCorrelated | ScoreModel::Anticorrelated
            if exact && frame_oks.len() >= 3 =>
        {
            let mut sorted = frame_oks.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let separated = sorted.windows(2).all(|w| w[1] - w[0] > 1e-9);
            separated.then(|| match model.score_model {
                ScoreModel::Anticorrelated => -1.0,
                _ => 1.0,
            })
        }
        _ => None,
    };

    let cpe_expected =
        nmh_mean_percent.map(|nmh| crate::metrics::cpe(nmh, missing_percent, 0.5).cpe);

    // Perfect geometry with every frame detected scores 100/100; fixtures
    // with failures leave AP/AR to the oracle tests.
    let (ap, ar) = if matches!(model.jitter, Jitter::None)
        && missing_numerator == 0
        && provided == n_frames as u64
    {
        (Some(100.0), Some(100.0))
    } else {
        (None, None)
    };

    GeneratedFixture {
        dataset,
        detections: DetectionFile {
            method_name: "synthetic".into(),
            sequence_id: Some(format!("synthetic-{seed}")),
            frames: det_frames,
        },
        expected: ExpectedMetrics {
            oks_mean,
            nmh_mean_percent,
            missing_percent,
            missing_numerator,
            missing_denominator,
            redundancy_percent,
            spearman_rho,
            cpe: cpe_expected,
            ap,
            ar,
        },
    }
}

/// Merge the generated detections into the dataset (what `gen` writes out).
pub fn fixture_with_detections(fixture: &GeneratedFixture) -> SequenceDataset {
    let (merged, _) = crate::ingest::align(&fixture.dataset, &fixture.detections)
        .expect("generated ids always align");
    merged
}
