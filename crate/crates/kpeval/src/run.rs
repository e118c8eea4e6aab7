//! End-to-end orchestration: evaluate, compare, and fixture generation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use crate::config::{MethodConfig, RunConfig};
use crate::dataset::{EvalScope, FrameRecord, NormalizationMode, SequenceDataset};
use crate::events::{EventLog, Level};
use crate::harness::{fixture_with_detections, ErrorModel, GeneratedFixture};
use crate::ingest::{self, FormatKind, Warning};
use crate::metrics::apar::{EvaluatedFrame, RankedDetection};
use crate::metrics::nmh::{
    nmh_errors, nmh_length_image, nmh_length_sequence, NmhNormalizer, NormalizerSource,
};
use crate::metrics::{detection_score, oks};
use crate::plot::{emit_circle_plot, CirclePlotSpec, DEFAULT_REFERENCE_POSE};
use crate::report::{
    aggregate, emit_tables, FrameOutcome, Grouping, MetricReport, ReportProvenance,
    SequenceOutcome, TableFormat, TargetOutcome,
};
use crate::schema::SchemaMap;
use crate::select::{assign_to_ground_truths, select_detection, SelectionStrategy};
use crate::skeleton::SigmaTable;

/// Outcome of an evaluate run, for callers and tests.
#[derive(Debug)]
pub struct EvaluateSummary {
    pub reports: Vec<MetricReport>,
    pub written: Vec<PathBuf>,
    pub warning_count: usize,
}

/// Fixed per-(method, sequence) evaluation parameters.
struct FrameContext<'a> {
    schema: &'a SchemaMap,
    sigma: &'a SigmaTable,
    scope: EvalScope,
    strategy: SelectionStrategy,
    sequence_normalizer: Option<f64>,
    normalization: NormalizationMode,
}

/// Evaluate one frame of one method against one schema.
fn evaluate_frame(
    frame: &FrameRecord,
    ctx: &FrameContext<'_>,
    warnings: &mut Vec<Warning>,
) -> FrameOutcome {
    let FrameContext {
        schema,
        sigma,
        scope,
        strategy,
        sequence_normalizer,
        normalization,
    } = *ctx;
    let assignment = assign_to_ground_truths(frame, sigma, scope);
    for &gi in &assignment.excluded_ground_truths {
        if scope.includes(frame.ground_truths[gi].role) {
            warnings.push(
                Warning::new(
                    "degenerate_scale",
                    "ground truth cannot span an object scale",
                )
                .with("frame_id", frame.frame_id.clone())
                .with("ground_truth", gi.to_string()),
            );
        }
    }

    let matched: BTreeMap<usize, f64> = assignment
        .pairs
        .iter()
        .map(|p| (p.detection, p.oks.oks))
        .collect();
    let eval = EvaluatedFrame {
        frame_id: frame.frame_id.clone(),
        gt_count: assignment.pairs.len() + assignment.unmatched_ground_truths.len(),
        detections: frame
            .detections
            .iter()
            .enumerate()
            .map(|(i, d)| RankedDetection {
                score: d.score,
                rank: d.rank,
                matched_oks: matched.get(&i).copied(),
            })
            .collect(),
    };

    // Evaluate every in-scope, scorable ground truth as its own target.
    let mut targets = Vec::new();
    let mut primary_selection: Option<&crate::pose::CanonicalPose> = None;
    for (gi, gt) in frame.ground_truths.iter().enumerate() {
        if assignment.excluded_ground_truths.contains(&gi) {
            continue;
        }
        let selected = select_detection(frame, strategy, Some(gt));
        if primary_selection.is_none() {
            primary_selection = selected;
        }
        let Some(det) = selected else { continue };
        let oks_value = oks(det, gt, sigma).ok().map(|b| b.oks);
        let normalizer = match normalization {
            NormalizationMode::PerSequenceMedian => {
                sequence_normalizer.map(|value| NmhNormalizer {
                    value,
                    source: NormalizerSource::SequenceMedian,
                })
            }
            NormalizationMode::PerImage => nmh_length_image(gt).map(|value| NmhNormalizer {
                value,
                source: NormalizerSource::ThisImage,
            }),
        };
        let nmh = normalizer.and_then(|n| nmh_errors(det, gt, n).ok());
        targets.push(TargetOutcome {
            oks: oks_value,
            nmh,
            score: detection_score(det, schema.score_policy),
        });
    }

    // Frame-level selection for missing-keypoint accounting.
    if primary_selection.is_none() {
        primary_selection = select_detection(frame, strategy, None);
    }
    let expressible = schema.expressible();
    let missing_keypoints = primary_selection.map(|det| {
        (0..crate::skeleton::CANONICAL_COUNT)
            .filter(|&i| expressible[i] && det.keypoints[i].is_none())
            .count()
    });

    FrameOutcome {
        frame_id: frame.frame_id.clone(),
        targets,
        detection_count: frame.detections.len(),
        missing_keypoints,
        eval,
    }
}

/// Evaluate one (method, sequence) pair.
fn evaluate_sequence(
    method: &MethodConfig,
    schema: &SchemaMap,
    dataset: &SequenceDataset,
    sigma: &SigmaTable,
    config: &RunConfig,
) -> Result<(SequenceOutcome, Vec<Warning>)> {
    let mut warnings = Vec::new();
    let det_path = resolve_detection_path(&method.path, method.format, &dataset.sequence_id)?;
    let (det_file, parse_warnings) = ingest::parse_detections(&det_path, method.format, schema)
        .with_context(|| format!("parsing detections for method `{}`", method.name))?;
    warnings.extend(parse_warnings);
    let (merged, align_warnings) = ingest::align(dataset, &det_file)
        .with_context(|| format!("aligning detections for method `{}`", method.name))?;
    warnings.extend(align_warnings);

    let normalization = config
        .normalization_override
        .unwrap_or(merged.normalization);
    let sequence_normalizer = match normalization {
        NormalizationMode::PerSequenceMedian => match nmh_length_sequence(&merged, config.scope) {
            Ok(v) => Some(v),
            Err(e) => {
                warnings.push(
                    Warning::new("no_normalizer", e.to_string())
                        .with("sequence", merged.sequence_id.clone()),
                );
                None
            }
        },
        NormalizationMode::PerImage => None,
    };

    let ctx = FrameContext {
        schema,
        sigma,
        scope: config.scope,
        strategy: config.selection,
        sequence_normalizer,
        normalization,
    };
    let frames = merged
        .frames
        .iter()
        .map(|frame| evaluate_frame(frame, &ctx, &mut warnings))
        .collect();

    Ok((
        SequenceOutcome {
            method: method.name.clone(),
            dataset_id: config.dataset_id.clone(),
            sequence_id: merged.sequence_id.clone(),
            input_mode: config.input_mode.clone(),
            expected_persons: merged.expected_persons,
            native_keypoint_count: schema.native_count,
            frames,
        },
        warnings,
    ))
}

/// Find the detection source for a sequence under a method path that may be
/// a single file, a per-sequence directory tree, or (for the per-frame
/// format) the frame directory itself.
fn resolve_detection_path(path: &Path, format: FormatKind, sequence_id: &str) -> Result<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    if path.is_dir() {
        if format == FormatKind::PerFrameJsonDirectory {
            let nested = path.join(sequence_id);
            return Ok(if nested.is_dir() {
                nested
            } else {
                path.to_path_buf()
            });
        }
        for ext in ["json", "csv"] {
            let candidate = path.join(format!("{sequence_id}.{ext}"));
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
        bail!(
            "no detection file for sequence `{}` under {}",
            sequence_id,
            path.display()
        );
    }
    bail!("detection path {} does not exist", path.display());
}

/// Run a full evaluation: ingest, align, select, measure, aggregate, emit.
pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluateSummary> {
    config.validate()?;
    let mut log = EventLog::new();

    let sigma = match &config.sigma_path {
        Some(path) => SigmaTable::from_file(path)?,
        None => SigmaTable::default(),
    };

    let mut datasets = Vec::new();
    for gt_path in &config.ground_truths {
        let mut dataset = ingest::parse_ground_truth(gt_path, config.gt_format)
            .with_context(|| format!("parsing ground truth {}", gt_path.display()))?;
        if let Some(mode) = config.normalization_override {
            dataset.normalization = mode;
        }
        datasets.push(dataset);
    }

    let schemas: Vec<SchemaMap> = config
        .methods
        .iter()
        .map(|m| m.schema.load(&m.name).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..config.methods.len())
        .flat_map(|mi| (0..datasets.len()).map(move |di| (mi, di)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<(SequenceOutcome, Vec<Warning>)>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(mi, di)| {
                evaluate_sequence(
                    &config.methods[mi],
                    &schemas[mi],
                    &datasets[di],
                    &sigma,
                    config,
                )
            })
            .collect()
    });

    let mut outcomes = Vec::new();
    for result in results {
        let (outcome, warnings) = result?;
        log.extend_warnings(warnings);
        outcomes.push(outcome);
    }

    let (mut reports, agg_warnings) =
        aggregate(&outcomes, Grouping::Dataset, config.cpe_coefficient);
    log.extend_warnings(agg_warnings);
    if config.emit.per_sequence {
        let (seq_reports, seq_warnings) =
            aggregate(&outcomes, Grouping::Sequence, config.cpe_coefficient);
        log.extend_warnings(seq_warnings);
        reports.extend(seq_reports);
    }

    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let provenance = ReportProvenance {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        sigma_fingerprint: format!("{:016x}", sigma.fingerprint()),
        cpe_coefficient: config.cpe_coefficient,
        selection: format!("{:?}", config.selection).to_lowercase(),
    };

    let mut written = Vec::new();
    if config.emit.tables {
        let csv_path = config.out_dir.join("report.csv");
        emit_tables(&reports, &provenance, TableFormat::Csv, &csv_path)?;
        written.push(csv_path);
        let json_path = config.out_dir.join("report.json");
        emit_tables(&reports, &provenance, TableFormat::Json, &json_path)?;
        written.push(json_path);
    }
    if config.emit.circles {
        let reference = match &config.reference_pose_path {
            Some(path) => CirclePlotSpec::load_reference(path)?,
            None => DEFAULT_REFERENCE_POSE,
        };
        let dataset_reports: Vec<&MetricReport> = reports
            .iter()
            .filter(|r| r.grouping == Grouping::Dataset)
            .collect();
        let spec = CirclePlotSpec::from_reports(&dataset_reports, reference)?;
        let svg_path = config.out_dir.join("circles.svg");
        emit_circle_plot(&spec, &svg_path)?;
        written.push(svg_path);
    }

    log.push(
        Level::Info,
        "evaluate_done",
        format!(
            "{} methods x {} sequences -> {} reports",
            config.methods.len(),
            datasets.len(),
            reports.len()
        ),
    );
    let log_path = config.out_dir.join("log.jsonl");
    log.write_to(&log_path)?;
    written.push(log_path);
    log.echo(Level::from_env());

    Ok(EvaluateSummary {
        warning_count: log.warning_count(),
        reports,
        written,
    })
}

/// Generate a fixture and its expected-value sidecar.
pub fn cmd_gen(
    seed: u64,
    n_frames: usize,
    model: &ErrorModel,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    if n_frames == 0 {
        bail!("--frames must be at least 1");
    }
    model.validate().map_err(|e| anyhow::anyhow!(e))?;
    let fixture: GeneratedFixture = crate::harness::generate(seed, n_frames, model);
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let fixture_path = out_dir.join(format!("fixture_seed{seed}.json"));
    let merged = fixture_with_detections(&fixture);
    ingest::emit_canonical_json(&merged, &fixture_path)?;
    let expected_path = out_dir.join(format!("expected_seed{seed}.json"));
    let mut text = serde_json::to_string_pretty(&fixture.expected).expect("serializable");
    text.push('\n');
    std::fs::write(&expected_path, text)?;
    Ok((fixture_path, expected_path))
}

/// Merge report files into a method-by-dataset comparison table.
///
/// Rows are (group, metric); columns are methods; the best value per row is
/// flagged with `*` (ties flag all). Higher is better except for torso
/// error and missing data; redundancy prefers the value closest to zero.
pub fn cmd_compare(report_paths: &[PathBuf]) -> Result<String> {
    if report_paths.len() < 2 {
        bail!("compare needs at least two report files");
    }
    let mut docs = Vec::new();
    for path in report_paths {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let version = doc
            .get("report_version")
            .and_then(|v| v.as_u64())
            .context("report file missing report_version")?;
        if version != u64::from(crate::report::REPORT_VERSION) {
            bail!(
                "report schema mismatch: {} carries version {version}, expected {}",
                path.display(),
                crate::report::REPORT_VERSION
            );
        }
        docs.push(doc);
    }

    struct Cell {
        value: f64,
        rendered: String,
    }
    // (group, metric label) -> method -> cell
    let mut rows: BTreeMap<(String, &'static str), BTreeMap<String, Cell>> = BTreeMap::new();
    let mut methods: std::collections::BTreeSet<String> = Default::default();

    type Extract<'a> = &'a dyn Fn(&serde_json::Value) -> Option<f64>;
    let metrics: [(&'static str, Extract<'_>, usize); 8] = [
        (
            "oks",
            &|r| r.pointer("/oks/mean").and_then(|v| v.as_f64()),
            2,
        ),
        ("ap", &|r| r.get("ap").and_then(|v| v.as_f64()), 1),
        ("ar", &|r| r.get("ar").and_then(|v| v.as_f64()), 1),
        (
            "nmh",
            &|r| r.pointer("/nmh/mean").and_then(|v| v.as_f64()),
            1,
        ),
        (
            "missing",
            &|r| r.get("missing_percent").and_then(|v| v.as_f64()),
            1,
        ),
        (
            "redundant",
            &|r| r.get("redundant_percent").and_then(|v| v.as_f64()),
            1,
        ),
        ("cpe", &|r| r.get("cpe").and_then(|v| v.as_f64()), 2),
        (
            "spearman_rho",
            &|r| r.get("spearman_rho").and_then(|v| v.as_f64()),
            2,
        ),
    ];

    for doc in &docs {
        let Some(reports) = doc.get("reports").and_then(|r| r.as_array()) else {
            continue;
        };
        for r in reports {
            if r.get("grouping").and_then(|g| g.as_str()) != Some("dataset") {
                continue;
            }
            let method = r
                .get("method")
                .and_then(|m| m.as_str())
                .unwrap_or("?")
                .to_string();
            let group = r
                .get("group_id")
                .and_then(|g| g.as_str())
                .unwrap_or("?")
                .to_string();
            methods.insert(method.clone());
            for (label, extract, decimals) in &metrics {
                if let Some(value) = extract(r) {
                    rows.entry((group.clone(), label)).or_default().insert(
                        method.clone(),
                        Cell {
                            value,
                            rendered: format!("{value:.decimals$}"),
                        },
                    );
                }
            }
        }
    }

    let methods: Vec<String> = methods.into_iter().collect();
    let mut out = String::new();
    out.push_str(&format!("{:<28}", "group/metric"));
    for m in &methods {
        out.push_str(&format!("{m:>14}"));
    }
    out.push('\n');
    for ((group, metric), cells) in &rows {
        // Best direction per metric.
        let best = cells.values().map(|c| c.value).fold(None::<f64>, |acc, v| {
            let key = |x: f64| match *metric {
                "nmh" | "missing" => -x,
                "redundant" => -x.abs(),
                _ => x,
            };
            Some(match acc {
                None => v,
                Some(b) if key(v) > key(b) => v,
                Some(b) => b,
            })
        });
        out.push_str(&format!("{:<28}", format!("{group}/{metric}")));
        for m in &methods {
            match cells.get(m) {
                Some(cell) => {
                    let flag = if Some(cell.value) == best { "*" } else { "" };
                    out.push_str(&format!("{:>14}", format!("{}{}", cell.rendered, flag)));
                }
                None => out.push_str(&format!("{:>14}", "-")),
            }
        }
        out.push('\n');
    }
    Ok(out)
}
