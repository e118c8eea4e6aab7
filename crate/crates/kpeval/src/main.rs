//! Command-line front end: `evaluate`, `compare`, and `gen`.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use kpeval::config::{EmitFlags, RunConfig};
use kpeval::dataset::{EvalScope, NormalizationMode};
use kpeval::harness::{ErrorModel, Jitter, ScoreModel};
use kpeval::ingest::FormatKind;
use kpeval::run;
use kpeval::select::SelectionStrategy;

#[derive(Parser)]
#[command(
    name = "kpeval",
    version,
    about = "Evaluate 2D pose detections against keypoint ground truth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one or more methods against ground truth and emit reports.
    Evaluate(EvaluateArgs),
    /// Merge report JSON files into a method-by-dataset comparison table.
    Compare(CompareArgs),
    /// Generate a synthetic fixture with known metric values.
    Gen(GenArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Declarative run configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth file (repeatable, one per sequence).
    #[arg(long = "gt")]
    ground_truths: Vec<PathBuf>,
    /// Ground-truth format: canonical | coco | per_frame | wide_csv.
    #[arg(long)]
    gt_format: Option<String>,
    /// Method detections: name=path:format:schema (repeatable). `schema` is
    /// a schema file path or `identity[:score_policy]`.
    #[arg(long = "det")]
    detections: Vec<String>,
    /// Detection selection: first | score | oracle.
    #[arg(long)]
    select: Option<String>,
    /// Evaluation scope: infant | all.
    #[arg(long)]
    scope: Option<String>,
    /// Normalization override: median | per-image.
    #[arg(long)]
    norm: Option<String>,
    /// Per-keypoint sigma override file.
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// Coefficient of the combined performance score.
    #[arg(long = "cpe-c")]
    cpe_c: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated outputs: tables,circles,per-sequence.
    #[arg(long)]
    emit: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Dataset label used in reports.
    #[arg(long)]
    dataset_id: Option<String>,
    /// Free-form input-mode label (e.g. images, videos).
    #[arg(long)]
    input_mode: Option<String>,
    /// Reference pose file for the circle figure.
    #[arg(long)]
    reference_pose: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Report JSON files (at least two).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    frames: usize,
    #[arg(long, default_value = "fixtures-out")]
    out: PathBuf,
    /// No errors at all: exact geometry, every frame detected.
    #[arg(long, conflicts_with_all = ["jitter", "jitter_max", "jitter_ramp"])]
    perfect: bool,
    /// Fixed radial offset as a fraction of the torso length.
    #[arg(long)]
    jitter: Option<f64>,
    /// Random radial offset bound (fraction of torso length).
    #[arg(long)]
    jitter_max: Option<f64>,
    /// Per-frame ramped offset up to this fraction of the torso length.
    #[arg(long)]
    jitter_ramp: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    drop_kp_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    drop_det_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    dup_prob: f64,
    /// correlated | anticorrelated | constant | noisy | none.
    #[arg(long, default_value = "correlated")]
    score_model: String,
}

fn build_config(args: &EvaluateArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if !args.ground_truths.is_empty() {
        config.ground_truths = args.ground_truths.clone();
    }
    if let Some(f) = &args.gt_format {
        config.gt_format =
            FormatKind::parse(f).with_context(|| format!("unknown ground-truth format `{f}`"))?;
    }
    if !args.detections.is_empty() {
        config.methods = args
            .detections
            .iter()
            .map(|d| RunConfig::parse_det_flag(d).map_err(anyhow::Error::from))
            .collect::<Result<_>>()?;
    }
    if let Some(s) = &args.select {
        config.selection =
            SelectionStrategy::parse(s).with_context(|| format!("unknown strategy `{s}`"))?;
    }
    if let Some(s) = &args.scope {
        config.scope = match s.as_str() {
            "infant" => EvalScope::Infant,
            "all" => EvalScope::All,
            other => anyhow::bail!("unknown scope `{other}`"),
        };
    }
    if let Some(n) = &args.norm {
        config.normalization_override = Some(match n.as_str() {
            "median" => NormalizationMode::PerSequenceMedian,
            "per-image" | "per_image" => NormalizationMode::PerImage,
            other => anyhow::bail!("unknown normalization `{other}`"),
        });
    }
    if let Some(p) = &args.sigma {
        config.sigma_path = Some(p.clone());
    }
    if let Some(c) = args.cpe_c {
        config.cpe_coefficient = c;
    }
    if let Some(o) = &args.out {
        config.out_dir = o.clone();
    }
    if let Some(e) = &args.emit {
        config.emit = EmitFlags::parse(e)?;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    if let Some(d) = &args.dataset_id {
        config.dataset_id = d.clone();
    }
    if let Some(m) = &args.input_mode {
        config.input_mode = m.clone();
    }
    if let Some(r) = &args.reference_pose {
        config.reference_pose_path = Some(r.clone());
    }
    Ok(config)
}

fn build_model(args: &GenArgs) -> Result<ErrorModel> {
    let jitter = if args.perfect {
        Jitter::None
    } else if let Some(f) = args.jitter {
        Jitter::FixedTorsoFraction(f)
    } else if let Some(max) = args.jitter_ramp {
        Jitter::FrameRamp { max }
    } else if let Some(max) = args.jitter_max {
        Jitter::RandomTorsoFraction { max }
    } else {
        Jitter::None
    };
    let score_model = match args.score_model.as_str() {
        "correlated" => ScoreModel::PerfectlyCorrelated,
        "anticorrelated" => ScoreModel::Anticorrelated,
        "constant" => ScoreModel::Constant(0.5),
        "noisy" => ScoreModel::Noisy,
        "none" => ScoreModel::NoScores,
        other => anyhow::bail!("unknown score model `{other}`"),
    };
    let model = ErrorModel {
        jitter,
        drop_keypoint_prob: args.drop_kp_prob,
        drop_detection_prob: args.drop_det_prob,
        duplicate_detection_prob: args.dup_prob,
        score_model,
    };
    model.validate().map_err(|e| anyhow::anyhow!(e))?;
    Ok(model)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<()> = match cli.command {
        Command::Evaluate(args) => build_config(&args).and_then(|config| {
            let summary = run::cmd_evaluate(&config)?;
            println!(
                "evaluated {} report row(s), {} warning(s); wrote:",
                summary.reports.len(),
                summary.warning_count
            );
            for path in &summary.written {
                println!("  {}", path.display());
            }
            Ok(())
        }),
        Command::Compare(args) => run::cmd_compare(&args.reports).map(|table| {
            print!("{table}");
        }),
        Command::Gen(args) => build_model(&args).and_then(|model| {
            let (fixture, expected) = run::cmd_gen(args.seed, args.frames, &model, &args.out)?;
            println!("wrote {}", fixture.display());
            println!("wrote {}", expected.display());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
