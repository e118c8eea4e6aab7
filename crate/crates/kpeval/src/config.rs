//! Run configuration: a declarative key/value text document with method
//! blocks, fully overridable by command-line flags (flags win).
//!
//! ```text
//! gt = fixtures/seq_alpha.json
//! gt_format = canonical
//! dataset_id = demo
//! select = score
//! scope = infant
//! cpe_c = 0.5
//! out = out/
//! emit = tables,circles
//!
//! [method goodnet]
//! path = dets/goodnet.json
//! format = canonical
//! schema = identity
//! ```

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset::{EvalScope, NormalizationMode};
use crate::ingest::FormatKind;
use crate::schema::{SchemaMap, ScorePolicy};
use crate::select::SelectionStrategy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("bad flag value: {0}")]
    Flag(String),
    #[error("referenced path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("method name `{0}` is not unique")]
    DuplicateMethod(String),
    #[error("no ground-truth path configured")]
    NoGroundTruth,
    #[error("no method configured")]
    NoMethods,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Where a method's schema comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemaRef {
    /// 17-keypoint identity layout with the given score policy
    /// (`identity`, or `identity:median_confidence` etc.).
    Identity(ScorePolicy),
    File(PathBuf),
}

impl SchemaRef {
    pub fn parse(s: &str) -> SchemaRef {
        if let Some(rest) = s.strip_prefix("identity") {
            let policy = rest
                .strip_prefix(':')
                .and_then(ScorePolicy::parse)
                .unwrap_or(ScorePolicy::NativeScore);
            SchemaRef::Identity(policy)
        } else {
            SchemaRef::File(PathBuf::from(s))
        }
    }

    pub fn load(&self, method_name: &str) -> Result<SchemaMap, crate::schema::SchemaError> {
        match self {
            SchemaRef::Identity(policy) => Ok(SchemaMap::identity(method_name, *policy)),
            SchemaRef::File(path) => SchemaMap::from_file(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub name: String,
    pub path: PathBuf,
    pub format: FormatKind,
    pub schema: SchemaRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmitFlags {
    pub tables: bool,
    pub circles: bool,
    pub per_sequence: bool,
}

impl EmitFlags {
    pub fn parse(s: &str) -> Result<EmitFlags, ConfigError> {
        let mut flags = EmitFlags::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "tables" => flags.tables = true,
                "circles" => flags.circles = true,
                "per-sequence" | "per_sequence" => flags.per_sequence = true,
                other => return Err(ConfigError::Flag(format!("unknown emit target `{other}`"))),
            }
        }
        Ok(flags)
    }
}

/// Full configuration of an evaluate run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ground_truths: Vec<PathBuf>,
    pub gt_format: FormatKind,
    pub methods: Vec<MethodConfig>,
    pub selection: SelectionStrategy,
    pub scope: EvalScope,
    pub normalization_override: Option<NormalizationMode>,
    pub sigma_path: Option<PathBuf>,
    pub cpe_coefficient: f64,
    pub out_dir: PathBuf,
    pub emit: EmitFlags,
    pub jobs: usize,
    pub dataset_id: String,
    pub input_mode: String,
    pub reference_pose_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ground_truths: Vec::new(),
            gt_format: FormatKind::CanonicalJson,
            methods: Vec::new(),
            selection: SelectionStrategy::HighestScore,
            scope: EvalScope::Infant,
            normalization_override: None,
            sigma_path: None,
            cpe_coefficient: crate::metrics::DEFAULT_CPE_COEFFICIENT,
            out_dir: PathBuf::from("out"),
            emit: EmitFlags {
                tables: true,
                circles: false,
                per_sequence: false,
            },
            jobs: 1,
            dataset_id: "dataset".to_string(),
            input_mode: "images".to_string(),
            reference_pose_path: None,
        }
    }
}

impl RunConfig {
    /// Parse the declarative config document into a config, starting from
    /// defaults.
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = RunConfig::default();
        let mut current_method: Option<MethodDraft> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message,
            };
            if let Some(name) = line
                .strip_prefix("[method ")
                .and_then(|r| r.strip_suffix(']'))
            {
                if let Some(draft) = current_method.take() {
                    config.methods.push(draft.finish(&err)?);
                }
                current_method = Some(MethodDraft::new(name.trim()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(draft) = current_method.as_mut() {
                match key {
                    "path" => draft.path = Some(PathBuf::from(value)),
                    "format" => {
                        draft.format = Some(
                            FormatKind::parse(value)
                                .ok_or_else(|| err(format!("unknown format `{value}`")))?,
                        )
                    }
                    "schema" => draft.schema = Some(SchemaRef::parse(value)),
                    other => return Err(err(format!("unknown method key `{other}`"))),
                }
                continue;
            }
            match key {
                "gt" => config.ground_truths.push(PathBuf::from(value)),
                "gt_format" => {
                    config.gt_format = FormatKind::parse(value)
                        .ok_or_else(|| err(format!("unknown format `{value}`")))?
                }
                "select" => {
                    config.selection = SelectionStrategy::parse(value)
                        .ok_or_else(|| err(format!("unknown strategy `{value}`")))?
                }
                "scope" => {
                    config.scope = match value {
                        "infant" => EvalScope::Infant,
                        "all" => EvalScope::All,
                        other => return Err(err(format!("unknown scope `{other}`"))),
                    }
                }
                "norm" => {
                    config.normalization_override = Some(match value {
                        "median" => NormalizationMode::PerSequenceMedian,
                        "per-image" | "per_image" => NormalizationMode::PerImage,
                        other => return Err(err(format!("unknown normalization `{other}`"))),
                    })
                }
                "sigma" => config.sigma_path = Some(PathBuf::from(value)),
                "cpe_c" => {
                    config.cpe_coefficient = value
                        .parse()
                        .map_err(|e| err(format!("bad cpe_c `{value}`: {e}")))?
                }
                "out" => config.out_dir = PathBuf::from(value),
                "emit" => config.emit = EmitFlags::parse(value)?,
                "jobs" => {
                    config.jobs = value
                        .parse()
                        .map_err(|e| err(format!("bad jobs `{value}`: {e}")))?
                }
                "dataset_id" => config.dataset_id = value.to_string(),
                "input_mode" => config.input_mode = value.to_string(),
                "reference_pose" => config.reference_pose_path = Some(PathBuf::from(value)),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        if let Some(draft) = current_method.take() {
            config.methods.push(draft.finish(&|m| ConfigError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: m,
            })?);
        }
        Ok(config)
    }

    /// Check paths exist, method names are unique, and the run is complete.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ground_truths.is_empty() {
            return Err(ConfigError::NoGroundTruth);
        }
        if self.methods.is_empty() {
            return Err(ConfigError::NoMethods);
        }
        if self.cpe_coefficient <= 0.0 || self.cpe_coefficient.is_nan() {
            return Err(ConfigError::Flag(format!(
                "cpe coefficient must be positive, got {}",
                self.cpe_coefficient
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(&m.name) {
                return Err(ConfigError::DuplicateMethod(m.name.clone()));
            }
        }
        for m in &self.methods {
            if !m.path.exists() {
                return Err(ConfigError::MissingPath(m.path.clone()));
            }
            if let SchemaRef::File(p) = &m.schema {
                if !p.exists() {
                    return Err(ConfigError::MissingPath(p.clone()));
                }
            }
        }
        for gt in &self.ground_truths {
            if !gt.exists() {
                return Err(ConfigError::MissingPath(gt.clone()));
            }
        }
        for p in [&self.sigma_path, &self.reference_pose_path]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(ConfigError::MissingPath(p.clone()));
            }
        }
        Ok(())
    }

    /// Parse a repeatable `--det name=path:format:schema` flag.
    pub fn parse_det_flag(flag: &str) -> Result<MethodConfig, ConfigError> {
        let bad = || ConfigError::Flag(format!("expected `name=path:format:schema`, got `{flag}`"));
        let (name, rest) = flag.split_once('=').ok_or_else(bad)?;
        let mut parts = rest.splitn(3, ':');
        let path = parts.next().ok_or_else(bad)?;
        let format = parts.next().ok_or_else(bad)?;
        let schema = parts.next().ok_or_else(bad)?;
        Ok(MethodConfig {
            name: name.trim().to_string(),
            path: PathBuf::from(path),
            format: FormatKind::parse(format)
                .ok_or_else(|| ConfigError::Flag(format!("unknown format `{format}`")))?,
            schema: SchemaRef::parse(schema),
        })
    }
}

struct MethodDraft {
    name: String,
    path: Option<PathBuf>,
    format: Option<FormatKind>,
    schema: Option<SchemaRef>,
}

impl MethodDraft {
    fn new(name: &str) -> Self {
        MethodDraft {
            name: name.to_string(),
            path: None,
            format: None,
            schema: None,
        }
    }

    fn finish(self, err: &dyn Fn(String) -> ConfigError) -> Result<MethodConfig, ConfigError> {
        Ok(MethodConfig {
            path: self
                .path
                .ok_or_else(|| err(format!("method `{}` missing `path`", self.name)))?,
            format: self
                .format
                .ok_or_else(|| err(format!("method `{}` missing `format`", self.name)))?,
            schema: self
                .schema
                .unwrap_or(SchemaRef::Identity(ScorePolicy::NativeScore)),
            name: self.name,
        })
    }
}
