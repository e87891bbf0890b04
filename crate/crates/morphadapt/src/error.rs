use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown task id `{0}`")]
    UnknownTask(String),
    #[error("variant does not belong to task {task}: {detail}")]
    VariantMismatch { task: String, detail: String },
    #[error("action out of bounds: component {index} = {value} outside [{lo}, {hi}]")]
    ActionOutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("morphology mismatch: expected {expected} pickers, state has {actual}")]
    MorphologyMismatch { expected: usize, actual: usize },
    #[error("simulation diverged: {0}")]
    SimDiverged(String),
    #[error("empty point set passed to chamfer distance")]
    EmptyPointSet,
    #[error("degenerate variant: optimal performance equals initial performance")]
    DegenerateVariant,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("training diverged: {0}")]
    TrainingDiverged(String),
    #[error("teacher policy failed to reach quality floor after {0} retries")]
    TeacherRetriesExhausted(usize),
    #[error("dataset schema version {found} incompatible with expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("truncated array {name}: expected {expected} elements, found {found}")]
    TruncatedArray {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("unknown ablation id `{0}` (expected ABL1..ABL5)")]
    UnknownAblation(String),
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn stage(stage: &str) -> impl FnOnce(Error) -> Error + '_ {
        move |source| Error::Stage {
            stage: stage.to_string(),
            source: Box::new(source),
        }
    }
}
