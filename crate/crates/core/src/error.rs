use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error; the variant names the module that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion: {0}")]
    Ingest(#[from] IngestError),
    #[error("color_features: {0}")]
    Color(#[from] ColorError),
    #[error("optical_flow: {0}")]
    Flow(#[from] FlowError),
    #[error("fusion: {0}")]
    Fusion(#[from] FusionError),
    #[error("selection: {0}")]
    Selection(#[from] SelectionError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: manifest is missing field `{field}`")]
    MissingField { path: PathBuf, field: &'static str },
    #[error("{path}: manifest field `{field}` is invalid: {reason}")]
    InvalidField {
        path: PathBuf,
        field: &'static str,
        reason: String,
    },
    #[error("manifest field `{field}` points to a missing directory: {path}")]
    BadPath { field: String, path: PathBuf },
    #[error("{path}: manifest field `fps` must be positive, got {fps}")]
    NonPositiveFps { path: PathBuf, fps: f64 },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("stride must be positive, got {0}")]
    NonPositiveStride(f64),
    #[error("{dir}: only {found} frame(s) after sampling, need at least 2")]
    TooFewFrames { dir: PathBuf, found: usize },
    #[error("{path}: cannot decode image: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("{dir}: two files carry frame index {index}")]
    DuplicateIndex { dir: PathBuf, index: u64 },
    #[error("{dir}: frame {index} has size {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    FrameSize {
        dir: PathBuf,
        index: u64,
        found_w: u32,
        found_h: u32,
        expected_w: u32,
        expected_h: u32,
    },
    #[error("no saliency directory configured for video `{0}`")]
    NoSaliencyDir(String),
    #[error("no saliency map for frame index {0}")]
    MissingMap(u64),
    #[error("saliency map for frame {index} is {map_w}x{map_h}, frame is {frame_w}x{frame_h}")]
    SizeMismatch {
        index: u64,
        map_w: u32,
        map_h: u32,
        frame_w: u32,
        frame_h: u32,
    },
    #[error("{0}: ground-truth directory holds no frames")]
    EmptyGroundTruth(PathBuf),
}

#[derive(Debug, Error, PartialEq)]
pub enum ColorError {
    #[error("bin count must be one of 4, 8, 16, 32, 64; got {0}")]
    BadBinCount(usize),
    #[error("histograms have {0} and {1} bins")]
    BinMismatch(usize, usize),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("maps are {0}x{1} and {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("need at least 2 saliency maps, got {0}")]
    TooFewMaps(usize),
    #[error("invalid Lucas-Kanade parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("operator `{operator}` takes {expected} series, got {found}")]
    WrongArity {
        operator: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("linear fusion needs {0} weights")]
    MissingWeights(usize),
    #[error("smoothing window must be odd and >= 1, got {0}")]
    EvenWindow(usize),
    #[error("no series to fuse")]
    NoSeries,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("need at least 3 score values to find minima, got {0}")]
    SeriesTooShort(usize),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("precision undefined with zero candidate frames")]
    ZeroCandidates,
    #[error("recall undefined with zero ground-truth frames")]
    ZeroGroundTruth,
    #[error("match count {n_match} exceeds {what} count {total}")]
    MatchOverflow {
        n_match: usize,
        total: usize,
        what: &'static str,
    },
    #[error("match delta must lie in [0, 1], got {0}")]
    BadDelta(f64),
    #[error("no ground-truth sets for video `{0}`")]
    NoGroundTruth(String),
}
