//! Keyframe video summarization.
//!
//! A static score (hue-histogram dissimilarity between consecutive frames) and
//! a temporal score (Lucas-Kanade motion between consecutive saliency maps,
//! normalized by saliency overlap) are fused into one signal. Prominent local
//! minima of that signal become keyframes. The `evaluation` module scores a
//! summary against per-annotator ground truth with precision, recall and
//! f-measure.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod color;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod flow;
pub mod fusion;
pub mod ingest;
pub mod pipeline;
pub mod saliency;
pub mod score;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
pub use score::ScoreSeries;

/// Version of the JSON/CSV report layouts written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
