//! Batch-incremental video background estimation with weighted low-rank
//! approximation.
//!
//! A grayscale video is a matrix with one vectorised frame per column. It is
//! split into batches; each batch is solved as a weighted low-rank problem
//! whose heavily weighted first block holds a few background-like frames of
//! the previous batch. See [`pipeline`] for the loop and [`wlr`] for the
//! solver.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
mod linalg;
pub mod lowrank;
pub mod metrics;
pub mod ops;
mod par;
pub mod pgm;
pub mod pipeline;
pub mod selector;
pub mod synth;
pub mod video;
pub mod wlr;

pub use error::{Error, Result};
pub use lowrank::{ghs_solve, hard_threshold, project_columnspace, svt, Rank, SvdFactors};
pub use par::is_parallel;
pub use pipeline::{PipelineConfig, PipelineResult, PriorSource};
pub use video::{BatchPartition, FrameGeometry, VideoSequence};
pub use wlr::{WeightMatrix, WlrConfig, WlrResult, WlrState};
