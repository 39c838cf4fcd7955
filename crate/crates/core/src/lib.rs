//! Learned inversion of multimode-fibre image scrambling.
//!
//! A multimode fibre turns any image projected into it into a speckle
//! pattern. This crate recovers images from those speckles by fitting a
//! single complex-valued matrix `W` such that the reconstructed intensity is
//! `|W x|^2`, where `x` is the square root of the recorded speckle
//! intensity. A rank-limited random-matrix fibre simulator makes the whole
//! pipeline testable without optical hardware.
//!
//! Module map:
//!
//! - [`dataset`]: image planes, RGB handling, amplitude conversion, random
//!   patterns, camera-frame preprocessing, and the SPKL pair container.
//! - [`fibresim`]: transmission-matrix simulator and camera model.
//! - [`inversion`]: the complex inverse model, its cost and gradient, SGD,
//!   and the plateau/early-stop schedules.
//! - [`metrics`]: global SSIM, Pearson correlation, MSE.
//! - [`pipeline`]: the training loop, reconstruction, evaluation,
//!   checkpoints, and the decorrelation study.

pub mod dataset;
pub mod error;
pub mod fibresim;
pub mod inversion;
pub mod matrix;
pub mod metrics;
pub mod pipeline;

pub use dataset::{Frame, ImagePlane, PairSet, RgbImage, SpeckleRecord, Split};
pub use error::{Error, FormatError, Result};
pub use fibresim::FibreConfig;
pub use inversion::{InverseModel, LossDomain, LossReport, TrainConfig};
pub use matrix::ComplexMatrix;
pub use metrics::MetricParams;
pub use pipeline::{Checkpoint, CheckpointMeta, EvalReport, TrainOptions};
