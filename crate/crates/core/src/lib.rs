//! Decision-level fusion of three image-splicing detectors.
//!
//! Each detector extracts a texture feature vector from a 128×128 grayscale
//! block (Haar wavelet statistics, edge co-occurrence statistics, run-length
//! statistics), keeps the most discriminative features via boosting, and
//! scores the block with an RBF-SVM. Decision values are mapped to
//! probabilities with a fitted sigmoid and fused by a first-order
//! Takagi-Sugeno neuro-fuzzy model into an authentic/forged verdict.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common instantiations.

pub mod anfis;
pub mod boostsel;
pub mod calibrate;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod matrix;
pub mod pipeline;
pub mod scalar;
pub mod svm;
pub mod synth;

pub use anfis::{fused_verdict, AnfisModel, ConsequentKind, Verdict};
pub use boostsel::{select_features, FeatureCount, SelectionResult};
pub use calibrate::{fit_sigmoid, SigmoidCalibrator};
pub use dataset::{Corpus, ImageBlock, Label};
pub use error::{Error, Result};
pub use eval::{ConfusionCounts, RunReport};
pub use features::{FeatureTable, Tool};
pub use matrix::Matrix;

pub use pipeline::PipelineConfig;
pub use scalar::Scalar;
pub use svm::{KernelParams, SvmModel};

pub type AnfisModelF64 = AnfisModel<f64>;
pub type AnfisModelF32 = AnfisModel<f32>;
pub type SvmModelF64 = SvmModel<f64>;
pub type SvmModelF32 = SvmModel<f32>;
pub type SigmoidCalibratorF64 = SigmoidCalibrator<f64>;
pub type SigmoidCalibratorF32 = SigmoidCalibrator<f32>;
pub type SelectionResultF64 = SelectionResult<f64>;
pub type SelectionResultF32 = SelectionResult<f32>;
pub type FeatureTableF64 = FeatureTable<f64>;
pub type FeatureTableF32 = FeatureTable<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
