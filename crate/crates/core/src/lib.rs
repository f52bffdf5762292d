//! Mammogram screening pipeline: PGM ingestion, preprocessing, wavelet and
//! Fourier feature extraction, Gaussian Naive Bayes classification and
//! ROC-based evaluation.
//!
//! The crate is organised the way the data flows:
//!
//! - [`imgio`]: Netpbm PGM reading/writing and the normalized [`GrayImage`].
//! - [`preprocess`]: orientation matching, background thresholding, artifact
//!   removal and intensity matching.
//! - [`wavelet`]: periodic 1D/2D discrete wavelet transform (Haar, Daubechies-4).
//! - [`fourier`]: 2D DFT, both direct summation and radix-2 FFT.
//! - [`features`]: statistical moments, cross-correlation, feature tables and
//!   Fisher-ratio feature ranking.
//! - [`bayes`]: Gaussian Naive Bayes model with a line-oriented model file.
//! - [`eval`]: confusion matrices, ROC/AUC and stratified k-fold splits.
//! - [`phantom`]: deterministic synthetic mammogram generator.
//! - [`config`] and [`pipeline`]: configuration file parsing and the batch
//!   orchestration used by the command-line tool.

pub mod bayes;
pub mod config;
pub mod eval;
pub mod features;
pub mod fourier;
pub mod imgio;
pub mod label;
pub mod matrix;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod wavelet;

pub use imgio::{GrayImage, RawImage};
pub use label::Label;
pub use matrix::Matrix;
