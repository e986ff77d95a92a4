//! A from-scratch quaternion deep-learning micro-framework built around one
//! experiment: train a quaternion convolutional encoder-decoder (QCAE) and a
//! matched real-valued baseline (CAE) on a single gray-scale image, then test
//! whether each can reconstruct unseen color images. The Hamilton product
//! ties a pixel's three color channels together under shared quaternion
//! weights, which is what lets the QCAE recover color it never saw in
//! training.
//!
//! Everything is double precision and deterministic given a seed: weight
//! initialization, training, and evaluation reproduce bit-for-bit across
//! runs and thread counts.

pub mod config;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod quat;
pub mod tensor;

pub use error::{Error, Result};
pub use quat::Quaternion;
pub use tensor::{QTensor, RealTensor};
