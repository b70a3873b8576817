//! Offline recognition of isolated handwritten characters.
//!
//! The pipeline runs grayscale PGM input through [`preprocess`] (median
//! filter, Otsu binarization, morphological cleanup, slant correction, size
//! normalization), turns the result into a fixed 133-value vector in
//! [`features`], and classifies it with the SCG-trained network in [`mlp`].
//! [`dataset`] and [`cli`] provide the training / evaluation harness.

pub mod cli;
pub mod components;
pub mod dataset;
pub mod error;
pub mod features;
pub mod imgio;
pub mod mlp;
pub mod preprocess;

pub use error::{Error, Result};
