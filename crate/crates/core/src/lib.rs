//! Debiasing embeddings by selecting sparse-autoencoder features that encode a
//! protected attribute and projecting out the direction they span.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`sae`] computes preactivations `z = (x - b_dec) E + b_enc`.
//! 2. [`select`] ranks features by how strongly `z` separates attribute groups.
//! 3. [`axis`] turns the top-k features into a direction in embedding space.
//! 4. [`project`] removes that direction (or the span of the raw weights).
//!
//! [`metrics`] and [`harness`] evaluate the result on retrieval and
//! classification tasks.

pub mod axis;
pub mod data;
pub mod error;
pub mod harness;
pub mod logistic;
pub mod matrix;
pub mod metrics;
pub mod project;
pub mod sae;
pub mod select;

pub use error::{Result, SnpError};
pub use matrix::Matrix;
