//! Dense retrieval with logical consistency constraints.
//!
//! A hashed linear bi-encoder is trained with a supervised contrastive loss,
//! optionally joined by exclusion and subset consistency penalties between
//! logically related queries sampled into the same mini-batch.

pub mod batch;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod logic;
pub mod loss;
pub mod metrics;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
