//! Question answering over raw system logs.
//!
//! The pipeline factors answering into two stages: a trainable two-tower
//! retriever scores every log in a corpus against a natural-language
//! question, and an extractive reader pulls an exact answer span out of the
//! retrieved logs. Supporting modules cover log template mining, a
//! log-aware tokenizer, dataset loading, evaluation metrics, and a
//! deterministic sample-data generator.

pub mod artifact;
pub mod corpus;
pub mod datagen;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod num;
pub mod parsing;
pub mod reader;
pub mod retriever;
pub mod text;

pub use error::{Error, Result};
pub use num::Scalar;

/// Default scalar type for the shipped binaries and artifacts.
pub type Real = f64;

/// Encoder parameters at the default precision.
pub type EncoderParams = encoder::EncoderParams<Real>;
/// Reader model at the default precision.
pub type ReaderModel = reader::ReaderModel<Real>;
/// Retrieval index at the default precision.
pub type LogIndex = retriever::LogIndex<Real>;
