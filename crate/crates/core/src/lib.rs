//! Long-document classification and retrieval harness with two interchangeable
//! sequence encoders: a quadratic self-attention transformer and a linear-time
//! selective state-space scan.
//!
//! Documents are tokenized, cut into overlapping windows, encoded, and either
//! classified with a linear probe over pooled window embeddings or ranked by
//! cosine similarity of mean-pooled document embeddings. The `bench` module
//! measures throughput and length scaling of both encoders.

pub mod bench;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod hashing;
pub mod heads;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod tokenize;
pub mod window;

pub use error::{Error, Result};
