//! distrank: a desk-scale text-retrieval engine.
//!
//! The pipeline trains a late-interaction (MaxSim) scorer as a teacher,
//! distills it into a single-vector pooled dot-product student with a
//! tightly-coupled in-batch KL objective, and serves retrieval end to end:
//! a flat dense index with exact inner-product top-k, a BM25 inverted
//! index, piecewise hybrid score fusion, and TREC-style evaluation.
//!
//! The `parallel` feature (on by default) runs the data-parallel inner
//! loops — batch scoring, corpus encoding, index scans — on rayon. The
//! sequential fallback produces bit-identical results.

pub mod datagen;
pub mod dense_index;
pub mod distill;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod linalg;
pub mod scoring;
pub mod sparse_index;
pub mod trec;

mod binfmt;

pub use dense_index::{DenseIndex, SearchResult, StorageReport};
pub use encoder::{Encoder, Projection, Vocabulary};
pub use error::{Error, Result};
pub use sparse_index::SparseIndex;
