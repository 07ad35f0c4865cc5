//! Tools for comparing pre-trained word embeddings.
//!
//! * [`embed_store`]: word2vec text/binary tables, cosine similarity, exact top-k search.
//! * [`corpus`]: CoNLL BIO corpora and vocabulary overlap.
//! * [`derive`]: type-level tables from occurrence vectors, truncated SVD.
//! * [`intrinsic`]: neighbour agreement, similarity correlation, t-SNE.
//! * [`tagger`]: character-GRU + BiGRU + CRF tagger with span F1 evaluation.
//! * [`cli`]: the `embeval` command line.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory, for
//! instance `cargo run --example similarity_search`.

pub mod cli;
pub mod corpus;
pub mod derive;
pub mod embed_store;
pub mod error;
pub mod intrinsic;
pub mod matrix;
pub mod report;
pub mod synthetic;
pub mod tagger;

pub use error::{Error, Result};
