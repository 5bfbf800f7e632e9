//! Semantic vector networks: a word graph whose edges are chosen by weighted
//! PMI and labeled with relation vectors averaged from sentence contexts, then
//! compressed by an autoencoder whose decoder also sees both word vectors.
//!
//! The build runs `corpus` -> `graph` -> `relvec` -> `autoenc`; `simeval` and
//! `query` read the finished network, and `pipeline` ties the stages to an
//! on-disk network directory.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod graph;
pub mod numfmt;
pub mod par;
pub mod pipeline;
pub mod query;
pub mod relvec;
pub mod simeval;
pub mod synth;
pub mod autoenc;

pub use error::{Error, Result};

/// Dense vocabulary index.
pub type WordId = u32;
