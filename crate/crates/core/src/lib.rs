//! Attribute fusion for catalogs that lack a shared join key.
//!
//! For each local record, `attrfuse` predicts the state of a global
//! attribute by combining two models:
//!
//! * a tree-structured Bayesian network over the record's categorical local
//!   characteristics ([`tbn`]), and
//! * an unsupervised text-similarity model over its free-text descriptions
//!   ([`uts`]).
//!
//! The two distributions are merged with per-state confidence weights, and
//! every prediction carries a confidence (CoP) used to route uncertain
//! records to human annotators ([`ensemble`]). [`pipeline`] ties the pieces
//! together; the `attrfuse` binary exposes it on the command line.
//!
//! The guide under `book/` walks through each concept; its code listings
//! are compiled and run as doctests of this crate.

pub mod bundle;
pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod stats;
pub mod tbn;
pub mod uts;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data-model.md")]
    mod data_model {}
    #[doc = include_str!("../../../book/src/mutual-information.md")]
    mod mutual_information {}
    #[doc = include_str!("../../../book/src/tree-networks.md")]
    mod tree_networks {}
    #[doc = include_str!("../../../book/src/text-similarity.md")]
    mod text_similarity {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/model-format.md")]
    mod model_format {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
