//! Training-free video token pruning.
//!
//! The pipeline partitions sampled frames into high-similarity segments
//! ([`dyseg`]), splits a retention budget between density-based token merging
//! ([`dtm`]) and attention-based token selection ([`ats`]), and reassembles the
//! surviving tokens in their original spatiotemporal order ([`stprune`]).
//! [`flops`] estimates the LLM prefill cost of the resulting token count.
//!
//! Inputs and outputs travel as FVTD token dumps and FVPR results ([`io`]);
//! [`oracle`] holds brute-force references for the numerically nontrivial
//! steps.

pub mod ats;
pub mod cli;
pub mod compare;
pub mod dtm;
pub mod dyseg;
pub mod error;
pub mod flops;
pub mod io;
mod kernels;
mod kmeans;
pub mod oracle;
pub mod stprune;
pub mod types;

pub use error::{Error, Result, Stage};
pub use stprune::{compare_strategies, prune, verify_result, Merger, Pipeline, Segmenter};
pub use types::{
    validate_dump, AnchorFrame, AttentionSource, DumpDims, ModelShape, Origin, PruneConfig,
    PruneResult, PruneStats, RetainedToken, RoundingPolicy, SegmentBudget, Segmentation,
    TieBreakPolicy, TokenDump, TokenPos,
};
