//! Corpus analysis for sequential recommendation test sets.
//!
//! The crate partitions leave-last-out test instances into memorization,
//! generalization and uncategorized groups from item-transition patterns in
//! the training sequences, measures how often semantic-ID prefixes turn an
//! item-level generalization case into a token-level memorization case, and
//! fuses an ID-based model with a generative-retrieval model using a
//! confidence-driven weight.
//!
//! Data-parallel loops (per-instance attribution, index construction, grid
//! search) run on rayon when the `parallel` feature is enabled (the default)
//! and fall back to plain iterators otherwise.

pub mod attribution;
pub mod domain;
pub mod ensemble;
pub mod error;
pub mod intset;
pub mod io;
pub mod metrics;
pub mod par;
pub mod report;
pub mod synthgen;
pub mod token_lens;
pub mod transition_index;

pub use attribution::{
    attribute, attribute_all, attribute_bruteforce, AttributionConfig, CategoryRecord,
    MatchMode, RatioSummary, SecondSymmetryKind,
};
pub use domain::{make_instances, Dataset, IdDict, Instance, Sequence, Split, SplitSpec, TransitionQuery};
pub use error::{Error, Result};
pub use transition_index::{build_index, TransitionIndex};
