//! Class-adaptive self-training for multi-label classification when the
//! training annotation misses positives.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`corpus`] / [`io`]: documents of entity-pair instances, annotation
//!   sets and the on-disk corpus format.
//! - [`synth`]: Zipf-imbalanced synthetic corpora with injected false
//!   negatives, and DocRED-style ingestion.
//! - [`learner`]: the learner contract and a one-vs-rest linear reference.
//! - [`metrics`]: per-class P/R and the micro, Ign, frequent and long-tail F1.
//! - [`strategies`]: CAST, CREST and VST sampling plans, re-sampling, merge.
//! - [`engine`]: the round/fold self-training loop and the baseline.
//! - [`config`] / [`report`]: configuration files and run artifacts.

pub mod config;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod report;
pub mod seed;
pub mod strategies;
pub mod synth;

pub use corpus::{
    validate_corpus, Corpus, Document, EntityPairInstance, LabelSet, LabelSpace, Origin, SplitTag,
    TripleKey, TripleLabel, Violation, NA_LABEL,
};
pub use error::{Error, Result};
pub use seed::{derive_stream, SeedStream};
