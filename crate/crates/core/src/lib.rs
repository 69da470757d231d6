//! Tools for measuring how subword tokenizers segment a corpus and for
//! training small probing classifiers on frozen, per-layer contextual
//! embeddings.
//!
//! The crate is organised around the workflow:
//!
//! - [`tokenizer`]: WordPiece-style vocabularies, greedy longest-match
//!   segmentation and a small pair-merge vocabulary trainer.
//! - [`tokstats`]: corpus-level segmentation statistics (piece entropies,
//!   length statistics, agreement with gold morpheme segmentations) and
//!   the length-vs-frequency-rank profile.
//! - [`conllu`] and [`probe_dataset`]: morphological probing datasets
//!   sampled from tagged corpora.
//! - [`store`]: the binary embedding store, subword pooling and layer
//!   selection.
//! - [`probe`]: scalar mix + one-hidden-layer MLP trained with Adam.
//! - [`sequence`]: token-level tagging, POS accuracy, BIO span F1 and
//!   layer sweeps.
//! - [`run`]: reproducibility helpers (seed derivation, digests,
//!   manifests).

pub mod conllu;
pub mod error;
pub mod probe;
pub mod probe_dataset;
pub mod run;
pub mod sequence;
pub mod store;
pub mod synth;
pub mod tokenizer;
pub mod tokstats;

pub use error::{Error, Result};
