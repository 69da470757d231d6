//! WordPiece-style subword tokenization.
//!
//! Words are segmented by greedy left-to-right longest match against a
//! [`Vocabulary`]; every piece after the first carries the vocabulary's
//! continuation prefix (`##` by default). A word that cannot be fully
//! covered collapses to the UNK marker.

mod train;
mod vocab;
mod wordpiece;

pub use train::{train_vocabulary, TrainedVocabulary};
pub use vocab::{SpecialTokens, Vocabulary, DEFAULT_CONTINUATION_PREFIX};
pub use wordpiece::{Segmentation, SentenceEncoding, MAX_WORD_CHARS};

use serde::{Deserialize, Serialize};

/// Half-open interval `[start, end)` over a flat subword sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}
