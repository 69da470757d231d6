use serde::{Deserialize, Serialize};

use super::{Span, Vocabulary};
use crate::error::{Error, Result};

/// Words longer than this (in chars) are mapped to UNK without matching.
pub const MAX_WORD_CHARS: usize = 256;

/// One word's ordered subword pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub word: String,
    pub pieces: Vec<String>,
    pub is_unknown: bool,
}

impl Segmentation {
    pub fn unknown(word: &str, unk: &str) -> Self {
        Segmentation {
            word: word.to_string(),
            pieces: vec![unk.to_string()],
            is_unknown: true,
        }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Pieces with the continuation prefix removed from every non-initial piece.
    pub fn stripped<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.pieces.iter().enumerate().map(move |(i, p)| {
            if i == 0 {
                p.as_str()
            } else {
                p.strip_prefix(prefix).unwrap_or(p)
            }
        })
    }
}

/// A tokenized sentence: `[CLS] pieces... [SEP]` plus one span per word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceEncoding {
    pub pieces: Vec<String>,
    pub spans: Vec<Span>,
}

impl Vocabulary {
    /// Greedy left-to-right longest-match segmentation.
    pub fn tokenize_word(&self, word: &str) -> Result<Segmentation> {
        if word.is_empty() {
            return Err(Error::EmptyWord);
        }
        if word.chars().any(char::is_whitespace) {
            return Err(Error::WhitespaceInWord(word.to_string()));
        }
        let unk = &self.specials().unk;
        // char boundaries, including the end of the string
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(word.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        if n_chars > MAX_WORD_CHARS {
            return Ok(Segmentation::unknown(word, unk));
        }

        let prefix = self.continuation_prefix();
        let prefix_chars = prefix.chars().count();
        let mut pieces = Vec::new();
        let mut candidate = String::with_capacity(word.len() + prefix.len());
        let mut start = 0;
        while start < n_chars {
            let budget = if start == 0 {
                self.max_piece_chars()
            } else {
                self.max_piece_chars().saturating_sub(prefix_chars)
            };
            let max_end = n_chars.min(start + budget);
            let mut matched = None;
            for end in (start + 1..=max_end).rev() {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(prefix);
                }
                candidate.push_str(&word[bounds[start]..bounds[end]]);
                if self.contains(&candidate) {
                    matched = Some(end);
                    break;
                }
            }
            match matched {
                Some(end) => {
                    pieces.push(candidate.clone());
                    start = end;
                }
                None => return Ok(Segmentation::unknown(word, unk)),
            }
        }
        Ok(Segmentation {
            word: word.to_string(),
            pieces,
            is_unknown: false,
        })
    }

    /// Tokenize a pre-split sentence, wrapping it in CLS/SEP.
    pub fn tokenize_sentence<S: AsRef<str>>(&self, words: &[S]) -> Result<SentenceEncoding> {
        if words.is_empty() {
            return Err(Error::Invalid("cannot tokenize an empty sentence".into()));
        }
        let specials = self.specials();
        let mut pieces = vec![specials.cls.clone()];
        let mut spans = Vec::with_capacity(words.len());
        for word in words {
            let seg = self.tokenize_word(word.as_ref())?;
            let start = pieces.len();
            pieces.extend(seg.pieces);
            spans.push(Span::new(start, pieces.len()));
        }
        pieces.push(specials.sep.clone());
        Ok(SentenceEncoding { pieces, spans })
    }
}
