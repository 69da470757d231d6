use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";

/// Marker strings that never take part in segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTokens {
    pub unk: String,
    pub cls: String,
    pub sep: String,
    pub pad: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        SpecialTokens {
            unk: "[UNK]".into(),
            cls: "[CLS]".into(),
            sep: "[SEP]".into(),
            pad: "[PAD]".into(),
        }
    }
}

impl SpecialTokens {
    /// Recognise markers in a list such as `["[PAD]", "[UNK]", "[CLS]", "[SEP]"]`
    /// or `["<pad>", "<unk>", "<s>", "</s>"]`.
    ///
    /// The UNK marker is mandatory. CLS, SEP and PAD fall back to the BERT
    /// defaults when the list does not name them.
    pub fn from_list<S: AsRef<str>>(list: &[S]) -> Result<Self> {
        let mut unk = None;
        let mut cls = None;
        let mut sep = None;
        let mut pad = None;
        for item in list {
            let item = item.as_ref();
            let upper = item.to_uppercase();
            let slot = if upper.contains("UNK") {
                &mut unk
            } else if upper.contains("CLS") || item == "<s>" {
                &mut cls
            } else if upper.contains("SEP") || item == "</s>" {
                &mut sep
            } else if upper.contains("PAD") {
                &mut pad
            } else {
                continue;
            };
            if slot.is_some() {
                return Err(Error::Vocabulary(format!(
                    "special token {item:?} duplicates an earlier marker of the same kind"
                )));
            }
            *slot = Some(item.to_string());
        }
        let defaults = SpecialTokens::default();
        Ok(SpecialTokens {
            unk: unk.ok_or_else(|| {
                Error::Vocabulary("special tokens must include an UNK marker".into())
            })?,
            cls: cls.unwrap_or(defaults.cls),
            sep: sep.unwrap_or(defaults.sep),
            pad: pad.unwrap_or(defaults.pad),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        [&self.unk, &self.cls, &self.sep, &self.pad]
            .into_iter()
            .map(String::as_str)
    }

    pub fn contains(&self, s: &str) -> bool {
        self.iter().any(|t| t == s)
    }
}

/// Immutable subword inventory. Ids are dense and equal to insertion order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pieces: Vec<String>,
    ids: HashMap<String, u32>,
    continuation_prefix: String,
    specials: SpecialTokens,
    // Upper bound on the char length of any entry, bounds the match search.
    max_piece_chars: usize,
}

impl Vocabulary {
    pub fn new<I, S>(pieces: I, continuation_prefix: &str, specials: SpecialTokens) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if continuation_prefix.is_empty() {
            return Err(Error::Vocabulary("continuation prefix must be non-empty".into()));
        }
        if specials.unk.is_empty() {
            return Err(Error::Vocabulary("special tokens must include an UNK marker".into()));
        }
        if let Some(bad) = specials.iter().find(|s| s.starts_with(continuation_prefix)) {
            return Err(Error::Vocabulary(format!(
                "special token {bad:?} starts with the continuation prefix {continuation_prefix:?}"
            )));
        }
        let mut vocab = Vocabulary {
            pieces: Vec::new(),
            ids: HashMap::new(),
            continuation_prefix: continuation_prefix.to_string(),
            specials,
            max_piece_chars: 0,
        };
        for (i, piece) in pieces.into_iter().enumerate() {
            vocab.push(piece.into(), i + 1)?;
        }
        Ok(vocab)
    }

    /// Read a vocabulary file: one subword per line, line index is the id.
    pub fn load<R: BufRead>(
        reader: R,
        continuation_prefix: &str,
        specials: SpecialTokens,
    ) -> Result<Self> {
        let mut vocab = Vocabulary::new(Vec::<String>::new(), continuation_prefix, specials)?;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let piece = line.strip_suffix('\r').unwrap_or(&line);
            if piece.is_empty() {
                return Err(Error::parse("vocabulary", i + 1, "empty subword"));
            }
            vocab.push(piece.to_string(), i + 1)?;
        }
        Ok(vocab)
    }

    fn push(&mut self, piece: String, line: usize) -> Result<()> {
        if piece.is_empty() {
            return Err(Error::parse("vocabulary", line, "empty subword"));
        }
        if self.ids.contains_key(&piece) {
            return Err(Error::DuplicateSubword { piece, line });
        }
        let id = u32::try_from(self.pieces.len())
            .map_err(|_| Error::Vocabulary("more than u32::MAX entries".into()))?;
        self.max_piece_chars = self.max_piece_chars.max(piece.chars().count());
        self.ids.insert(piece.clone(), id);
        self.pieces.push(piece);
        Ok(())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for piece in &self.pieces {
            writeln!(out, "{piece}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.ids.contains_key(piece)
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    pub(crate) fn max_piece_chars(&self) -> usize {
        self.max_piece_chars
    }
}
