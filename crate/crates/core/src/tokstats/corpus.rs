use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::tokenizer::{Segmentation, Vocabulary, DEFAULT_CONTINUATION_PREFIX};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedWord {
    pub segmentation: Segmentation,
    pub frequency: u64,
}

impl SegmentedWord {
    pub fn word(&self) -> &str {
        &self.segmentation.word
    }
}

/// A word-frequency table where every word carries its segmentation.
#[derive(Debug, Clone)]
pub struct SegmentedCorpus {
    items: Vec<SegmentedWord>,
    words: HashSet<String>,
    continuation_prefix: String,
    unk: String,
}

impl Default for SegmentedCorpus {
    fn default() -> Self {
        SegmentedCorpus::new(DEFAULT_CONTINUATION_PREFIX, "[UNK]")
    }
}

impl SegmentedCorpus {
    pub fn new(continuation_prefix: &str, unk: &str) -> Self {
        SegmentedCorpus {
            items: Vec::new(),
            words: HashSet::new(),
            continuation_prefix: continuation_prefix.to_string(),
            unk: unk.to_string(),
        }
    }

    pub fn push(&mut self, segmentation: Segmentation, frequency: u64) -> Result<()> {
        if frequency == 0 {
            return Err(Error::Invalid(format!(
                "word {:?} has zero frequency",
                segmentation.word
            )));
        }
        if segmentation.pieces.is_empty() {
            return Err(Error::Invalid(format!(
                "word {:?} has no pieces",
                segmentation.word
            )));
        }
        if !self.words.insert(segmentation.word.clone()) {
            return Err(Error::Invalid(format!(
                "word {:?} appears twice in the corpus",
                segmentation.word
            )));
        }
        self.items.push(SegmentedWord {
            segmentation,
            frequency,
        });
        Ok(())
    }

    /// Convenience constructor from raw pieces; a lone UNK marker marks the
    /// word as unknown.
    pub fn push_pieces(&mut self, word: &str, pieces: Vec<String>, frequency: u64) -> Result<()> {
        let is_unknown = pieces.len() == 1 && pieces[0] == self.unk;
        self.push(
            Segmentation {
                word: word.to_string(),
                pieces,
                is_unknown,
            },
            frequency,
        )
    }

    /// Segment a word-frequency table with a vocabulary.
    pub fn from_vocabulary<S: AsRef<str>>(vocab: &Vocabulary, counts: &[(S, u64)]) -> Result<Self> {
        let mut merged: BTreeMap<&str, u64> = BTreeMap::new();
        for (w, c) in counts {
            *merged.entry(w.as_ref()).or_default() += c;
        }
        let mut corpus = SegmentedCorpus::new(vocab.continuation_prefix(), &vocab.specials().unk);
        for (w, c) in merged {
            if c > 0 {
                corpus.push(vocab.tokenize_word(w)?, c)?;
            }
        }
        Ok(corpus)
    }

    /// Read `word<TAB>freq<TAB>piece1 piece2 ...` lines.
    pub fn load_tsv<R: BufRead>(reader: R, continuation_prefix: &str, unk: &str) -> Result<Self> {
        let mut corpus = SegmentedCorpus::new(continuation_prefix, unk);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(word), Some(freq), Some(pieces), None) =
                (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(Error::parse("segmented corpus", i + 1, "expected 3 tab-separated columns"));
            };
            let freq: u64 = freq
                .parse()
                .map_err(|_| Error::parse("segmented corpus", i + 1, format!("bad frequency {freq:?}")))?;
            let pieces: Vec<String> = pieces.split(' ').filter(|p| !p.is_empty()).map(String::from).collect();
            corpus
                .push_pieces(word, pieces, freq)
                .map_err(|e| Error::parse("segmented corpus", i + 1, e.to_string()))?;
        }
        Ok(corpus)
    }

    pub fn items(&self) -> &[SegmentedWord] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn unk(&self) -> &str {
        &self.unk
    }
}

/// Gold morpheme segmentation per word.
#[derive(Debug, Clone, Default)]
pub struct MorphGold {
    morphemes: BTreeMap<String, Vec<String>>,
}

impl MorphGold {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, morphemes: Vec<String>) -> Result<()> {
        if morphemes.is_empty() || morphemes.concat() != word {
            return Err(Error::Invalid(format!(
                "morphemes {morphemes:?} do not concatenate to {word:?}"
            )));
        }
        self.morphemes.insert(word.to_string(), morphemes);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.morphemes.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.morphemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphemes.is_empty()
    }

    /// Read `word<TAB>morph1 morph2 ...` lines.
    pub fn load_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut gold = MorphGold::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let Some((word, morphs)) = line.split_once('\t') else {
                return Err(Error::parse("gold segmentation", i + 1, "expected 2 tab-separated columns"));
            };
            let morphs = morphs.split(' ').filter(|m| !m.is_empty()).map(String::from).collect();
            gold.insert(word, morphs)
                .map_err(|e| Error::parse("gold segmentation", i + 1, e.to_string()))?;
        }
        Ok(gold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round() {
        let text = "ab\t3\ta ##b\nc\t1\t[UNK]\n";
        let c = SegmentedCorpus::load_tsv(text.as_bytes(), "##", "[UNK]").unwrap();
        assert_eq!(c.len(), 2);
        assert!(!c.items()[0].segmentation.is_unknown);
        assert!(c.items()[1].segmentation.is_unknown);
        assert_eq!(c.items()[0].frequency, 3);
    }

    #[test]
    fn duplicate_words_and_zero_freq_rejected() {
        assert!(SegmentedCorpus::load_tsv("a\t1\ta\na\t2\ta\n".as_bytes(), "##", "[UNK]").is_err());
        assert!(SegmentedCorpus::load_tsv("a\t0\ta\n".as_bytes(), "##", "[UNK]").is_err());
        assert!(SegmentedCorpus::load_tsv("a\tx\ta\n".as_bytes(), "##", "[UNK]").is_err());
    }

    #[test]
    fn gold_must_concatenate() {
        let mut g = MorphGold::new();
        assert!(g.insert("házak", vec!["ház".into(), "ak".into()]).is_ok());
        assert!(g.insert("házak", vec!["ház".into(), "k".into()]).is_err());
        assert!(MorphGold::load_tsv("házak\tház ak\n".as_bytes()).is_ok());
        assert!(MorphGold::load_tsv("házak\tház a\n".as_bytes()).is_err());
    }
}
