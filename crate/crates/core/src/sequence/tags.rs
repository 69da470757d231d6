use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::conllu;
use crate::error::{Error, Result};

/// Predicted or gold labels for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub sentence_id: u64,
    pub tags: Vec<String>,
}

/// A sentence with one gold tag per word. `sentence_id` is the sentence's
/// position in its source file, which is also its id in the matching
/// embedding store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub sentence_id: u64,
    pub words: Vec<String>,
    pub tags: Vec<String>,
}

impl TaggedSentence {
    pub fn tag_sequence(&self) -> TagSequence {
        TagSequence {
            sentence_id: self.sentence_id,
            tags: self.tags.clone(),
        }
    }
}

/// Word forms and UPOS tags from CoNLL-U.
pub fn load_pos_conllu<R: BufRead>(reader: R) -> Result<Vec<TaggedSentence>> {
    Ok(conllu::parse(reader)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| TaggedSentence {
            sentence_id: i as u64,
            words: s.tokens.iter().map(|t| t.form.clone()).collect(),
            tags: s.tokens.iter().map(|t| t.upos.clone()).collect(),
        })
        .collect())
}

/// Two-column `token<TAB>tag` file, blank lines between sentences. Tags are
/// validated and repaired to BIO2.
pub fn load_ner_tsv<R: BufRead>(reader: R) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    let mut words = Vec::new();
    let mut tags = Vec::new();
    let flush = |words: &mut Vec<String>, tags: &mut Vec<String>, out: &mut Vec<TaggedSentence>| -> Result<()> {
        if !words.is_empty() {
            out.push(TaggedSentence {
                sentence_id: out.len() as u64,
                words: std::mem::take(words),
                tags: repair_bio2(&std::mem::take(tags))?,
            });
        }
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut words, &mut tags, &mut out)?;
            continue;
        }
        let Some((word, tag)) = line.split_once('\t') else {
            return Err(Error::parse("NER TSV", i + 1, "expected token<TAB>tag"));
        };
        Bio::parse(tag).map_err(|_| Error::parse("NER TSV", i + 1, format!("invalid tag {tag:?}")))?;
        words.push(word.to_string());
        tags.push(tag.to_string());
    }
    flush(&mut words, &mut tags, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bio<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Bio<'a> {
    pub fn parse(tag: &'a str) -> Result<Self> {
        if tag == "O" {
            return Ok(Bio::Outside);
        }
        match tag.split_once('-') {
            Some(("B", ty)) if !ty.is_empty() => Ok(Bio::Begin(ty)),
            Some(("I", ty)) if !ty.is_empty() => Ok(Bio::Inside(ty)),
            _ => Err(Error::InvalidTag(tag.to_string())),
        }
    }
}

/// Rewrite `I-X` that follows `O` or a different type as `B-X`.
pub fn repair_bio2<S: AsRef<str>>(tags: &[S]) -> Result<Vec<String>> {
    let mut prev: Option<&str> = None;
    let mut out = Vec::with_capacity(tags.len());
    for tag in tags {
        let tag = tag.as_ref();
        match Bio::parse(tag)? {
            Bio::Outside => {
                prev = None;
                out.push(tag.to_string());
            }
            Bio::Begin(ty) => {
                prev = Some(ty);
                out.push(tag.to_string());
            }
            Bio::Inside(ty) => {
                if prev == Some(ty) {
                    out.push(tag.to_string());
                } else {
                    out.push(format!("B-{ty}"));
                }
                prev = Some(ty);
            }
        }
    }
    Ok(out)
}

/// Typed spans `(type, start, end)` with `end` exclusive. An `I-X` that
/// cannot continue the open span starts a new one.
pub fn bio_spans<S: AsRef<str>>(tags: &[S]) -> Result<Vec<(String, usize, usize)>> {
    let mut spans = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let bio = Bio::parse(tag.as_ref())?;
        let continues = matches!((bio, open), (Bio::Inside(ty), Some((open_ty, _))) if ty == open_ty);
        if continues {
            continue;
        }
        if let Some((ty, start)) = open.take() {
            spans.push((ty.to_string(), start, i));
        }
        match bio {
            Bio::Begin(ty) | Bio::Inside(ty) => open = Some((ty, i)),
            Bio::Outside => {}
        }
    }
    if let Some((ty, start)) = open {
        spans.push((ty.to_string(), start, tags.len()));
    }
    Ok(spans)
}
