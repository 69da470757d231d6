//! Minimal CoNLL-U reader: FORM, UPOS and FEATS of every syntactic word.
//!
//! Multiword token ranges (`1-2`) and empty nodes (`1.1`) are skipped.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub upos: String,
    pub feats: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub sent_id: Option<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn forms(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.form.clone()).collect()
    }
}

fn parse_feats(raw: &str, line: usize) -> Result<BTreeMap<String, String>> {
    let mut feats = BTreeMap::new();
    if raw == "_" {
        return Ok(feats);
    }
    for kv in raw.split('|') {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Error::parse("CoNLL-U", line, format!("malformed feature {kv:?}")));
        };
        if k.is_empty() || v.is_empty() {
            return Err(Error::parse("CoNLL-U", line, format!("malformed feature {kv:?}")));
        }
        feats.insert(k.to_string(), v.to_string());
    }
    Ok(feats)
}

pub fn parse<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.tokens.is_empty() {
                sentences.push(std::mem::take(&mut current));
            } else {
                current = Sentence::default();
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("sent_id") {
                let id = id.trim_start().trim_start_matches('=').trim();
                current.sent_id = Some(id.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                "CoNLL-U",
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if id.parse::<u32>().is_err() {
            return Err(Error::parse("CoNLL-U", line_no, format!("bad token id {id:?}")));
        }
        if cols[1].is_empty() {
            return Err(Error::parse("CoNLL-U", line_no, "empty FORM"));
        }
        current.tokens.push(Token {
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            feats: parse_feats(cols[5], line_no)?,
        });
    }
    if !current.tokens.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}
