use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{SpecialTokens, Vocabulary};
use crate::error::{Error, Result};

/// Result of [`train_vocabulary`].
#[derive(Debug, Clone)]
pub struct TrainedVocabulary {
    pub vocabulary: Vocabulary,
    /// Set when the merge loop ran out of candidate pairs before reaching
    /// the requested size.
    pub truncated: bool,
}

/// Train a vocabulary by repeated frequency-weighted pair merging.
///
/// Entries are laid out as: `specials` in the given order, the initial form
/// of every observed character, the continuation form of every character
/// observed in a non-initial position, then merged symbols in merge order.
/// The most frequent adjacent pair is merged first; ties go to the
/// lexicographically smallest `(left, right)` pair.
pub fn train_vocabulary<S: AsRef<str>>(
    corpus: &[(S, u64)],
    target_size: usize,
    continuation_prefix: &str,
    specials: &[String],
) -> Result<TrainedVocabulary> {
    let special_tokens = SpecialTokens::from_list(specials)?;

    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (word, freq) in corpus {
        let word = word.as_ref();
        if word.is_empty() {
            return Err(Error::EmptyWord);
        }
        if *freq > 0 {
            *counts.entry(word).or_default() += freq;
        }
    }

    let mut initial_chars = BTreeSet::new();
    let mut continuation_chars = BTreeSet::new();
    let mut words: Vec<(Vec<String>, u64)> = Vec::with_capacity(counts.len());
    for (word, &freq) in &counts {
        let symbols: Vec<String> = word
            .chars()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    c.to_string()
                } else {
                    continuation_chars.insert(format!("{continuation_prefix}{c}"));
                    format!("{continuation_prefix}{c}")
                }
            })
            .collect();
        for c in word.chars() {
            initial_chars.insert(c.to_string());
        }
        words.push((symbols, freq));
    }

    let mut entries: Vec<String> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for s in specials
        .iter()
        .cloned()
        .chain(initial_chars)
        .chain(continuation_chars)
    {
        if seen.insert(s.clone()) {
            entries.push(s);
        }
    }
    if target_size < entries.len() {
        return Err(Error::VocabularyTooSmall {
            requested: target_size,
            minimum: entries.len(),
        });
    }

    let mut truncated = false;
    while entries.len() < target_size {
        let Some((left, right)) = best_pair(&words) else {
            truncated = true;
            break;
        };
        let tail = right.strip_prefix(continuation_prefix).unwrap_or(&right);
        let merged = format!("{left}{tail}");
        for (symbols, _) in &mut words {
            merge_in_place(symbols, &left, &right, &merged);
        }
        if seen.insert(merged.clone()) {
            entries.push(merged);
        }
    }

    Ok(TrainedVocabulary {
        vocabulary: Vocabulary::new(entries, continuation_prefix, special_tokens)?,
        truncated,
    })
}

fn best_pair(words: &[(Vec<String>, u64)]) -> Option<(String, String)> {
    let mut pairs: HashMap<(&str, &str), u64> = HashMap::new();
    for (symbols, freq) in words {
        for w in symbols.windows(2) {
            *pairs.entry((&w[0], &w[1])).or_default() += freq;
        }
    }
    pairs
        .into_iter()
        .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
        .map(|((l, r), _)| (l.to_string(), r.to_string()))
}

fn merge_in_place(symbols: &mut Vec<String>, left: &str, right: &str, merged: &str) {
    if symbols.len() < 2 {
        return;
    }
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(merged.to_string());
            i += 2;
        } else {
            out.push(std::mem::take(&mut symbols[i]));
            i += 1;
        }
    }
    *symbols = out;
}
