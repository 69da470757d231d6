//! Synthetic corpora and embedding stores with planted structure, for
//! tests, benchmarks and dry runs without a real model.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::probe_dataset::ProbingDataset;
use crate::sequence::{TagSplits, TaggedSentence};
use crate::store::{EmbeddingRecord, EmbeddingStore, StoreHeader};
use crate::tokenizer::Span;

/// Where and how strongly a word's label shows up in its vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    /// Layers whose vectors carry the class direction; the rest are noise.
    pub layers: Vec<usize>,
    /// Length of the class direction added to labelled words.
    pub margin: f32,
    /// Standard deviation of the isotropic noise on every coordinate.
    pub noise: f32,
    /// Each word gets between 1 and this many subwords.
    pub max_pieces: usize,
}

impl Default for Signal {
    fn default() -> Self {
        Signal {
            layers: vec![1],
            margin: 1.0,
            noise: 0.1,
            max_pieces: 3,
        }
    }
}

/// One record. Words with `Some(c)` get `margin · e_c` added at every
/// signal layer and on every one of their subwords.
pub fn planted_record<R: Rng>(
    sentence_id: u64,
    labels: &[Option<usize>],
    num_layers: usize,
    hidden: usize,
    signal: &Signal,
    rng: &mut R,
) -> EmbeddingRecord {
    let normal = Normal::new(0.0f32, signal.noise.max(0.0)).expect("finite noise");
    let mut spans = Vec::with_capacity(labels.len());
    let mut at = 1;
    for _ in labels {
        let n = rng.gen_range(1..=signal.max_pieces.max(1));
        spans.push(Span::new(at, at + n));
        at += n;
    }
    let num_subwords = at + 1;
    let mut tensor: Vec<f32> = (0..num_layers * num_subwords * hidden).map(|_| normal.sample(rng)).collect();
    for &layer in &signal.layers {
        for (span, label) in spans.iter().zip(labels) {
            let Some(c) = label else { continue };
            for sub in span.start..span.end {
                tensor[(layer * num_subwords + sub) * hidden + c % hidden] += signal.margin;
            }
        }
    }
    EmbeddingRecord {
        sentence_id,
        num_subwords: num_subwords as u32,
        spans,
        tensor,
    }
}

/// A store for a probing dataset where each target word carries its label
/// index (position in the task's label set).
pub fn planted_probe_store<R: Rng>(
    dataset: &ProbingDataset,
    model_name: &str,
    num_layers: usize,
    hidden: usize,
    signal: &Signal,
    rng: &mut R,
) -> EmbeddingStore {
    let sentences = dataset.sentences();
    let mut labels: Vec<Vec<Option<usize>>> = sentences.iter().map(|s| vec![None; s.len()]).collect();
    for inst in dataset.splits().into_iter().flatten() {
        let c = dataset.task.label_set.iter().position(|l| *l == inst.label);
        labels[inst.sentence_id as usize][inst.target_index] = c;
    }
    let records = labels
        .iter()
        .enumerate()
        .map(|(id, l)| planted_record(id as u64, l, num_layers, hidden, signal, rng))
        .collect::<Vec<_>>();
    let header = StoreHeader::new(model_name, num_layers as u32, hidden as u32, records.len() as u64);
    EmbeddingStore::new(header, records).expect("ids are distinct")
}

/// Random store with the given word counts; values are plain Gaussian.
pub fn random_store<R: Rng>(model_name: &str, word_counts: &[usize], num_layers: usize, hidden: usize, rng: &mut R) -> EmbeddingStore {
    let signal = Signal {
        layers: Vec::new(),
        noise: 1.0,
        ..Signal::default()
    };
    let records = word_counts
        .iter()
        .enumerate()
        .map(|(id, &n)| planted_record(id as u64, &vec![None; n], num_layers, hidden, &signal, rng))
        .collect::<Vec<_>>();
    let header = StoreHeader::new(model_name, num_layers as u32, hidden as u32, records.len() as u64);
    EmbeddingStore::new(header, records).expect("ids are distinct")
}

/// Tagging splits and one shared store where each word's tag is the argmax
/// over the first `classes` coordinates of its vector at every layer.
/// Sentence ids run through train, dev and test in that order.
pub fn argmax_tagging<R: Rng>(
    model_name: &str,
    split_sentences: [usize; 3],
    classes: usize,
    num_layers: usize,
    hidden: usize,
    rng: &mut R,
) -> (TagSplits, EmbeddingStore) {
    assert!(classes >= 2 && classes <= hidden);
    let normal = Normal::new(0.0f32, 1.0).expect("unit normal");
    let mut splits: [Vec<TaggedSentence>; 3] = Default::default();
    let mut records = Vec::new();
    for (split, &count) in splits.iter_mut().zip(&split_sentences) {
        for _ in 0..count {
            let id = records.len() as u64;
            let words = rng.gen_range(3..=10);
            let signal = Signal {
                layers: Vec::new(),
                noise: 0.0,
                max_pieces: 2,
                margin: 0.0,
            };
            let mut record = planted_record(id, &vec![None; words], num_layers, hidden, &signal, rng);
            let n = record.num_subwords as usize;
            let mut tags = Vec::with_capacity(words);
            for span in &record.spans {
                let mut v: Vec<f32> = (0..hidden).map(|_| normal.sample(rng)).collect();
                let c = (0..classes).max_by(|&a, &b| v[a].total_cmp(&v[b])).expect("classes >= 2");
                // keep a visible gap between the winner and the runner-up
                v[c] += 0.5;
                tags.push(format!("T{c}"));
                for layer in 0..num_layers {
                    for sub in span.start..span.end {
                        let at = (layer * n + sub) * hidden;
                        record.tensor[at..at + hidden].copy_from_slice(&v);
                    }
                }
            }
            split.push(TaggedSentence {
                sentence_id: id,
                words: (0..words).map(|i| format!("w{id}_{i}")).collect(),
                tags,
            });
            records.push(record);
        }
    }
    let header = StoreHeader::new(model_name, num_layers as u32, hidden as u32, records.len() as u64);
    let [train, dev, test] = splits;
    (
        TagSplits { train, dev, test },
        EmbeddingStore::new(header, records).expect("ids are distinct"),
    )
}

/// Shape of a synthetic treebank.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub sentences: usize,
    /// Case values with their relative frequency.
    pub labels: Vec<(String, u32)>,
    /// Distinct noun forms per label.
    pub forms_per_label: usize,
    pub max_nouns_per_sentence: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            sentences: 3000,
            labels: vec![("Nom".into(), 5), ("Acc".into(), 3), ("Ine".into(), 2), ("Dat".into(), 1)],
            forms_per_label: 200,
            max_nouns_per_sentence: 3,
        }
    }
}

/// CoNLL-U text with NOUNs marked `Case=…`, filler verbs and adjectives, and
/// occasional multiword-token lines.
pub fn synthetic_conllu<R: Rng>(spec: &CorpusSpec, rng: &mut R) -> String {
    let total: u32 = spec.labels.iter().map(|l| l.1).sum();
    let mut out = String::new();
    for s in 0..spec.sentences {
        let _ = writeln!(out, "# sent_id = s{s}");
        let mut tokens: Vec<(String, &str, String)> = Vec::new();
        let nouns = rng.gen_range(1..=spec.max_nouns_per_sentence.max(1));
        for _ in 0..nouns {
            let mut pick = rng.gen_range(0..total.max(1));
            let (label, _) = spec
                .labels
                .iter()
                .find(|(_, w)| {
                    if pick < *w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .expect("weights cover the range");
            let form = format!("{}{}", label.to_lowercase(), rng.gen_range(0..spec.forms_per_label));
            tokens.push((form, "NOUN", format!("Case={label}|Number=Sing")));
        }
        for _ in 0..rng.gen_range(1..4) {
            tokens.push((format!("v{}", rng.gen_range(0..50)), "VERB", "Mood=Ind".into()));
        }
        if rng.gen_bool(0.5) {
            tokens.push((format!("adj{}", rng.gen_range(0..50)), "ADJ", "_".into()));
        }
        tokens.shuffle(rng);
        if rng.gen_bool(0.1) && tokens.len() >= 2 {
            let _ = writeln!(out, "1-2\t{}{}\t_\t_\t_\t_\t_\t_\t_\t_", tokens[0].0, tokens[1].0);
        }
        for (i, (form, upos, feats)) in tokens.iter().enumerate() {
            let head = if i == 0 { 0 } else { 1 };
            let rel = if i == 0 { "root" } else { "dep" };
            let _ = writeln!(out, "{}\t{form}\t{form}\t{upos}\t_\t{feats}\t{head}\t{rel}\t_\t_", i + 1);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_records_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = planted_record(4, &[Some(1), None, Some(0)], 3, 5, &Signal::default(), &mut rng);
        let header = StoreHeader::new("x", 3, 5, 1);
        r.validate(&header).unwrap();
        assert_eq!(r.num_words(), 3);
    }

    #[test]
    fn synthetic_treebank_parses() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = CorpusSpec {
            sentences: 50,
            ..CorpusSpec::default()
        };
        let text = synthetic_conllu(&spec, &mut rng);
        let parsed = crate::conllu::parse(text.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 50);
        assert!(parsed.iter().all(|s| s.tokens.iter().any(|t| t.upos == "NOUN")));
    }

    #[test]
    fn argmax_tags_match_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (splits, store) = argmax_tagging("m", [4, 2, 2], 3, 2, 6, &mut rng);
        for s in splits.train.iter().chain(&splits.test) {
            let rec = store.get(s.sentence_id).unwrap();
            for (w, tag) in s.tags.iter().enumerate() {
                let v = crate::store::pool_subwords(rec, 6, w, 1, crate::store::Pooling::Last).unwrap();
                let c = (0..3).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
                assert_eq!(*tag, format!("T{c}"));
            }
        }
    }
}
