use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::metrics::{ner_span_f1, pos_accuracy, SpanF1Report};
use super::tags::{TagSequence, TaggedSentence};
use crate::error::{Error, Result};
use crate::probe::{accuracy, evaluate, fit, pooled_input, EpochRecord, Examples, LayerMode, ProbeModel, ProbeShape, TrainerConfig};
use crate::store::{EmbeddingStore, Pooling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagScheme {
    /// Scored by per-word accuracy.
    Pos,
    /// Scored by exact typed span F1 over BIO2 tags.
    Ner,
}

impl TagScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            TagScheme::Pos => "pos",
            TagScheme::Ner => "ner",
        }
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            TagScheme::Pos => "accuracy",
            TagScheme::Ner => "span_f1",
        }
    }
}

impl std::str::FromStr for TagScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" => Ok(TagScheme::Pos),
            "ner" => Ok(TagScheme::Ner),
            _ => Err(Error::Invalid(format!("unknown tagging task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSplits {
    pub train: Vec<TaggedSentence>,
    pub dev: Vec<TaggedSentence>,
    pub test: Vec<TaggedSentence>,
}

impl TagSplits {
    /// Sorted union of the tags in every split.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&String> = [&self.train, &self.dev, &self.test]
            .into_iter()
            .flatten()
            .flat_map(|s| &s.tags)
            .collect();
        set.into_iter().cloned().collect()
    }
}

/// One store per split. The same store may serve several splits when its
/// sentence ids are distinct across them.
#[derive(Debug, Clone, Copy)]
pub struct TagStores<'a> {
    pub train: &'a EmbeddingStore,
    pub dev: &'a EmbeddingStore,
    pub test: &'a EmbeddingStore,
}

impl<'a> TagStores<'a> {
    pub fn shared(store: &'a EmbeddingStore) -> Self {
        TagStores {
            train: store,
            dev: store,
            test: store,
        }
    }

    fn check_compatible(&self) -> Result<()> {
        let h = &self.train.header;
        for other in [&self.dev.header, &self.test.header] {
            if other.hidden != h.hidden || other.num_layers_total != h.num_layers_total {
                return Err(Error::Shape(format!(
                    "split stores disagree: {}x{} vs {}x{} (layers x hidden)",
                    h.num_layers_total, h.hidden, other.num_layers_total, other.hidden
                )));
            }
        }
        Ok(())
    }
}

/// One example per word, in sentence order.
pub fn tagging_examples(
    sentences: &[TaggedSentence],
    store: &EmbeddingStore,
    pooling: Pooling,
    mode: LayerMode,
    labels: &[String],
) -> Result<Examples> {
    let hidden = store.hidden();
    let num_layers = store.num_layers();
    let mut examples = Examples::new(mode.rows(num_layers) * hidden);
    for sentence in sentences {
        if sentence.words.len() != sentence.tags.len() {
            return Err(Error::Shape(format!(
                "sentence {}: {} words but {} tags",
                sentence.sentence_id,
                sentence.words.len(),
                sentence.tags.len()
            )));
        }
        let record = store.get(sentence.sentence_id)?;
        if record.num_words() != sentence.words.len() {
            return Err(Error::Alignment {
                sentence_id: sentence.sentence_id,
                message: format!(
                    "store has {} words, corpus sentence has {}",
                    record.num_words(),
                    sentence.words.len()
                ),
            });
        }
        for (w, tag) in sentence.tags.iter().enumerate() {
            let label = labels
                .binary_search(tag)
                .map_err(|_| Error::Invalid(format!("tag {tag:?} missing from label set")))?;
            examples.push(&pooled_input(record, hidden, num_layers, w, pooling, mode)?, label)?;
        }
    }
    Ok(examples)
}

/// Regroup flat per-word predictions into sentences.
pub fn decode_predictions(sentences: &[TaggedSentence], preds: &[usize], labels: &[String]) -> Result<Vec<TagSequence>> {
    let total: usize = sentences.iter().map(|s| s.words.len()).sum();
    if total != preds.len() {
        return Err(Error::Shape(format!("{} predictions for {total} words", preds.len())));
    }
    let mut at = 0;
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let tags = preds[at..at + s.words.len()]
            .iter()
            .map(|&p| {
                labels
                    .get(p)
                    .cloned()
                    .ok_or_else(|| Error::OutOfRange(format!("prediction {p} of {}", labels.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        at += s.words.len();
        out.push(TagSequence {
            sentence_id: s.sentence_id,
            tags,
        });
    }
    Ok(out)
}

/// Task metric of decoded predictions against gold. Returns the headline
/// score and, for NER, the full span report.
pub fn score(
    scheme: TagScheme,
    sentences: &[TaggedSentence],
    preds: &[usize],
    labels: &[String],
) -> Result<(f64, Option<SpanF1Report>)> {
    let pred = decode_predictions(sentences, preds, labels)?;
    let gold: Vec<TagSequence> = sentences.iter().map(TaggedSentence::tag_sequence).collect();
    match scheme {
        TagScheme::Pos => Ok((pos_accuracy(&pred, &gold)?, None)),
        TagScheme::Ner => {
            let report = ner_span_f1(&pred, &gold)?;
            Ok((report.f1, Some(report)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerReport {
    pub scheme: TagScheme,
    pub metric: String,
    pub model_name: String,
    pub pooling: Pooling,
    pub layer: String,
    pub labels: Vec<String>,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub dev_metric: f64,
    pub test_metric: f64,
    pub test_word_accuracy: f64,
    pub test_spans: Option<SpanF1Report>,
    pub mix_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct TaggerRun {
    pub model: ProbeModel,
    pub report: TaggerReport,
}

/// Train a per-word tagger. Early stopping follows the task metric: word
/// accuracy for POS, span F1 for NER.
pub fn train_tagger(
    splits: &TagSplits,
    stores: TagStores<'_>,
    scheme: TagScheme,
    pooling: Pooling,
    mode: LayerMode,
    config: &TrainerConfig,
) -> Result<TaggerRun> {
    stores.check_compatible()?;
    if scheme == TagScheme::Ner {
        for s in [&splits.train, &splits.dev, &splits.test].into_iter().flatten() {
            for t in &s.tags {
                super::tags::Bio::parse(t)?;
            }
        }
    }
    let labels = splits.labels();
    let distinct: BTreeSet<&String> = splits.train.iter().flat_map(|s| &s.tags).collect();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training split has {} distinct tag(s)",
            distinct.len()
        )));
    }
    let train = tagging_examples(&splits.train, stores.train, pooling, mode, &labels)?;
    let dev = tagging_examples(&splits.dev, stores.dev, pooling, mode, &labels)?;
    let test = tagging_examples(&splits.test, stores.test, pooling, mode, &labels)?;
    let shape = ProbeShape {
        mode,
        num_layers: stores.train.num_layers(),
        input_dim: stores.train.hidden(),
        hidden_units: config.hidden_units,
        classes: labels.len(),
    };
    let dev_gold = dev.labels().to_vec();
    let outcome = fit(shape, &train, &dev, config, |preds| match scheme {
        TagScheme::Pos => accuracy(preds, &dev_gold),
        TagScheme::Ner => score(scheme, &splits.dev, preds, &labels).map(|s| s.0).unwrap_or(0.0),
    })?;
    let (_, _, dev_preds) = evaluate(&outcome.model, &dev)?;
    let (dev_metric, _) = if splits.dev.is_empty() {
        (0.0, None)
    } else {
        score(scheme, &splits.dev, &dev_preds, &labels)?
    };
    let (_, test_word_accuracy, test_preds) = evaluate(&outcome.model, &test)?;
    let (test_metric, test_spans) = if splits.test.is_empty() {
        (0.0, None)
    } else {
        score(scheme, &splits.test, &test_preds, &labels)?
    };
    let report = TaggerReport {
        scheme,
        metric: scheme.metric_name().to_string(),
        model_name: stores.train.header.model_name.clone(),
        pooling,
        layer: mode.to_string(),
        labels,
        seed: config.seed,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        dev_metric,
        test_metric,
        test_word_accuracy,
        test_spans,
        mix_weights: outcome.model.mix_weights(),
    };
    Ok(TaggerRun {
        model: outcome.model,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(id: u64, tags: &[&str]) -> TaggedSentence {
        TaggedSentence {
            sentence_id: id,
            words: tags.iter().enumerate().map(|(i, _)| format!("w{i}")).collect(),
            tags: tags.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn decode_regroups() {
        let labels = vec!["B-PER".to_string(), "O".to_string()];
        let s = [sent(3, &["O", "B-PER"]), sent(4, &["O"])];
        let d = decode_predictions(&s, &[1, 0, 0], &labels).unwrap();
        assert_eq!(d[0].tags, ["O", "B-PER"]);
        assert_eq!(d[1].sentence_id, 4);
        assert!(decode_predictions(&s, &[1, 0], &labels).is_err());
        let (f1, rep) = score(TagScheme::Ner, &s, &[1, 0, 1], &labels).unwrap();
        assert_eq!(f1, 1.0);
        assert_eq!(rep.unwrap().totals.gold, 1);
    }

    #[test]
    fn label_union_is_sorted() {
        let splits = TagSplits {
            train: vec![sent(0, &["N", "V"])],
            dev: vec![sent(1, &["A"])],
            test: vec![sent(2, &["N"])],
        };
        assert_eq!(splits.labels(), ["A", "N", "V"]);
    }
}
