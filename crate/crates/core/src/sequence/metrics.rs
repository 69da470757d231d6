use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::tags::{bio_spans, TagSequence};
use crate::error::{Error, Result};

fn check_aligned(pred: &[TagSequence], gold: &[TagSequence]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!("{} predicted vs {} gold sentences", pred.len(), gold.len())));
    }
    for (p, g) in pred.iter().zip(gold) {
        if p.sentence_id != g.sentence_id {
            return Err(Error::Shape(format!(
                "sentence ids differ: predicted {} vs gold {}",
                p.sentence_id, g.sentence_id
            )));
        }
        if p.tags.len() != g.tags.len() {
            return Err(Error::Shape(format!(
                "sentence {}: {} predicted vs {} gold tags",
                g.sentence_id,
                p.tags.len(),
                g.tags.len()
            )));
        }
    }
    Ok(())
}

/// Micro accuracy over all word positions.
pub fn pos_accuracy(pred: &[TagSequence], gold: &[TagSequence]) -> Result<f64> {
    check_aligned(pred, gold)?;
    let (mut correct, mut total) = (0usize, 0usize);
    for (p, g) in pred.iter().zip(gold) {
        total += g.tags.len();
        correct += p.tags.iter().zip(&g.tags).filter(|(a, b)| a == b).count();
    }
    if total == 0 {
        return Err(Error::Invalid("no positions to score".into()));
    }
    Ok(correct as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub gold: usize,
    pub pred: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanF1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub totals: SpanCounts,
    pub per_type: BTreeMap<String, SpanCounts>,
}

fn safe_div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl SpanF1Report {
    pub fn from_counts(per_type: BTreeMap<String, SpanCounts>) -> Self {
        let mut totals = SpanCounts::default();
        for c in per_type.values() {
            totals.gold += c.gold;
            totals.pred += c.pred;
            totals.correct += c.correct;
        }
        let precision = safe_div(totals.correct, totals.pred);
        let recall = safe_div(totals.correct, totals.gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        SpanF1Report {
            precision,
            recall,
            f1,
            totals,
            per_type,
        }
    }
}

/// Exact-match typed span precision, recall and F1 (micro-averaged).
pub fn ner_span_f1(pred: &[TagSequence], gold: &[TagSequence]) -> Result<SpanF1Report> {
    check_aligned(pred, gold)?;
    let mut per_type: BTreeMap<String, SpanCounts> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gold) {
        let gold_spans = bio_spans(&g.tags)?;
        let pred_spans = bio_spans(&p.tags)?;
        let gold_set: HashSet<&(String, usize, usize)> = gold_spans.iter().collect();
        for s in &gold_spans {
            per_type.entry(s.0.clone()).or_default().gold += 1;
        }
        for s in &pred_spans {
            let c = per_type.entry(s.0.clone()).or_default();
            c.pred += 1;
            if gold_set.contains(s) {
                c.correct += 1;
            }
        }
    }
    Ok(SpanF1Report::from_counts(per_type))
}
