use serde::{Deserialize, Serialize};

use super::model::{LayerMode, ProbeModel, ProbeShape};
use super::train::{accuracy, evaluate, fit, EpochRecord, Examples, TrainerConfig};
use crate::error::{Error, Result};
use crate::probe_dataset::{ProbingDataset, ProbingInstance};
use crate::store::{pool_subwords, EmbeddingRecord, EmbeddingStore, Pooling};

/// Pooled representation of one word: a single layer, or every layer
/// stacked for the scalar mix.
pub fn pooled_input(
    record: &EmbeddingRecord,
    hidden: usize,
    num_layers: usize,
    word_index: usize,
    pooling: Pooling,
    mode: LayerMode,
) -> Result<Vec<f32>> {
    match mode {
        LayerMode::Single(layer) => pool_subwords(record, hidden, word_index, layer, pooling),
        LayerMode::Mix => {
            let mut out = Vec::with_capacity(num_layers * hidden);
            for layer in 0..num_layers {
                out.extend(pool_subwords(record, hidden, word_index, layer, pooling)?);
            }
            Ok(out)
        }
    }
}

pub fn probe_examples(
    split: &[ProbingInstance],
    store: &EmbeddingStore,
    pooling: Pooling,
    mode: LayerMode,
    labels: &[String],
) -> Result<Examples> {
    let hidden = store.hidden();
    let num_layers = store.num_layers();
    let mut examples = Examples::new(mode.rows(num_layers) * hidden);
    for inst in split {
        let record = store.get(inst.sentence_id)?;
        if record.num_words() != inst.sentence.len() {
            return Err(Error::Alignment {
                sentence_id: inst.sentence_id,
                message: format!(
                    "store has {} words, dataset sentence has {}",
                    record.num_words(),
                    inst.sentence.len()
                ),
            });
        }
        let label = labels
            .iter()
            .position(|l| *l == inst.label)
            .ok_or_else(|| Error::Invalid(format!("label {:?} not in the task label set", inst.label)))?;
        let input = pooled_input(record, hidden, num_layers, inst.target_index, pooling, mode)?;
        examples.push(&input, label)?;
    }
    Ok(examples)
}

/// Serializable summary of a probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub task: String,
    pub model_name: String,
    pub pooling: Pooling,
    pub layer: String,
    pub labels: Vec<String>,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    pub mix_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ProbeRun {
    pub model: ProbeModel,
    pub report: ProbeReport,
}

/// Train a probe on one dataset and report test accuracy of the best-dev
/// snapshot.
pub fn train_probe(
    dataset: &ProbingDataset,
    store: &EmbeddingStore,
    pooling: Pooling,
    mode: LayerMode,
    config: &TrainerConfig,
) -> Result<ProbeRun> {
    let labels = dataset.task.label_set.clone();
    let distinct: std::collections::BTreeSet<&str> = dataset.train.iter().map(|i| i.label.as_str()).collect();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training split of task {} has {} distinct label(s)",
            dataset.task.name,
            distinct.len()
        )));
    }
    let train = probe_examples(&dataset.train, store, pooling, mode, &labels)?;
    let dev = probe_examples(&dataset.dev, store, pooling, mode, &labels)?;
    let test = probe_examples(&dataset.test, store, pooling, mode, &labels)?;
    let shape = ProbeShape {
        mode,
        num_layers: store.num_layers(),
        input_dim: store.hidden(),
        hidden_units: config.hidden_units,
        classes: labels.len(),
    };
    let dev_labels = dev.labels().to_vec();
    let outcome = fit(shape, &train, &dev, config, |preds| accuracy(preds, &dev_labels))?;
    let (_, dev_accuracy, _) = evaluate(&outcome.model, &dev)?;
    let (_, test_accuracy, _) = evaluate(&outcome.model, &test)?;
    let report = ProbeReport {
        task: dataset.task.name.clone(),
        model_name: store.header.model_name.clone(),
        pooling,
        layer: mode.to_string(),
        labels,
        seed: config.seed,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        dev_accuracy,
        test_accuracy,
        mix_weights: outcome.model.mix_weights(),
    };
    Ok(ProbeRun {
        model: outcome.model,
        report,
    })
}
