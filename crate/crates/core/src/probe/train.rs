use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::model::{argmax, ProbeModel, ProbeShape, DEFAULT_HIDDEN_UNITS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout: f64,
    pub hidden_units: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainerConfig {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            dropout: 0.2,
            hidden_units: DEFAULT_HIDDEN_UNITS,
            batch_size: 64,
            max_epochs: 200,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must be in [0, 1)");
        }
        if self.patience < 1 || self.batch_size < 1 || self.max_epochs < 1 || self.hidden_units < 1 {
            return bad("patience, batch size, epochs and hidden units must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Fixed-width classifier inputs with integer labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Examples {
    width: usize,
    data: Vec<f32>,
    labels: Vec<usize>,
}

impl Examples {
    pub fn new(width: usize) -> Self {
        Examples {
            width,
            ..Default::default()
        }
    }

    pub fn push(&mut self, input: &[f32], label: usize) -> Result<()> {
        if input.len() != self.width {
            return Err(Error::Shape(format!("example has {} values, expected {}", input.len(), self.width)));
        }
        self.data.extend_from_slice(input);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn batch(&self, indices: &[usize]) -> Vec<(&[f32], usize)> {
        indices.iter().map(|&i| (self.input(i), self.labels[i])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_loss: f64,
    pub dev_accuracy: f64,
    /// The early-stopping metric (accuracy or span F1).
    pub dev_metric: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the best dev epoch.
    pub model: ProbeModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_metric: f64,
}

/// Eval-mode mean loss, accuracy and argmax predictions.
pub fn evaluate(model: &ProbeModel, examples: &Examples) -> Result<(f64, f64, Vec<usize>)> {
    if examples.is_empty() {
        return Ok((0.0, 0.0, Vec::new()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut preds = Vec::with_capacity(examples.len());
    for i in 0..examples.len() {
        let lp = model.log_probs(examples.input(i))?;
        let label = examples.labels[i];
        loss -= lp.get(label).copied().ok_or_else(|| {
            Error::OutOfRange(format!("label {label} outside [0, {})", lp.len()))
        })?;
        let p = argmax(&lp);
        correct += usize::from(p == label);
        preds.push(p);
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n, preds))
}

pub fn accuracy(preds: &[usize], gold: &[usize]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    preds.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / gold.len() as f64
}

/// Minibatch Adam training with per-epoch dev evaluation and early stopping.
///
/// `dev_metric` maps dev-set predictions to the early-stopping score; the
/// parameters of the first epoch reaching the maximum score are returned.
pub fn fit<F>(shape: ProbeShape, train: &Examples, dev: &Examples, config: &TrainerConfig, dev_metric: F) -> Result<FitOutcome>
where
    F: Fn(&[usize]) -> f64,
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Degenerate("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ProbeModel::new(shape, &mut rng)?;
    if train.width() != model.input_len() || (!dev.is_empty() && dev.width() != model.input_len()) {
        return Err(Error::Shape(format!(
            "examples have width {}, probe expects {}",
            train.width(),
            model.input_len()
        )));
    }
    let adam = config.adam();
    let mut state = AdamState::new(&shape);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ProbeModel)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = train.batch(chunk);
            let (_, grads) = model.loss_and_grads(&batch, Some((config.dropout, &mut rng)))?;
            state.step(&mut model.params, &grads, &adam);
        }
        let (train_loss, train_accuracy, _) = evaluate(&model, train)?;
        let (dev_loss, dev_accuracy, dev_preds) = evaluate(&model, dev)?;
        let metric = dev_metric(&dev_preds);
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            dev_loss,
            dev_accuracy,
            dev_metric: metric,
        });
        if best.as_ref().is_none_or(|(m, _, _)| metric > *m) {
            best = Some((metric, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let (best_dev_metric, best_epoch, model) = best.expect("at least one epoch");
    Ok(FitOutcome {
        model,
        history,
        best_epoch,
        best_dev_metric,
    })
}
