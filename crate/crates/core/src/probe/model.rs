use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN_UNITS: usize = 50;

/// Which representation feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerMode {
    /// A single layer; inputs carry one `input_dim` row.
    Single(usize),
    /// Learned softmax-weighted sum over all layers; inputs carry
    /// `num_layers` rows.
    Mix,
}

impl LayerMode {
    pub fn rows(&self, num_layers: usize) -> usize {
        match self {
            LayerMode::Single(_) => 1,
            LayerMode::Mix => num_layers,
        }
    }
}

impl std::fmt::Display for LayerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerMode::Single(l) => write!(f, "{l}"),
            LayerMode::Mix => f.write_str("mix"),
        }
    }
}

impl std::str::FromStr for LayerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mix" {
            return Ok(LayerMode::Mix);
        }
        s.parse()
            .map(LayerMode::Single)
            .map_err(|_| Error::Invalid(format!("layer must be an index or \"mix\", got {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeShape {
    pub mode: LayerMode,
    pub num_layers: usize,
    pub input_dim: usize,
    pub hidden_units: usize,
    pub classes: usize,
}

/// Every trainable tensor. Also used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub mix_logits: Vec<f64>,
    /// `[hidden_units x input_dim]`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `[classes x hidden_units]`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ProbeParams {
    pub fn zeros(shape: &ProbeShape) -> Self {
        ProbeParams {
            mix_logits: vec![0.0; shape.num_layers],
            w1: vec![0.0; shape.hidden_units * shape.input_dim],
            b1: vec![0.0; shape.hidden_units],
            w2: vec![0.0; shape.classes * shape.hidden_units],
            b2: vec![0.0; shape.classes],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [&self.mix_logits, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.mix_logits, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// `sum_i weights[i] * layers[i]` over `weights.len()` rows of `dim` values.
pub fn weighted_sum(weights: &[f64], layers: &[f32], dim: usize) -> Result<Vec<f64>> {
    if layers.len() != weights.len() * dim {
        return Err(Error::Shape(format!(
            "{} layer values for {} weights of dimension {dim}",
            layers.len(),
            weights.len()
        )));
    }
    let mut out = vec![0.0; dim];
    for (w, row) in weights.iter().zip(layers.chunks_exact(dim.max(1))) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += w * *v as f64;
        }
    }
    Ok(out)
}

/// Softmax-normalized convex combination of layer vectors.
pub fn scalar_mix(mix_logits: &[f64], layers: &[f32], dim: usize) -> Result<Vec<f64>> {
    weighted_sum(&softmax(mix_logits), layers, dim)
}

/// Scalar mix (optional) followed by a one-hidden-layer ReLU MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub shape: ProbeShape,
    pub params: ProbeParams,
}

struct Activations {
    mix_weights: Vec<f64>,
    x: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    log_probs: Vec<f64>,
}

impl ProbeModel {
    /// Weights uniform in `±sqrt(1/fan_in)`, biases and mix logits zero.
    pub fn new<R: Rng>(shape: ProbeShape, rng: &mut R) -> Result<Self> {
        if shape.input_dim == 0 || shape.hidden_units == 0 || shape.classes == 0 || shape.num_layers == 0 {
            return Err(Error::Shape(format!("degenerate probe shape {shape:?}")));
        }
        if let LayerMode::Single(l) = shape.mode {
            if l >= shape.num_layers {
                return Err(Error::OutOfRange(format!("layer {l} of {}", shape.num_layers)));
            }
        }
        let mut params = ProbeParams::zeros(&shape);
        let b1 = (1.0 / shape.input_dim as f64).sqrt();
        params.w1.iter_mut().for_each(|w| *w = rng.gen_range(-b1..b1));
        let b2 = (1.0 / shape.hidden_units as f64).sqrt();
        params.w2.iter_mut().for_each(|w| *w = rng.gen_range(-b2..b2));
        Ok(ProbeModel { shape, params })
    }

    pub fn mix_weights(&self) -> Option<Vec<f64>> {
        matches!(self.shape.mode, LayerMode::Mix).then(|| softmax(&self.params.mix_logits))
    }

    pub fn input_len(&self) -> usize {
        self.shape.mode.rows(self.shape.num_layers) * self.shape.input_dim
    }

    fn check_input(&self, input: &[f32]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::Shape(format!(
                "input has {} values, probe expects {}",
                input.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    /// `mask[j]` multiplies hidden unit `j` after the ReLU.
    fn activate(&self, input: &[f32], mask: Option<&[f64]>) -> Activations {
        let s = &self.shape;
        let p = &self.params;
        let (mix_weights, x) = match s.mode {
            LayerMode::Mix => {
                let w = softmax(&p.mix_logits);
                let x = weighted_sum(&w, input, s.input_dim).expect("checked input");
                (w, x)
            }
            LayerMode::Single(_) => (Vec::new(), input.iter().map(|&v| v as f64).collect()),
        };
        let mut pre = p.b1.clone();
        for (j, row) in p.w1.chunks_exact(s.input_dim).enumerate() {
            pre[j] += row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
        }
        let hidden: Vec<f64> = pre
            .iter()
            .enumerate()
            .map(|(j, &z)| z.max(0.0) * mask.map_or(1.0, |m| m[j]))
            .collect();
        let mut logits = p.b2.clone();
        for (c, row) in p.w2.chunks_exact(s.hidden_units).enumerate() {
            logits[c] += row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
        }
        Activations {
            mix_weights,
            x,
            pre,
            hidden,
            log_probs: log_softmax(&logits),
        }
    }

    /// Inverted-dropout mask: each unit is zeroed with probability `p` and
    /// survivors are scaled by `1 / (1 - p)`.
    pub fn dropout_mask<R: Rng>(&self, p: f64, rng: &mut R) -> Vec<f64> {
        let keep = 1.0 / (1.0 - p);
        (0..self.shape.hidden_units)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect()
    }

    /// Class log-probabilities. With `dropout = Some((p, rng))` a fresh mask
    /// is drawn; `None` is evaluation mode.
    pub fn forward<R: Rng>(&self, input: &[f32], dropout: Option<(f64, &mut R)>) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mask = dropout.and_then(|(p, rng)| (p > 0.0).then(|| self.dropout_mask(p, rng)));
        Ok(self.activate(input, mask.as_deref()).log_probs)
    }

    pub fn log_probs(&self, input: &[f32]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.activate(input, None).log_probs)
    }

    pub fn predict(&self, input: &[f32]) -> Result<usize> {
        let lp = self.log_probs(input)?;
        Ok(argmax(&lp))
    }

    /// Mean cross-entropy over `batch` and its gradient for every parameter.
    /// `masks`, when given, holds one dropout mask per batch item.
    pub fn loss_and_grads_with_masks(
        &self,
        batch: &[(&[f32], usize)],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<(f64, ProbeParams)> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        let s = &self.shape;
        let p = &self.params;
        let mut grads = ProbeParams::zeros(s);
        let mut loss = 0.0;
        for (n, &(input, label)) in batch.iter().enumerate() {
            self.check_input(input)?;
            if label >= s.classes {
                return Err(Error::OutOfRange(format!("label {label} outside [0, {})", s.classes)));
            }
            let act = self.activate(input, masks.map(|m| m[n].as_slice()));
            loss -= act.log_probs[label];

            // d loss / d logits = softmax - onehot
            let mut dz: Vec<f64> = act.log_probs.iter().map(|lp| lp.exp()).collect();
            dz[label] -= 1.0;
            let mut dh = vec![0.0; s.hidden_units];
            for (c, row) in p.w2.chunks_exact(s.hidden_units).enumerate() {
                grads.b2[c] += dz[c];
                let grow = &mut grads.w2[c * s.hidden_units..(c + 1) * s.hidden_units];
                for j in 0..s.hidden_units {
                    grow[j] += dz[c] * act.hidden[j];
                    dh[j] += dz[c] * row[j];
                }
            }
            // through dropout and ReLU
            for j in 0..s.hidden_units {
                let scale = masks.map_or(1.0, |m| m[n][j]);
                dh[j] = if act.pre[j] > 0.0 { dh[j] * scale } else { 0.0 };
            }
            let mut dx = vec![0.0; s.input_dim];
            for j in 0..s.hidden_units {
                if dh[j] == 0.0 {
                    continue;
                }
                grads.b1[j] += dh[j];
                let row = &p.w1[j * s.input_dim..(j + 1) * s.input_dim];
                let grow = &mut grads.w1[j * s.input_dim..(j + 1) * s.input_dim];
                for i in 0..s.input_dim {
                    grow[i] += dh[j] * act.x[i];
                    dx[i] += dh[j] * row[i];
                }
            }
            if let LayerMode::Mix = s.mode {
                // x = sum_i w_i X_i, w = softmax(a):
                // dL/dw_i = dx . X_i ; dL/da_k = w_k (dL/dw_k - sum_i w_i dL/dw_i)
                let dw: Vec<f64> = input
                    .chunks_exact(s.input_dim)
                    .map(|row| row.iter().zip(&dx).map(|(v, g)| *v as f64 * g).sum())
                    .collect();
                let avg: f64 = act.mix_weights.iter().zip(&dw).map(|(w, g)| w * g).sum();
                for (k, g) in grads.mix_logits.iter_mut().enumerate() {
                    *g += act.mix_weights[k] * (dw[k] - avg);
                }
            }
        }
        let inv = 1.0 / batch.len() as f64;
        grads.scale(inv);
        Ok((loss * inv, grads))
    }

    /// Like [`Self::loss_and_grads_with_masks`], drawing dropout masks from
    /// `rng` when `dropout > 0`.
    pub fn loss_and_grads<R: Rng>(
        &self,
        batch: &[(&[f32], usize)],
        dropout: Option<(f64, &mut R)>,
    ) -> Result<(f64, ProbeParams)> {
        match dropout {
            Some((p, rng)) if p > 0.0 => {
                let masks: Vec<Vec<f64>> = batch.iter().map(|_| self.dropout_mask(p, rng)).collect();
                self.loss_and_grads_with_masks(batch, Some(&masks))
            }
            _ => self.loss_and_grads_with_masks(batch, None),
        }
    }

    /// Mean cross-entropy in evaluation mode.
    pub fn loss(&self, batch: &[(&[f32], usize)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        let mut total = 0.0;
        for &(input, label) in batch {
            if label >= self.shape.classes {
                return Err(Error::OutOfRange(format!("label {label} outside [0, {})", self.shape.classes)));
            }
            total -= self.log_probs(input)?[label];
        }
        Ok(total / batch.len() as f64)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(mode: LayerMode) -> ProbeShape {
        ProbeShape {
            mode,
            num_layers: 3,
            input_dim: 3,
            hidden_units: 4,
            classes: 2,
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let s = ProbeShape { classes: 5, ..shape(LayerMode::Single(0)) };
        let m = ProbeModel { shape: s, params: ProbeParams::zeros(&s) };
        let lp = m.log_probs(&[1.0, 2.0, 3.0]).unwrap();
        for v in lp {
            assert!((v + 5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_sized_forward() {
        // hidden 3 inputs, 2 hidden units, 2 classes
        let s = ProbeShape {
            mode: LayerMode::Single(0),
            num_layers: 1,
            input_dim: 3,
            hidden_units: 2,
            classes: 2,
        };
        let params = ProbeParams {
            mix_logits: vec![0.0],
            w1: vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5],
            b1: vec![0.0, -1.0],
            w2: vec![1.0, -1.0, 0.0, 2.0],
            b2: vec![0.5, 0.0],
        };
        let m = ProbeModel { shape: s, params };
        // x = (2, 1, 1): pre = (1, 1) -> relu (1, 1); logits = (0.5, 2)
        let lp = m.log_probs(&[2.0, 1.0, 1.0]).unwrap();
        let lse = (0.5f64.exp() + 2f64.exp()).ln();
        assert!((lp[0] - (0.5 - lse)).abs() < 1e-12);
        assert!((lp[1] - (2.0 - lse)).abs() < 1e-12);
        // x = (0, 0, 1): pre = (-1, -0.5) -> 0; logits = b2
        let lp = m.log_probs(&[0.0, 0.0, 1.0]).unwrap();
        let lse = (0.5f64.exp() + 1.0).ln();
        assert!((lp[0] - (0.5 - lse)).abs() < 1e-12);
    }

    #[test]
    fn eval_is_deterministic_and_dropout_is_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ProbeModel::new(ProbeShape { hidden_units: 50, ..shape(LayerMode::Single(1)) }, &mut rng).unwrap();
        let x = [0.3, -1.2, 2.0];
        assert_eq!(m.log_probs(&x).unwrap(), m.log_probs(&x).unwrap());
        let a = m.forward(&x, Some((0.5, &mut rng))).unwrap();
        let b = m.forward(&x, Some((0.5, &mut rng))).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ProbeModel::new(shape(LayerMode::Mix), &mut rng).unwrap();
        assert!(m.log_probs(&[1.0; 3]).is_err());
        assert!(m.log_probs(&[1.0; 9]).is_ok());
        let bad: [(&[f32], usize); 1] = [(&[1.0; 9], 2)];
        assert!(matches!(m.loss_and_grads_with_masks(&bad, None), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn mix_examples() {
        let v = [0.5f32, -2.0];
        let layers: Vec<f32> = v.iter().chain(&v).chain(&v).copied().collect();
        let mixed = scalar_mix(&[3.0, -1.0, 0.2], &layers, 2).unwrap();
        assert!((mixed[0] - 0.5).abs() < 1e-12 && (mixed[1] + 2.0).abs() < 1e-12);

        let uniform = scalar_mix(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(uniform, [0.5, 0.5]);

        assert!(scalar_mix(&[0.0, 0.0], &[1.0, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn duplicated_batch_same_loss_and_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ProbeModel::new(shape(LayerMode::Mix), &mut rng).unwrap();
        let a: Vec<f32> = (0..9).map(|i| i as f32 * 0.1 - 0.3).collect();
        let b: Vec<f32> = (0..9).map(|i| (i as f32 * 0.7).sin()).collect();
        let batch = [(a.as_slice(), 0), (b.as_slice(), 1)];
        let doubled = [batch[0], batch[1], batch[0], batch[1]];
        let (l1, g1) = m.loss_and_grads_with_masks(&batch, None).unwrap();
        let (l2, g2) = m.loss_and_grads_with_masks(&doubled, None).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (x, y) in g1.tensors().iter().zip(g2.tensors()) {
            for (p, q) in x.iter().zip(y.iter()) {
                assert!((p - q).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn saturated_correct_predictions_have_vanishing_loss() {
        let s = ProbeShape {
            mode: LayerMode::Single(0),
            num_layers: 1,
            input_dim: 1,
            hidden_units: 1,
            classes: 2,
        };
        let params = ProbeParams {
            mix_logits: vec![0.0],
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![-50.0, 50.0],
            b2: vec![0.0, 0.0],
        };
        let m = ProbeModel { shape: s, params };
        let x = [1.0f32];
        let (loss, g) = m.loss_and_grads_with_masks(&[(&x, 1)], None).unwrap();
        assert!(loss < 1e-40);
        let norm: f64 = g.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum();
        assert!(norm.sqrt() < 1e-40);
    }

    #[test]
    fn parameter_count_in_expected_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for classes in [2, 18] {
            let m = ProbeModel::new(
                ProbeShape {
                    mode: LayerMode::Mix,
                    num_layers: 13,
                    input_dim: 768,
                    hidden_units: DEFAULT_HIDDEN_UNITS,
                    classes,
                },
                &mut rng,
            )
            .unwrap();
            let n = m.params.count();
            assert!((38_000..=40_000).contains(&n), "{n}");
        }
    }
}
