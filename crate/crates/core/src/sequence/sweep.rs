use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tagger::{train_tagger, TagScheme, TagSplits, TagStores};
use crate::error::{Error, Result};
use crate::probe::{train_probe, LayerMode, TrainerConfig};
use crate::probe_dataset::ProbingDataset;
use crate::run::derive_seed;
use crate::store::{layer_index_for, LayerKind, Pooling};

/// A requested layer, resolved per model against its layer count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerSelector {
    Kind(LayerKind),
    Index(usize),
    /// The learned scalar mix over all layers.
    Mix,
    /// Every layer index, for per-layer curves.
    All,
}

impl std::str::FromStr for LayerSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mix" => Ok(LayerSelector::Mix),
            "all" => Ok(LayerSelector::All),
            _ => match s.parse::<usize>() {
                Ok(i) => Ok(LayerSelector::Index(i)),
                Err(_) => s.parse().map(LayerSelector::Kind).map_err(|_| {
                    Error::Invalid(format!(
                        "layer must be embedding, first, middle, highest, mix, all or an index, got {s:?}"
                    ))
                }),
            },
        }
    }
}

impl LayerSelector {
    pub fn named() -> Vec<LayerSelector> {
        LayerKind::ALL.into_iter().map(LayerSelector::Kind).collect()
    }
}

/// Resolve selectors into distinct probe inputs. Names that map to the same
/// index share one cell whose label joins them with `+`.
pub fn resolve_layers(selectors: &[LayerSelector], num_layers: usize) -> Result<Vec<(String, LayerMode)>> {
    let mut cells: Vec<(String, LayerMode)> = Vec::new();
    let mut add = |label: String, mode: LayerMode| match cells.iter_mut().find(|(_, m)| *m == mode) {
        Some((existing, _)) => {
            if !existing.split('+').any(|p| p == label) {
                existing.push('+');
                existing.push_str(&label);
            }
        }
        None => cells.push((label, mode)),
    };
    for sel in selectors {
        match *sel {
            LayerSelector::Kind(kind) => add(kind.as_str().to_string(), LayerMode::Single(layer_index_for(kind, num_layers)?)),
            LayerSelector::Index(i) => {
                if i >= num_layers {
                    return Err(Error::OutOfRange(format!("layer {i} of {num_layers}")));
                }
                add(i.to_string(), LayerMode::Single(i));
            }
            LayerSelector::Mix => add("mix".to_string(), LayerMode::Mix),
            LayerSelector::All => {
                for i in 0..num_layers {
                    add(i.to_string(), LayerMode::Single(i));
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy)]
pub enum SweepTask<'a> {
    Probe(&'a ProbingDataset),
    Tagging { splits: &'a TagSplits, scheme: TagScheme },
}

impl SweepTask<'_> {
    pub fn name(&self) -> String {
        match self {
            SweepTask::Probe(d) => d.task.name.clone(),
            SweepTask::Tagging { scheme, .. } => scheme.as_str().to_string(),
        }
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            SweepTask::Probe(_) => "accuracy",
            SweepTask::Tagging { scheme, .. } => scheme.metric_name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub layers: Vec<LayerSelector>,
    pub poolings: Vec<Pooling>,
    /// Global seed; each cell trains with a seed derived from it and the
    /// cell key, so results do not depend on scheduling.
    pub seed: u64,
    pub config: TrainerConfig,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            layers: LayerSelector::named(),
            poolings: vec![Pooling::First, Pooling::Last],
            seed: 0,
            config: TrainerConfig::default(),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub layer: String,
    pub layer_index: Option<usize>,
    pub pooling: Pooling,
    pub dev: f64,
    pub test: f64,
    pub best_epoch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub mix_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub task: String,
    pub metric: String,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn get(&self, model: &str, layer: &str, pooling: Pooling) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.layer == layer && r.pooling == pooling)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "layer", "layer_index", "pooling", "metric", "dev", "test", "best_epoch", "epochs", "seed"])
            .map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.layer.clone(),
                r.layer_index.map(|i| i.to_string()).unwrap_or_default(),
                r.pooling.as_str().to_string(),
                self.metric.clone(),
                r.dev.to_string(),
                r.test.to_string(),
                r.best_epoch.to_string(),
                r.epochs.to_string(),
                r.seed.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("{other:?}")),
    }
}

struct Cell<'a> {
    stores: &'a TagStores<'a>,
    model: String,
    label: String,
    mode: LayerMode,
    pooling: Pooling,
}

/// Train one probe or tagger per (model, layer, pooling) cell. Rows come
/// back in model, layer, pooling order regardless of thread count.
pub fn layer_sweep(task: SweepTask<'_>, models: &[TagStores<'_>], spec: &SweepSpec) -> Result<SweepReport> {
    spec.config.validate()?;
    if spec.poolings.is_empty() || spec.layers.is_empty() {
        return Err(Error::Invalid("sweep needs at least one layer and one pooling".into()));
    }
    let mut cells = Vec::new();
    for stores in models {
        let model = stores.train.header.model_name.clone();
        if cells.iter().any(|c: &Cell| c.model == model && !std::ptr::eq(c.stores, stores)) {
            return Err(Error::Invalid(format!("model name {model:?} appears twice")));
        }
        for (label, mode) in resolve_layers(&spec.layers, stores.train.num_layers())? {
            for &pooling in &spec.poolings {
                cells.push(Cell {
                    stores,
                    model: model.clone(),
                    label: label.clone(),
                    mode,
                    pooling,
                });
            }
        }
    }
    let run_cell = |cell: &Cell| -> Result<SweepRow> {
        let key = format!("{}/{}/{}/{}", task.name(), cell.model, cell.mode, cell.pooling.as_str());
        let config = TrainerConfig {
            seed: derive_seed(spec.seed, &key),
            ..spec.config
        };
        let (dev, test, best_epoch, epochs, mix_weights) = match task {
            SweepTask::Probe(dataset) => {
                let r = train_probe(dataset, cell.stores.train, cell.pooling, cell.mode, &config)?.report;
                (r.dev_accuracy, r.test_accuracy, r.best_epoch, r.history.len(), r.mix_weights)
            }
            SweepTask::Tagging { splits, scheme } => {
                let r = train_tagger(splits, *cell.stores, scheme, cell.pooling, cell.mode, &config)?.report;
                (r.dev_metric, r.test_metric, r.best_epoch, r.history.len(), r.mix_weights)
            }
        };
        Ok(SweepRow {
            model: cell.model.clone(),
            layer: cell.label.clone(),
            layer_index: match cell.mode {
                LayerMode::Single(i) => Some(i),
                LayerMode::Mix => None,
            },
            pooling: cell.pooling,
            dev,
            test,
            best_epoch,
            epochs,
            seed: config.seed,
            mix_weights,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let rows = pool.install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>())?;
    Ok(SweepReport {
        task: task.name(),
        metric: task.metric_name().to_string(),
        seed: spec.seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors_parse() {
        assert_eq!("mix".parse::<LayerSelector>().unwrap(), LayerSelector::Mix);
        assert_eq!("7".parse::<LayerSelector>().unwrap(), LayerSelector::Index(7));
        assert_eq!(
            "middle".parse::<LayerSelector>().unwrap(),
            LayerSelector::Kind(LayerKind::Middle)
        );
        assert!("top".parse::<LayerSelector>().is_err());
    }

    #[test]
    fn named_layers_collapse_on_shallow_models() {
        let cells = resolve_layers(&LayerSelector::named(), 13).unwrap();
        let idx: Vec<_> = cells.iter().map(|c| c.1).collect();
        assert_eq!(
            idx,
            [LayerMode::Single(0), LayerMode::Single(1), LayerMode::Single(6), LayerMode::Single(12)]
        );
        let cells = resolve_layers(&LayerSelector::named(), 2).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[1].0, "first+middle+highest");
        assert!(resolve_layers(&[LayerSelector::Index(5)], 3).is_err());
        let all = resolve_layers(&[LayerSelector::All, LayerSelector::Mix], 4).unwrap();
        assert_eq!(all.len(), 5);
    }
}
