use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subprobe::probe_dataset::ProbingDataset;
use subprobe::sequence::{layer_sweep, LayerSelector, SweepSpec, SweepTask};
use subprobe::store::Pooling;

use super::train::{load_tag_inputs, ModelStores};
use super::TrainerArgs;
use crate::config::{existing, required, Failure};
use crate::output::Staged;

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct Args {
    /// probe, pos or ner.
    #[arg(long)]
    pub task: Option<String>,
    /// Dataset directory (probe task).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Corpus splits (pos and ner tasks).
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// One per model: a store file, or a directory with
    /// train.embs, dev.embs and test.embs.
    #[arg(long)]
    pub store: Option<Vec<PathBuf>>,
    /// Comma-separated layers: embedding, first, middle, highest, an
    /// index, mix, or all.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub pools: Option<Vec<String>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub trainer: TrainerArgs,
}

pub fn run(args: Args, jobs: usize) -> Result<(), Failure> {
    let out_dir = required(&args.out_dir, "out-dir")?;
    let task = required(&args.task, "task")?;
    let store_paths = required(&args.store, "store")?;
    if store_paths.is_empty() {
        return Err(Failure::config("--store must name at least one model"));
    }
    let defaults = SweepSpec::default();
    let layers = match &args.layers {
        Some(l) => l.iter().map(|s| s.parse()).collect::<Result<Vec<LayerSelector>, _>>()?,
        None => defaults.layers.clone(),
    };
    let poolings = match &args.pools {
        Some(p) => p.iter().map(|s| s.parse()).collect::<Result<Vec<Pooling>, _>>()?,
        None => defaults.poolings.clone(),
    };
    let config = args.trainer.config()?;
    let spec = SweepSpec {
        layers,
        poolings,
        seed: config.seed,
        config,
        jobs,
    };

    let mut staged = Staged::new("sweep", &args)?;
    let models = store_paths
        .iter()
        .map(|p| ModelStores::open(p))
        .collect::<Result<Vec<_>, _>>()?;
    let report = if task == "probe" {
        let data = existing(&required(&args.data, "data")?, "data")?;
        let dataset = ProbingDataset::read_dir(&data)?;
        for name in ["train.tsv", "dev.tsv", "test.tsv", "manifest.json"] {
            staged.input(&data.join(name))?;
        }
        let stores = models
            .iter()
            .map(|m| m.single("a probe sweep").map(subprobe::sequence::TagStores::shared))
            .collect::<Result<Vec<_>, _>>()?;
        layer_sweep(SweepTask::Probe(&dataset), &stores, &spec)?
    } else {
        let inputs = load_tag_inputs(&Some(task.clone()), &args.train, &args.dev, &args.test)?;
        for p in &inputs.paths {
            staged.input(p)?;
        }
        let stores: Vec<_> = models.iter().map(ModelStores::tag_stores).collect();
        layer_sweep(
            SweepTask::Tagging {
                splits: &inputs.splits,
                scheme: inputs.scheme,
            },
            &stores,
            &spec,
        )?
    };
    for m in &models {
        for p in &m.paths {
            staged.input(p)?;
        }
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    staged.add(out_dir.join("sweep.csv"), csv);
    staged.add_json(out_dir.join("sweep.json"), &report)?;
    staged.commit(out_dir.join("run_manifest.json"))
}
