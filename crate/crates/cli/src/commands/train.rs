use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Subcommand;
use serde::{Deserialize, Serialize};
use subprobe::probe::{train_probe, LayerMode};
use subprobe::probe_dataset::ProbingDataset;
use subprobe::sequence::{
    load_ner_tsv, load_pos_conllu, resolve_layers, train_tagger, LayerSelector, TagScheme, TagSplits, TagStores,
    TaggedSentence,
};
use subprobe::store::{EmbeddingStore, Pooling};

use super::TrainerArgs;
use crate::config::{existing, required, Failure};
use crate::output::{manifest_beside, Staged};

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    /// Train one probe on a generated dataset directory.
    Train(ProbeArgs),
}

#[derive(Debug, Subcommand)]
pub enum TagCommand {
    /// Train one tagger on train/dev/test corpora.
    Train(TagArgs),
}

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct ProbeArgs {
    /// Dataset directory written by `genprobe`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// first, last, max or sum.
    #[arg(long)]
    pub pool: Option<String>,
    /// Layer index, embedding/first/middle/highest, or mix.
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub trainer: TrainerArgs,
}

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct TagArgs {
    /// pos (CoNLL-U input) or ner (token<TAB>tag input).
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Store for all three splits, or a directory holding
    /// train.embs, dev.embs and test.embs.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub pool: Option<String>,
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub trainer: TrainerArgs,
}

pub fn parse_pool(pool: &Option<String>) -> Result<Pooling, Failure> {
    Ok(pool.as_deref().unwrap_or("last").parse()?)
}

pub fn single_layer(layer: &str, num_layers: usize) -> Result<LayerMode, Failure> {
    let selector: LayerSelector = layer.parse()?;
    let cells = resolve_layers(&[selector], num_layers)?;
    match cells.as_slice() {
        [(_, mode)] => Ok(*mode),
        _ => Err(Failure::config(format!("--layer {layer} names {} layers; pick one", cells.len()))),
    }
}

/// Stores for one model: a single file shared by all splits, or a directory
/// with one file per split.
pub struct ModelStores {
    pub paths: Vec<PathBuf>,
    stores: Vec<EmbeddingStore>,
}

impl ModelStores {
    pub fn open(path: &Path) -> Result<Self, Failure> {
        let path = existing(path, "store")?;
        let paths = if path.is_dir() {
            ["train", "dev", "test"]
                .iter()
                .map(|s| existing(&path.join(format!("{s}.embs")), "store"))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            vec![path]
        };
        let stores = paths
            .iter()
            .map(|p| EmbeddingStore::open(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ModelStores { paths, stores })
    }

    pub fn tag_stores(&self) -> TagStores<'_> {
        match self.stores.as_slice() {
            [one] => TagStores::shared(one),
            [train, dev, test] => TagStores { train, dev, test },
            _ => unreachable!("one or three stores"),
        }
    }

    pub fn single(&self, what: &str) -> Result<&EmbeddingStore, Failure> {
        match self.stores.as_slice() {
            [one] => Ok(one),
            _ => Err(Failure::config(format!("{what} needs a single store file, not a split directory"))),
        }
    }
}

pub fn load_tag_split(path: &Path, scheme: TagScheme) -> Result<Vec<TaggedSentence>, Failure> {
    let reader = BufReader::new(fs::File::open(path)?);
    Ok(match scheme {
        TagScheme::Pos => load_pos_conllu(reader)?,
        TagScheme::Ner => load_ner_tsv(reader)?,
    })
}

pub struct TagInputs {
    pub scheme: TagScheme,
    pub paths: Vec<PathBuf>,
    pub splits: TagSplits,
}

pub fn load_tag_inputs(task: &Option<String>, train: &Option<PathBuf>, dev: &Option<PathBuf>, test: &Option<PathBuf>) -> Result<TagInputs, Failure> {
    let scheme: TagScheme = required(task, "task")?.parse()?;
    let paths = [(train, "train"), (dev, "dev"), (test, "test")]
        .into_iter()
        .map(|(p, flag)| existing(&required(p, flag)?, flag))
        .collect::<Result<Vec<_>, _>>()?;
    let splits = TagSplits {
        train: load_tag_split(&paths[0], scheme)?,
        dev: load_tag_split(&paths[1], scheme)?,
        test: load_tag_split(&paths[2], scheme)?,
    };
    Ok(TagInputs { scheme, paths, splits })
}

pub fn run_probe(args: ProbeArgs) -> Result<(), Failure> {
    let data = existing(&required(&args.data, "data")?, "data")?;
    let out = required(&args.out, "out")?;
    let layer = required(&args.layer, "layer")?;
    let pooling = parse_pool(&args.pool)?;
    let config = args.trainer.config()?;
    let stores = ModelStores::open(&required(&args.store, "store")?)?;
    let store = stores.single("probe train")?;
    let dataset = ProbingDataset::read_dir(&data)?;
    let mode = single_layer(&layer, store.num_layers())?;
    let run = train_probe(&dataset, store, pooling, mode, &config)?;

    let mut staged = Staged::new("probe train", &args)?;
    for name in ["train.tsv", "dev.tsv", "test.tsv", "manifest.json"] {
        staged.input(&data.join(name))?;
    }
    for p in &stores.paths {
        staged.input(p)?;
    }
    staged.add_json(out.clone(), &run.report)?;
    staged.commit(manifest_beside(&out))
}

pub fn run_tag(args: TagArgs) -> Result<(), Failure> {
    let out = required(&args.out, "out")?;
    let layer = required(&args.layer, "layer")?;
    let pooling = parse_pool(&args.pool)?;
    let config = args.trainer.config()?;
    let inputs = load_tag_inputs(&args.task, &args.train, &args.dev, &args.test)?;
    let stores = ModelStores::open(&required(&args.store, "store")?)?;
    let tag_stores = stores.tag_stores();
    let mode = single_layer(&layer, tag_stores.train.num_layers())?;
    let run = train_tagger(&inputs.splits, tag_stores, inputs.scheme, pooling, mode, &config)?;

    let mut staged = Staged::new("tag train", &args)?;
    for p in inputs.paths.iter().chain(&stores.paths) {
        staged.input(p)?;
    }
    staged.add_json(out.clone(), &run.report)?;
    staged.commit(manifest_beside(&out))
}
