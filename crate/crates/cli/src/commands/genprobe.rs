use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subprobe::probe_dataset::{extract_candidates, sample_splits, MorphTask, SplitSizes};

use crate::config::{existing, required, Failure};
use crate::output::Staged;

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct Args {
    #[arg(long)]
    pub conllu: Option<PathBuf>,
    /// FEATURE:UPOS (e.g. Case:NOUN), repeatable; `all` selects the
    /// standard eleven tasks.
    #[arg(long)]
    pub task: Option<Vec<String>>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub dev: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest allowed majority:minority ratio within a split.
    #[arg(long)]
    pub cap: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum TaskOutcome {
    Generated { dir: String, dropped_labels: Vec<String> },
    Skipped { kind: String, reason: String },
}

pub fn run(args: Args) -> Result<(), Failure> {
    let conllu = existing(&required(&args.conllu, "conllu")?, "conllu")?;
    let out = required(&args.out, "out")?;
    let specs = required(&args.task, "task")?;
    let defaults = SplitSizes::default();
    let sizes = SplitSizes {
        train: args.train.unwrap_or(defaults.train),
        dev: args.dev.unwrap_or(defaults.dev),
        test: args.test.unwrap_or(defaults.test),
    };
    let seed = args.seed.unwrap_or(0);
    let cap = args.cap.unwrap_or(3);
    if cap < 1 {
        return Err(Failure::config("--cap must be at least 1"));
    }
    let mut tasks = Vec::new();
    for spec in &specs {
        if spec == "all" {
            tasks.extend(MorphTask::inventory());
        } else {
            tasks.push(MorphTask::parse(spec)?);
        }
    }

    let corpus = subprobe::conllu::parse(BufReader::new(fs::File::open(&conllu)?))?;
    let mut staged = Staged::new("genprobe", &args)?;
    staged.input(&conllu)?;
    let single = tasks.len() == 1;
    let mut outcomes = BTreeMap::new();
    for task in &tasks {
        let pool = extract_candidates(&corpus, task);
        match sample_splits(&pool, sizes, cap, seed) {
            Ok(dataset) => {
                // Relative to --out so tasks.json survives moving the tree.
                let (dir, rel) = if single { (out.clone(), ".".to_string()) } else { (out.join(&task.name), task.name.clone()) };
                for (name, bytes) in dataset.to_files()? {
                    staged.add(dir.join(name), bytes);
                }
                outcomes.insert(
                    task.name.clone(),
                    TaskOutcome::Generated {
                        dir: rel,
                        dropped_labels: dataset.dropped_labels.clone(),
                    },
                );
            }
            Err(e) if !single => {
                outcomes.insert(
                    task.name.clone(),
                    TaskOutcome::Skipped {
                        kind: e.kind().to_string(),
                        reason: e.to_string(),
                    },
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !outcomes.values().any(|o| matches!(o, TaskOutcome::Generated { .. })) {
        return Err(Failure {
            kind: "ungeneratable",
            message: "no requested task could be generated from this corpus".into(),
        });
    }
    staged.add_json(out.join("tasks.json"), &outcomes)?;
    staged.commit(out.join("run_manifest.json"))
}
