use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subprobe::tokenizer::DEFAULT_CONTINUATION_PREFIX;
use subprobe::tokstats::{
    compute_report_sharded, rank_length_profile, render_table, write_profile_csv, MorphGold, SegmentedCorpus,
    TokStatsReport,
};

use crate::config::{existing, required, Failure};
use crate::output::Staged;

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct Args {
    /// Segmented corpus TSV (`word<TAB>freq<TAB>pieces`), optionally as
    /// NAME=PATH; repeat for one table column per model.
    #[arg(long)]
    pub segmented: Option<Vec<String>>,
    /// Gold morpheme TSV (`word<TAB>morphs`); enables the agreement rows.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Number of log-rank buckets in the length profile.
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub prefix: Option<String>,
    #[arg(long)]
    pub unk: Option<String>,
}

fn column(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) => (name.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(spec);
            let name = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

pub fn run(args: Args, jobs: usize) -> Result<(), Failure> {
    let specs = required(&args.segmented, "segmented")?;
    let out_dir = required(&args.out_dir, "out-dir")?;
    let columns: Vec<(String, PathBuf)> = specs.iter().map(|s| column(s)).collect();
    for (i, (name, path)) in columns.iter().enumerate() {
        existing(path, "segmented")?;
        if columns[..i].iter().any(|(n, _)| n == name) {
            return Err(Failure::config(format!("column name {name:?} used twice")));
        }
    }
    let gold_path = args.gold.as_ref().map(|g| existing(g, "gold")).transpose()?;
    let prefix = args.prefix.clone().unwrap_or_else(|| DEFAULT_CONTINUATION_PREFIX.to_string());
    let unk = args.unk.clone().unwrap_or_else(|| "[UNK]".to_string());
    let buckets = args.buckets.unwrap_or(10);
    let shards = if jobs == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { jobs };

    let gold = match &gold_path {
        Some(p) => Some(MorphGold::load_tsv(BufReader::new(fs::File::open(p)?))?),
        None => None,
    };
    let mut staged = Staged::new("tokstats", &args)?;
    let mut reports: BTreeMap<String, TokStatsReport> = BTreeMap::new();
    let mut ordered = Vec::new();
    for (name, path) in &columns {
        staged.input(path)?;
        let corpus = SegmentedCorpus::load_tsv(BufReader::new(fs::File::open(path)?), &prefix, &unk)?;
        let report = compute_report_sharded(&corpus, gold.as_ref(), shards)?;
        let mut csv = Vec::new();
        write_profile_csv(&rank_length_profile(&corpus, buckets)?, &mut csv)?;
        staged.add(out_dir.join(format!("profile_{name}.csv")), csv);
        reports.insert(name.clone(), report);
        ordered.push(name.clone());
    }
    if let Some(p) = &gold_path {
        staged.input(p)?;
    }
    let table_columns: Vec<(&str, &TokStatsReport)> = ordered.iter().map(|n| (n.as_str(), &reports[n])).collect();
    let table = render_table(&table_columns);
    print!("{table}");
    staged.add(out_dir.join("table.txt"), table.into_bytes());
    staged.add_json(out_dir.join("report.json"), &reports)?;
    staged.commit(out_dir.join("run_manifest.json"))
}
