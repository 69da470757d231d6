use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subprobe::store::StoreReader;

use crate::config::{existing, required, Failure};

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct Args {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// The extractor's input, one whitespace-tokenized sentence per line;
    /// word counts of every record are checked against it.
    #[arg(long)]
    pub sentences: Option<PathBuf>,
    /// Expected total layer count, embedding layer included.
    #[arg(long)]
    pub layers: Option<u32>,
    #[arg(long)]
    pub hidden: Option<u32>,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Serialize)]
struct Summary {
    model: String,
    num_layers_total: u32,
    hidden: u32,
    records: u64,
    words: u64,
    subwords: u64,
    missing_sentences: Option<u64>,
}

fn mismatch(message: String) -> Failure {
    Failure {
        kind: "store",
        message,
    }
}

pub fn run(args: Args) -> Result<(), Failure> {
    let path = existing(&required(&args.store, "store")?, "store")?;
    let sentences: Option<Vec<usize>> = match &args.sentences {
        Some(p) => Some(
            fs::read_to_string(existing(p, "sentences")?)?
                .lines()
                .map(|l| l.split_whitespace().count())
                .collect(),
        ),
        None => None,
    };
    let mut reader = StoreReader::new(BufReader::new(fs::File::open(&path)?))?;
    let header = reader.header().clone();
    if let Some(want) = args.layers.filter(|w| *w != header.num_layers_total) {
        return Err(mismatch(format!("header has {} layers, expected {want}", header.num_layers_total)));
    }
    if let Some(want) = args.hidden.filter(|w| *w != header.hidden) {
        return Err(mismatch(format!("header has hidden size {}, expected {want}", header.hidden)));
    }
    if let Some(want) = args.model.as_ref().filter(|w| **w != header.model_name) {
        return Err(mismatch(format!("header names model {:?}, expected {want:?}", header.model_name)));
    }
    let (mut records, mut words, mut subwords) = (0u64, 0u64, 0u64);
    let mut seen = std::collections::HashSet::new();
    while let Some(record) = reader.next_record()? {
        if !seen.insert(record.sentence_id) {
            return Err(mismatch(format!("sentence {} appears twice", record.sentence_id)));
        }
        if let Some(lines) = &sentences {
            let want = lines.get(record.sentence_id as usize).ok_or_else(|| {
                mismatch(format!("sentence {} is beyond the {} input lines", record.sentence_id, lines.len()))
            })?;
            if *want != record.num_words() {
                return Err(Failure::from(subprobe::Error::Alignment {
                    sentence_id: record.sentence_id,
                    message: format!("store has {} words, input line has {want}", record.num_words()),
                }));
            }
        }
        records += 1;
        words += record.num_words() as u64;
        subwords += u64::from(record.num_subwords);
    }
    let summary = Summary {
        model: header.model_name,
        num_layers_total: header.num_layers_total,
        hidden: header.hidden,
        records,
        words,
        subwords,
        missing_sentences: sentences.map(|l| l.len() as u64 - records),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
