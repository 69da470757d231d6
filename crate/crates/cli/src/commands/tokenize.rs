use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subprobe::tokenizer::{Segmentation, Vocabulary, DEFAULT_CONTINUATION_PREFIX};

use crate::config::{existing, required, Failure};
use crate::output::{manifest_beside, Staged};

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct Args {
    /// Vocabulary file, one subword per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Corpus with whitespace-separated words.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continuation marker of word-internal pieces.
    #[arg(long)]
    pub prefix: Option<String>,
    /// Special tokens, comma separated; must include an UNK marker.
    #[arg(long, value_delimiter = ',')]
    pub specials: Option<Vec<String>>,
    /// Emit one `word<TAB>freq<TAB>pieces` row per distinct word instead of
    /// one row per running token.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub counts: Option<bool>,
}

pub fn run(args: Args) -> Result<(), Failure> {
    let vocab_path = existing(&required(&args.vocab, "vocab")?, "vocab")?;
    let input = existing(&required(&args.input, "input")?, "input")?;
    let out = required(&args.out, "out")?;
    let prefix = args.prefix.clone().unwrap_or_else(|| DEFAULT_CONTINUATION_PREFIX.to_string());
    let vocab = Vocabulary::load(
        BufReader::new(fs::File::open(&vocab_path)?),
        &prefix,
        super::specials(&args.specials)?,
    )?;
    let text = fs::read_to_string(&input)?;

    let mut cache: HashMap<&str, Segmentation> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    let mut freq: HashMap<&str, u64> = HashMap::new();
    let mut rows = String::new();
    for word in text.split_whitespace() {
        if !cache.contains_key(word) {
            cache.insert(word, vocab.tokenize_word(word)?);
            order.push(word);
        }
        *freq.entry(word).or_default() += 1;
        if args.counts != Some(true) {
            rows.push_str(word);
            rows.push('\t');
            rows.push_str(&cache[word].pieces.join(" "));
            rows.push('\n');
        }
    }
    if args.counts == Some(true) {
        order.sort_by(|a, b| freq[b].cmp(&freq[a]).then(a.cmp(b)));
        for word in order {
            rows.push_str(&format!("{word}\t{}\t{}\n", freq[word], cache[word].pieces.join(" ")));
        }
    }

    let mut staged = Staged::new("tokenize", &args)?;
    staged.input(&vocab_path)?;
    staged.input(&input)?;
    staged.add(out.clone(), rows.into_bytes());
    staged.commit(manifest_beside(&out))
}
