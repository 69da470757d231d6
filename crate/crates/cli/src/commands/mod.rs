pub mod check;
pub mod genprobe;
pub mod report;
pub mod sweep;
pub mod tokenize;
pub mod tokstats;
pub mod train;

use serde::{Deserialize, Serialize};
use subprobe::probe::TrainerConfig;
use subprobe::tokenizer::SpecialTokens;

use crate::config::Failure;

/// Classifier and optimizer options shared by every training subcommand.
#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct TrainerArgs {
    /// Seed for initialization, shuffling and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without dev improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden_units: Option<usize>,
}

impl TrainerArgs {
    pub fn config(&self) -> Result<TrainerConfig, Failure> {
        let d = TrainerConfig::default();
        let c = TrainerConfig {
            seed: self.seed.unwrap_or(d.seed),
            max_epochs: self.epochs.unwrap_or(d.max_epochs),
            patience: self.patience.unwrap_or(d.patience),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            lr: self.lr.unwrap_or(d.lr),
            dropout: self.dropout.unwrap_or(d.dropout),
            hidden_units: self.hidden_units.unwrap_or(d.hidden_units),
            ..d
        };
        c.validate().map_err(|e| Failure::config(e.to_string()))?;
        Ok(c)
    }
}

pub fn specials(list: &Option<Vec<String>>) -> Result<SpecialTokens, Failure> {
    match list {
        None => Ok(SpecialTokens::default()),
        Some(list) => Ok(SpecialTokens::from_list(list)?),
    }
}
