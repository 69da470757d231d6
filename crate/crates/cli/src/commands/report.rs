use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subprobe::sequence::SweepReport;

use crate::config::{existing, required, Failure};
use crate::output::{manifest_beside, Staged};

#[derive(Debug, Default, Clone, clap::Args, Serialize, Deserialize)]
pub struct Args {
    /// sweep.json files, repeatable.
    #[arg(long)]
    pub input: Option<Vec<PathBuf>>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report dev scores instead of test scores.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dev: Option<bool>,
}

/// One table per sweep: a row per (model, pooling), a column per layer
/// cell, scores in percent.
pub fn render(report: &SweepReport, dev: bool) -> String {
    let mut layers: Vec<&str> = Vec::new();
    let mut rows: Vec<(&str, &str)> = Vec::new();
    for r in &report.rows {
        if !layers.contains(&r.layer.as_str()) {
            layers.push(&r.layer);
        }
        if !rows.contains(&(r.model.as_str(), r.pooling.as_str())) {
            rows.push((&r.model, r.pooling.as_str()));
        }
    }
    let cell = |model: &str, pooling: &str, layer: &str| {
        report
            .rows
            .iter()
            .find(|r| r.model == model && r.pooling.as_str() == pooling && r.layer == layer)
            .map_or_else(|| "--".to_string(), |r| format!("{:.1}", 100.0 * if dev { r.dev } else { r.test }))
    };
    let mut header = vec!["model".to_string(), "pooling".to_string()];
    header.extend(layers.iter().map(|l| l.to_string()));
    let mut table: Vec<Vec<String>> = vec![header];
    for (model, pooling) in &rows {
        let mut line = vec![model.to_string(), pooling.to_string()];
        line.extend(layers.iter().map(|l| cell(model, pooling, l)));
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let split = if dev { "dev" } else { "test" };
    let _ = writeln!(out, "{} ({} {}, %)", report.task, split, report.metric);
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c < 2 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        }
    }
    out
}

pub fn run(args: Args) -> Result<(), Failure> {
    let inputs = required(&args.input, "input")?;
    let mut text = String::new();
    let mut staged = Staged::new("report", &args)?;
    for (i, path) in inputs.iter().enumerate() {
        let path = existing(path, "input")?;
        let report: SweepReport = serde_json::from_slice(&fs::read(&path)?)?;
        staged.input(&path)?;
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&render(&report, args.dev == Some(true)));
    }
    match &args.out {
        Some(out) => {
            staged.add(out.clone(), text.into_bytes());
            staged.commit(manifest_beside(out))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
