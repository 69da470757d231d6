use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Corpus segmentation measures, one column of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokStatsReport {
    pub entropy_first_bits: f64,
    pub entropy_last_bits: f64,
    pub pct_multi_piece: f64,
    pub len_in_pieces_mean: f64,
    pub len_in_pieces_std: f64,
    pub len_first_chars_mean: f64,
    pub len_first_chars_std: f64,
    pub len_last_chars_mean: f64,
    pub len_last_chars_std: f64,
    pub agreement_full: Option<f64>,
    pub agreement_first: Option<f64>,
    pub agreement_last: Option<f64>,
}

type RowFormatter = fn(&TokStatsReport) -> String;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |v| format!("{v:.2}"))
}

const ROWS: [(&str, RowFormatter); 9] = [
    ("Entropy of first WP", |r| format!("{:.2}", r.entropy_first_bits)),
    ("Entropy of last WP", |r| format!("{:.2}", r.entropy_last_bits)),
    ("More than one WP", |r| format!("{:.1}%", 100.0 * r.pct_multi_piece)),
    ("Length in WP", |r| {
        format!("{:.1}±{:.1}", r.len_in_pieces_mean, r.len_in_pieces_std)
    }),
    ("Length of first WP", |r| {
        format!("{:.1}±{:.1}", r.len_first_chars_mean, r.len_first_chars_std)
    }),
    ("Length of last WP", |r| {
        format!("{:.1}±{:.1}", r.len_last_chars_mean, r.len_last_chars_std)
    }),
    ("Accuracy to gold", |r| opt(r.agreement_full)),
    ("Accuracy to gold in first WP", |r| opt(r.agreement_first)),
    ("Accuracy to gold in last WP", |r| opt(r.agreement_last)),
];

/// Render reports side by side, one column per named tokenizer.
pub fn render_table(columns: &[(&str, &TokStatsReport)]) -> String {
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(ROWS.len() + 1);
    let mut header = vec![String::new()];
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    cells.push(header);
    for (label, fmt) in ROWS {
        let mut row = vec![label.to_string()];
        row.extend(columns.iter().map(|(_, r)| fmt(r)));
        cells.push(row);
    }

    let n_cols = columns.len() + 1;
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c == 0 {
                let _ = write!(out, "{cell}{}", " ".repeat(pad));
            } else {
                let _ = write!(out, "  {}{cell}", " ".repeat(pad));
            }
        }
        out.push('\n');
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (n_cols - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
