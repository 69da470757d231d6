use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SegmentedCorpus;
use crate::error::{Error, Result};

/// Token count for one (log-rank bucket, piece count) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub bucket: usize,
    pub piece_count: usize,
    pub tokens: u64,
}

/// Segment length against log frequency rank.
///
/// Words are ranked by descending frequency (ties broken lexicographically),
/// rank `r` starting at 1, and bucketed by `floor(ln r / ln r_max * buckets)`
/// clamped to `buckets - 1`. Rows are sorted by bucket, then piece count.
pub fn rank_length_profile(corpus: &SegmentedCorpus, buckets: usize) -> Result<Vec<ProfileRow>> {
    if buckets == 0 {
        return Err(Error::Invalid("bucket count must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<_> = corpus.items().iter().collect();
    order.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.word().cmp(b.word()))
    });
    let ln_max = (order.len() as f64).ln();
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (i, item) in order.iter().enumerate() {
        let rank = (i + 1) as f64;
        let bucket = if ln_max > 0.0 {
            ((rank.ln() / ln_max * buckets as f64).floor() as usize).min(buckets - 1)
        } else {
            0
        };
        *cells
            .entry((bucket, item.segmentation.pieces.len()))
            .or_default() += item.frequency;
    }
    Ok(cells
        .into_iter()
        .map(|((bucket, piece_count), tokens)| ProfileRow {
            bucket,
            piece_count,
            tokens,
        })
        .collect())
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], mut out: W) -> Result<()> {
    writeln!(out, "bucket,piece_count,tokens")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.bucket, r.piece_count, r.tokens)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_word_one_row() {
        let mut c = SegmentedCorpus::default();
        c.push_pieces("a", vec!["a".into()], 5).unwrap();
        let rows = rank_length_profile(&c, 4).unwrap();
        assert_eq!(
            rows,
            [ProfileRow {
                bucket: 0,
                piece_count: 1,
                tokens: 5
            }]
        );
    }

    #[test]
    fn zero_buckets_rejected() {
        let mut c = SegmentedCorpus::default();
        c.push_pieces("a", vec!["a".into()], 5).unwrap();
        assert!(rank_length_profile(&c, 0).is_err());
        assert!(rank_length_profile(&SegmentedCorpus::default(), 3).is_err());
    }

    #[test]
    fn equal_frequency_ties_use_word_order() {
        // Ranks follow the lexicographic order; with ten words and ten
        // buckets, word at rank r lands in floor(ln r / ln 10 * 10).
        let mut c = SegmentedCorpus::default();
        let words = ["j", "c", "h", "a", "e", "g", "b", "i", "d", "f"];
        for (i, w) in words.iter().enumerate() {
            let pieces = vec!["x".to_string(); i + 1];
            c.push_pieces(w, pieces, 1).unwrap();
        }
        let rows = rank_length_profile(&c, 10).unwrap();
        let mut sorted = words.to_vec();
        sorted.sort();
        let mut expected = BTreeMap::new();
        for (r, w) in sorted.iter().enumerate() {
            let rank = (r + 1) as f64;
            let bucket = ((rank.ln() / 10f64.ln() * 10.0).floor() as usize).min(9);
            let len = words.iter().position(|x| x == w).unwrap() + 1;
            *expected.entry((bucket, len)).or_insert(0u64) += 1;
        }
        let got: BTreeMap<_, _> = rows.iter().map(|r| ((r.bucket, r.piece_count), r.tokens)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_profile_csv(
            &[ProfileRow {
                bucket: 1,
                piece_count: 2,
                tokens: 3,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bucket,piece_count,tokens\n1,2,3\n");
    }
}
