//! Corpus-level segmentation statistics.
//!
//! All statistics are weighted by token frequency. Aggregation keeps exact
//! integer counts and sums; ratios are reduced by their gcd before the
//! final division, so permuting the corpus or scaling every frequency by a
//! common factor leaves every reported value bit-identical.

mod corpus;
mod profile;
mod report;

pub use corpus::{MorphGold, SegmentedCorpus, SegmentedWord};
pub use profile::{rank_length_profile, write_profile_csv, ProfileRow};
pub use report::{render_table, TokStatsReport};

use std::collections::HashMap;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PiecePosition {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub pct_multi_piece: f64,
    pub len_in_pieces_mean: f64,
    pub len_in_pieces_std: f64,
    pub len_first_chars_mean: f64,
    pub len_first_chars_std: f64,
    pub len_last_chars_mean: f64,
    pub len_last_chars_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub full: f64,
    pub first: f64,
    pub last: f64,
}

/// Running sums of first/second moments over token-weighted observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Moments {
    sum: u128,
    sum_sq: u128,
}

impl Moments {
    fn add(&mut self, value: u64, weight: u64) {
        let (v, w) = (value as u128, weight as u128);
        self.sum += v * w;
        self.sum_sq += v * v * w;
    }

    fn merge(&mut self, other: &Moments) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean(&self, n: u128) -> f64 {
        ratio(self.sum, n)
    }

    /// Population standard deviation.
    fn std(&self, n: u128) -> f64 {
        // var = (n * sum_sq - sum^2) / n^2, exact in integers
        let num = n * self.sum_sq - self.sum * self.sum;
        ratio(num, n * n).sqrt()
    }
}

fn ratio(num: u128, den: u128) -> f64 {
    if num == 0 {
        return 0.0;
    }
    let g = num.gcd(&den);
    (num / g) as f64 / (den / g) as f64
}

/// Shannon entropy in bits of a count table.
pub fn entropy_bits<'a, I: IntoIterator<Item = &'a u64>>(counts: I) -> f64 {
    let mut counts: Vec<u64> = counts.into_iter().copied().filter(|&c| c > 0).collect();
    if counts.len() <= 1 {
        return 0.0;
    }
    let g = counts.iter().fold(0u64, |g, &c| g.gcd(&c));
    for c in &mut counts {
        *c /= g;
    }
    counts.sort_unstable();
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    let total_f = total as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total_f;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Mergeable partial aggregate over a shard of a [`SegmentedCorpus`].
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    tokens: u128,
    multi_piece: u128,
    first_counts: HashMap<String, u64>,
    last_counts: HashMap<String, u64>,
    pieces: Moments,
    first_chars: Moments,
    last_chars: Moments,
    agree_full: u128,
    agree_first: u128,
    agree_last: u128,
    with_gold: bool,
}

impl StatsAccumulator {
    pub fn new(with_gold: bool) -> Self {
        StatsAccumulator {
            with_gold,
            ..Default::default()
        }
    }

    pub fn add(&mut self, item: &SegmentedWord, prefix: &str, gold: Option<&MorphGold>) -> Result<()> {
        let seg = &item.segmentation;
        let freq = item.frequency;
        let (Some(first), Some(last)) = (seg.pieces.first(), seg.pieces.last()) else {
            return Err(Error::Invalid(format!("word {:?} has no pieces", seg.word)));
        };
        let n_pieces = seg.pieces.len();
        self.tokens += freq as u128;
        if n_pieces > 1 {
            self.multi_piece += freq as u128;
        }
        *self.first_counts.entry(first.clone()).or_default() += freq;
        *self.last_counts.entry(last.clone()).or_default() += freq;
        self.pieces.add(n_pieces as u64, freq);
        self.first_chars.add(first.chars().count() as u64, freq);
        let last_stripped = if n_pieces > 1 {
            last.strip_prefix(prefix).unwrap_or(last)
        } else {
            last.as_str()
        };
        self.last_chars.add(last_stripped.chars().count() as u64, freq);

        if self.with_gold {
            let gold = gold.ok_or_else(|| Error::Invalid("gold segmentation required".into()))?;
            let morphs = gold
                .get(&seg.word)
                .ok_or_else(|| Error::MissingGold(seg.word.clone()))?;
            if !seg.is_unknown {
                let full = seg.pieces.len() == morphs.len()
                    && seg.stripped(prefix).zip(morphs).all(|(p, m)| p == m);
                if full {
                    self.agree_full += freq as u128;
                }
                if first == &morphs[0] {
                    self.agree_first += freq as u128;
                }
                if morphs.last().is_some_and(|m| m == last_stripped) {
                    self.agree_last += freq as u128;
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        self.tokens += other.tokens;
        self.multi_piece += other.multi_piece;
        for (k, v) in &other.first_counts {
            *self.first_counts.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.last_counts {
            *self.last_counts.entry(k.clone()).or_default() += v;
        }
        self.pieces.merge(&other.pieces);
        self.first_chars.merge(&other.first_chars);
        self.last_chars.merge(&other.last_chars);
        self.agree_full += other.agree_full;
        self.agree_first += other.agree_first;
        self.agree_last += other.agree_last;
        self.with_gold &= other.with_gold;
    }

    pub fn entropy(&self, position: PiecePosition) -> Result<f64> {
        self.require_tokens()?;
        Ok(match position {
            PiecePosition::First => entropy_bits(self.first_counts.values()),
            PiecePosition::Last => entropy_bits(self.last_counts.values()),
        })
    }

    pub fn length_stats(&self) -> Result<LengthStats> {
        self.require_tokens()?;
        let n = self.tokens;
        Ok(LengthStats {
            pct_multi_piece: ratio(self.multi_piece, n),
            len_in_pieces_mean: self.pieces.mean(n),
            len_in_pieces_std: self.pieces.std(n),
            len_first_chars_mean: self.first_chars.mean(n),
            len_first_chars_std: self.first_chars.std(n),
            len_last_chars_mean: self.last_chars.mean(n),
            len_last_chars_std: self.last_chars.std(n),
        })
    }

    pub fn agreement(&self) -> Result<Option<Agreement>> {
        self.require_tokens()?;
        if !self.with_gold {
            return Ok(None);
        }
        let n = self.tokens;
        Ok(Some(Agreement {
            full: ratio(self.agree_full, n),
            first: ratio(self.agree_first, n),
            last: ratio(self.agree_last, n),
        }))
    }

    pub fn finish(&self) -> Result<TokStatsReport> {
        let lengths = self.length_stats()?;
        let agreement = self.agreement()?;
        Ok(TokStatsReport {
            entropy_first_bits: self.entropy(PiecePosition::First)?,
            entropy_last_bits: self.entropy(PiecePosition::Last)?,
            pct_multi_piece: lengths.pct_multi_piece,
            len_in_pieces_mean: lengths.len_in_pieces_mean,
            len_in_pieces_std: lengths.len_in_pieces_std,
            len_first_chars_mean: lengths.len_first_chars_mean,
            len_first_chars_std: lengths.len_first_chars_std,
            len_last_chars_mean: lengths.len_last_chars_mean,
            len_last_chars_std: lengths.len_last_chars_std,
            agreement_full: agreement.map(|a| a.full),
            agreement_first: agreement.map(|a| a.first),
            agreement_last: agreement.map(|a| a.last),
        })
    }

    fn require_tokens(&self) -> Result<()> {
        if self.tokens == 0 {
            Err(Error::EmptyCorpus)
        } else {
            Ok(())
        }
    }
}

fn accumulate(corpus: &SegmentedCorpus, gold: Option<&MorphGold>) -> Result<StatsAccumulator> {
    let mut acc = StatsAccumulator::new(gold.is_some());
    for item in corpus.items() {
        acc.add(item, corpus.continuation_prefix(), gold)?;
    }
    Ok(acc)
}

/// Entropy (bits) of the piece found at `position` across word tokens. The
/// continuation prefix stays part of the symbol.
pub fn piece_entropy(corpus: &SegmentedCorpus, position: PiecePosition) -> Result<f64> {
    accumulate(corpus, None)?.entropy(position)
}

pub fn length_stats(corpus: &SegmentedCorpus) -> Result<LengthStats> {
    accumulate(corpus, None)?.length_stats()
}

/// Token-level agreement of segmentations with gold morphemes. UNK
/// segmentations never agree.
pub fn morph_agreement(corpus: &SegmentedCorpus, gold: &MorphGold) -> Result<Agreement> {
    accumulate(corpus, Some(gold))?
        .agreement()
        .map(|a| a.expect("gold supplied"))
}

pub fn compute_report(corpus: &SegmentedCorpus, gold: Option<&MorphGold>) -> Result<TokStatsReport> {
    accumulate(corpus, gold)?.finish()
}

/// Same as [`compute_report`], aggregating `shards` chunks in parallel.
pub fn compute_report_sharded(
    corpus: &SegmentedCorpus,
    gold: Option<&MorphGold>,
    shards: usize,
) -> Result<TokStatsReport> {
    use rayon::prelude::*;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let chunk = corpus.len().div_ceil(shards.max(1));
    let partials: Vec<StatsAccumulator> = corpus
        .items()
        .par_chunks(chunk)
        .map(|items| {
            let mut acc = StatsAccumulator::new(gold.is_some());
            for item in items {
                acc.add(item, corpus.continuation_prefix(), gold)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = StatsAccumulator::new(gold.is_some());
    for p in &partials {
        total.merge(p);
    }
    total.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(rows: &[(&str, &[&str], u64)]) -> SegmentedCorpus {
        let mut c = SegmentedCorpus::default();
        for (w, p, f) in rows {
            c.push_pieces(w, p.iter().map(|s| s.to_string()).collect(), *f).unwrap();
        }
        c
    }

    #[test]
    fn degenerate_entropy_is_zero() {
        let c = corpus(&[("ab", &["a", "##b"], 3), ("ac", &["a", "##c"], 2)]);
        assert_eq!(piece_entropy(&c, PiecePosition::First).unwrap(), 0.0);
        assert_eq!(piece_entropy(&c, PiecePosition::Last).unwrap(), 0.9709505944546686);
    }

    #[test]
    fn hand_computed_entropy() {
        // {x:2, y:1, z:1}: 0.5*1 + 0.25*2 + 0.25*2
        let c = corpus(&[("x", &["x"], 2), ("y", &["y"], 1), ("z", &["z"], 1)]);
        assert!((piece_entropy(&c, PiecePosition::First).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_corpus_rejected() {
        let c = SegmentedCorpus::default();
        assert!(matches!(piece_entropy(&c, PiecePosition::First), Err(Error::EmptyCorpus)));
        assert!(matches!(length_stats(&c), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn single_piece_corpus() {
        let c = corpus(&[("a", &["a"], 4), ("bc", &["bc"], 1)]);
        let s = length_stats(&c).unwrap();
        assert_eq!(s.pct_multi_piece, 0.0);
        assert_eq!(s.len_in_pieces_mean, 1.0);
        assert_eq!(s.len_in_pieces_std, 0.0);
    }

    #[test]
    fn hand_computed_lengths() {
        let c = corpus(&[("ab", &["a", "##b"], 1), ("c", &["c"], 1)]);
        let s = length_stats(&c).unwrap();
        assert_eq!(s.pct_multi_piece, 0.5);
        assert_eq!(s.len_in_pieces_mean, 1.5);
        assert_eq!(s.len_in_pieces_std, 0.5);
        assert_eq!(s.len_last_chars_mean, 1.0);
        assert_eq!(s.len_last_chars_std, 0.0);
        assert_eq!(s.len_first_chars_mean, 1.0);
    }

    fn gold_szallito() -> MorphGold {
        let mut g = MorphGold::new();
        g.insert(
            "szállítójárművekkel",
            ["szállító", "jármű", "vek", "kel"].map(String::from).to_vec(),
        )
        .unwrap();
        g
    }

    #[test]
    fn agreement_on_faithful_segmentation() {
        let c = corpus(&[(
            "szállítójárművekkel",
            &["szállító", "##jármű", "##vek", "##kel"],
            1,
        )]);
        let a = morph_agreement(&c, &gold_szallito()).unwrap();
        assert_eq!((a.full, a.first, a.last), (1.0, 1.0, 1.0));
    }

    #[test]
    fn agreement_on_fragmented_segmentation() {
        let c = corpus(&[(
            "szállítójárművekkel",
            &["sz", "##ál", "##lí", "##tó", "##já", "##rm", "##ű", "##vek", "##kel"],
            1,
        )]);
        let a = morph_agreement(&c, &gold_szallito()).unwrap();
        assert_eq!((a.full, a.first, a.last), (0.0, 0.0, 1.0));
    }

    #[test]
    fn unk_never_agrees() {
        let c = corpus(&[("ab", &["[UNK]"], 1)]);
        let mut g = MorphGold::new();
        g.insert("ab", vec!["ab".into()]).unwrap();
        let a = morph_agreement(&c, &g).unwrap();
        assert_eq!((a.full, a.first, a.last), (0.0, 0.0, 0.0));
    }

    #[test]
    fn missing_gold_names_word() {
        let c = corpus(&[("ab", &["ab"], 1)]);
        match morph_agreement(&c, &MorphGold::new()) {
            Err(Error::MissingGold(w)) => assert_eq!(w, "ab"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sharded_equals_sequential() {
        let rows: Vec<(String, Vec<String>, u64)> = (0..97)
            .map(|i| {
                let w = format!("w{i}x");
                let pieces = if i % 3 == 0 {
                    vec![w.clone()]
                } else {
                    vec![format!("w{i}"), "##x".to_string()]
                };
                (w, pieces, (i % 7 + 1) as u64)
            })
            .collect();
        let mut c = SegmentedCorpus::default();
        for (w, p, f) in rows {
            c.push_pieces(&w, p, f).unwrap();
        }
        let a = compute_report(&c, None).unwrap();
        for shards in [1, 2, 5, 16] {
            assert_eq!(compute_report_sharded(&c, None, shards).unwrap(), a);
        }
    }
}
