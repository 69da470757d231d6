//! Morphological probing datasets.
//!
//! A task selects tokens by part of speech and asks for the value of one
//! UD feature. Instances are sampled into train/dev/test so that
//!
//! - target word forms (lowercased) never cross splits,
//! - within each split the most frequent label has at most `cap` times as
//!   many instances as the rarest one,
//! - split sizes are exactly as requested.
//!
//! Forms are partitioned across splits before any instance is sampled,
//! which makes disjointness hold by construction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::Sentence;
use crate::error::{Error, Result};

pub const DEFAULT_IMBALANCE_CAP: u64 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphTask {
    pub name: String,
    pub upos: String,
    pub feature_key: String,
    /// Allowed values. Empty means "every value observed in the corpus".
    pub label_set: Vec<String>,
}

/// Tasks with their UD value inventories. `Case` takes its values from the
/// corpus.
const INVENTORY: &[(&str, &str, &[&str])] = &[
    ("Case", "NOUN", &[]),
    ("Degree", "ADJ", &["Cmp", "Pos", "Sup"]),
    ("Mood", "VERB", &["Cnd", "Imp", "Ind", "Pot"]),
    ("Number[psor]", "NOUN", &["Sing", "Plur"]),
    ("Number", "ADJ", &["Sing", "Plur"]),
    ("Number", "NOUN", &["Sing", "Plur"]),
    ("Number", "VERB", &["Sing", "Plur"]),
    ("Person[psor]", "NOUN", &["1", "2", "3"]),
    ("Person", "VERB", &["1", "2", "3"]),
    ("Tense", "VERB", &["Pres", "Past"]),
    ("VerbForm", "VERB", &["Inf", "Fin"]),
];

impl MorphTask {
    pub fn new(feature_key: &str, upos: &str, label_set: Vec<String>) -> Self {
        MorphTask {
            name: format!("{feature_key}_{upos}").to_lowercase().replace(['[', ']'], "_").replace("__", "_").trim_end_matches('_').to_string(),
            upos: upos.to_string(),
            feature_key: feature_key.to_string(),
            label_set,
        }
    }

    /// Parse `Feature:UPOS`, e.g. `Case:NOUN` or `Number[psor]:NOUN`.
    /// Known tasks get their value inventory, others accept any value.
    pub fn parse(spec: &str) -> Result<Self> {
        let Some((feature, upos)) = spec.rsplit_once(':') else {
            return Err(Error::Invalid(format!("task {spec:?} is not of the form Feature:UPOS")));
        };
        if feature.is_empty() || upos.is_empty() {
            return Err(Error::Invalid(format!("task {spec:?} is not of the form Feature:UPOS")));
        }
        let upos = upos.to_uppercase();
        let labels = INVENTORY
            .iter()
            .find(|(f, u, _)| *f == feature && *u == upos)
            .map(|(_, _, l)| l.iter().map(|s| s.to_string()).collect())
            .unwrap_or_default();
        Ok(MorphTask::new(feature, &upos, labels))
    }

    pub fn inventory() -> Vec<MorphTask> {
        INVENTORY
            .iter()
            .map(|(f, u, l)| MorphTask::new(f, u, l.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    fn accepts(&self, value: &str) -> bool {
        self.label_set.is_empty() || self.label_set.iter().any(|l| l == value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Candidate {
    pub sentence: usize,
    pub target_index: usize,
}

/// Candidate targets grouped by label, then by lowercased form.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub task: MorphTask,
    pub sentences: Vec<Vec<String>>,
    pub by_label: BTreeMap<String, BTreeMap<String, Vec<Candidate>>>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.by_label.values().flat_map(|f| f.values()).map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn extract_candidates(corpus: &[Sentence], task: &MorphTask) -> CandidatePool {
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut pool = CandidatePool {
        task: task.clone(),
        sentences: Vec::new(),
        by_label: BTreeMap::new(),
    };
    for sentence in corpus {
        let forms = sentence.forms();
        if !seen.insert(forms.clone()) {
            continue;
        }
        let mut hits = Vec::new();
        for (i, tok) in sentence.tokens.iter().enumerate() {
            if tok.upos != task.upos {
                continue;
            }
            if let Some(value) = tok.feats.get(&task.feature_key) {
                if task.accepts(value) {
                    hits.push((i, value.clone(), tok.form.to_lowercase()));
                }
            }
        }
        if hits.is_empty() {
            continue;
        }
        let sid = pool.sentences.len();
        pool.sentences.push(forms);
        for (i, label, form) in hits {
            pool.by_label
                .entry(label)
                .or_default()
                .entry(form)
                .or_default()
                .push(Candidate {
                    sentence: sid,
                    target_index: i,
                });
        }
    }
    if pool.task.label_set.is_empty() {
        pool.task.label_set = pool.by_label.keys().cloned().collect();
    }
    pool
}

pub fn extract_candidates_from_reader<R: BufRead>(reader: R, task: &MorphTask) -> Result<CandidatePool> {
    let corpus = crate::conllu::parse(reader)?;
    Ok(extract_candidates(&corpus, task))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 2000,
            dev: 200,
            test: 2000,
        }
    }
}

impl SplitSizes {
    fn as_array(&self) -> [usize; 3] {
        [self.train, self.dev, self.test]
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "dev", "test"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbingInstance {
    pub sentence_id: u64,
    pub sentence: Vec<String>,
    pub target_index: usize,
    pub label: String,
    pub target_form: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbingDataset {
    pub task: MorphTask,
    pub train: Vec<ProbingInstance>,
    pub dev: Vec<ProbingInstance>,
    pub test: Vec<ProbingInstance>,
    pub seed: u64,
    pub dropped_labels: Vec<String>,
}

impl ProbingDataset {
    pub fn splits(&self) -> [&[ProbingInstance]; 3] {
        [&self.train, &self.dev, &self.test]
    }

    pub fn sizes(&self) -> SplitSizes {
        SplitSizes {
            train: self.train.len(),
            dev: self.dev.len(),
            test: self.test.len(),
        }
    }

    /// Sentences referenced by the dataset, indexed by `sentence_id`.
    pub fn sentences(&self) -> Vec<Vec<String>> {
        let mut by_id: BTreeMap<u64, &Vec<String>> = BTreeMap::new();
        for inst in self.splits().into_iter().flatten() {
            by_id.insert(inst.sentence_id, &inst.sentence);
        }
        by_id.into_values().cloned().collect()
    }

    /// Violations of the size, cap and disjointness constraints.
    pub fn violations(&self, sizes: SplitSizes, cap: u64) -> Vec<String> {
        let mut out = Vec::new();
        let splits = self.splits();
        for ((name, split), want) in SPLIT_NAMES.iter().zip(splits).zip(sizes.as_array()) {
            if split.len() != want {
                out.push(format!("{name}: {} instances, expected {want}", split.len()));
            }
            let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
            for inst in split {
                *counts.entry(&inst.label).or_default() += 1;
                if !self.task.label_set.contains(&inst.label) {
                    out.push(format!("{name}: label {} not in label set", inst.label));
                }
            }
            if let (Some(max), Some(min)) = (counts.values().max(), counts.values().min()) {
                if *max > cap * *min {
                    out.push(format!("{name}: class imbalance {max}:{min} exceeds {cap}:1"));
                }
            }
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let fa: HashSet<&str> = splits[a].iter().map(|i| i.target_form.as_str()).collect();
                if let Some(shared) = splits[b].iter().find(|i| fa.contains(i.target_form.as_str())) {
                    out.push(format!(
                        "form {:?} shared by {} and {}",
                        shared.target_form, SPLIT_NAMES[a], SPLIT_NAMES[b]
                    ));
                }
            }
        }
        out
    }

    /// File names and contents: `train.tsv`, `dev.tsv`, `test.tsv`,
    /// `sentences.txt` and `manifest.json`.
    pub fn to_files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = Vec::with_capacity(5);
        for (name, split) in SPLIT_NAMES.iter().zip(self.splits()) {
            let mut out = Vec::new();
            write_split_tsv(split, &mut out)?;
            files.push((format!("{name}.tsv"), out));
        }
        let mut sentences = String::new();
        for s in self.sentences() {
            sentences.push_str(&s.join(" "));
            sentences.push('\n');
        }
        files.push(("sentences.txt".into(), sentences.into_bytes()));
        let manifest = DatasetManifest::from(self);
        files.push(("manifest.json".into(), (serde_json::to_string_pretty(&manifest)? + "\n").into_bytes()));
        Ok(files)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.to_files()? {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        let mut splits = Vec::with_capacity(3);
        for name in SPLIT_NAMES {
            let file = fs::File::open(dir.join(format!("{name}.tsv")))?;
            splits.push(read_split_tsv(BufReader::new(file), name)?);
        }
        let test = splits.pop().unwrap_or_default();
        let dev = splits.pop().unwrap_or_default();
        let train = splits.pop().unwrap_or_default();
        Ok(ProbingDataset {
            task: manifest.task,
            train,
            dev,
            test,
            seed: manifest.seed,
            dropped_labels: manifest.dropped_labels,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: MorphTask,
    pub sizes: SplitSizes,
    pub seed: u64,
    pub dropped_labels: Vec<String>,
    pub label_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl From<&ProbingDataset> for DatasetManifest {
    fn from(d: &ProbingDataset) -> Self {
        let mut label_counts = BTreeMap::new();
        for (name, split) in SPLIT_NAMES.iter().zip(d.splits()) {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for inst in split {
                *counts.entry(inst.label.clone()).or_default() += 1;
            }
            label_counts.insert(name.to_string(), counts);
        }
        DatasetManifest {
            task: d.task.clone(),
            sizes: d.sizes(),
            seed: d.seed,
            dropped_labels: d.dropped_labels.clone(),
            label_counts,
        }
    }
}

pub fn write_split_tsv<W: Write>(split: &[ProbingInstance], mut out: W) -> Result<()> {
    for inst in split {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            inst.sentence_id,
            inst.target_index,
            inst.label,
            inst.sentence.join(" ")
        )?;
    }
    Ok(())
}

pub fn read_split_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<ProbingInstance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.splitn(4, '\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(source_name, i + 1, "expected 4 tab-separated columns"));
        }
        let sentence_id = cols[0]
            .parse()
            .map_err(|_| Error::parse(source_name, i + 1, "bad sentence id"))?;
        let target_index: usize = cols[1]
            .parse()
            .map_err(|_| Error::parse(source_name, i + 1, "bad target index"))?;
        let sentence: Vec<String> = cols[3].split(' ').map(String::from).collect();
        let Some(target) = sentence.get(target_index) else {
            return Err(Error::parse(source_name, i + 1, "target index outside the sentence"));
        };
        out.push(ProbingInstance {
            sentence_id,
            target_form: target.to_lowercase(),
            target_index,
            label: cols[2].to_string(),
            sentence,
        });
    }
    Ok(out)
}

/// Largest balanced-enough allocation: returns per-label counts summing to
/// `n` with `max <= cap * min`, or `None` when impossible.
fn allocate(avail: &[usize], n: usize, cap: u64) -> Option<Vec<usize>> {
    if n == 0 {
        return Some(vec![0; avail.len()]);
    }
    let k = avail.len();
    if k == 0 {
        return None;
    }
    let floor_min = *avail.iter().min()?.min(&(n / k));
    if floor_min == 0 {
        return None;
    }
    let ceil_cap = (cap as usize).saturating_mul(floor_min);
    let caps: Vec<usize> = avail.iter().map(|&a| a.min(ceil_cap)).collect();
    if caps.iter().sum::<usize>() < n {
        return None;
    }
    // water level: smallest t with sum(min(cap, t)) >= n
    let filled = |t: usize| caps.iter().map(|&c| c.min(t)).sum::<usize>();
    let (mut lo, mut hi) = (1, *caps.iter().max()?);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if filled(mid) >= n {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let level = lo;
    let mut counts: Vec<usize> = caps.iter().map(|&c| c.min(level)).collect();
    let mut excess = filled(level) - n;
    for c in counts.iter_mut() {
        if excess == 0 {
            break;
        }
        if *c == level {
            *c -= 1;
            excess -= 1;
        }
    }
    Some(counts)
}

/// Partition forms across splits, filter labels that cannot satisfy the
/// imbalance cap, and sample exactly `sizes` instances per split.
pub fn sample_splits(pool: &CandidatePool, sizes: SplitSizes, cap: u64, seed: u64) -> Result<ProbingDataset> {
    if pool.is_empty() {
        return Err(Error::Ungeneratable {
            task: pool.task.name.clone(),
            reason: "no candidates in the corpus".into(),
        });
    }
    if cap < 1 {
        return Err(Error::Invalid("imbalance cap must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = sizes.as_array();

    // form -> per-label instance counts
    let mut forms: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (label, by_form) in &pool.by_label {
        for (form, cands) in by_form {
            *forms.entry(form).or_default().entry(label).or_default() += cands.len();
        }
    }
    let mut by_primary: BTreeMap<&str, Vec<(&str, usize)>> = BTreeMap::new();
    for (form, counts) in &forms {
        let (primary, _) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .expect("form has at least one label");
        by_primary
            .entry(primary)
            .or_default()
            .push((form, counts.values().sum()));
    }
    let mut split_of: BTreeMap<&str, usize> = BTreeMap::new();
    for group in by_primary.values_mut() {
        group.shuffle(&mut rng);
        let mut assigned = [0usize; 3];
        for &(form, weight) in group.iter() {
            let best = (0..3)
                .filter(|&s| targets[s] > 0)
                .min_by(|&a, &b| {
                    // assigned[a] / targets[a] < assigned[b] / targets[b]
                    (assigned[a] * targets[b]).cmp(&(assigned[b] * targets[a])).then(a.cmp(&b))
                })
                .unwrap_or(0);
            assigned[best] += weight;
            split_of.insert(form, best);
        }
    }

    // per split, per label: candidates
    let mut available: Vec<BTreeMap<&str, Vec<Candidate>>> = vec![BTreeMap::new(); 3];
    for (label, by_form) in &pool.by_label {
        for (form, cands) in by_form {
            let s = split_of[form.as_str()];
            available[s].entry(label).or_default().extend(cands.iter().copied());
        }
    }
    let avail_count = |s: usize, label: &str| available[s].get(label).map_or(0, Vec::len);

    let mut labels: Vec<&str> = pool.by_label.keys().map(String::as_str).collect();
    let mut dropped: Vec<String> = Vec::new();
    let allocation = loop {
        if labels.len() < 2 {
            return Err(Error::Ungeneratable {
                task: pool.task.name.clone(),
                reason: format!(
                    "fewer than 2 labels remain after enforcing the {cap}:1 cap (dropped: {})",
                    dropped.join(", ")
                ),
            });
        }
        let per_split: Vec<Option<Vec<usize>>> = (0..3)
            .map(|s| {
                let avail: Vec<usize> = labels.iter().map(|l| avail_count(s, l)).collect();
                allocate(&avail, targets[s], cap)
            })
            .collect();
        if per_split.iter().all(Option::is_some) {
            break per_split.into_iter().map(Option::unwrap).collect::<Vec<_>>();
        }
        let short: Vec<String> = (0..3)
            .filter_map(|s| {
                let total: usize = labels.iter().map(|l| avail_count(s, l)).sum();
                (total < targets[s]).then(|| {
                    format!("{}: need {}, available {}", SPLIT_NAMES[s], targets[s], total)
                })
            })
            .collect();
        if !short.is_empty() {
            return Err(Error::Shortfall {
                task: pool.task.name.clone(),
                details: short.join("; "),
            });
        }
        // drop the label with the lowest relative support in any split
        let score = |l: &str| {
            (0..3)
                .filter(|&s| targets[s] > 0)
                .map(|s| avail_count(s, l) as f64 / targets[s] as f64)
                .fold(f64::INFINITY, f64::min)
        };
        let (idx, _) = labels
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| score(a).total_cmp(&score(b)).then_with(|| a.cmp(b)))
            .expect("at least two labels");
        dropped.push(labels.remove(idx).to_string());
    };

    let mut sentence_ids: BTreeMap<usize, u64> = BTreeMap::new();
    let mut picked: Vec<Vec<(Candidate, &str)>> = Vec::with_capacity(3);
    for (s, counts) in allocation.iter().enumerate() {
        let mut split = Vec::with_capacity(targets[s]);
        for (label, &count) in labels.iter().zip(counts) {
            let mut cands = available[s].get(label).cloned().unwrap_or_default();
            cands.shuffle(&mut rng);
            split.extend(cands.into_iter().take(count).map(|c| (c, *label)));
        }
        split.shuffle(&mut rng);
        for (c, _) in &split {
            sentence_ids.insert(c.sentence, 0);
        }
        picked.push(split);
    }
    for (dense, id) in sentence_ids.values_mut().enumerate() {
        *id = dense as u64;
    }
    let build = |split: &[(Candidate, &str)]| -> Vec<ProbingInstance> {
        split
            .iter()
            .map(|(c, label)| {
                let sentence = pool.sentences[c.sentence].clone();
                ProbingInstance {
                    sentence_id: sentence_ids[&c.sentence],
                    target_form: sentence[c.target_index].to_lowercase(),
                    target_index: c.target_index,
                    label: label.to_string(),
                    sentence,
                }
            })
            .collect()
    };
    let mut task = pool.task.clone();
    let kept: BTreeSet<&str> = labels.iter().copied().collect();
    task.label_set.retain(|l| kept.contains(l.as_str()));
    for l in &kept {
        if !task.label_set.iter().any(|x| x == l) {
            task.label_set.push(l.to_string());
        }
    }
    Ok(ProbingDataset {
        task,
        train: build(&picked[0]),
        dev: build(&picked[1]),
        test: build(&picked[2]),
        seed,
        dropped_labels: dropped,
    })
}
