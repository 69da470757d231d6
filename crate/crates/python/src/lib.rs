//! Python bindings. Reports cross the boundary as plain dicts.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use subprobe::probe::{scalar_mix as mix, TrainerConfig};
use subprobe::probe_dataset::{extract_candidates, sample_splits, DatasetManifest, MorphTask, ProbingDataset, SplitSizes};
use subprobe::sequence::{self as seq, resolve_layers, LayerSelector, TagSequence};
use subprobe::store::{self, layer_index_for, pool_subwords, EmbeddingRecord, EmbeddingStore, LayerKind, Pooling, StoreHeader};
use subprobe::tokenizer::{self as tok, Span, SpecialTokens, DEFAULT_CONTINUATION_PREFIX};
use subprobe::tokstats::{compute_report, MorphGold, SegmentedCorpus};

create_exception!(subprobe, SubprobeError, PyValueError, "Raised for any error reported by the core library.");

fn err(e: subprobe::Error) -> PyErr {
    SubprobeError::new_err(format!("{}: {e}", e.kind()))
}

fn io_err(e: std::io::Error) -> PyErr {
    err(e.into())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn specials(list: Option<Vec<String>>) -> PyResult<SpecialTokens> {
    match list {
        None => Ok(SpecialTokens::default()),
        Some(list) => SpecialTokens::from_list(&list).map_err(err),
    }
}

/// WordPiece vocabulary with greedy longest-match segmentation.
#[pyclass(name = "Vocabulary", module = "subprobe", frozen)]
struct PyVocabulary {
    inner: tok::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    #[new]
    #[pyo3(signature = (pieces, prefix = DEFAULT_CONTINUATION_PREFIX, specials = None))]
    fn new(pieces: Vec<String>, prefix: &str, specials: Option<Vec<String>>) -> PyResult<Self> {
        let specials = self::specials(specials)?;
        let inner = tok::Vocabulary::new(pieces, prefix, specials).map_err(err)?;
        Ok(PyVocabulary { inner })
    }

    /// Read one subword per line; the line index is the id.
    #[staticmethod]
    #[pyo3(signature = (path, prefix = DEFAULT_CONTINUATION_PREFIX, specials = None))]
    fn load(path: PathBuf, prefix: &str, specials: Option<Vec<String>>) -> PyResult<Self> {
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        let inner = tok::Vocabulary::load(reader, prefix, self::specials(specials)?).map_err(err)?;
        Ok(PyVocabulary { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let out = BufWriter::new(File::create(path).map_err(io_err)?);
        self.inner.write(out).map_err(err)
    }

    fn tokenize_word(&self, word: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.tokenize_word(word).map_err(err)?.pieces)
    }

    /// Pieces wrapped in CLS/SEP, plus a half-open piece span per word.
    fn tokenize_sentence(&self, words: Vec<String>) -> PyResult<(Vec<String>, Vec<(usize, usize)>)> {
        let enc = self.inner.tokenize_sentence(&words).map_err(err)?;
        Ok((enc.pieces, enc.spans.iter().map(|s| (s.start, s.end)).collect()))
    }

    fn id(&self, piece: &str) -> Option<u32> {
        self.inner.id(piece)
    }

    fn pieces(&self) -> Vec<String> {
        self.inner.pieces().to_vec()
    }

    #[getter]
    fn prefix(&self) -> &str {
        self.inner.continuation_prefix()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, piece: &str) -> bool {
        self.inner.contains(piece)
    }

    fn __repr__(&self) -> String {
        format!("Vocabulary(len={}, prefix={:?})", self.inner.len(), self.inner.continuation_prefix())
    }
}

/// Learn a vocabulary from `(word, count)` pairs. Returns the vocabulary and
/// whether merging stopped short of `size`.
#[pyfunction]
#[pyo3(signature = (counts, size, prefix = DEFAULT_CONTINUATION_PREFIX, specials = None))]
fn train_vocabulary(counts: Vec<(String, u64)>, size: usize, prefix: &str, specials: Option<Vec<String>>) -> PyResult<(PyVocabulary, bool)> {
    let specials = specials.unwrap_or_else(|| ["[PAD]", "[UNK]", "[CLS]", "[SEP]"].map(String::from).to_vec());
    let trained = tok::train_vocabulary(&counts, size, prefix, &specials).map_err(err)?;
    Ok((PyVocabulary { inner: trained.vocabulary }, trained.truncated))
}

/// Segmentation statistics for word counts under `vocab`. `gold` maps words
/// to their morphemes.
#[pyfunction]
#[pyo3(signature = (vocab, counts, gold = None))]
fn tokstats(py: Python<'_>, vocab: &PyVocabulary, counts: Vec<(String, u64)>, gold: Option<Vec<(String, Vec<String>)>>) -> PyResult<Py<PyAny>> {
    let corpus = SegmentedCorpus::from_vocabulary(&vocab.inner, &counts).map_err(err)?;
    let gold = match gold {
        None => None,
        Some(entries) => {
            let mut g = MorphGold::new();
            for (word, morphs) in entries {
                g.insert(&word, morphs).map_err(err)?;
            }
            Some(g)
        }
    };
    let report = compute_report(&corpus, gold.as_ref()).map_err(err)?;
    to_py(py, &report)
}

/// Index of `embedding`, `first`, `middle` or `highest` in a model with
/// `num_layers` outputs (embedding layer included).
#[pyfunction]
fn layer_index(kind: &str, num_layers: usize) -> PyResult<usize> {
    let kind: LayerKind = kind.parse().map_err(err)?;
    layer_index_for(kind, num_layers).map_err(err)
}

/// Softmax-weighted sum of `layers` (one row per layer).
#[pyfunction]
fn scalar_mix(logits: Vec<f64>, layers: Vec<Vec<f32>>) -> PyResult<Vec<f64>> {
    let dim = layers.first().map_or(0, Vec::len);
    if layers.iter().any(|l| l.len() != dim) {
        return Err(PyValueError::new_err("layers must share one width"));
    }
    let flat: Vec<f32> = layers.concat();
    mix(&logits, &flat, dim).map_err(err)
}

fn tag_sequences(seqs: Vec<Vec<String>>) -> Vec<TagSequence> {
    seqs.into_iter()
        .enumerate()
        .map(|(i, tags)| TagSequence { sentence_id: i as u64, tags })
        .collect()
}

/// Exact-match span precision, recall and F1 over BIO2 sequences.
#[pyfunction]
fn ner_span_f1(py: Python<'_>, gold: Vec<Vec<String>>, pred: Vec<Vec<String>>) -> PyResult<Py<PyAny>> {
    let report = seq::ner_span_f1(&tag_sequences(pred), &tag_sequences(gold)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn pos_accuracy(gold: Vec<Vec<String>>, pred: Vec<Vec<String>>) -> PyResult<f64> {
    seq::pos_accuracy(&tag_sequences(pred), &tag_sequences(gold)).map_err(err)
}

/// Read-only view of an embedding store file.
#[pyclass(name = "EmbeddingStore", module = "subprobe", frozen)]
struct PyEmbeddingStore {
    inner: EmbeddingStore,
}

#[pymethods]
impl PyEmbeddingStore {
    #[staticmethod]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(PyEmbeddingStore {
            inner: EmbeddingStore::open(&path).map_err(err)?,
        })
    }

    #[getter]
    fn model_name(&self) -> &str {
        &self.inner.header.model_name
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.num_layers()
    }

    #[getter]
    fn hidden(&self) -> usize {
        self.inner.hidden()
    }

    fn sentence_ids(&self) -> Vec<u64> {
        self.inner.records.iter().map(|r| r.sentence_id).collect()
    }

    fn num_words(&self, sentence_id: u64) -> PyResult<usize> {
        Ok(self.inner.get(sentence_id).map_err(err)?.num_words())
    }

    /// One vector per word of a sentence at `layer` (an index or a layer
    /// name), reduced over subwords with `pooling`.
    #[pyo3(signature = (sentence_id, layer, pooling = "last"))]
    fn pool(&self, sentence_id: u64, layer: &Bound<'_, PyAny>, pooling: &str) -> PyResult<Vec<Vec<f32>>> {
        let layer = match layer.extract::<usize>() {
            Ok(i) => i,
            Err(_) => layer_index(&layer.extract::<String>()?, self.inner.num_layers())?,
        };
        let pooling: Pooling = pooling.parse().map_err(err)?;
        let record = self.inner.get(sentence_id).map_err(err)?;
        (0..record.num_words())
            .map(|w| pool_subwords(record, self.inner.hidden(), w, layer, pooling).map_err(err))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    fn __repr__(&self) -> String {
        let h = &self.inner.header;
        format!(
            "EmbeddingStore(model={:?}, layers={}, hidden={}, sentences={})",
            h.model_name,
            h.num_layers_total,
            h.hidden,
            self.inner.records.len()
        )
    }
}

/// Write a store. Each record is `(sentence_id, spans, tensor)` with `spans`
/// as half-open subword ranges per word and `tensor` flattened
/// `[layer][subword][hidden]`.
#[pyfunction]
fn write_store(path: PathBuf, model_name: &str, num_layers: u32, hidden: u32, records: Vec<(u64, Vec<(usize, usize)>, Vec<f32>)>) -> PyResult<()> {
    let row = num_layers as usize * hidden as usize;
    let records = records
        .into_iter()
        .map(|(sentence_id, spans, tensor)| {
            if row == 0 || tensor.len() % row != 0 {
                return Err(PyValueError::new_err(format!(
                    "sentence {sentence_id}: tensor length {} is not a multiple of layers x hidden = {row}",
                    tensor.len()
                )));
            }
            Ok(EmbeddingRecord {
                sentence_id,
                num_subwords: (tensor.len() / row) as u32,
                spans: spans.into_iter().map(|(s, e)| Span::new(s, e)).collect(),
                tensor,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let header = StoreHeader::new(model_name, num_layers, hidden, records.len() as u64);
    let out = BufWriter::new(File::create(path).map_err(io_err)?);
    store::write_store(out, &header, &records).map_err(err)?;
    Ok(())
}

/// Sample a probing dataset for `task` (e.g. `"Case:NOUN"`) from a CoNLL-U
/// file and write it to `out_dir`. Returns the dataset manifest.
#[pyfunction]
#[pyo3(signature = (conllu, task, out_dir, train = 2000, dev = 500, test = 500, seed = 0, cap = 3))]
#[allow(clippy::too_many_arguments)]
fn generate_probe_dataset(
    py: Python<'_>,
    conllu: PathBuf,
    task: &str,
    out_dir: PathBuf,
    train: usize,
    dev: usize,
    test: usize,
    seed: u64,
    cap: u64,
) -> PyResult<Py<PyAny>> {
    let task = MorphTask::parse(task).map_err(err)?;
    let corpus = subprobe::conllu::parse(BufReader::new(File::open(conllu).map_err(io_err)?)).map_err(err)?;
    let dataset = py
        .detach(|| sample_splits(&extract_candidates(&corpus, &task), SplitSizes { train, dev, test }, cap, seed))
        .map_err(err)?;
    dataset.write_dir(&out_dir).map_err(err)?;
    to_py(py, &DatasetManifest::from(&dataset))
}

/// Train one probe on a dataset directory and a store. `layer` is a layer
/// name, an index as a string, or `"mix"`.
#[pyfunction]
#[pyo3(signature = (data_dir, store, layer, pooling = "last", seed = 0, epochs = None, hidden_units = None, lr = None, dropout = None))]
#[allow(clippy::too_many_arguments)]
fn train_probe(
    py: Python<'_>,
    data_dir: PathBuf,
    store: &PyEmbeddingStore,
    layer: &str,
    pooling: &str,
    seed: u64,
    epochs: Option<usize>,
    hidden_units: Option<usize>,
    lr: Option<f64>,
    dropout: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let dataset = ProbingDataset::read_dir(&data_dir).map_err(err)?;
    let pooling: Pooling = pooling.parse().map_err(err)?;
    let selector: LayerSelector = layer.parse().map_err(err)?;
    let cells = resolve_layers(&[selector], store.inner.num_layers()).map_err(err)?;
    let [(_, mode)] = cells.as_slice() else {
        return Err(PyValueError::new_err(format!("layer {layer:?} names more than one layer")));
    };
    let d = TrainerConfig::default();
    let config = TrainerConfig {
        seed,
        max_epochs: epochs.unwrap_or(d.max_epochs),
        hidden_units: hidden_units.unwrap_or(d.hidden_units),
        lr: lr.unwrap_or(d.lr),
        dropout: dropout.unwrap_or(d.dropout),
        ..d
    };
    config.validate().map_err(err)?;
    let run = py
        .detach(|| subprobe::probe::train_probe(&dataset, &store.inner, pooling, *mode, &config))
        .map_err(err)?;
    to_py(py, &run.report)
}

/// Seed for one experiment cell, derived from a global seed and a key.
#[pyfunction]
fn derive_seed(global: u64, key: &str) -> u64 {
    subprobe::run::derive_seed(global, key)
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SubprobeError", m.py().get_type::<SubprobeError>())?;
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyEmbeddingStore>()?;
    m.add_function(wrap_pyfunction!(train_vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(tokstats, m)?)?;
    m.add_function(wrap_pyfunction!(layer_index, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_mix, m)?)?;
    m.add_function(wrap_pyfunction!(ner_span_f1, m)?)?;
    m.add_function(wrap_pyfunction!(pos_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(write_store, m)?)?;
    m.add_function(wrap_pyfunction!(generate_probe_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_probe, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
