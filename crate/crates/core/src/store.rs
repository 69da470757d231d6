//! Binary store of per-sentence, per-layer subword embeddings.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! header:  b"EMBS" | u32 version=1 | u32 num_layers_total | u32 hidden
//!          | u64 sentence_count | u16 name_len | name (UTF-8)
//! record:  u64 sentence_id | u32 num_words | u32 num_subwords
//!          | num_words x (u32 start, u32 end)
//!          | num_layers_total x num_subwords x hidden f32
//! ```
//!
//! Layer 0 is the embedding layer. Spans cover the subword range between
//! the leading and trailing special tokens exactly, in order.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::Span;

pub const MAGIC: [u8; 4] = *b"EMBS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub num_layers_total: u32,
    pub hidden: u32,
    pub sentence_count: u64,
    pub model_name: String,
}

impl StoreHeader {
    pub fn new(model_name: &str, num_layers_total: u32, hidden: u32, sentence_count: u64) -> Self {
        StoreHeader {
            num_layers_total,
            hidden,
            sentence_count,
            model_name: model_name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub sentence_id: u64,
    pub num_subwords: u32,
    pub spans: Vec<Span>,
    /// `[layer][subword][hidden]`, row-major.
    pub tensor: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn num_words(&self) -> usize {
        self.spans.len()
    }

    pub fn num_layers(&self, hidden: usize) -> usize {
        if hidden == 0 || self.num_subwords == 0 {
            0
        } else {
            self.tensor.len() / (hidden * self.num_subwords as usize)
        }
    }

    /// The `hidden`-sized row for one (layer, subword).
    pub fn row(&self, hidden: usize, layer: usize, subword: usize) -> &[f32] {
        let start = (layer * self.num_subwords as usize + subword) * hidden;
        &self.tensor[start..start + hidden]
    }

    /// Check spans and tensor shape against a header.
    pub fn validate(&self, header: &StoreHeader) -> std::result::Result<(), String> {
        let n = self.num_subwords as usize;
        if n < 2 {
            return Err(format!("num_subwords {n} leaves no room for CLS/SEP"));
        }
        let mut expected = 1;
        for (i, span) in self.spans.iter().enumerate() {
            if span.start != expected || span.end <= span.start {
                return Err(format!(
                    "span {i} [{}, {}) does not continue the partition at {expected}",
                    span.start, span.end
                ));
            }
            expected = span.end;
        }
        if expected != n - 1 {
            return Err(format!(
                "spans cover [1, {expected}) but the non-special range is [1, {})",
                n - 1
            ));
        }
        let want = header.num_layers_total as usize * n * header.hidden as usize;
        if self.tensor.len() != want {
            return Err(format!("tensor has {} values, expected {want}", self.tensor.len()));
        }
        if let Some(pos) = self.tensor.iter().position(|v| !v.is_finite()) {
            return Err(format!("non-finite value at tensor index {pos}"));
        }
        Ok(())
    }
}

fn store_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Store {
        offset,
        message: message.into(),
    }
}

/// Streaming writer; the header is written up front and the record count is
/// checked on [`StoreWriter::finish`].
pub struct StoreWriter<W: Write> {
    out: W,
    header: StoreHeader,
    written: u64,
    offset: u64,
}

impl<W: Write> StoreWriter<W> {
    pub fn new(mut out: W, header: StoreHeader) -> Result<Self> {
        if header.hidden == 0 {
            return Err(store_err(0, "hidden size must be positive"));
        }
        if header.num_layers_total == 0 {
            return Err(store_err(0, "layer count must be positive"));
        }
        let name = header.model_name.as_bytes();
        let name_len = u16::try_from(name.len()).map_err(|_| store_err(0, "model name longer than 65535 bytes"))?;
        let mut buf = Vec::with_capacity(26 + name.len());
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&header.num_layers_total.to_le_bytes());
        buf.extend_from_slice(&header.hidden.to_le_bytes());
        buf.extend_from_slice(&header.sentence_count.to_le_bytes());
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(name);
        out.write_all(&buf)?;
        Ok(StoreWriter {
            out,
            header,
            written: 0,
            offset: buf.len() as u64,
        })
    }

    pub fn write_record(&mut self, record: &EmbeddingRecord) -> Result<()> {
        if self.written == self.header.sentence_count {
            return Err(store_err(self.offset, "more records than the header declares"));
        }
        record
            .validate(&self.header)
            .map_err(|m| store_err(self.offset, format!("sentence {}: {m}", record.sentence_id)))?;
        let num_words = u32::try_from(record.spans.len()).map_err(|_| store_err(self.offset, "too many words"))?;
        let mut buf = Vec::with_capacity(16 + record.spans.len() * 8 + record.tensor.len() * 4);
        buf.extend_from_slice(&record.sentence_id.to_le_bytes());
        buf.extend_from_slice(&num_words.to_le_bytes());
        buf.extend_from_slice(&record.num_subwords.to_le_bytes());
        for span in &record.spans {
            buf.extend_from_slice(&(span.start as u32).to_le_bytes());
            buf.extend_from_slice(&(span.end as u32).to_le_bytes());
        }
        for v in &record.tensor {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf)?;
        self.offset += buf.len() as u64;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.sentence_count {
            return Err(store_err(
                self.offset,
                format!(
                    "header declares {} records but {} were written",
                    self.header.sentence_count, self.written
                ),
            ));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Sequential reader yielding validated records.
pub struct StoreReader<R: Read> {
    input: R,
    header: StoreHeader,
    read: u64,
    offset: u64,
}

impl<R: Read> StoreReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut offset = 0u64;
        let mut fixed = [0u8; 26];
        read_exact_at(&mut input, &mut fixed, &mut offset, "header")?;
        if fixed[0..4] != MAGIC {
            return Err(store_err(0, format!("bad magic {:02x?}, expected {:02x?}", &fixed[0..4], MAGIC)));
        }
        let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(store_err(4, format!("unsupported version {version}")));
        }
        let num_layers_total = u32::from_le_bytes(fixed[8..12].try_into().unwrap());
        let hidden = u32::from_le_bytes(fixed[12..16].try_into().unwrap());
        let sentence_count = u64::from_le_bytes(fixed[16..24].try_into().unwrap());
        let name_len = u16::from_le_bytes(fixed[24..26].try_into().unwrap()) as usize;
        if hidden == 0 {
            return Err(store_err(12, "hidden size must be positive"));
        }
        if num_layers_total == 0 {
            return Err(store_err(8, "layer count must be positive"));
        }
        let mut name = vec![0u8; name_len];
        read_exact_at(&mut input, &mut name, &mut offset, "model name")?;
        let model_name = String::from_utf8(name).map_err(|_| store_err(26, "model name is not UTF-8"))?;
        Ok(StoreReader {
            input,
            header: StoreHeader {
                num_layers_total,
                hidden,
                sentence_count,
                model_name,
            },
            read: 0,
            offset,
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn next_record(&mut self) -> Result<Option<EmbeddingRecord>> {
        if self.read == self.header.sentence_count {
            let mut probe = [0u8; 1];
            return match self.input.read(&mut probe)? {
                0 => Ok(None),
                _ => Err(store_err(self.offset, "trailing bytes after the last record")),
            };
        }
        let start = self.offset;
        let mut fixed = [0u8; 16];
        read_exact_at(&mut self.input, &mut fixed, &mut self.offset, "record header")?;
        let sentence_id = u64::from_le_bytes(fixed[0..8].try_into().unwrap());
        let num_words = u32::from_le_bytes(fixed[8..12].try_into().unwrap()) as usize;
        let num_subwords = u32::from_le_bytes(fixed[12..16].try_into().unwrap());
        if num_words + 2 > num_subwords as usize {
            return Err(store_err(
                start,
                format!("sentence {sentence_id}: {num_words} words cannot fit in {num_subwords} subwords"),
            ));
        }
        let mut span_bytes = vec![0u8; num_words * 8];
        read_exact_at(&mut self.input, &mut span_bytes, &mut self.offset, "spans")?;
        let spans = span_bytes
            .chunks_exact(8)
            .map(|c| {
                Span::new(
                    u32::from_le_bytes(c[0..4].try_into().unwrap()) as usize,
                    u32::from_le_bytes(c[4..8].try_into().unwrap()) as usize,
                )
            })
            .collect();
        let n_values = self.header.num_layers_total as usize * num_subwords as usize * self.header.hidden as usize;
        let mut raw = vec![0u8; n_values * 4];
        read_exact_at(&mut self.input, &mut raw, &mut self.offset, "tensor")?;
        let tensor = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let record = EmbeddingRecord {
            sentence_id,
            num_subwords,
            spans,
            tensor,
        };
        record
            .validate(&self.header)
            .map_err(|m| store_err(start, format!("sentence {sentence_id}: {m}")))?;
        self.read += 1;
        Ok(Some(record))
    }
}

impl<R: Read> Iterator for StoreReader<R> {
    type Item = Result<EmbeddingRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

fn read_exact_at<R: Read>(input: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    match input.read_exact(buf) {
        Ok(()) => {
            *offset += buf.len() as u64;
            Ok(())
        }
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(store_err(
            *offset,
            format!("truncated while reading {what} ({} bytes expected)", buf.len()),
        )),
        Err(e) => Err(e.into()),
    }
}

pub fn write_store<W: Write>(out: W, header: &StoreHeader, records: &[EmbeddingRecord]) -> Result<W> {
    let mut header = header.clone();
    header.sentence_count = records.len() as u64;
    let mut writer = StoreWriter::new(out, header)?;
    for r in records {
        writer.write_record(r)?;
    }
    writer.finish()
}

pub fn read_store<R: Read>(input: R) -> Result<(StoreHeader, Vec<EmbeddingRecord>)> {
    let mut reader = StoreReader::new(input)?;
    let mut records = Vec::new();
    while let Some(r) = reader.next_record()? {
        records.push(r);
    }
    Ok((reader.header, records))
}

/// A fully loaded store with lookup by sentence id.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    pub header: StoreHeader,
    pub records: Vec<EmbeddingRecord>,
    index: HashMap<u64, usize>,
}

impl EmbeddingStore {
    pub fn new(header: StoreHeader, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.sentence_id, i).is_some() {
                return Err(Error::Invalid(format!("duplicate sentence id {}", r.sentence_id)));
            }
        }
        Ok(EmbeddingStore { header, records, index })
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let (header, records) = read_store(input)?;
        EmbeddingStore::new(header, records)
    }

    pub fn open(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        EmbeddingStore::read(io::BufReader::new(file))
    }

    pub fn get(&self, sentence_id: u64) -> Result<&EmbeddingRecord> {
        self.index
            .get(&sentence_id)
            .map(|&i| &self.records[i])
            .ok_or(Error::MissingSentence(sentence_id))
    }

    pub fn hidden(&self) -> usize {
        self.header.hidden as usize
    }

    pub fn num_layers(&self) -> usize {
        self.header.num_layers_total as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    First,
    Last,
    Max,
    Sum,
}

impl Pooling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pooling::First => "first",
            Pooling::Last => "last",
            Pooling::Max => "max",
            Pooling::Sum => "sum",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Pooling::First),
            "last" => Ok(Pooling::Last),
            "max" => Ok(Pooling::Max),
            "sum" => Ok(Pooling::Sum),
            _ => Err(Error::Invalid(format!("unknown pooling {s:?}"))),
        }
    }
}

/// Reduce the subwords of one word at one layer to a single vector.
pub fn pool_subwords(
    record: &EmbeddingRecord,
    hidden: usize,
    word_index: usize,
    layer_index: usize,
    strategy: Pooling,
) -> Result<Vec<f32>> {
    let span = record.spans.get(word_index).ok_or_else(|| {
        Error::OutOfRange(format!(
            "word {word_index} in sentence {} with {} words",
            record.sentence_id,
            record.spans.len()
        ))
    })?;
    let layers = record.num_layers(hidden);
    if layer_index >= layers {
        return Err(Error::OutOfRange(format!("layer {layer_index} of {layers}")));
    }
    let rows = span.start..span.end;
    Ok(match strategy {
        Pooling::First => record.row(hidden, layer_index, span.start).to_vec(),
        Pooling::Last => record.row(hidden, layer_index, span.end - 1).to_vec(),
        Pooling::Max => {
            let mut acc = vec![f32::NEG_INFINITY; hidden];
            for r in rows {
                for (a, v) in acc.iter_mut().zip(record.row(hidden, layer_index, r)) {
                    *a = a.max(*v);
                }
            }
            acc
        }
        Pooling::Sum => {
            let mut acc = vec![0f32; hidden];
            for r in rows {
                for (a, v) in acc.iter_mut().zip(record.row(hidden, layer_index, r)) {
                    *a += v;
                }
            }
            acc
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Embedding,
    First,
    Middle,
    Highest,
}

impl LayerKind {
    pub const ALL: [LayerKind; 4] = [LayerKind::Embedding, LayerKind::First, LayerKind::Middle, LayerKind::Highest];

    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Embedding => "embedding",
            LayerKind::First => "first",
            LayerKind::Middle => "middle",
            LayerKind::Highest => "highest",
        }
    }
}

impl std::str::FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown layer kind {s:?}")))
    }
}

/// Resolve a named layer. The middle layer is `(n - 1) / 2` rounded half up.
pub fn layer_index_for(kind: LayerKind, num_layers_total: usize) -> Result<usize> {
    if num_layers_total < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 layers (embedding + 1), got {num_layers_total}"
        )));
    }
    Ok(match kind {
        LayerKind::Embedding => 0,
        LayerKind::First => 1,
        LayerKind::Middle => num_layers_total / 2,
        LayerKind::Highest => num_layers_total - 1,
    })
}
