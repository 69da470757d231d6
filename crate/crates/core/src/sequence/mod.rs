//! Sequence labelling: POS and NER corpora, their metrics, per-word
//! taggers trained on pooled embeddings, and layer sweeps.

mod metrics;
mod sweep;
mod tagger;
mod tags;

pub use metrics::{ner_span_f1, pos_accuracy, SpanCounts, SpanF1Report};
pub use sweep::{layer_sweep, resolve_layers, LayerSelector, SweepReport, SweepRow, SweepSpec, SweepTask};
pub use tagger::{
    decode_predictions, score, tagging_examples, train_tagger, TagScheme, TagSplits, TagStores, TaggerReport,
    TaggerRun,
};
pub use tags::{bio_spans, load_ner_tsv, load_pos_conllu, repair_bio2, Bio, TagSequence, TaggedSentence};
