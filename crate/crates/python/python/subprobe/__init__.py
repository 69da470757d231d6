"""Subword statistics, probing datasets and layerwise probes."""

from ._native import (
    EmbeddingStore,
    SubprobeError,
    Vocabulary,
    derive_seed,
    generate_probe_dataset,
    layer_index,
    ner_span_f1,
    pos_accuracy,
    scalar_mix,
    tokstats,
    train_probe,
    train_vocabulary,
    write_store,
)

__all__ = [
    "EmbeddingStore",
    "SubprobeError",
    "Vocabulary",
    "derive_seed",
    "generate_probe_dataset",
    "layer_index",
    "ner_span_f1",
    "pos_accuracy",
    "scalar_mix",
    "tokstats",
    "train_probe",
    "train_vocabulary",
    "write_store",
]
