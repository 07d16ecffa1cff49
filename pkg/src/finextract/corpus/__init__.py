"""Dataset model, synthetic generation, BIOES conversion and JSONL I/O."""
from .bioes import bioes_to_spans, simple_token_offsets, spans_to_bioes
from .generator import DENSITY_BINS, CorpusSpec, complexity_bin, generate_corpus
from .jsonl import load_dataset, save_dataset
from .types import Dataset, EntitySpan, EntityType, EventType, Instance, Split

__all__ = [
    "DENSITY_BINS",
    "CorpusSpec",
    "Dataset",
    "EntitySpan",
    "EntityType",
    "EventType",
    "Instance",
    "Split",
    "bioes_to_spans",
    "complexity_bin",
    "generate_corpus",
    "load_dataset",
    "save_dataset",
    "simple_token_offsets",
    "spans_to_bioes",
]
