"""Deterministic toolkit for simple-to-hard visual reasoning experiments:
task generators, supervision mixtures, evaluation, and gradient diagnostics."""

from .core import (
    CONVERT_PROMPT_TEXT,
    Difficulty,
    Segment,
    SegmentKind,
    SupervisedRecord,
    SupervisionKind,
    TaskKind,
    convert_prompt,
    derive_seed,
    read_jsonl,
    write_jsonl,
)

__all__ = [
    "CONVERT_PROMPT_TEXT",
    "Difficulty",
    "Segment",
    "SegmentKind",
    "SupervisedRecord",
    "SupervisionKind",
    "TaskKind",
    "convert_prompt",
    "derive_seed",
    "read_jsonl",
    "write_jsonl",
]

__version__ = "0.1.0"
