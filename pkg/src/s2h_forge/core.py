"""Core datatypes and plumbing shared by every module.

Defines the task/difficulty/supervision vocabularies, the supervised record
format (segment list with a supervision mask), deterministic seed derivation,
and the canonical JSONL serialization used for all on-disk datasets.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np


class Difficulty(str, Enum):
    SIMPLE = "simple"
    MEDIUM = "medium"
    HARD = "hard"


class TaskKind(str, Enum):
    CONSECUTIVE_TABLE_READOUT = "consecutive-table-readout"
    TABLE_READOUT = "table-readout"
    GRID_NAVIGATION = "grid-navigation"
    VISUAL_ANALOGY = "visual-analogy"
    PATTERN_HELDOUT_VISUAL_ANALOGY = "pattern-heldout-visual-analogy"


class SupervisionKind(str, Enum):
    TEXT = "text"
    IMAGE = "image"
    IMAGE_VIA_TEXT = "image-via-text"
    TEXT_PLUS_IMAGE = "text+image"
    MIX = "mix"
    IMAGE_VIA_TEXT_PLUS = "image-via-text+"
    MIX_PLUS = "mix+"
    ALIGN = "align"
    TEXT_WARMUP = "text-warmup"


class SegmentKind(str, Enum):
    PROMPT = "prompt"
    CONVERT_PROMPT = "convert-prompt"
    CONVERTED_TEXT = "converted-text"
    COT = "cot"
    ANSWER = "answer"


#: Fixed conversion instruction shared by generation and evaluation.
CONVERT_PROMPT_TEXT = "Convert the provided image to text."

#: Segment kinds whose text is part of the training target.
SUPERVISED_KINDS = frozenset(
    {
        SegmentKind.CONVERT_PROMPT,
        SegmentKind.CONVERTED_TEXT,
        SegmentKind.COT,
        SegmentKind.ANSWER,
    }
)

#: Canonical segment ordering inside a record.
SEGMENT_ORDER = (
    SegmentKind.PROMPT,
    SegmentKind.CONVERT_PROMPT,
    SegmentKind.CONVERTED_TEXT,
    SegmentKind.COT,
    SegmentKind.ANSWER,
)


def convert_prompt() -> str:
    """Return the fixed image-to-text conversion instruction."""
    return CONVERT_PROMPT_TEXT


class RecordError(ValueError):
    """A supervised record violates a structural invariant."""


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    text: str
    supervised: bool

    def __post_init__(self):
        expected = self.kind in SUPERVISED_KINDS
        if self.supervised != expected:
            raise RecordError(
                f"segment of kind {self.kind.value} must have supervised={expected}"
            )
        if self.kind is SegmentKind.CONVERT_PROMPT and self.text != CONVERT_PROMPT_TEXT:
            raise RecordError("convert-prompt segment text is fixed")


@dataclass(frozen=True)
class SupervisedRecord:
    id: str
    task: TaskKind
    difficulty: Difficulty
    modality: str  # "text" | "image"
    image_path: str | None
    segments: tuple[Segment, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        validate_record(self)

    def segment(self, kind: SegmentKind) -> Segment | None:
        for seg in self.segments:
            if seg.kind is kind:
                return seg
        return None

    def target_text(self) -> str:
        """Concatenation of all supervised segment texts (the gold output)."""
        return "\n".join(s.text for s in self.segments if s.supervised)


def validate_record(rec: SupervisedRecord) -> None:
    if rec.modality not in ("text", "image"):
        raise RecordError(f"unknown modality {rec.modality!r}")
    if (rec.modality == "image") != (rec.image_path is not None):
        raise RecordError("image_path must be set exactly for image modality")
    if rec.difficulty is Difficulty.MEDIUM and rec.task is not TaskKind.CONSECUTIVE_TABLE_READOUT:
        raise RecordError("medium difficulty exists only for consecutive table readout")
    kinds = [s.kind for s in rec.segments]
    if len(set(kinds)) != len(kinds):
        raise RecordError("duplicate segment kinds")
    order = [SEGMENT_ORDER.index(k) for k in kinds]
    if order != sorted(order):
        raise RecordError("segments out of canonical order")
    if SegmentKind.PROMPT not in kinds or SegmentKind.ANSWER not in kinds:
        raise RecordError("record must contain a prompt and an answer segment")
    if (SegmentKind.CONVERT_PROMPT in kinds) != (SegmentKind.CONVERTED_TEXT in kinds):
        raise RecordError("convert-prompt and converted-text must appear together")
    if SegmentKind.CONVERT_PROMPT in kinds and rec.modality != "image":
        raise RecordError("conversion segments require image modality")
    for key, value in rec.metadata.items():
        if not isinstance(key, str) or not isinstance(value, str):
            raise RecordError("metadata must map strings to strings")


def derive_seed(master: int, task: str, purpose: str, index: int) -> int:
    """Derive a 64-bit child seed, collision-resistant across the key tuple."""
    key = f"{master}\x1f{task}\x1f{purpose}\x1f{index}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(master: int, task: str, purpose: str, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (master, task, purpose, index)."""
    return np.random.Generator(np.random.Philox(key=derive_seed(master, task, purpose, index)))


def record_id(task: TaskKind, difficulty: Difficulty, key: str, form: str) -> str:
    """Stable hex id for a record: hash of task, instance key, and form."""
    payload = f"{task.value}\x1f{difficulty.value}\x1f{key}\x1f{form}".encode()
    return hashlib.blake2b(payload, digest_size=16).hexdigest()


def record_to_json(rec: SupervisedRecord) -> str:
    obj = {
        "id": rec.id,
        "task": rec.task.value,
        "difficulty": rec.difficulty.value,
        "modality": rec.modality,
        "image_path": rec.image_path,
        "segments": [
            {"kind": s.kind.value, "text": s.text, "supervised": s.supervised}
            for s in rec.segments
        ],
        "metadata": {k: rec.metadata[k] for k in sorted(rec.metadata)},
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def record_from_json(line: str) -> SupervisedRecord:
    obj = json.loads(line)
    return SupervisedRecord(
        id=obj["id"],
        task=TaskKind(obj["task"]),
        difficulty=Difficulty(obj["difficulty"]),
        modality=obj["modality"],
        image_path=obj["image_path"],
        segments=tuple(
            Segment(SegmentKind(s["kind"]), s["text"], s["supervised"])
            for s in obj["segments"]
        ),
        metadata=dict(obj["metadata"]),
    )


def write_jsonl(path: str | Path, records: Iterable[SupervisedRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json(rec))
            fh.write("\n")


def read_jsonl(path: str | Path) -> Iterator[SupervisedRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield record_from_json(line)


def canonical_json(obj) -> str:
    """Deterministic JSON used for instance payloads and digests."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
