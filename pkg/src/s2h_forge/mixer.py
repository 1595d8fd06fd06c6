"""Supervision mixtures: record forms, per-kind counts, phases, CoT schedule.

A mixture is built from unique task instances ("bundles"). Each supervision
kind includes a fixed set of record forms per unique instance (text, image,
image-plus-conversion), repeats the simple pool to hit the requested size,
shuffles, then appends hard text records and shuffles again.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .core import (
    CONVERT_PROMPT_TEXT,
    Difficulty,
    Segment,
    SegmentKind,
    SupervisedRecord,
    SupervisionKind,
    TaskKind,
    record_id,
    record_to_json,
    rng_for,
)
from . import analogy, gridgen, tablegen


class MixtureError(ValueError):
    """The mixture plan is infeasible (divisibility, pool size, or kind)."""


@dataclass(frozen=True)
class Bundle:
    """One unique task instance plus everything needed to emit any record form."""

    task: TaskKind
    difficulty: Difficulty
    key: str                      # stable instance key (seed derived)
    instruction: str              # prompt text without the table/grid/panel body
    text_input: str               # lossless text form of the visual input
    cot: str
    answer: str
    metadata: dict[str, str] = field(default_factory=dict)
    render_key: str = ""          # canonical instance payload for render cache/ids


FORM_TEXT = "text"
FORM_IMAGE = "image"
FORM_IMAGE_VIA_TEXT = "image-via-text"

#: Record forms appended per unique instance for each supervision kind.
FORMS_BY_KIND: dict[SupervisionKind, tuple[str, ...]] = {
    SupervisionKind.TEXT: (FORM_TEXT,),
    SupervisionKind.IMAGE: (FORM_IMAGE,),
    SupervisionKind.IMAGE_VIA_TEXT: (FORM_TEXT, FORM_IMAGE, FORM_IMAGE_VIA_TEXT),
    SupervisionKind.TEXT_PLUS_IMAGE: (FORM_TEXT, FORM_IMAGE),
    SupervisionKind.MIX: (FORM_TEXT, FORM_IMAGE, FORM_IMAGE_VIA_TEXT),
    SupervisionKind.IMAGE_VIA_TEXT_PLUS: (FORM_TEXT, FORM_IMAGE, FORM_IMAGE_VIA_TEXT),
    SupervisionKind.MIX_PLUS: (FORM_TEXT, FORM_IMAGE, FORM_IMAGE_VIA_TEXT),
    SupervisionKind.ALIGN: (FORM_TEXT, FORM_IMAGE_VIA_TEXT),
    SupervisionKind.TEXT_WARMUP: (FORM_TEXT,),
}


@dataclass(frozen=True)
class MixtureCounts:
    n_simple: int
    n_hard: int
    n_unique: int
    forms: tuple[str, ...]


def plan_counts(kind: SupervisionKind, n: int) -> MixtureCounts:
    """Closed-form record counts for a supervision kind at total size n."""
    if n <= 0:
        raise MixtureError("mixture size must be positive")
    forms = FORMS_BY_KIND[kind]

    def exact_div(x: int, d: int, what: str) -> int:
        if x % d:
            raise MixtureError(f"{what} must be divisible by {d} (got {x})")
        return x // d

    if kind in (SupervisionKind.TEXT, SupervisionKind.IMAGE):
        return MixtureCounts(n, 0, n, forms)
    if kind in (SupervisionKind.TEXT_PLUS_IMAGE, SupervisionKind.IMAGE_VIA_TEXT, SupervisionKind.MIX):
        return MixtureCounts(n, 0, exact_div(n, 3, "mixture size"), forms)
    if kind in (SupervisionKind.IMAGE_VIA_TEXT_PLUS, SupervisionKind.MIX_PLUS):
        n_simple = exact_div(n, 2, "mixture size")
        return MixtureCounts(n_simple, n - n_simple, exact_div(n_simple, 3, "simple half"), forms)
    if kind is SupervisionKind.ALIGN:
        return MixtureCounts(n, 0, exact_div(n, 2, "mixture size"), forms)
    if kind is SupervisionKind.TEXT_WARMUP:
        n_simple = exact_div(n, 2, "mixture size")
        return MixtureCounts(n_simple, n - n_simple, n_simple, forms)
    raise MixtureError(f"unknown supervision kind {kind}")


def bundle_to_record(
    bundle: Bundle,
    form: str,
    image_path_for: Callable[[Bundle], str] | None = None,
) -> SupervisedRecord:
    """Emit one record form for a bundle."""
    rid = record_id(bundle.task, bundle.difficulty, bundle.key, form)
    if image_path_for is None:
        image_path_for = lambda b: f"images/{b.task.value}-{b.key}.png"
    segments = [Segment(SegmentKind.PROMPT, bundle.instruction, False)]
    if form == FORM_TEXT:
        segments = [
            Segment(SegmentKind.PROMPT, bundle.instruction + "\n" + bundle.text_input, False)
        ]
        modality, image_path = "text", None
    elif form == FORM_IMAGE:
        modality, image_path = "image", image_path_for(bundle)
    elif form == FORM_IMAGE_VIA_TEXT:
        modality, image_path = "image", image_path_for(bundle)
        segments.append(Segment(SegmentKind.CONVERT_PROMPT, CONVERT_PROMPT_TEXT, True))
        segments.append(Segment(SegmentKind.CONVERTED_TEXT, bundle.text_input, True))
    else:
        raise MixtureError(f"unknown record form {form!r}")
    if bundle.cot:
        segments.append(Segment(SegmentKind.COT, bundle.cot, True))
    segments.append(Segment(SegmentKind.ANSWER, bundle.answer, True))
    metadata = dict(bundle.metadata)
    metadata["form"] = form
    return SupervisedRecord(
        id=rid,
        task=bundle.task,
        difficulty=bundle.difficulty,
        modality=modality,
        image_path=image_path,
        segments=tuple(segments),
        metadata=metadata,
    )


# ---------------------------------------------------------------------------
# bundle generation


def generate_bundle(
    task: TaskKind,
    difficulty: Difficulty,
    seed: int,
    heldout: frozenset = analogy.DEFAULT_HELDOUT,
) -> Bundle:
    """Generate one unique instance and package its prompt/CoT/answer."""
    if task is TaskKind.CONSECUTIVE_TABLE_READOUT or task is TaskKind.TABLE_READOUT:
        if task is TaskKind.CONSECUTIVE_TABLE_READOUT:
            inst = tablegen.gen_consecutive_instance(difficulty, seed)
        else:
            inst = tablegen.gen_table_readout_instance(difficulty, seed)
        meta = {
            "seed": str(seed),
            "length": str(len(inst.path)),
            "segments": str(inst.segments),
            "patterns": ",".join(inst.patterns),
            "instance": inst.to_json(),
        }
        return Bundle(
            task=task,
            difficulty=difficulty,
            key=str(seed),
            instruction=tablegen.table_instruction(inst),
            text_input=tablegen.emit_table_text(inst),
            cot=tablegen.emit_table_cot(inst),
            answer=tablegen.emit_table_answer(inst),
            metadata=meta,
            render_key=inst.to_json(),
        )
    if task is TaskKind.GRID_NAVIGATION:
        inst, trace = gridgen.gen_grid_instance(difficulty, seed)
        cot, answer = gridgen.emit_grid_cot(inst, trace)
        meta = {
            "seed": str(seed),
            "dfs_steps": str(trace.dfs_steps),
            "objects": ",".join(name for name, _ in inst.objects),
            "instance": inst.to_json(),
        }
        return Bundle(
            task=task,
            difficulty=difficulty,
            key=str(seed),
            instruction=gridgen.grid_instruction(inst),
            text_input=gridgen.emit_grid_text(inst),
            cot=cot,
            answer=answer,
            metadata=meta,
            render_key=inst.to_json(),
        )
    if task in (TaskKind.VISUAL_ANALOGY, TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY):
        puzzle = analogy.gen_puzzle(task, difficulty, seed, heldout)
        cot, answer = analogy.emit_analogy_cot(puzzle)
        meta = {
            "seed": str(seed),
            "latent_query": f"{puzzle.latent_query[0].value}|{puzzle.latent_query[1].value}",
            "heldout_member": str(puzzle.latent_query in puzzle.heldout).lower(),
            "instance": puzzle.to_json(),
        }
        return Bundle(
            task=task,
            difficulty=difficulty,
            key=str(seed),
            instruction=analogy.analogy_instruction(puzzle),
            text_input=analogy.emit_analogy_text(puzzle, "lossless"),
            cot=cot,
            answer=answer,
            metadata=meta,
            render_key=puzzle.to_json(),
        )
    raise ValueError(f"unknown task {task}")


class GeneratedSource:
    """Deterministic bundle source backed by the task generators."""

    def __init__(self, master_seed: int, heldout: frozenset = analogy.DEFAULT_HELDOUT):
        self.master_seed = master_seed
        self.heldout = heldout

    def bundles(self, task: TaskKind, difficulty: Difficulty, count: int) -> list[Bundle]:
        return [
            generate_bundle(
                task,
                difficulty,
                rng_for(self.master_seed, task.value, difficulty.value, i).integers(0, 2**62),
                self.heldout,
            )
            for i in range(count)
        ]


class ListSource:
    """Bundle source over fixed lists, for tests and replays."""

    def __init__(self, simple: Sequence[Bundle], hard: Sequence[Bundle] = ()):
        self._pools = {Difficulty.SIMPLE: list(simple), Difficulty.HARD: list(hard)}

    def bundles(self, task: TaskKind, difficulty: Difficulty, count: int) -> list[Bundle]:
        pool = [b for b in self._pools[difficulty] if b.task is task]
        if len(pool) < count:
            raise MixtureError(
                f"source has {len(pool)} unique {difficulty.value} bundles, need {count}"
            )
        return pool[:count]


@dataclass(frozen=True)
class MixturePlan:
    supervision: SupervisionKind
    n: int
    seed: int
    tasks: tuple[TaskKind, ...] = (TaskKind.TABLE_READOUT,)
    repeat_hard_factor: int = 1
    hard_difficulty: Difficulty = Difficulty.HARD


def build_mixture(
    plan: MixturePlan,
    source,
    image_path_for: Callable[[Bundle], str] | None = None,
) -> list[SupervisedRecord]:
    """Assemble one supervision mixture of exactly plan.n records."""
    counts = plan_counts(plan.supervision, plan.n)
    n_tasks = len(plan.tasks)
    if counts.n_unique % n_tasks:
        raise MixtureError("unique simple count must divide evenly across tasks")
    if counts.n_hard % (n_tasks * plan.repeat_hard_factor):
        raise MixtureError("hard count must divide evenly across tasks and repeats")
    uniques: list[Bundle] = []
    for task in plan.tasks:
        uniques.extend(source.bundles(task, Difficulty.SIMPLE, counts.n_unique // n_tasks))
    rng = rng_for(plan.seed, plan.supervision.value, "simple-shuffle")
    order = rng.permutation(len(uniques))
    uniques = [uniques[int(i)] for i in order]
    # form-major cycling keeps per-form counts exactly balanced even when the
    # pool is repeated a non-integer number of times
    forms = counts.forms
    records: list[SupervisedRecord] = []
    for i in range(counts.n_simple):
        bundle = uniques[(i // len(forms)) % len(uniques)]
        records.append(bundle_to_record(bundle, forms[i % len(forms)], image_path_for))
    if counts.n_hard:
        per_task_unique = counts.n_hard // (n_tasks * plan.repeat_hard_factor)
        hard_records: list[SupervisedRecord] = []
        for task in plan.tasks:
            for b in source.bundles(task, plan.hard_difficulty, per_task_unique):
                rec = bundle_to_record(b, FORM_TEXT, image_path_for)
                hard_records.extend([rec] * plan.repeat_hard_factor)
        records.extend(hard_records)
    rng2 = rng_for(plan.seed, plan.supervision.value, "final-shuffle")
    order = rng2.permutation(len(records))
    records = [records[int(i)] for i in order]
    assert len(records) == plan.n
    return records


def build_phase_sequence(
    phases: Sequence[MixturePlan],
    source,
    image_path_for: Callable[[Bundle], str] | None = None,
) -> tuple[list[list[SupervisedRecord]], dict]:
    """Build consecutive training phases plus a manifest of counts and digests."""
    datasets = []
    manifest: dict = {"phases": []}
    for idx, plan in enumerate(phases):
        records = build_mixture(plan, source, image_path_for)
        datasets.append(records)
        digest = hashlib.blake2b(
            "\n".join(record_to_json(r) for r in records).encode(), digest_size=16
        ).hexdigest()
        counts = plan_counts(plan.supervision, plan.n)
        manifest["phases"].append(
            {
                "index": idx,
                "supervision": plan.supervision.value,
                "tasks": [t.value for t in plan.tasks],
                "n": plan.n,
                "n_simple": counts.n_simple,
                "n_hard": counts.n_hard,
                "n_unique": counts.n_unique,
                "seed": plan.seed,
                "digest": digest,
            }
        )
    return datasets, manifest


# ---------------------------------------------------------------------------
# chain-of-thought internalization schedule


@dataclass(frozen=True)
class CotSchedule:
    full_frac: float = 0.3
    ramp_frac: float = 0.4
    none_frac: float = 0.3
    ramp_bins: int = 101

    def __post_init__(self):
        total = self.full_frac + self.ramp_frac + self.none_frac
        if abs(total - 1.0) > 1e-9:
            raise MixtureError("schedule fractions must sum to 1")
        if self.ramp_bins < 2:
            raise MixtureError("ramp needs at least 2 bins")


def _truncate_cot(rec: SupervisedRecord, keep_pct: int) -> SupervisedRecord:
    segments = []
    for seg in rec.segments:
        if seg.kind is SegmentKind.COT:
            keep = (len(seg.text) * keep_pct) // 100
            seg = Segment(SegmentKind.COT, seg.text[:keep], True)
        segments.append(seg)
    return replace(rec, segments=tuple(segments))


def _drop_cot(rec: SupervisedRecord) -> SupervisedRecord:
    return replace(
        rec, segments=tuple(s for s in rec.segments if s.kind is not SegmentKind.COT)
    )


def apply_cot_schedule(
    records: Sequence[SupervisedRecord], schedule: CotSchedule = CotSchedule()
) -> list[SupervisedRecord]:
    """Keep full CoT early, ramp the kept character fraction down to zero over
    equal bins in the middle, and drop the CoT entirely at the end."""
    n = len(records)
    n_full = round(n * schedule.full_frac)
    n_none = round(n * schedule.none_frac)
    n_ramp = n - n_full - n_none
    if n_ramp < schedule.ramp_bins:
        raise MixtureError(
            f"ramp segment has {n_ramp} records, needs at least {schedule.ramp_bins}"
        )
    out = list(records[:n_full])
    base, rem = divmod(n_ramp, schedule.ramp_bins)
    pos = n_full
    for b in range(schedule.ramp_bins):
        size = base + (1 if b < rem else 0)
        keep_pct = round(100 * (schedule.ramp_bins - 1 - b) / (schedule.ramp_bins - 1))
        for rec in records[pos:pos + size]:
            out.append(_truncate_cot(rec, keep_pct))
        pos += size
    for rec in records[pos:]:
        out.append(_drop_cot(rec))
    assert len(out) == n
    return out
