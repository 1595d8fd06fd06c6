"""Verdict logic and failure-mode metrics for model generations.

Generations are free text; each task defines parse anchors matching the gold
templates. Table readout is scored on the CoT value trace and the answer list,
grid navigation on the simulated direction list, and analogy on the identified
patterns plus the chosen option.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from statistics import mean

from .analogy import AnalogyPuzzle, Domain, Relation, emit_analogy_cot
from .core import CONVERT_PROMPT_TEXT, TaskKind
from .gridgen import GridInstance, simulate
from .tablegen import TableInstance, WORD_TO_DIGIT


@dataclass(frozen=True)
class Verdict:
    correct: bool
    channel: str
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# table readout

_STEP_RE = re.compile(
    r"Step \d+: row (\d+), column (\d+), row name [A-Z]+, column name [A-Z]+, value ([A-Z]+)\."
)
_VALUE_RE = re.compile(r"value ([A-Z]+)\.")
_ANSWER_LIST_RE = re.compile(r"The numbers are ([A-Z ,]+)\. The sum of the numbers is (-?\d+)\.")


def _cot_values(text: str) -> list[int]:
    return [WORD_TO_DIGIT[w] for w in _VALUE_RE.findall(text) if w in WORD_TO_DIGIT]


def _answer_values(text: str) -> list[int] | None:
    m = _ANSWER_LIST_RE.search(text)
    if not m:
        return None
    words = [w.strip() for w in m.group(1).split(",")]
    if any(w not in WORD_TO_DIGIT for w in words):
        return None
    return [WORD_TO_DIGIT[w] for w in words]


def eval_table(generation: str, gold: TableInstance) -> Verdict:
    gold_values = gold.path_values()
    cot_ok = _cot_values(generation) == gold_values
    ans = _answer_values(generation)
    answer_ok = ans == gold_values
    if gold.task is TaskKind.CONSECUTIVE_TABLE_READOUT:
        correct, channel = cot_ok, "cot"
    else:
        correct = cot_ok or answer_ok
        channel = "cot" if cot_ok else ("answer" if answer_ok else "cot")
    return Verdict(
        correct=correct,
        channel=channel,
        details={"cot_ok": cot_ok, "answer_ok": answer_ok},
    )


def first_error_index(generation: str, gold: TableInstance) -> int:
    """Number of leading CoT values matching the gold path values."""
    values = _cot_values(generation)
    gold_values = gold.path_values()
    i = 0
    while i < len(values) and i < len(gold_values) and values[i] == gold_values[i]:
        i += 1
    return i


def table_failure_metrics(
    pairs: list[tuple[str, TableInstance]], early_threshold: int = 12
) -> dict:
    """Cell-level precision/recall plus first-error statistics over a batch.

    Precision = (correctly listed cells) / (listed cells); recall =
    (correctly listed cells) / (highlighted cells); both are cell counts summed
    over the batch. A listed cell is correct when its (row, column, value)
    triple appears on the gold path (value-only matching is used if no CoT
    steps parse).
    """
    listed_total = correct_total = highlighted_total = 0
    first_errors = []
    early = incorrect = 0
    for generation, gold in pairs:
        gold_triples = Counter(
            (r, c, gold.values[r - 1][c - 1]) for r, c in gold.path
        )
        steps = _STEP_RE.findall(generation)
        if steps:
            listed = Counter(
                (int(r), int(c), WORD_TO_DIGIT[w])
                for r, c, w in steps
                if w in WORD_TO_DIGIT
            )
            correct = sum(min(n, gold_triples[k]) for k, n in listed.items())
        else:
            gold_vals = Counter(v for _, _, v in gold_triples.elements())
            listed = Counter(_answer_values(generation) or [])
            correct = sum(min(n, gold_vals[v]) for v, n in listed.items())
        listed_total += sum(listed.values())
        correct_total += correct
        highlighted_total += len(gold.path)
        fe = first_error_index(generation, gold)
        first_errors.append(fe)
        if not eval_table(generation, gold).correct:
            incorrect += 1
            if fe < early_threshold:
                early += 1
    return {
        "precision": correct_total / listed_total if listed_total else 0.0,
        "recall": correct_total / highlighted_total if highlighted_total else 0.0,
        "listed": listed_total,
        "correctly_listed": correct_total,
        "highlighted": highlighted_total,
        "mean_first_error_index": mean(first_errors) if first_errors else 0.0,
        "frac_early_error": early / incorrect if incorrect else 0.0,
    }


# ---------------------------------------------------------------------------
# grid navigation

_FINAL_RE = re.compile(r"Final answer: ([a-z, ]+)\.")
_SRC_DST_RE = re.compile(r"We start at \((\d+), (\d+)\) and must reach \((\d+), (\d+)\)\.")
_DIRECTIONS = {"right", "down", "left", "up"}


def _parse_actions(generation: str) -> list[str] | None:
    m = _FINAL_RE.search(generation)
    if not m:
        return None
    actions = [a.strip() for a in m.group(1).split(",") if a.strip()]
    if any(a not in _DIRECTIONS for a in actions):
        return None
    return actions


def eval_grid(generation: str, gold: GridInstance) -> Verdict:
    actions = _parse_actions(generation)
    if actions is None:
        return Verdict(False, "answer", {"parse_error": True})
    sim = simulate(gold, actions)
    return Verdict(
        correct=sim.success(gold),
        channel="answer",
        details={
            "parse_error": False,
            "reached_end": sim.reached_end,
            "out_of_bounds": sim.out_of_bounds,
            "obstacles_hit": sim.obstacles_hit,
            "objects_collected": len(sim.collected),
        },
    )


def grid_subtask_metrics(pairs: list[tuple[str, GridInstance]]) -> dict:
    """Partial-credit diagnostics: start/end identification, destination
    reachability, object collection fraction, and obstacles entered."""
    src_dst_ok = 0
    reached = 0
    obj_fracs = []
    obstacles = []
    for generation, gold in pairs:
        m = _SRC_DST_RE.search(generation)
        if m:
            src = (int(m.group(1)), int(m.group(2)))
            dst = (int(m.group(3)), int(m.group(4)))
            if src == gold.start and dst == gold.end:
                src_dst_ok += 1
        actions = _parse_actions(generation) or []
        sim = simulate(gold, actions)
        if sim.reached_end:
            reached += 1
        n_objects = len(gold.objects)
        obj_fracs.append(len(sim.collected) / n_objects if n_objects else 1.0)
        obstacles.append(sim.obstacles_hit)
    n = len(pairs)
    return {
        "src_dst_parse_acc": src_dst_ok / n if n else 0.0,
        "reaches_destination_frac": reached / n if n else 0.0,
        "objects_collected_frac": mean(obj_fracs) if obj_fracs else 0.0,
        "obstacles_passed_mean": mean(obstacles) if obstacles else 0.0,
    }


# ---------------------------------------------------------------------------
# conversion fidelity

_COT_STARTS = ("Step 1:", "We start at", "Example 1:")


def conversion_accuracy(generation: str, gold_text: str) -> bool:
    """Whitespace-normalized exact match of the converted-text span."""
    idx = generation.find(CONVERT_PROMPT_TEXT)
    if idx < 0:
        return False
    span = generation[idx + len(CONVERT_PROMPT_TEXT):]
    cut = len(span)
    for marker in _COT_STARTS:
        pos = span.find(marker)
        if 0 <= pos < cut:
            cut = pos
    span = span[:cut]
    norm = lambda s: " ".join(s.split())
    return norm(span) == norm(gold_text)


# ---------------------------------------------------------------------------
# visual analogy

_PATTERN_RE = re.compile(r"\(([a-z ]+), (XOR|OR|AND|Progression)\)")
_EX_PATTERN_RE = re.compile(
    r"Example (\d) follows the pattern \(([a-z ]+), (XOR|OR|AND|Progression)\)\."
)
_QUERY_PATTERN_RE = re.compile(
    r"The query combined with option (\d) follows the pattern "
    r"\(([a-z ]+), (XOR|OR|AND|Progression)\)\."
)
_OPTION_RE = re.compile(r"The answer is option (\d)\.")


def _to_pair(domain: str, relation: str) -> tuple[Domain, Relation] | None:
    try:
        return Domain(domain), Relation(relation)
    except ValueError:
        return None


def eval_analogy(generation: str, gold: AnalogyPuzzle) -> Verdict:
    m = _OPTION_RE.search(generation)
    option = int(m.group(1)) - 1 if m else None
    lenient = option == gold.answer_index
    ex_patterns: dict[int, tuple[Domain, Relation] | None] = {}
    for num, dom, rel in _EX_PATTERN_RE.findall(generation):
        ex_patterns[int(num)] = _to_pair(dom, rel)
    qm = _QUERY_PATTERN_RE.search(generation)
    q_pattern = _to_pair(qm.group(2), qm.group(3)) if qm else None
    strict = (
        lenient
        and ex_patterns.get(1) == gold.latent1
        and ex_patterns.get(2) == gold.latent2
        and q_pattern == gold.latent_query
    )
    return Verdict(
        correct=strict,
        channel="strict",
        details={
            "lenient": lenient,
            "option": option,
            "example_patterns_ok": ex_patterns.get(1) == gold.latent1
            and ex_patterns.get(2) == gold.latent2,
            "query_pattern_ok": q_pattern == gold.latent_query,
        },
    )


@dataclass(frozen=True)
class AnalogyCotAudit:
    """Per-section error flags; True means the generation got that part wrong."""

    example_type_values: bool
    example_color_values: bool
    example_size_values: bool
    example_quantity_values: bool
    example_position_values: bool
    example_pattern: bool
    example_relation: bool
    domains_distinct: bool
    query_type_values: bool
    query_color_values: bool
    query_size_values: bool
    query_quantity_values: bool
    query_position_values: bool
    option_domain: bool
    option_values: bool
    option_relation: bool
    option_solution: bool
    cot_match: bool
    exact_match: bool


_AUDIT_DOMAIN_GROUPS = {
    "type": (Domain.SHAPE_TYPE, Domain.LINE_TYPE),
    "color": (Domain.SHAPE_COLOR, Domain.LINE_COLOR),
    "size": (Domain.SHAPE_SIZE,),
    "quantity": (Domain.SHAPE_QUANTITY,),
    "position": (Domain.SHAPE_POSITION,),
}


def _section_lines(text: str, header: str, next_headers: tuple[str, ...]) -> list[str]:
    lines = text.splitlines()
    try:
        start = lines.index(header)
    except ValueError:
        return []
    out = []
    for line in lines[start + 1:]:
        if line in next_headers or any(line.startswith(h) for h in next_headers):
            break
        out.append(line)
    return out


def _domain_lines(section: list[str]) -> dict[str, str]:
    out = {}
    for line in section:
        for domain in Domain:
            prefix = domain.value + ":"
            if line.startswith(prefix):
                out[domain.value] = line
                break
    return out


_SECTION_HEADERS = (
    "Example 1:", "Example 2:", "Query:",
    "Option 1:", "Option 2:", "Option 3:", "Option 4:",
    "The examples vary", "The target relation",
    "Combined with the query",
)


def _cot_structure(text: str) -> dict:
    sections = {}
    for header in ("Example 1:", "Example 2:", "Query:", "Option 1:", "Option 2:", "Option 3:", "Option 4:"):
        sections[header] = _domain_lines(_section_lines(text, header, _SECTION_HEADERS))
    return sections


def analogy_cot_audit(generation: str, gold: AnalogyPuzzle) -> AnalogyCotAudit:
    gold_cot, gold_answer = emit_analogy_cot(gold)
    gen_struct = _cot_structure(generation)
    gold_struct = _cot_structure(gold_cot)

    def group_error(headers: tuple[str, ...], group: str) -> bool:
        for header in headers:
            for domain in _AUDIT_DOMAIN_GROUPS[group]:
                gold_line = gold_struct[header].get(domain.value)
                gen_line = gen_struct[header].get(domain.value)
                if gold_line is None:
                    continue
                # example lines carry a verdict suffix; compare the value part
                gold_vals = gold_line.split(" -> ")[0]
                gen_vals = (gen_line or "").split(" -> ")[0]
                if gold_vals != gen_vals:
                    return True
        return False

    ex_headers = ("Example 1:", "Example 2:")
    verdict = eval_analogy(generation, gold)
    ex_patterns = {int(n): _to_pair(d, r) for n, d, r in _EX_PATTERN_RE.findall(generation)}
    gold_pairs = {1: gold.latent1, 2: gold.latent2}
    pattern_err = any(ex_patterns.get(i) != gold_pairs[i] for i in (1, 2))
    relation_err = any(
        (ex_patterns.get(i) or (None, None))[1] != gold_pairs[i][1] for i in (1, 2)
    )
    gen_d = {i: (ex_patterns.get(i) or (None, None))[0] for i in (1, 2)}
    gold_distinct = gold.latent1[0] is not gold.latent2[0]
    if None in gen_d.values():
        distinct_err = True
    else:
        distinct_err = (gen_d[1] != gen_d[2]) != gold_distinct
    qm = _QUERY_PATTERN_RE.search(generation)
    opt_pair = _to_pair(qm.group(2), qm.group(3)) if qm else None
    option_headers = tuple(f"Option {i}:" for i in range(1, 5))
    option_values_err = any(
        group_error((h,), g) for h in option_headers for g in _AUDIT_DOMAIN_GROUPS
    )
    m = _OPTION_RE.search(generation)
    option = int(m.group(1)) - 1 if m else None
    norm = lambda s: " ".join(s.split())
    cot_err = norm(_strip_answer(generation, gold_answer)) != norm(gold_cot)
    return AnalogyCotAudit(
        example_type_values=group_error(ex_headers, "type"),
        example_color_values=group_error(ex_headers, "color"),
        example_size_values=group_error(ex_headers, "size"),
        example_quantity_values=group_error(ex_headers, "quantity"),
        example_position_values=group_error(ex_headers, "position"),
        example_pattern=pattern_err,
        example_relation=relation_err,
        domains_distinct=distinct_err,
        query_type_values=group_error(("Query:",), "type"),
        query_color_values=group_error(("Query:",), "color"),
        query_size_values=group_error(("Query:",), "size"),
        query_quantity_values=group_error(("Query:",), "quantity"),
        query_position_values=group_error(("Query:",), "position"),
        option_domain=(opt_pair or (None, None))[0] is not gold.latent_query[0],
        option_values=option_values_err,
        option_relation=(opt_pair or (None, None))[1] is not gold.latent_query[1],
        option_solution=option != gold.answer_index,
        cot_match=cot_err,
        exact_match=not verdict.correct,
    )


def _strip_answer(generation: str, gold_answer: str) -> str:
    # the answer sentence restates "Example 1 follows the pattern ..."; the CoT
    # contains the same phrase earlier, so cut at the last occurrence only
    idx = generation.rfind("Example 1 follows the pattern")
    if idx > 0:
        return generation[:idx]
    return generation
