"""Visual analogy puzzles over panels of shapes and lines.

Each puzzle has two example panel triples, a two-panel query, and four
options. Exactly one latent (domain, relation) pattern explains each example
triple and the query completed with the correct option; the three confounders
each complete the query under a unique pattern whose relation differs from
the query relation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Sequence

from .core import Difficulty, TaskKind, rng_for


class Domain(str, Enum):
    LINE_TYPE = "line type"
    LINE_COLOR = "line color"
    SHAPE_TYPE = "shape type"
    SHAPE_COLOR = "shape color"
    SHAPE_SIZE = "shape size"
    SHAPE_QUANTITY = "shape quantity"
    SHAPE_POSITION = "shape position"


class Relation(str, Enum):
    XOR = "XOR"
    OR = "OR"
    AND = "AND"
    PROGRESSION = "Progression"


LINE_TYPES = (
    "falling diagonal line",
    "rising diagonal line",
    "horizontal line",
    "vertical line",
    "diamond lines",
    "circular line",
    "V-shape facing up",
    "V-shape facing left",
    "V-shape facing down",
    "V-shape facing right",
)
LINE_COLORS = (0, 90, 135, 189)
SHAPE_TYPES = ("circle", "rectangle", "triangle", "pentagon", "hexagon")
SHAPE_COLORS = (0, 90, 135, 189, 255)
SHAPE_SIZES = (20, 27, 34, 41)
QUANTITIES = tuple(range(10))
POSITIONS = tuple((r, c) for r in range(3) for c in range(3))

DOMAIN_VALUES: dict[Domain, tuple] = {
    Domain.LINE_TYPE: LINE_TYPES,
    Domain.LINE_COLOR: LINE_COLORS,
    Domain.SHAPE_TYPE: SHAPE_TYPES,
    Domain.SHAPE_COLOR: SHAPE_COLORS,
    Domain.SHAPE_SIZE: SHAPE_SIZES,
    Domain.SHAPE_QUANTITY: QUANTITIES,
    Domain.SHAPE_POSITION: POSITIONS,
}

#: Domains with a canonical order, eligible for Progression.
ORDERED_DOMAINS = frozenset(
    {
        Domain.LINE_COLOR,
        Domain.SHAPE_COLOR,
        Domain.SHAPE_SIZE,
        Domain.SHAPE_QUANTITY,
        Domain.SHAPE_POSITION,
    }
)

LINE_DOMAINS = frozenset({Domain.LINE_TYPE, Domain.LINE_COLOR})

#: All (domain, relation) pairs a puzzle may realize.
VALID_PAIRS = tuple(
    (d, r)
    for d in Domain
    for r in Relation
    if r is not Relation.PROGRESSION or d in ORDERED_DOMAINS
)

#: Default held-out pattern set.
DEFAULT_HELDOUT = frozenset(
    {
        (Domain.LINE_TYPE, Relation.XOR),
        (Domain.LINE_COLOR, Relation.OR),
        (Domain.SHAPE_TYPE, Relation.AND),
        (Domain.SHAPE_SIZE, Relation.XOR),
        (Domain.SHAPE_COLOR, Relation.PROGRESSION),
        (Domain.SHAPE_POSITION, Relation.OR),
        (Domain.LINE_TYPE, Relation.AND),
        (Domain.LINE_COLOR, Relation.PROGRESSION),
    }
)

SHAPE_TYPE_ABBREV = {
    "circle": "CIR",
    "rectangle": "RECT",
    "triangle": "TRI",
    "pentagon": "PENT",
    "hexagon": "HEX",
}
LINE_TYPE_ABBREV = {
    "falling diagonal line": "FDIAG",
    "rising diagonal line": "RDIAG",
    "horizontal line": "HORIZ",
    "vertical line": "VERT",
    "diamond lines": "DIAM",
    "circular line": "CIRC",
    "V-shape facing up": "VSU",
    "V-shape facing left": "VSL",
    "V-shape facing down": "VSD",
    "V-shape facing right": "VSR",
}
POSITION_CODES = ("TL", "TC", "TR", "ML", "MC", "MR", "BL", "BC", "BR")
POSITION_NAMES = (
    "top-left", "top-center", "top-right",
    "middle-left", "middle-center", "middle-right",
    "bottom-left", "bottom-center", "bottom-right",
)


def position_index(pos: tuple[int, int]) -> int:
    return pos[0] * 3 + pos[1]


class RelationError(ValueError):
    """The relation is undefined for the given operands."""


class AnalogyError(ValueError):
    """Puzzle generation failed."""


@dataclass(frozen=True)
class Shape:
    type: str
    color: int
    size: int
    position: tuple[int, int]


@dataclass(frozen=True)
class Line:
    type: str
    color: int


@dataclass(frozen=True)
class Panel:
    shapes: tuple[Shape, ...]
    lines: tuple[Line, ...]

    def __post_init__(self):
        positions = [s.position for s in self.shapes]
        if len(set(positions)) != len(positions):
            raise AnalogyError("shape positions must be distinct within a panel")
        if self.shapes:
            counts: dict[str, int] = {}
            for s in self.shapes:
                counts[s.type] = counts.get(s.type, 0) + 1
            quantity = frozenset(counts.values())
        else:
            quantity = frozenset({0})
        # value sets are computed eagerly once; dataclass eq/hash ignore this
        object.__setattr__(
            self,
            "_value_sets",
            {
                Domain.SHAPE_TYPE: frozenset(s.type for s in self.shapes),
                Domain.SHAPE_COLOR: frozenset(s.color for s in self.shapes),
                Domain.SHAPE_SIZE: frozenset(s.size for s in self.shapes),
                Domain.SHAPE_POSITION: frozenset(s.position for s in self.shapes),
                Domain.SHAPE_QUANTITY: quantity,
                Domain.LINE_TYPE: frozenset(l.type for l in self.lines),
                Domain.LINE_COLOR: frozenset(l.color for l in self.lines),
            },
        )

    def value_set(self, domain: Domain) -> frozenset:
        return self._value_sets[domain]


def relation_apply(relation: Relation, domain: Domain, a: FrozenSet, b: FrozenSet) -> frozenset:
    """Value set of the third panel given the first two along ``domain``."""
    if not a or not b:
        raise RelationError("operands must be nonempty")
    if relation is Relation.OR:
        return frozenset(a | b)
    if relation is Relation.AND:
        out = frozenset(a & b)
        if not out:
            raise RelationError("AND of disjoint sets is empty")
        return out
    if relation is Relation.XOR:
        out = frozenset(a ^ b)
        if not out:
            raise RelationError("XOR of equal sets is empty")
        return out
    if domain not in ORDERED_DOMAINS:
        raise RelationError(f"Progression is undefined on {domain.value}")
    if len(a) != 1 or len(b) != 1:
        raise RelationError("Progression requires singleton value sets")
    order = DOMAIN_VALUES[domain]
    (x,), (y,) = a, b
    try:
        i, j = order.index(x), order.index(y)
    except ValueError as exc:
        raise RelationError(f"value outside the {domain.value} domain") from exc
    k = j + (j - i)
    if not 0 <= k < len(order):
        raise RelationError("Progression steps outside the domain")
    return frozenset({order[k]})


def pattern_holds(relation: Relation, domain: Domain, p1: Panel, p2: Panel, p3: Panel) -> bool:
    try:
        expected = relation_apply(relation, domain, p1.value_set(domain), p2.value_set(domain))
    except RelationError:
        return False
    return p3.value_set(domain) == expected


def patterns_of(p1: Panel, p2: Panel, p3: Panel) -> frozenset[tuple[Domain, Relation]]:
    """Brute-force scan of all candidate (domain, relation) pairs."""
    return frozenset((d, r) for d, r in VALID_PAIRS if pattern_holds(r, d, p1, p2, p3))


def _scan_up_to(p1: Panel, p2: Panel, p3: Panel, limit: int = 2) -> list[tuple[Domain, Relation]]:
    """Like patterns_of but stops after `limit` hits (generation fast path)."""
    hits: list[tuple[Domain, Relation]] = []
    for d, r in VALID_PAIRS:
        if pattern_holds(r, d, p1, p2, p3):
            hits.append((d, r))
            if len(hits) >= limit:
                break
    return hits


# ---------------------------------------------------------------------------
# panel synthesis


def _sample_distinct(rng, values: Sequence, n: int) -> list:
    idx = rng.choice(len(values), size=n, replace=False)
    return [values[int(i)] for i in idx]


def _pick(rng, values: Sequence):
    return values[int(rng.integers(0, len(values)))]


def make_panel(rng, domain: Domain | None = None, values: FrozenSet | None = None) -> Panel:
    """Random panel whose value set along ``domain`` equals ``values`` exactly.

    At most one domain is constrained; everything else is sampled (0-4 shapes,
    0-2 lines by default).
    """
    constraint = frozenset(values) if values is not None else None
    # shape multiset
    if domain is Domain.SHAPE_QUANTITY:
        if constraint == frozenset({0}):
            counts = []
        else:
            if 0 in constraint or sum(constraint) > 9 or len(constraint) > len(SHAPE_TYPES):
                raise AnalogyError(f"quantity set {set(constraint)} is not representable")
            counts = sorted(constraint)
        types = _sample_distinct(rng, SHAPE_TYPES, len(counts))
        type_list = [t for t, n in zip(types, counts) for _ in range(n)]
    elif domain is Domain.SHAPE_TYPE:
        types = sorted(constraint, key=SHAPE_TYPES.index)
        if not types or len(types) > 9:
            raise AnalogyError("type set is not representable")
        type_list = list(types)
        budget = 9 - len(type_list)
        extra = int(rng.integers(0, min(budget, 3) + 1)) if budget else 0
        type_list += [types[int(i)] for i in rng.integers(0, len(types), size=extra)]
    elif domain is Domain.SHAPE_POSITION:
        if not constraint or len(constraint) > 9:
            raise AnalogyError("position set is not representable")
        n_total = len(constraint)
        type_list = [_pick(rng, SHAPE_TYPES) for _ in range(n_total)]
    elif domain in (Domain.SHAPE_COLOR, Domain.SHAPE_SIZE):
        if not constraint or len(constraint) > 9:
            raise AnalogyError("attribute set is not representable")
        n_total = int(rng.integers(len(constraint), min(9, len(constraint) + 2) + 1))
        type_list = [_pick(rng, SHAPE_TYPES) for _ in range(n_total)]
    else:
        n_total = int(rng.integers(0, 5))
        type_list = [_pick(rng, SHAPE_TYPES) for _ in range(n_total)]
    n_total = len(type_list)

    if domain is Domain.SHAPE_POSITION:
        positions = sorted(constraint, key=position_index)
    else:
        positions = _sample_distinct(rng, POSITIONS, n_total)

    def covering(domain_values, target):
        if target is None:
            return [_pick(rng, domain_values) for _ in range(n_total)]
        pool = sorted(target)
        if n_total < len(pool):
            raise AnalogyError("not enough shapes to cover the attribute set")
        out = pool + [pool[int(i)] for i in rng.integers(0, len(pool), size=n_total - len(pool))]
        rng.shuffle(out)
        return out

    colors = covering(SHAPE_COLORS, constraint if domain is Domain.SHAPE_COLOR else None)
    sizes = covering(SHAPE_SIZES, constraint if domain is Domain.SHAPE_SIZE else None)
    shapes = tuple(
        Shape(t, col, sz, pos)
        for t, col, sz, pos in zip(type_list, colors, sizes, positions)
    )

    # lines
    if domain is Domain.LINE_TYPE:
        ltypes = sorted(constraint, key=LINE_TYPES.index)
        if not ltypes:
            raise AnalogyError("line type set must be nonempty")
        lcolors = [_pick(rng, LINE_COLORS) for _ in ltypes]
    elif domain is Domain.LINE_COLOR:
        if not constraint:
            raise AnalogyError("line color set must be nonempty")
        pool = sorted(constraint)
        n_lines = len(pool)
        ltypes = _sample_distinct(rng, LINE_TYPES, n_lines)
        lcolors = list(pool)
        rng.shuffle(lcolors)
    else:
        n_lines = int(rng.integers(0, 3))
        ltypes = _sample_distinct(rng, LINE_TYPES, n_lines)
        lcolors = [_pick(rng, LINE_COLORS) for _ in range(n_lines)]
    lines = tuple(
        Line(t, c) for t, c in sorted(zip(ltypes, lcolors), key=lambda tc: LINE_TYPES.index(tc[0]))
    )
    shapes = tuple(sorted(shapes, key=lambda s: position_index(s.position)))
    return Panel(shapes=shapes, lines=lines)


# ---------------------------------------------------------------------------
# operand sampling


def _sample_operands(rng, domain: Domain, relation: Relation) -> tuple[frozenset, frozenset, frozenset]:
    """Operand value sets (a, b) and result c with same-domain uniqueness built
    in: set relations use overlapping unequal sets; Progression uses a nonzero
    step."""
    order = DOMAIN_VALUES[domain]
    for _ in range(200):
        if relation is Relation.PROGRESSION:
            step = _pick(rng, (-2, -1, 1, 2))
            lo = max(0, -2 * step)
            hi = len(order) - 1 - max(0, 2 * step)
            if hi < lo:
                continue
            i = int(rng.integers(lo, hi + 1))
            a = frozenset({order[i]})
            b = frozenset({order[i + step]})
        else:
            if domain is Domain.SHAPE_QUANTITY:
                pool = tuple(range(1, 5))
            else:
                pool = order
            max_size = min(3, len(pool) - 1, 4)
            size_a = int(rng.integers(1, max_size + 1))
            size_b = int(rng.integers(1, max_size + 1))
            union_hint = _sample_distinct(rng, pool, min(len(pool), size_a + size_b))
            a = frozenset(union_hint[:size_a])
            rest = union_hint[size_a:]
            shared = {_pick(rng, sorted(a))}
            b = frozenset(rest[: size_b - 1]) | shared
            if a == b or not (a & b):
                continue
        try:
            c = relation_apply(relation, domain, a, b)
        except RelationError:
            continue
        if domain is Domain.SHAPE_QUANTITY:
            for s in (a, b, c):
                if s != frozenset({0}) and (0 in s or sum(s) > 9 or len(s) > len(SHAPE_TYPES)):
                    break
            else:
                return a, b, c
            continue
        if len(c) > 9:
            continue
        if domain in LINE_DOMAINS and len(c) > 4:
            continue
        return a, b, c
    raise AnalogyError(f"could not sample operands for ({domain.value}, {relation.value})")


def _make_unique_triple(
    rng, domain: Domain, relation: Relation, max_rounds: int = 60
) -> tuple[Panel, Panel, Panel]:
    """Panels (p1, p2, p3) whose only consistent pattern is (domain, relation)."""
    target = frozenset({(domain, relation)})
    for _ in range(max_rounds):
        a, b, c = _sample_operands(rng, domain, relation)
        p1 = make_panel(rng, domain, a)
        p2 = make_panel(rng, domain, b)
        for _ in range(12):
            p3 = make_panel(rng, domain, c)
            if _scan_up_to(p1, p2, p3) == [(domain, relation)]:
                return p1, p2, p3
    raise AnalogyError(f"could not build a unique triple for ({domain.value}, {relation.value})")


# ---------------------------------------------------------------------------
# puzzles


@dataclass(frozen=True)
class AnalogyPuzzle:
    task: TaskKind
    difficulty: Difficulty
    example1: tuple[Panel, Panel, Panel]
    example2: tuple[Panel, Panel, Panel]
    query: tuple[Panel, Panel]
    options: tuple[Panel, Panel, Panel, Panel]
    answer_index: int  # 0-based
    latent1: tuple[Domain, Relation]
    latent2: tuple[Domain, Relation]
    latent_query: tuple[Domain, Relation]
    heldout: frozenset[tuple[Domain, Relation]]

    def option_pattern(self, i: int) -> tuple[Domain, Relation]:
        scan = patterns_of(self.query[0], self.query[1], self.options[i])
        if len(scan) != 1:
            raise AnalogyError(f"option {i} is not uniquely consistent")
        return next(iter(scan))

    def to_json(self) -> str:
        def panel(p: Panel):
            return {
                "shapes": [[s.type, s.color, s.size, list(s.position)] for s in p.shapes],
                "lines": [[l.type, l.color] for l in p.lines],
            }

        return json.dumps(
            {
                "task": self.task.value,
                "difficulty": self.difficulty.value,
                "example1": [panel(p) for p in self.example1],
                "example2": [panel(p) for p in self.example2],
                "query": [panel(p) for p in self.query],
                "options": [panel(p) for p in self.options],
                "answer_index": self.answer_index,
                "latent1": [self.latent1[0].value, self.latent1[1].value],
                "latent2": [self.latent2[0].value, self.latent2[1].value],
                "latent_query": [self.latent_query[0].value, self.latent_query[1].value],
                "heldout": sorted([d.value, r.value] for d, r in self.heldout),
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(text: str) -> "AnalogyPuzzle":
        obj = json.loads(text)

        def panel(p) -> Panel:
            return Panel(
                shapes=tuple(Shape(t, c, s, tuple(pos)) for t, c, s, pos in p["shapes"]),
                lines=tuple(Line(t, c) for t, c in p["lines"]),
            )

        pair = lambda dr: (Domain(dr[0]), Relation(dr[1]))
        return AnalogyPuzzle(
            task=TaskKind(obj["task"]),
            difficulty=Difficulty(obj["difficulty"]),
            example1=tuple(panel(p) for p in obj["example1"]),
            example2=tuple(panel(p) for p in obj["example2"]),
            query=tuple(panel(p) for p in obj["query"]),
            options=tuple(panel(p) for p in obj["options"]),
            answer_index=obj["answer_index"],
            latent1=pair(obj["latent1"]),
            latent2=pair(obj["latent2"]),
            latent_query=pair(obj["latent_query"]),
            heldout=frozenset(pair(dr) for dr in obj["heldout"]),
        )


def sample_latent(
    task: TaskKind,
    difficulty: Difficulty,
    heldout: frozenset[tuple[Domain, Relation]],
    rng,
) -> tuple[tuple[Domain, Relation], tuple[Domain, Relation], tuple[Domain, Relation]]:
    """Latent (domain, relation) pairs for the two examples and the query."""
    valid_held = sorted(set(VALID_PAIRS) & heldout)
    valid_free = sorted(set(VALID_PAIRS) - heldout)
    if task is TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY:
        pool = valid_held if difficulty is Difficulty.HARD else valid_free
        if not pool:
            raise AnalogyError("held-out set leaves no usable pattern")
        pair = pool[int(rng.integers(0, len(pool)))]
        return pair, pair, pair
    if difficulty is Difficulty.SIMPLE:
        if not valid_free:
            raise AnalogyError("held-out set leaves no usable pattern")
        pair = valid_free[int(rng.integers(0, len(valid_free)))]
        return pair, pair, pair
    # standard hard: shared relation, distinct example domains, all pairs held out
    by_rel: dict[Relation, list[Domain]] = {}
    for d, r in valid_held:
        by_rel.setdefault(r, []).append(d)
    usable = sorted((r for r, ds in by_rel.items() if len(ds) >= 2), key=lambda r: r.value)
    if not usable:
        raise AnalogyError("held-out set admits no hard configuration")
    rel = usable[int(rng.integers(0, len(usable)))]
    domains = sorted(by_rel[rel], key=lambda d: d.value)
    if len(domains) >= 3:
        picked = _sample_distinct(rng, domains, 3)
        d1, d2, dq = picked
    else:
        d1, d2 = _sample_distinct(rng, domains, 2)
        dq = (d1, d2)[int(rng.integers(0, 2))]
    return (d1, rel), (d2, rel), (dq, rel)


def gen_puzzle(
    task: TaskKind,
    difficulty: Difficulty,
    seed: int,
    heldout: frozenset[tuple[Domain, Relation]] = DEFAULT_HELDOUT,
) -> AnalogyPuzzle:
    if task not in (TaskKind.VISUAL_ANALOGY, TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY):
        raise ValueError(f"not an analogy task: {task}")
    if difficulty is Difficulty.MEDIUM:
        raise ValueError("analogy tasks have no medium difficulty")
    rng = rng_for(seed, task.value, difficulty.value)
    for _ in range(40):
        latent1, latent2, latent_q = sample_latent(task, difficulty, heldout, rng)
        try:
            example1 = _make_unique_triple(rng, *latent1)
            example2 = _make_unique_triple(rng, *latent2)
            q1, q2, correct = _make_unique_triple(rng, *latent_q)
        except AnalogyError:
            continue
        d_q, r_q = latent_q
        confounders: list[Panel] = []
        used = {correct}
        ok = True
        for _ in range(3):
            conf = _make_confounder(rng, q1, q2, r_q, used)
            if conf is None:
                ok = False
                break
            confounders.append(conf)
            used.add(conf)
        if not ok:
            continue
        answer_index = int(rng.integers(0, 4))
        options = list(confounders)
        options.insert(answer_index, correct)
        puzzle = AnalogyPuzzle(
            task=task,
            difficulty=difficulty,
            example1=example1,
            example2=example2,
            query=(q1, q2),
            options=tuple(options),
            answer_index=answer_index,
            latent1=latent1,
            latent2=latent2,
            latent_query=latent_q,
            heldout=heldout,
        )
        if verify_puzzle(puzzle).passed:
            return puzzle
    raise AnalogyError("could not generate a valid puzzle")


def _make_confounder(rng, q1: Panel, q2: Panel, r_query: Relation, used: set[Panel]) -> Panel | None:
    """Panel uniquely consistent with the query under a relation != r_query."""
    pairs = [(d, r) for d, r in VALID_PAIRS if r is not r_query]
    for _ in range(80):
        d, r = pairs[int(rng.integers(0, len(pairs)))]
        try:
            c = relation_apply(r, d, q1.value_set(d), q2.value_set(d))
        except RelationError:
            continue
        if d is Domain.SHAPE_QUANTITY and c != frozenset({0}):
            if 0 in c or sum(c) > 9 or len(c) > len(SHAPE_TYPES):
                continue
        if len(c) > 9 or (d in LINE_DOMAINS and len(c) > 4):
            continue
        try:
            panel = make_panel(rng, d, c)
        except AnalogyError:
            continue
        if panel in used:
            continue
        scan = _scan_up_to(q1, q2, panel)
        if len(scan) == 1 and scan[0][1] is not r_query:
            return panel
    return None


@dataclass(frozen=True)
class VerifyReport:
    example1_unique: bool
    example2_unique: bool
    query_unique: bool
    confounders_ok: tuple[bool, bool, bool]
    domains_distinct: bool
    heldout_membership: bool

    @property
    def passed(self) -> bool:
        return (
            self.example1_unique
            and self.example2_unique
            and self.query_unique
            and all(self.confounders_ok)
            and self.domains_distinct
            and self.heldout_membership
        )


def verify_puzzle(p: AnalogyPuzzle) -> VerifyReport:
    """Exhaustive brute-force check of every structural clause."""
    ex1 = patterns_of(*p.example1) == frozenset({p.latent1})
    ex2 = patterns_of(*p.example2) == frozenset({p.latent2})
    correct = p.options[p.answer_index]
    query = patterns_of(p.query[0], p.query[1], correct) == frozenset({p.latent_query})
    conf_flags = []
    for i, opt in enumerate(p.options):
        if i == p.answer_index:
            continue
        scan = patterns_of(p.query[0], p.query[1], opt)
        conf_flags.append(len(scan) == 1 and next(iter(scan))[1] is not p.latent_query[1])
    if p.task is TaskKind.VISUAL_ANALOGY and p.difficulty is Difficulty.HARD:
        distinct = p.latent1[0] is not p.latent2[0]
        membership = {p.latent1, p.latent2, p.latent_query} <= p.heldout
    elif p.difficulty is Difficulty.HARD:  # pattern-heldout variant
        distinct = p.latent1 == p.latent2 == p.latent_query
        membership = p.latent_query in p.heldout
    else:
        distinct = p.latent1 == p.latent2 == p.latent_query
        membership = p.latent_query not in p.heldout
    return VerifyReport(
        example1_unique=ex1,
        example2_unique=ex2,
        query_unique=query,
        confounders_ok=tuple(conf_flags),
        domains_distinct=distinct,
        heldout_membership=membership,
    )


# ---------------------------------------------------------------------------
# text emission


def _fmt_value(domain: Domain, v) -> str:
    if domain is Domain.SHAPE_POSITION:
        return POSITION_NAMES[position_index(v)]
    return str(v)


def _fmt_set(domain: Domain, values: frozenset) -> str:
    if not values:
        return "none"
    order = DOMAIN_VALUES[domain]
    # values outside the canonical domain order sort after canonical ones
    key = lambda v: (0, order.index(v), 0) if v in order else (1, 0, v)
    ordered = sorted(values, key=key)
    return ",".join(_fmt_value(domain, v) for v in ordered)


def panel_text(panel: Panel, mode: str) -> str:
    """Single-panel text: 'lossless' per-object codes or 'lossy' value lists."""
    if mode == "lossless":
        codes = [
            f"{SHAPE_TYPE_ABBREV[s.type]}-{s.color}-{s.size}-{POSITION_CODES[position_index(s.position)]}"
            for s in panel.shapes
        ]
        codes += [f"LINE-{LINE_TYPE_ABBREV[l.type]}-{l.color}" for l in panel.lines]
        return ";".join(codes) if codes else "EMPTY"
    if mode == "lossy":
        lines = []
        for label, domain in (
            ("type", Domain.SHAPE_TYPE),
            ("color", Domain.SHAPE_COLOR),
            ("size", Domain.SHAPE_SIZE),
            ("quantity", Domain.SHAPE_QUANTITY),
            ("position", Domain.SHAPE_POSITION),
            ("line type", Domain.LINE_TYPE),
            ("line color", Domain.LINE_COLOR),
        ):
            if domain is Domain.SHAPE_QUANTITY:
                vals = panel.value_set(domain)
                text = ",".join(str(v) for v in sorted(vals))
            else:
                text = _fmt_set(domain, panel.value_set(domain))
            lines.append(f"{label}: {text}")
        return "\n".join(lines)
    raise ValueError(f"unknown panel text mode {mode!r}")


LOSSLESS_LEGEND = (
    "Each panel is a semicolon-separated list of objects. Shapes are coded "
    "TYPE-COLOR-SIZE-POSITION with types CIR, RECT, TRI, PENT, HEX and "
    "positions TL, TC, TR, ML, MC, MR, BL, BC, BR; lines are coded "
    "LINE-TYPE-COLOR with types FDIAG, RDIAG, HORIZ, VERT, DIAM, CIRC, VSU, "
    "VSL, VSD, VSR. An empty panel is coded EMPTY."
)


def emit_analogy_text(p: AnalogyPuzzle, mode: str = "lossless") -> str:
    """Whole-puzzle text representation in the given mode."""
    parts = []
    if mode == "lossless":
        parts.append(LOSSLESS_LEGEND)
    for label, panels in (
        ("Example 1", p.example1),
        ("Example 2", p.example2),
        ("Query", p.query),
    ):
        for i, panel in enumerate(panels, start=1):
            parts.append(f"{label}, panel {i}:")
            parts.append(panel_text(panel, mode))
    for i, panel in enumerate(p.options, start=1):
        parts.append(f"Option {i}:")
        parts.append(panel_text(panel, mode))
    return "\n".join(parts)


def analogy_instruction(p: AnalogyPuzzle) -> str:
    return (
        "Each example shows three panels in which the third panel completes a "
        "logical pattern over the first two along one attribute domain. The "
        "query shows two panels. Pick the option (1-4) that completes the "
        "query under the same relation as the examples."
    )


COT_DOMAIN_ROWS = tuple(Domain)


def _triple_domain_line(domain: Domain, panels: Sequence[Panel], verdict: Relation | None) -> str:
    sets = " | ".join("{" + _fmt_set(domain, p.value_set(domain)) + "}" for p in panels)
    if verdict is None:
        tail = "no consistent relation"
    else:
        tail = f"consistent with {verdict.value}"
    return f"{domain.value}: {sets} -> {tail}"


def emit_analogy_cot(p: AnalogyPuzzle) -> tuple[str, str]:
    lines: list[str] = []
    for label, panels, latent in (
        ("Example 1", p.example1, p.latent1),
        ("Example 2", p.example2, p.latent2),
    ):
        lines.append(f"{label}:")
        for domain in COT_DOMAIN_ROWS:
            verdict = latent[1] if domain is latent[0] else None
            lines.append(_triple_domain_line(domain, panels, verdict))
        lines.append(
            f"{label} follows the pattern ({latent[0].value}, {latent[1].value})."
        )
    if p.latent1[0] is p.latent2[0]:
        lines.append("The examples vary along the same domain.")
    else:
        lines.append("The examples vary along different domains.")
    lines.append(f"The target relation is {p.latent_query[1].value}.")
    lines.append("Query:")
    for domain in COT_DOMAIN_ROWS:
        sets = " | ".join(
            "{" + _fmt_set(domain, q.value_set(domain)) + "}" for q in p.query
        )
        lines.append(f"{domain.value}: {sets}")
    for i, opt in enumerate(p.options, start=1):
        lines.append(f"Option {i}:")
        for domain in COT_DOMAIN_ROWS:
            lines.append(f"{domain.value}: {{{_fmt_set(domain, opt.value_set(domain))}}}")
        d, r = p.option_pattern(i - 1)
        lines.append(
            f"Combined with the query, option {i} is consistent with the "
            f"pattern ({d.value}, {r.value})."
        )
        if r is p.latent_query[1]:
            lines.append(f"The relation {r.value} is the target relation.")
        else:
            lines.append(
                f"The relation {r.value} is not the target relation "
                f"{p.latent_query[1].value}."
            )
    cot = "\n".join(lines)
    answer = (
        f"Example 1 follows the pattern ({p.latent1[0].value}, {p.latent1[1].value}). "
        f"Example 2 follows the pattern ({p.latent2[0].value}, {p.latent2[1].value}). "
        f"The query combined with option {p.answer_index + 1} follows the pattern "
        f"({p.latent_query[0].value}, {p.latent_query[1].value}). "
        f"The answer is option {p.answer_index + 1}."
    )
    return cot, answer


def load_heldout(path) -> frozenset[tuple[Domain, Relation]]:
    """Read a held-out pattern set from a JSON list of [domain, relation] pairs."""
    with open(path, encoding="utf-8") as fh:
        pairs = json.load(fh)
    return frozenset((Domain(d), Relation(r)) for d, r in pairs)
