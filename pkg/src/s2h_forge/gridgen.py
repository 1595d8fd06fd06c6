"""Grid navigation task: collect all objects, avoid obstacles, reach the end.

Instances are solved by a deterministic depth-first search whose full decision
trace becomes the chain of thought; the answer is the backtrack-cancelled
direction list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .core import Difficulty, TaskKind, rng_for

Cell = tuple[int, int]  # 1-indexed (row, col)

DIR_ORDER = ("right", "down", "left", "up")
DELTAS = {"right": (0, 1), "down": (1, 0), "left": (0, -1), "up": (-1, 0)}
OPPOSITE = {"right": "left", "left": "right", "down": "up", "up": "down"}


def _load_glyphs() -> tuple[dict[str, str], dict[str, str]]:
    raw = json.loads(
        resources.files("s2h_forge").joinpath("data/grid_glyphs.json").read_text("utf-8")
    )
    decode = lambda cp: chr(int(cp[2:], 16))
    return (
        {name: decode(cp) for name, cp in raw["objects"].items()},
        {name: decode(cp) for name, cp in raw["obstacles"].items()},
    )


OBJECT_GLYPHS, OBSTACLE_GLYPHS = _load_glyphs()
OBJECT_NAMES = tuple(OBJECT_GLYPHS)
OBSTACLE_KINDS = tuple(OBSTACLE_GLYPHS)


class GridError(ValueError):
    """Grid instance generation or solving failed."""


class UnreachableError(GridError):
    """No collect-all path exists from the start cell."""


@dataclass(frozen=True)
class GridInstance:
    difficulty: Difficulty
    n_rows: int
    n_cols: int
    start: Cell
    end: Cell
    objects: tuple[tuple[str, Cell], ...]    # (name, pos)
    obstacles: tuple[tuple[str, Cell], ...]  # (kind, pos)
    dfs_steps: int

    task = TaskKind.GRID_NAVIGATION

    def object_at(self) -> dict[Cell, str]:
        return {pos: name for name, pos in self.objects}

    def obstacle_cells(self) -> set[Cell]:
        return {pos for _, pos in self.obstacles}

    def to_json(self) -> str:
        return json.dumps(
            {
                "difficulty": self.difficulty.value,
                "n_rows": self.n_rows,
                "n_cols": self.n_cols,
                "start": list(self.start),
                "end": list(self.end),
                "objects": [[name, list(pos)] for name, pos in self.objects],
                "obstacles": [[kind, list(pos)] for kind, pos in self.obstacles],
                "dfs_steps": self.dfs_steps,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(text: str) -> "GridInstance":
        obj = json.loads(text)
        return GridInstance(
            difficulty=Difficulty(obj["difficulty"]),
            n_rows=obj["n_rows"],
            n_cols=obj["n_cols"],
            start=tuple(obj["start"]),
            end=tuple(obj["end"]),
            objects=tuple((name, tuple(pos)) for name, pos in obj["objects"]),
            obstacles=tuple((kind, tuple(pos)) for kind, pos in obj["obstacles"]),
            dfs_steps=obj["dfs_steps"],
        )


@dataclass(frozen=True)
class DfsStep:
    cell: Cell
    considered: tuple[tuple[str, Cell, str], ...]  # (direction, target, verdict)
    action: str           # "move:<dir>" or "backtrack"
    backtrack_to: Cell | None
    collected: str | None  # object name collected on arrival at this cell


@dataclass(frozen=True)
class DfsTrace:
    steps: tuple[DfsStep, ...]
    collected_order: tuple[str, ...]
    final_actions: tuple[str, ...]

    @property
    def dfs_steps(self) -> int:
        return len(self.steps)


def _manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def dfs_solve(inst: GridInstance) -> DfsTrace:
    """Deterministic DFS preferring the move that minimizes Manhattan distance
    to the nearest uncollected object (the end cell once all are collected);
    ties break in right, down, left, up order. The visited set resets whenever
    an object is collected."""
    obstacles = inst.obstacle_cells()
    remaining = inst.object_at()
    collected: list[str] = []
    cur = inst.start
    visited = {cur}
    stack: list[tuple[Cell, str]] = []
    steps: list[DfsStep] = []
    limit = 64 * inst.n_rows * inst.n_cols
    while True:
        collected_here = None
        if cur in remaining:
            collected_here = remaining.pop(cur)
            collected.append(collected_here)
            visited = {cur}
        if cur == inst.end and not remaining:
            break
        if len(steps) >= limit:
            raise GridError("DFS did not terminate")
        goals = list(remaining) if remaining else [inst.end]
        candidates = []
        for di, d in enumerate(DIR_ORDER):
            dr, dc = DELTAS[d]
            tgt = (cur[0] + dr, cur[1] + dc)
            if not (1 <= tgt[0] <= inst.n_rows and 1 <= tgt[1] <= inst.n_cols):
                verdict, pref = "out-of-bounds", 10**9
            elif tgt in obstacles:
                verdict = "obstacle"
                pref = min(_manhattan(tgt, g) for g in goals)
            elif tgt in visited:
                verdict = "visited"
                pref = min(_manhattan(tgt, g) for g in goals)
            else:
                verdict = "open"
                pref = min(_manhattan(tgt, g) for g in goals)
            candidates.append((pref, di, d, tgt, verdict))
        candidates.sort(key=lambda c: (c[0], c[1]))
        considered = []
        move = None
        for pref, di, d, tgt, verdict in candidates:
            considered.append((d, tgt, verdict))
            if verdict == "open":
                move = (d, tgt)
                break
        if move is not None:
            steps.append(DfsStep(cur, tuple(considered), f"move:{move[0]}", None, collected_here))
            stack.append((cur, move[0]))
            cur = move[1]
            visited.add(cur)
        else:
            if not stack:
                raise UnreachableError("no collect-all path from the start cell")
            prev, _ = stack.pop()
            steps.append(DfsStep(cur, tuple(considered), "backtrack", prev, collected_here))
            cur = prev
    return DfsTrace(
        steps=tuple(steps),
        collected_order=tuple(collected),
        final_actions=tuple(d for _, d in stack),
    )


@dataclass(frozen=True)
class SimResult:
    reached_end: bool
    collected: frozenset[str]
    obstacles_hit: int
    out_of_bounds: bool
    path: tuple[Cell, ...]

    def success(self, inst: GridInstance) -> bool:
        return (
            self.reached_end
            and not self.out_of_bounds
            and self.obstacles_hit == 0
            and self.collected == frozenset(name for name, _ in inst.objects)
        )


def simulate(inst: GridInstance, actions: list[str] | tuple[str, ...]) -> SimResult:
    """Walk the action list from the start cell and report what happened."""
    obstacles = inst.obstacle_cells()
    objects = inst.object_at()
    cur = inst.start
    collected = set()
    obstacles_hit = 0
    oob = False
    path = [cur]
    for a in actions:
        if a not in DELTAS:
            oob = True
            break
        dr, dc = DELTAS[a]
        cur = (cur[0] + dr, cur[1] + dc)
        if not (1 <= cur[0] <= inst.n_rows and 1 <= cur[1] <= inst.n_cols):
            oob = True
            break
        if cur in obstacles:
            obstacles_hit += 1
        if cur in objects:
            collected.add(objects[cur])
        path.append(cur)
    return SimResult(
        reached_end=not oob and cur == inst.end,
        collected=frozenset(collected),
        obstacles_hit=obstacles_hit,
        out_of_bounds=oob,
        path=tuple(path),
    )


#: Difficulty bands: (object count range, obstacle kinds range, dfs step range).
GRID_BANDS = {
    Difficulty.SIMPLE: ((1, 2), (1, 1), (10, 25)),
    Difficulty.HARD: ((2, 5), (3, 5), (26, 60)),
}

MAX_ATTEMPTS = 2000


def gen_grid_instance(difficulty: Difficulty, seed: int) -> tuple[GridInstance, DfsTrace]:
    if difficulty not in GRID_BANDS:
        raise ValueError("grid navigation has no medium difficulty")
    (obj_lo, obj_hi), (kind_lo, kind_hi), (step_lo, step_hi) = GRID_BANDS[difficulty]
    rng = rng_for(seed, TaskKind.GRID_NAVIGATION.value, difficulty.value)
    for _ in range(MAX_ATTEMPTS):
        n_rows = int(rng.integers(8, 13))
        n_cols = int(rng.integers(8, 13))
        n_objects = int(rng.integers(obj_lo, obj_hi + 1))
        n_kinds = int(rng.integers(kind_lo, kind_hi + 1))
        density = 0.10 if difficulty is Difficulty.SIMPLE else 0.16
        n_obstacles = max(n_kinds, int(round(n_rows * n_cols * density)))
        total = n_rows * n_cols
        n_special = 2 + n_objects + n_obstacles
        if n_special > total:
            continue
        flat = rng.choice(total, size=n_special, replace=False)
        cells = [(int(i) // n_cols + 1, int(i) % n_cols + 1) for i in flat]
        start, end = cells[0], cells[1]
        obj_cells = cells[2:2 + n_objects]
        obst_cells = cells[2 + n_objects:]
        names_idx = rng.choice(len(OBJECT_NAMES), size=n_objects, replace=False)
        objects = tuple((OBJECT_NAMES[int(i)], pos) for i, pos in zip(names_idx, obj_cells))
        kinds_idx = rng.choice(len(OBSTACLE_KINDS), size=n_kinds, replace=False)
        kinds = [OBSTACLE_KINDS[int(i)] for i in kinds_idx]
        assignment = [kinds[i % n_kinds] for i in range(n_obstacles)]
        rng.shuffle(assignment)
        obstacles = tuple(zip(assignment, obst_cells))
        inst = GridInstance(
            difficulty=difficulty,
            n_rows=n_rows,
            n_cols=n_cols,
            start=start,
            end=end,
            objects=objects,
            obstacles=obstacles,
            dfs_steps=0,
        )
        try:
            trace = dfs_solve(inst)
        except GridError:
            continue
        if not (step_lo <= trace.dfs_steps <= step_hi):
            continue
        if not simulate(inst, trace.final_actions).success(inst):
            continue
        inst = GridInstance(
            difficulty=inst.difficulty,
            n_rows=inst.n_rows,
            n_cols=inst.n_cols,
            start=inst.start,
            end=inst.end,
            objects=inst.objects,
            obstacles=inst.obstacles,
            dfs_steps=trace.dfs_steps,
        )
        return inst, trace
    raise GridError("could not generate a grid instance in the difficulty band")


def emit_grid_text(inst: GridInstance) -> str:
    """Deterministic LaTeX grid; S/E mark start and end, symbols fill their cells."""
    glyph_at: dict[Cell, str] = {}
    for name, pos in inst.objects:
        glyph_at[pos] = OBJECT_GLYPHS[name]
    for kind, pos in inst.obstacles:
        glyph_at[pos] = OBSTACLE_GLYPHS[kind]
    lines = [r"\begin{tabular}{|" + "c|" * inst.n_cols + "}", r"\hline"]
    for r in range(1, inst.n_rows + 1):
        row = []
        for c in range(1, inst.n_cols + 1):
            if (r, c) == inst.start:
                row.append("S")
            elif (r, c) == inst.end:
                row.append("E")
            else:
                row.append(glyph_at.get((r, c), " "))
        lines.append(" & ".join(row) + r" \\")
        lines.append(r"\hline")
    lines.append(r"\end{tabular}")
    return "\n".join(lines)


def grid_instruction(inst: GridInstance) -> str:
    objs = ", ".join(f"{name} ({OBJECT_GLYPHS[name]})" for name, _ in inst.objects)
    kinds = sorted({kind for kind, _ in inst.obstacles}, key=OBSTACLE_KINDS.index)
    obst = ", ".join(f"{kind} ({OBSTACLE_GLYPHS[kind]})" for kind in kinds)
    (r_s, c_s), (r_e, c_e) = inst.start, inst.end
    return (
        f"Navigate the grid from the start cell S at row {r_s}, column {c_s} to "
        f"the end cell E at row {r_e}, column {c_e}. Collect all of the "
        f"following objects: {objs}. Avoid all obstacle symbols: {obst}. Report "
        "the simplified sequence of moves (right, down, left, up)."
    )


def emit_grid_cot(inst: GridInstance, trace: DfsTrace) -> tuple[str, str]:
    verdict_text = {
        "out-of-bounds": "is out of bounds",
        "obstacle": "has an obstacle",
        "visited": "is already visited",
        "open": "is available and not visited",
    }
    (r_s, c_s), (r_e, c_e) = inst.start, inst.end
    lines = [f"We start at ({r_s}, {c_s}) and must reach ({r_e}, {c_e})."]
    for step in trace.steps:
        if step.collected is not None:
            lines.append(f"We collect the {step.collected} at ({step.cell[0]}, {step.cell[1]}).")
        clauses = [
            f"{d} leads to ({tgt[0]}, {tgt[1]}) which {verdict_text[v]}"
            for d, tgt, v in step.considered
        ]
        if step.action.startswith("move:"):
            move = step.action.split(":", 1)[1]
            tail = f"we move {move}."
        else:
            bt = step.backtrack_to
            tail = f"no action is available, so we backtrack to ({bt[0]}, {bt[1]})."
        lines.append(f"Current cell: ({step.cell[0]}, {step.cell[1]}). " + "; ".join(clauses) + "; " + tail)
    lines.append(f"We arrive at ({r_e}, {c_e}) after collecting all objects.")
    cot = "\n".join(lines)
    answer = "Final answer: " + ", ".join(trace.final_actions) + "."
    return cot, answer
