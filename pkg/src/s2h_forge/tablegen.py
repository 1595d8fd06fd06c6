"""Table-based readout tasks: consecutive readout and highlighted-path readout.

Tables hold single-digit numbers written as English words, with named rows and
columns. Consecutive readout walks the table in row-major order between two
cells; path readout follows a highlighted spiral/sinusoidal path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .core import Difficulty, TaskKind, rng_for

Cell = tuple[int, int]  # 1-indexed (row, col)

NUMBER_WORDS = ("ZERO", "ONE", "TWO", "THREE", "FOUR", "FIVE", "SIX", "SEVEN", "EIGHT", "NINE")
WORD_TO_DIGIT = {w: i for i, w in enumerate(NUMBER_WORDS)}

#: 24 distinct header names: enough for the largest table (12 rows + 12 cols).
HEADER_WORDS = (
    "AMBER", "BIRCH", "CEDAR", "DELTA", "EMBER", "FLINT",
    "GROVE", "HAZEL", "IVORY", "JASPER", "KNOLL", "LUMEN",
    "MAPLE", "NORTH", "OCHRE", "PEARL", "QUILL", "RAVEN",
    "SLATE", "THORN", "UMBER", "VIOLA", "WHEAT", "ZEPHYR",
)

DIR_DELTAS = {"right": (0, 1), "down": (1, 0), "left": (0, -1), "up": (-1, 0)}
DIR_ORDER = ("right", "down", "left", "up")

#: Spiral orientations: every cyclic direction-change map (start direction x
#: clockwise/counterclockwise rotation of the default right->down->left->up cycle).
SPIRAL_ORIENTATIONS = tuple(
    tuple(cycle[(i + j) % 4] for j in range(4))
    for cycle in (("right", "down", "left", "up"), ("right", "up", "left", "down"))
    for i in range(4)
)

#: Sinusoidal orientations: (horizontal sweep start, connector direction).
SINUSOIDAL_ORIENTATIONS = (
    ("right", "down"), ("left", "down"), ("right", "up"), ("left", "up"),
)


class PathError(ValueError):
    """A path cannot be generated for the given arguments."""


def _in_bounds(cell: Cell, n_rows: int, n_cols: int) -> bool:
    return 1 <= cell[0] <= n_rows and 1 <= cell[1] <= n_cols


def gen_consecutive_path(n_rows: int, n_cols: int, start: Cell, end: Cell) -> list[Cell]:
    """Row-major walk between two cells.

    start row < end row: left-to-right scan wrapping to column 1 of the next
    row; start row > end row: right-to-left scan wrapping to the last column of
    the previous row; equal rows: direct walk (start column must not exceed the
    end column).
    """
    for cell in (start, end):
        if not _in_bounds(cell, n_rows, n_cols):
            raise PathError(f"cell {cell} outside {n_rows}x{n_cols} table")
    (r_s, c_s), (r_e, c_e) = start, end
    path = [start]
    r, c = start
    if r_s < r_e:
        while (r, c) != end:
            c += 1
            if c > n_cols:
                r, c = r + 1, 1
            path.append((r, c))
    elif r_s > r_e:
        while (r, c) != end:
            c -= 1
            if c < 1:
                r, c = r - 1, n_cols
            path.append((r, c))
    else:
        if c_s > c_e:
            raise PathError("same-row path with start column after end column is undefined")
        while c < c_e:
            c += 1
            path.append((r, c))
    return path


def gen_spiral_path(
    n_rows: int,
    n_cols: int,
    start: Cell,
    k: int,
    orientation: Sequence[str] = SPIRAL_ORIENTATIONS[0],
) -> list[Cell]:
    """Boundary-hugging spiral: walk straight, turn when the next cell would
    leave the table, stop after k segments."""
    if k < 1:
        raise PathError("segment count must be positive")
    if not _in_bounds(start, n_rows, n_cols):
        raise PathError(f"start {start} outside {n_rows}x{n_cols} table")
    cycle = tuple(orientation)
    if sorted(cycle) != sorted(DIR_ORDER):
        raise PathError(f"orientation must be a permutation of the four directions: {cycle}")
    change = {cycle[i]: cycle[(i + 1) % 4] for i in range(4)}
    direction = cycle[0]
    cur = start
    n_seg = 0
    path: list[Cell] = []
    limit = 8 * n_rows * n_cols + 64
    while n_seg != k:
        if len(path) >= limit:
            raise PathError("spiral did not terminate")
        path.append(cur)
        dr, dc = DIR_DELTAS[direction]
        temp = (cur[0] + dr, cur[1] + dc)
        if not _in_bounds(temp, n_rows, n_cols):
            direction = change[direction]
            n_seg += 1
        dr, dc = DIR_DELTAS[direction]
        cur = (cur[0] + dr, cur[1] + dc)
    return path


def gen_sinusoidal_path(
    n_rows: int,
    n_cols: int,
    start: Cell,
    k: int,
    orientation: tuple[str, str] = SINUSOIDAL_ORIENTATIONS[0],
) -> list[Cell]:
    """Horizontal sweeps joined by 2-cell vertical connectors, k segments."""
    if k < 1:
        raise PathError("segment count must be positive")
    if not _in_bounds(start, n_rows, n_cols):
        raise PathError(f"start {start} outside {n_rows}x{n_cols} table")
    h_start, connector = orientation
    if h_start not in ("right", "left") or connector not in ("down", "up"):
        raise PathError(f"invalid sinusoidal orientation {orientation}")
    conn_dr = 1 if connector == "down" else -1
    direction = h_start
    cur = start
    n_seg = 0
    path: list[Cell] = []
    limit = 4 * n_rows * n_cols + 64
    while n_seg != k:
        if len(path) >= limit:
            raise PathError("sinusoidal path did not terminate")
        path.append(cur)
        dr, dc = DIR_DELTAS[direction]
        temp = (cur[0] + dr, cur[1] + dc)
        if not _in_bounds(temp, n_rows, n_cols):
            if n_seg == k - 1:
                break
            for _ in range(2):
                cur = (cur[0] + conn_dr, cur[1])
                if not _in_bounds(cur, n_rows, n_cols):
                    raise PathError("vertical connector exits the table")
                path.append(cur)
            direction = "left" if direction == "right" else "right"
            n_seg += 2
        dr, dc = DIR_DELTAS[direction]
        cur = (cur[0] + dr, cur[1] + dc)
    return path


def count_turns(path: Sequence[Cell]) -> int:
    """Number of 90-degree direction changes along a unit-step path."""
    turns = 0
    for i in range(2, len(path)):
        d1 = (path[i - 1][0] - path[i - 2][0], path[i - 1][1] - path[i - 2][1])
        d2 = (path[i][0] - path[i - 1][0], path[i][1] - path[i - 1][1])
        if d1 != d2:
            turns += 1
    return turns


def is_unit_step(path: Sequence[Cell]) -> bool:
    return all(
        abs(b[0] - a[0]) + abs(b[1] - a[1]) == 1 for a, b in zip(path, path[1:])
    )


@dataclass(frozen=True)
class TableInstance:
    task: TaskKind
    difficulty: Difficulty
    n_rows: int
    n_cols: int
    row_names: tuple[str, ...]
    col_names: tuple[str, ...]
    values: tuple[tuple[int, ...], ...]
    path: tuple[Cell, ...]
    segments: int
    patterns: tuple[str, ...]  # block pattern names, empty for consecutive readout

    @property
    def start(self) -> Cell:
        return self.path[0]

    @property
    def end(self) -> Cell:
        return self.path[-1]

    def path_values(self) -> list[int]:
        return [self.values[r - 1][c - 1] for r, c in self.path]

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task.value,
                "difficulty": self.difficulty.value,
                "n_rows": self.n_rows,
                "n_cols": self.n_cols,
                "row_names": list(self.row_names),
                "col_names": list(self.col_names),
                "values": [list(row) for row in self.values],
                "path": [list(c) for c in self.path],
                "segments": self.segments,
                "patterns": list(self.patterns),
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(text: str) -> "TableInstance":
        obj = json.loads(text)
        return TableInstance(
            task=TaskKind(obj["task"]),
            difficulty=Difficulty(obj["difficulty"]),
            n_rows=obj["n_rows"],
            n_cols=obj["n_cols"],
            row_names=tuple(obj["row_names"]),
            col_names=tuple(obj["col_names"]),
            values=tuple(tuple(row) for row in obj["values"]),
            path=tuple((r, c) for r, c in obj["path"]),
            segments=obj["segments"],
            patterns=tuple(obj["patterns"]),
        )


#: (min_len, max_len) path-length windows per difficulty.
CONSECUTIVE_LENGTHS = {
    Difficulty.SIMPLE: (5, 10),
    Difficulty.MEDIUM: (15, 20),
    Difficulty.HARD: (25, 30),
}
READOUT_LENGTHS = {Difficulty.SIMPLE: (8, 16), Difficulty.HARD: (28, 42)}
READOUT_SEGMENTS = {Difficulty.SIMPLE: (1, 4), Difficulty.HARD: (5, 10**9)}

MAX_ATTEMPTS = 1000


def _fill_table(rng, n_rows: int, n_cols: int):
    names = list(HEADER_WORDS)
    idx = rng.permutation(len(names))
    row_names = tuple(names[i] for i in idx[:n_rows])
    col_names = tuple(names[i] for i in idx[n_rows:n_rows + n_cols])
    values = tuple(tuple(int(v) for v in rng.integers(0, 10, size=n_cols)) for _ in range(n_rows))
    return row_names, col_names, values


def gen_consecutive_instance(difficulty: Difficulty, seed: int) -> TableInstance:
    rng = rng_for(seed, TaskKind.CONSECUTIVE_TABLE_READOUT.value, difficulty.value)
    lo, hi = CONSECUTIVE_LENGTHS[difficulty]
    for _ in range(MAX_ATTEMPTS):
        n_rows = int(rng.integers(6, 13))
        n_cols = int(rng.integers(4, 13))
        length = int(rng.integers(lo, hi + 1))
        total = n_rows * n_cols
        if length > total:
            continue
        start_idx = int(rng.integers(0, total))
        forward = bool(rng.integers(0, 2))
        end_idx = start_idx + (length - 1) if forward else start_idx - (length - 1)
        if not 0 <= end_idx < total:
            continue
        start = (start_idx // n_cols + 1, start_idx % n_cols + 1)
        end = (end_idx // n_cols + 1, end_idx % n_cols + 1)
        if not forward and start[0] == end[0]:
            continue  # same-row right-to-left walk is undefined
        path = gen_consecutive_path(n_rows, n_cols, start, end)
        assert len(path) == length
        row_names, col_names, values = _fill_table(rng, n_rows, n_cols)
        row_span = len({r for r, _ in path})
        return TableInstance(
            task=TaskKind.CONSECUTIVE_TABLE_READOUT,
            difficulty=difficulty,
            n_rows=n_rows,
            n_cols=n_cols,
            row_names=row_names,
            col_names=col_names,
            values=values,
            path=tuple(path),
            segments=row_span,
            patterns=(),
        )
    raise PathError("could not generate a consecutive readout instance")


def _sample_block(rng, n_rows: int, n_cols: int, start: Cell) -> tuple[list[Cell], str]:
    if rng.integers(0, 2):
        orient = SPIRAL_ORIENTATIONS[int(rng.integers(0, len(SPIRAL_ORIENTATIONS)))]
        k = int(rng.integers(1, 5))
        return gen_spiral_path(n_rows, n_cols, start, k, orient), "spiral"
    orient = SINUSOIDAL_ORIENTATIONS[int(rng.integers(0, len(SINUSOIDAL_ORIENTATIONS)))]
    k = int(rng.integers(1, 5))
    return gen_sinusoidal_path(n_rows, n_cols, start, k, orient), "sinusoidal"


def gen_table_readout_instance(difficulty: Difficulty, seed: int) -> TableInstance:
    if difficulty is Difficulty.MEDIUM:
        raise ValueError("table readout has no medium difficulty")
    rng = rng_for(seed, TaskKind.TABLE_READOUT.value, difficulty.value)
    len_lo, len_hi = READOUT_LENGTHS[difficulty]
    seg_lo, seg_hi = READOUT_SEGMENTS[difficulty]
    n_blocks_hi = 1 if difficulty is Difficulty.SIMPLE else 4
    for _ in range(MAX_ATTEMPTS):
        n_rows = int(rng.integers(8, 13))
        n_cols = int(rng.integers(8, 13))
        start: Cell = (int(rng.integers(1, n_rows + 1)), int(rng.integers(1, n_cols + 1)))
        n_blocks = 1 if difficulty is Difficulty.SIMPLE else int(rng.integers(2, n_blocks_hi + 1))
        path: list[Cell] = []
        patterns: list[str] = []
        cur = start
        ok = True
        for b in range(n_blocks):
            try:
                block, name = _sample_block(rng, n_rows, n_cols, cur)
            except PathError:
                ok = False
                break
            path.extend(block if b == 0 else block[1:])
            patterns.append(name)
            cur = block[-1]
            if len(path) > len_hi:
                ok = False
                break
        if not ok or not path:
            continue
        if not (len_lo <= len(path) <= len_hi):
            continue
        if any(not _in_bounds(cell, n_rows, n_cols) for cell in path):
            continue
        if len(set(path)) != len(path) or not is_unit_step(path):
            continue
        segments = count_turns(path) + 1
        if not (seg_lo <= segments <= seg_hi):
            continue
        row_names, col_names, values = _fill_table(rng, n_rows, n_cols)
        return TableInstance(
            task=TaskKind.TABLE_READOUT,
            difficulty=difficulty,
            n_rows=n_rows,
            n_cols=n_cols,
            row_names=row_names,
            col_names=col_names,
            values=values,
            path=tuple(path),
            segments=segments,
            patterns=tuple(patterns),
        )
    raise PathError("could not generate a table readout instance")


HIGHLIGHT_OPEN = r"\hl{"


def emit_table_text(inst: TableInstance) -> str:
    """Deterministic LaTeX rendering; path cells are wrapped in ``\\hl{...}``."""
    on_path = set(inst.path)
    lines = [r"\begin{tabular}{c|" + "c" * inst.n_cols + "}"]
    lines.append(" & " + " & ".join(inst.col_names) + r" \\")
    lines.append(r"\hline")
    for r in range(1, inst.n_rows + 1):
        cells = []
        for c in range(1, inst.n_cols + 1):
            word = NUMBER_WORDS[inst.values[r - 1][c - 1]]
            cells.append(HIGHLIGHT_OPEN + word + "}" if (r, c) in on_path else word)
        lines.append(inst.row_names[r - 1] + " & " + " & ".join(cells) + r" \\")
    lines.append(r"\end{tabular}")
    return "\n".join(lines)


def table_instruction(inst: TableInstance) -> str:
    (r_s, c_s), (r_e, c_e) = inst.start, inst.end
    if inst.task is TaskKind.CONSECUTIVE_TABLE_READOUT:
        return (
            "The table lists single-digit numbers written as English words. "
            f"Read every number from the cell at row {r_s}, column {c_s} to the "
            f"cell at row {r_e}, column {c_e} in row-major order, then report "
            "their sum."
        )
    return (
        "The table lists single-digit numbers written as English words, and a "
        "path of cells is highlighted. Read every number along the highlighted "
        f"path from the cell at row {r_s}, column {c_s} to the cell at row "
        f"{r_e}, column {c_e}, then report their sum."
    )


def emit_table_cot(inst: TableInstance) -> str:
    lines = []
    for i, (r, c) in enumerate(inst.path, start=1):
        word = NUMBER_WORDS[inst.values[r - 1][c - 1]]
        lines.append(
            f"Step {i}: row {r}, column {c}, row name {inst.row_names[r - 1]}, "
            f"column name {inst.col_names[c - 1]}, value {word}."
        )
    return "\n".join(lines)


def emit_table_answer(inst: TableInstance) -> str:
    words = [NUMBER_WORDS[v] for v in inst.path_values()]
    total = sum(inst.path_values())
    return f"The numbers are {', '.join(words)}. The sum of the numbers is {total}."
