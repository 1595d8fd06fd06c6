"""Gradient-alignment diagnostics over externally produced gradient dumps.

Implements the simple/hard alignment score, cosine similarity of mean
gradients, the Adam-preconditioned update alignment, a signed-bucket random
projection for storing high-dimensional gradients, a binary dump format, and
a first-order consistency check on analytic quadratic loss families.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DUMP_MAGIC = b"S2HG"
DUMP_VERSION = 1

SPLIT_SIMPLE = 0
SPLIT_HARD = 1


class GradError(ValueError):
    """Malformed dump or undefined score."""


@dataclass
class GradientDump:
    dim: int
    ids: list[str]
    splits: np.ndarray          # uint8, 0 = simple, 1 = hard
    values: np.ndarray          # float32, shape (count, dim)
    checkpoint_tag: str = ""
    loss_kind: str = "solution_given_image"

    def __post_init__(self):
        self.splits = np.asarray(self.splits, dtype=np.uint8)
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2 or self.values.shape[1] != self.dim:
            raise GradError("values must have shape (count, dim)")
        if len(self.ids) != len(self.values) or len(self.splits) != len(self.values):
            raise GradError("ids, splits, and values must have equal length")
        if self.splits.size and not np.isin(self.splits, [SPLIT_SIMPLE, SPLIT_HARD]).all():
            raise GradError("splits must be 0 (simple) or 1 (hard)")

    def split_values(self, split: int) -> np.ndarray:
        return self.values[self.splits == split]


def write_dump(path: str | Path, dump: GradientDump) -> None:
    """Little-endian layout: magic, u32 version, u32 dim, u64 count, then per
    vector a u16 id length, the UTF-8 id, a u8 split, and dim float32 values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<IIQ", DUMP_VERSION, dump.dim, len(dump.ids)))
        for vid, split, vec in zip(dump.ids, dump.splits, dump.values):
            raw = vid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", int(split)))
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def read_dump(path: str | Path, checkpoint_tag: str = "",
              loss_kind: str = "solution_given_image") -> GradientDump:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DUMP_MAGIC:
            raise GradError(f"bad magic {magic!r}")
        version, dim, count = struct.unpack("<IIQ", fh.read(16))
        if version != DUMP_VERSION:
            raise GradError(f"unsupported dump version {version}")
        ids: list[str] = []
        splits = np.empty(count, dtype=np.uint8)
        values = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            (id_len,) = struct.unpack("<H", fh.read(2))
            ids.append(fh.read(id_len).decode("utf-8"))
            (splits[i],) = struct.unpack("<B", fh.read(1))
            buf = fh.read(4 * dim)
            if len(buf) != 4 * dim:
                raise GradError("truncated dump")
            values[i] = np.frombuffer(buf, dtype="<f4")
        if fh.read(1):
            raise GradError("trailing bytes after the declared vector count")
    return GradientDump(dim, ids, splits, values, checkpoint_tag, loss_kind)


def read_manifest(path: str | Path) -> dict[str, GradientDump]:
    """Manifest JSON maps checkpoint tags to dump files (optionally with a
    loss kind): {"step100": "g.bin"} or {"step100": {"file": ..., "loss_kind": ...}}."""
    path = Path(path)
    obj = json.loads(path.read_text("utf-8"))
    out = {}
    for tag, entry in obj.items():
        if isinstance(entry, str):
            fname, loss_kind = entry, "solution_given_image"
        else:
            fname, loss_kind = entry["file"], entry.get("loss_kind", "solution_given_image")
        out[tag] = read_dump(path.parent / fname, tag, loss_kind)
    return out


# ---------------------------------------------------------------------------
# scores


def _means(dump: GradientDump) -> tuple[np.ndarray, np.ndarray]:
    simple = dump.split_values(SPLIT_SIMPLE)
    hard = dump.split_values(SPLIT_HARD)
    if not len(simple) or not len(hard):
        raise GradError("dump needs at least one simple and one hard vector")
    return simple.mean(axis=0, dtype=np.float64), hard.mean(axis=0, dtype=np.float64)


def alignment_score(dump: GradientDump) -> float:
    """<mean simple grad, mean hard grad> / <mean hard grad, mean hard grad>."""
    g_s, g_h = _means(dump)
    denom = float(g_h @ g_h)
    if denom == 0.0:
        raise GradError("mean hard gradient is zero")
    return float(g_s @ g_h) / denom


def cosine_score(dump: GradientDump) -> float:
    g_s, g_h = _means(dump)
    ns, nh = np.linalg.norm(g_s), np.linalg.norm(g_h)
    if ns == 0.0 or nh == 0.0:
        raise GradError("mean gradient is zero")
    return float(g_s @ g_h) / float(ns * nh)


def adam_update_alignment(
    dump: GradientDump,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> float:
    """Alignment of Adam-preconditioned per-example updates with the mean hard
    gradient, normalized by the hard-side value. The first and second moments
    are the simple-split means of g and g*g; a coordinate where both the
    update numerator and denominator vanish contributes zero."""
    simple = dump.split_values(SPLIT_SIMPLE).astype(np.float64)
    hard = dump.split_values(SPLIT_HARD).astype(np.float64)
    if not len(simple) or not len(hard):
        raise GradError("dump needs at least one simple and one hard vector")
    m = simple.mean(axis=0)
    v = (simple * simple).mean(axis=0)
    g_h = hard.mean(axis=0)

    def h(g: np.ndarray) -> np.ndarray:
        num = (1.0 - beta1) * g + beta1 * m
        den = np.sqrt((1.0 - beta2) * g * g + beta2 * v) + eps
        return np.divide(num, den, out=np.zeros_like(num), where=den != 0.0)

    num = float(np.mean(h(simple) @ g_h))
    den = float(np.mean(h(hard) @ g_h))
    if den == 0.0:
        raise GradError("hard-side Adam alignment denominator is zero")
    return num / den


# ---------------------------------------------------------------------------
# signed-bucket random projection


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def projection_table(dim: int, seed: int, out_dim: int = 4096,
                     chunk: int = 1 << 20) -> tuple[np.ndarray, np.ndarray]:
    """Bucket indices and signs for every input coordinate (reusable)."""
    buckets = np.empty(dim, dtype=np.int64)
    signs = np.empty(dim, dtype=np.float64)
    base = np.uint64((seed * 0xD1B54A32D192ED03) & 0xFFFFFFFFFFFFFFFF)
    for lo in range(0, dim, chunk):
        hi = min(lo + chunk, dim)
        idx = np.arange(lo, hi, dtype=np.uint64)
        h = _splitmix64(idx + base)
        buckets[lo:hi] = (h % np.uint64(out_dim)).astype(np.int64)
        signs[lo:hi] = 1.0 - 2.0 * ((h >> np.uint64(63)) & np.uint64(1)).astype(np.float64)
    return buckets, signs


def project(
    vec: np.ndarray,
    seed: int,
    out_dim: int = 4096,
    table: tuple[np.ndarray, np.ndarray] | None = None,
    chunk: int = 1 << 20,
) -> np.ndarray:
    """Linear signed-bucket sketch of a vector (streaming over chunks)."""
    vec = np.asarray(vec)
    if vec.ndim != 1:
        raise GradError("project expects a 1-D vector")
    out = np.zeros(out_dim, dtype=np.float64)
    if table is not None:
        buckets, signs = table
        return np.bincount(buckets, weights=signs * vec, minlength=out_dim)
    base = np.uint64((seed * 0xD1B54A32D192ED03) & 0xFFFFFFFFFFFFFFFF)
    for lo in range(0, len(vec), chunk):
        hi = min(lo + chunk, len(vec))
        idx = np.arange(lo, hi, dtype=np.uint64)
        h = _splitmix64(idx + base)
        buckets = (h % np.uint64(out_dim)).astype(np.int64)
        signs = 1.0 - 2.0 * ((h >> np.uint64(63)) & np.uint64(1)).astype(np.float64)
        out += np.bincount(buckets, weights=signs * vec[lo:hi], minlength=out_dim)
    return out


# ---------------------------------------------------------------------------
# analytic first-order check


@dataclass(frozen=True)
class QuadraticExample:
    matrix: np.ndarray  # PSD
    center: np.ndarray

    def loss(self, theta: np.ndarray) -> float:
        d = theta - self.center
        return 0.5 * float(d @ self.matrix @ d)

    def grad(self, theta: np.ndarray) -> np.ndarray:
        return self.matrix @ (theta - self.center)


@dataclass(frozen=True)
class QuadraticFamily:
    simple: tuple[QuadraticExample, ...]
    hard: tuple[QuadraticExample, ...]
    theta: np.ndarray

    def hard_loss(self, theta: np.ndarray) -> float:
        return float(np.mean([ex.loss(theta) for ex in self.hard]))

    def to_dump(self, tag: str = "") -> GradientDump:
        grads = [ex.grad(self.theta) for ex in self.simple] + [
            ex.grad(self.theta) for ex in self.hard
        ]
        splits = [SPLIT_SIMPLE] * len(self.simple) + [SPLIT_HARD] * len(self.hard)
        ids = [f"simple-{i}" for i in range(len(self.simple))] + [
            f"hard-{i}" for i in range(len(self.hard))
        ]
        return GradientDump(
            dim=len(self.theta),
            ids=ids,
            splits=np.array(splits, dtype=np.uint8),
            values=np.stack(grads).astype(np.float32),
            checkpoint_tag=tag,
        )


def random_quadratic_family(
    seed: int, dim: int = 6, n_simple: int = 5, n_hard: int = 4
) -> QuadraticFamily:
    rng = np.random.default_rng(seed)

    def example() -> QuadraticExample:
        b = rng.normal(size=(dim, dim))
        matrix = b.T @ b / dim + 0.1 * np.eye(dim)
        center = rng.normal(size=dim)
        return QuadraticExample(matrix, center)

    return QuadraticFamily(
        simple=tuple(example() for _ in range(n_simple)),
        hard=tuple(example() for _ in range(n_hard)),
        theta=rng.normal(size=dim),
    )


def first_order_ratio_check(family: QuadraticFamily, eta: float = 1e-6) -> dict:
    """Compare the exact one-step hard-loss improvement ratio against the
    alignment score; the two agree to first order in the step size."""
    theta = family.theta
    base = family.hard_loss(theta)
    simple_deltas = [
        family.hard_loss(theta - eta * ex.grad(theta)) - base for ex in family.simple
    ]
    hard_deltas = [
        family.hard_loss(theta - eta * ex.grad(theta)) - base for ex in family.hard
    ]
    den = float(np.mean(hard_deltas))
    if den == 0.0:
        raise GradError("hard-side loss change is zero")
    ratio = float(np.mean(simple_deltas)) / den
    g_s = np.mean([ex.grad(theta) for ex in family.simple], axis=0)
    g_h = np.mean([ex.grad(theta) for ex in family.hard], axis=0)
    score = float(g_s @ g_h) / float(g_h @ g_h)
    return {"ratio": ratio, "score": score, "abs_diff": abs(ratio - score), "eta": eta}
