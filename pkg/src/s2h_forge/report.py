"""Report rendering: delimited metric files plus matplotlib figures.

Every CLI path that computes metrics writes a machine-readable CSV/JSON pair
and a PNG figure next to it.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def write_metrics(out_dir: str | Path, name: str, metrics: dict) -> None:
    """Write <name>.json and <name>.csv with one row per scalar metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    with open(out_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(metrics):
            value = metrics[key]
            if isinstance(value, (int, float, str, bool)):
                writer.writerow([key, value])


def metric_bar_figure(out_path: str | Path, metrics: dict, title: str) -> None:
    """Bar chart of the scalar metrics in [0, 1]-ish range."""
    items = [(k, v) for k, v in sorted(metrics.items()) if isinstance(v, (int, float))]
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(items)), 4))
    ax.bar([k for k, _ in items], [v for _, v in items], color="#4878cf")
    ax.set_title(title)
    ax.tick_params(axis="x", rotation=60)
    for label in ax.get_xticklabels():
        label.set_horizontalalignment("right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)


def histogram_figure(out_path: str | Path, values: list, title: str, xlabel: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist(values, bins=min(30, max(5, len(set(values)))), color="#4878cf")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)


def score_series_figure(out_path: str | Path, series: dict[str, dict[str, float]], title: str) -> None:
    """Line plot of named scores across checkpoint tags.

    ``series`` maps checkpoint tag -> {score name -> value}.
    """
    tags = list(series)
    names = sorted({n for scores in series.values() for n in scores})
    fig, ax = plt.subplots(figsize=(max(5, 0.8 * len(tags)), 4))
    for name in names:
        ax.plot(tags, [series[t].get(name) for t in tags], marker="o", label=name)
    ax.set_title(title)
    ax.set_xlabel("checkpoint")
    ax.legend()
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    fig.savefig(out_path, dpi=100)
    plt.close(fig)


def counts_figure(out_path: str | Path, counts: dict[str, int], title: str) -> None:
    metric_bar_figure(out_path, counts, title)
