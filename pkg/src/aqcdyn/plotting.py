"""SVG line charts for the CLI report path."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed id salt and no date stamp so identical data give identical files
matplotlib.rcParams["svg.hashsalt"] = "aqcdyn"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def line_chart(series: dict, path, xlabel: str, ylabel: str, title: str = "", logy=False, styles=None) -> Path:
    """``series`` maps a label to ``(x, y)``; ``styles`` optionally maps labels to line styles."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in series.items():
        ax.plot(x, y, (styles or {}).get(label, "-"), label=label, lw=1.4)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if series:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def group(rows, key, x, y):
    out = defaultdict(lambda: ([], []))
    for r in rows:
        xs, ys = out[key(r)]
        xs.append(r[x])
        ys.append(r[y])
    return dict(out)
