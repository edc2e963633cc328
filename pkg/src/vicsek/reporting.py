"""Deterministic CSV/JSON artifact writers and figure rendering.

CSV output follows RFC 4180 (header row, CRLF line endings, '.' decimal
separator, minimal quoting); JSON reports use sorted keys and two-space
indentation.  Numbers are rendered with `repr`, the shortest round-trip
form, so identical inputs always produce byte-identical artifacts.
Figures are rendered through the Agg backend and never require a display.
"""

from __future__ import annotations

import csv
import json
import os
from fractions import Fraction

import numpy as np

__all__ = [
    "format_value",
    "render_series_figure",
    "write_csv",
    "write_json",
]


def format_value(x):
    """Canonical scalar rendering: round-trip floats, plain ints, p/q
    fractions, everything else via str."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (np.floating, float)):
        return repr(float(x))
    if isinstance(x, (np.integer, int)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x)
    return str(x)


def write_csv(path: str, header, rows) -> None:
    """Write one table; every cell passes through format_value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(header))
        for row in rows:
            w.writerow([format_value(c) for c in row])


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    return str(x)


def write_json(path: str, obj) -> None:
    """Write a JSON report with stable key order."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def render_series_figure(
    path: str,
    title: str,
    xlabel: str,
    ylabel: str,
    series,
    logx: bool = False,
    logy: bool = False,
) -> None:
    """Render line series [(label, xs, ys), ...] to an image file."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, xs, ys in series:
        ax.plot(xs, ys, marker="o", markersize=3.5, linewidth=1.2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    if len(series) > 1 or (series and series[0][0]):
        ax.legend(fontsize=8)
    fig.tight_layout()
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
