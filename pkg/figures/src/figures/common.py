"""Shared CSV parsing and the deterministic rendering setup."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# legend conventions of the convergence plots:
#   squares for piecewise affine, circles for piecewise quadratic;
#   full line monitor, dashed global L2, dotted-with-markers local L2,
#   dotted without markers for reference slopes
DEGREE_MARKERS = {1: "s", 2: "o"}
STYLE_MONITOR = "-"
STYLE_GLOBAL = "--"
STYLE_LOCAL = ":"
STYLE_REFERENCE = ":"
REFERENCE_COLOR = "0.4"

plt.rcParams["svg.hashsalt"] = "cauchyfem-figures"


def load_table(path, required):
    """Read a harness CSV into {column: list}; missing columns are an error."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = {}
    for name in reader.fieldnames:
        vals = [r[name] for r in rows]
        try:
            table[name] = [float(v) for v in vals]
        except ValueError:
            table[name] = vals
    return table


def save_deterministic(fig, out_path):
    """Write a vector image without timestamps so reruns diff clean."""
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
