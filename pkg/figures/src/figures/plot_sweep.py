"""Parameter-sweep plot: error and monitor against gamma_S.

Shows the relative global L2 error (dashed) and the monitor sV+sW (full
line) over the swept penalty values, with a horizontal dotted guide at
the 10% relative-error level.
"""

from __future__ import annotations

import argparse

import numpy as np

from .common import (
    REFERENCE_COLOR,
    STYLE_GLOBAL,
    STYLE_MONITOR,
    STYLE_REFERENCE,
    load_table,
    save_deterministic,
)

REQUIRED = ["gamma_s", "l2_rel", "monitor"]


def build_figure(table):
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    g = np.array(table["gamma_s"], dtype=float)
    order = np.argsort(g)
    ax.loglog(g[order], np.array(table["l2_rel"])[order], STYLE_GLOBAL, marker="s",
              label="relative global L2 error")
    ax.loglog(g[order], np.array(table["monitor"])[order], STYLE_MONITOR, marker="s",
              label="monitor")
    ax.axhline(0.1, linestyle=STYLE_REFERENCE, color=REFERENCE_COLOR,
               label="10% relative error")
    ax.set_xlabel("gamma_S")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="gamma-sweep CSV from the experiment harness")
    parser.add_argument("out", help="output SVG path")
    args = parser.parse_args(argv)
    table = load_table(args.csv, REQUIRED)
    fig = build_figure(table)
    save_deterministic(fig, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
