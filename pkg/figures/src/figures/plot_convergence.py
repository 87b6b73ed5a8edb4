"""Log-log convergence plot from a harness results CSV.

Curves per polynomial degree: the stabilisation monitor sV+sW (full
line), the global L2 error (dashed) and the local L2 error (dotted with
markers), plus dotted reference slopes.
"""

from __future__ import annotations

import argparse

import numpy as np

from .common import (
    DEGREE_MARKERS,
    REFERENCE_COLOR,
    STYLE_GLOBAL,
    STYLE_LOCAL,
    STYLE_MONITOR,
    STYLE_REFERENCE,
    load_table,
    save_deterministic,
)

REQUIRED = ["h", "l2_global", "l2_local", "sV", "sW", "degree"]


def build_figure(table, slopes):
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    hs_all = np.array(table["h"], dtype=float)
    degrees = sorted({int(d) for d in table["degree"]})
    low = np.inf
    for k in degrees:
        sel = np.array([int(d) == k for d in table["degree"]])
        order = np.argsort(-hs_all[sel])
        h = hs_all[sel][order]
        monitor = (np.array(table["sV"])[sel] + np.array(table["sW"])[sel])[order]
        glob = np.array(table["l2_global"])[sel][order]
        loc = np.array(table["l2_local"])[sel][order]
        marker = DEGREE_MARKERS.get(k, "d")
        ax.loglog(h, monitor, STYLE_MONITOR, marker=marker, label=f"monitor k={k}")
        ax.loglog(h, glob, STYLE_GLOBAL, marker=marker, label=f"global L2 k={k}")
        ax.loglog(h, loc, STYLE_LOCAL, marker=marker, label=f"local L2 k={k}")
        low = min(low, loc.min())
    h_ref = np.array([hs_all.max(), hs_all.min()])
    for s in slopes:
        anchor = 0.8 * low * (h_ref / h_ref.min()) ** s
        ax.loglog(h_ref, anchor, STYLE_REFERENCE, color=REFERENCE_COLOR,
                  label=f"O(h^{s:g})")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="results CSV from the experiment harness")
    parser.add_argument("out", help="output SVG path")
    parser.add_argument("--slopes", default="1,2",
                        help="comma-separated reference slopes")
    args = parser.parse_args(argv)
    slopes = [float(s) for s in args.slopes.split(",") if s]
    table = load_table(args.csv, REQUIRED)
    fig = build_figure(table, slopes)
    save_deterministic(fig, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
