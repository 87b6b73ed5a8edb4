"""Contour plot of a nodal field over a triangulation.

Reads the plain-text mesh format ('nv nc' header, vertex lines, cell
lines) together with a one-value-per-line field file, e.g. the
interpolated error or the adjoint variable written by the harness.
"""

from __future__ import annotations

import argparse

import numpy as np

from .common import save_deterministic


def load_mesh_text(path):
    with open(path) as fh:
        nv, nc = (int(t) for t in fh.readline().split())
        vertices = np.array([[float(t) for t in fh.readline().split()]
                             for _ in range(nv)])
        cells = np.array([[int(t) for t in fh.readline().split()]
                          for _ in range(nc)], dtype=int)
    return vertices, cells


def load_field_text(path):
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()])


def build_figure(vertices, cells, values):
    import matplotlib.pyplot as plt
    from matplotlib.tri import Triangulation

    if len(values) != len(vertices):
        raise ValueError(
            f"field has {len(values)} values for {len(vertices)} vertices"
        )
    tri = Triangulation(vertices[:, 0], vertices[:, 1], cells)
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    filled = ax.tricontourf(tri, values, levels=11)
    ax.tricontour(tri, values, levels=11, colors="k", linewidths=0.4)
    fig.colorbar(filled, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    return fig


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("mesh", help="mesh text file")
    parser.add_argument("field", help="nodal values, one per line")
    parser.add_argument("out", help="output SVG path")
    args = parser.parse_args(argv)
    vertices, cells = load_mesh_text(args.mesh)
    values = load_field_text(args.field)
    fig = build_figure(vertices, cells, values)
    save_deterministic(fig, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
