import numpy as np
import pytest


def write_convergence_csv(path, slope=2.0):
    """Synthetic results CSV with exact power-law data for two degrees."""
    header = ("level,h,dof,l2_global,l2_local,h1,sV,sW,triple,etaV,eta,"
              "problem,degree,stab,gamma_s,gamma_d,jitter,seed,sigma")
    lines = [header]
    for degree in (1, 2):
        for n in (8, 16, 32):
            h = 1.0 / n
            glob = 0.5 * h ** slope
            loc = 0.2 * h ** slope
            sv, sw = 0.3 * h, 0.1 * h
            lines.append(
                f"{n},{h!r},{2 * n * n},{glob!r},{loc!r},{h!r},{sv!r},{sw!r},"
                f"{(3 * h)!r},{(2 * h)!r},{(2.1 * h)!r},"
                f"cauchy-laplace,{degree},cip,0.01,10.0,0.2,0,0.0"
            )
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sweep_csv(path):
    header = ("gamma_s,l2_global,l2_rel,monitor,problem,degree,stab,"
              "gamma_d,jitter,seed,sigma")
    lines = [header]
    for g, rel in [(1e-4, 0.8), (1e-3, 0.3), (1e-2, 0.05), (1e-1, 0.07), (1.0, 0.2)]:
        mon = 2.0 * rel
        lines.append(f"{g!r},{rel!r},{rel!r},{mon!r},cauchy-laplace,1,cip,10.0,0.2,0,0.0")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_mesh_text(path, n=4):
    """Plain-text criss-cross mesh of the unit square, written directly."""
    coords = [i / n for i in range(n + 1)]
    verts = [(x, y) for y in coords for x in coords]
    cells = []
    for iy in range(n):
        for ix in range(n):
            v00 = iy * (n + 1) + ix
            v10 = v00 + 1
            v01 = v00 + (n + 1)
            v11 = v01 + 1
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    with open(path, "w") as fh:
        fh.write(f"{len(verts)} {len(cells)}\n")
        for x, y in verts:
            fh.write(f"{x!r} {y!r}\n")
        for tri in cells:
            fh.write(" ".join(str(v) for v in tri) + "\n")
    return path, np.array(verts), np.array(cells)


@pytest.fixture
def convergence_csv(tmp_path):
    return write_convergence_csv(tmp_path / "conv.csv")


@pytest.fixture
def sweep_csv(tmp_path):
    return write_sweep_csv(tmp_path / "sweep.csv")


@pytest.fixture
def mesh_and_field(tmp_path):
    mesh_path, verts, cells = write_mesh_text(tmp_path / "mesh.txt")
    values = verts[:, 0] + verts[:, 1]
    field_path = tmp_path / "field.txt"
    field_path.write_text("".join(f"{float(v)!r}\n" for v in values))
    return mesh_path, field_path, verts, cells
