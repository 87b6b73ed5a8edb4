"""Experiment orchestration: named problems, sweeps, perturbations, CSV.

The four named problems reproduce the desk-scale studies: a well-posed but
non-coercive convection-diffusion problem with pure flux data and a mean
constraint, the Cauchy problem for the Laplacian with data on the top and
right sides, and two Cauchy configurations for the convection-diffusion
operator distinguished by where the data sits relative to the flow.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from . import analysis
from .analysis import ConvergenceTable, ErrorReport
from .assembly import (
    ExactSolution,
    ProblemSpec,
    StabilisationConfig,
    assemble_system,
    conormal_flux,
    normal_gradient,
)
from .mesh import build_unit_square_mesh, tag_boundary
from .solver import solve
from .space import FeSpace

__all__ = [
    "ExperimentConfig",
    "PerturbationField",
    "make_perturbation",
    "run_case",
    "run_convergence",
    "run_gamma_sweep",
    "run_perturbation_study",
    "verify_oswald",
    "PROBLEMS",
    "exact_bubble",
    "rotational_velocity",
    "write_csv",
    "CaseResult",
]

CONFIG_COLUMNS = ["problem", "degree", "stab", "gamma_s", "gamma_d", "jitter",
                  "seed", "sigma", "pert_seed"]


# ---------------------------------------------------------------------------
# problem registry

def exact_bubble():
    """The quartic bubble 30 x(1-x) y(1-y); unit L2 norm, zero trace."""

    def value(xy):
        x, y = xy[..., 0], xy[..., 1]
        return 30.0 * x * (1.0 - x) * y * (1.0 - y)

    def grad(xy):
        x, y = xy[..., 0], xy[..., 1]
        gx = 30.0 * (1.0 - 2.0 * x) * y * (1.0 - y)
        gy = 30.0 * x * (1.0 - x) * (1.0 - 2.0 * y)
        return np.stack([gx, gy], axis=-1)

    def hess(xy):
        x, y = xy[..., 0], xy[..., 1]
        hxx = -60.0 * y * (1.0 - y)
        hyy = -60.0 * x * (1.0 - x)
        hxy = 30.0 * (1.0 - 2.0 * x) * (1.0 - 2.0 * y)
        row0 = np.stack([hxx, hxy], axis=-1)
        row1 = np.stack([hxy, hyy], axis=-1)
        return np.stack([row0, row1], axis=-2)

    return ExactSolution(value, grad, hess)


def rotational_velocity(xy):
    """beta = -100 (x+y, y-x); enters at y=0, x=1, exits at x=0."""
    x, y = xy[..., 0], xy[..., 1]
    return -100.0 * np.stack([x + y, y - x], axis=-1)


def _rotational_div(xy):
    return np.full(xy.shape[:-1], -200.0)


BUBBLE_MEAN = 5.0 / 6.0  # integral of the quartic bubble over the square


@dataclass(frozen=True)
class ProblemCase:
    name: str
    layout: str
    convective: bool
    mean_constraint: bool
    peclet_default: bool
    gamma_s_default: dict
    exact_factory: object = exact_bubble
    zero_trace: bool = True

    def make_spec(self, delta_psi=None, delta_f=None):
        exact = self.exact_factory()
        if self.convective:
            spec = ProblemSpec(
                sigma=1.0,
                reaction=0.0,
                beta=rotational_velocity,
                div_beta=_rotational_div,
                exact=exact,
                delta_f=delta_f,
                delta_psi=delta_psi,
            )
        else:
            spec = ProblemSpec(sigma=1.0, reaction=0.0, exact=exact,
                               delta_f=delta_f, delta_psi=delta_psi)
        spec.f = spec.manufactured_source()
        spec.psi = conormal_flux(exact, spec.sigma_mat, spec.beta)
        spec.psi_n = normal_gradient(exact, spec.sigma_mat)
        if not self.zero_trace:
            spec.g = lambda xy: exact.value(xy)
        return spec


PROBLEMS = {
    "convdiff-neumann": ProblemCase(
        "convdiff-neumann", "full-neumann", True, True, False,
        {1: 0.01, 2: 0.001},
    ),
    "cauchy-laplace": ProblemCase(
        "cauchy-laplace", "cauchy-topright", False, False, False,
        {1: 0.01, 2: 0.001},
    ),
    "cauchy-convdiff-case1": ProblemCase(
        "cauchy-convdiff-case1", "cauchy-inflow", True, False, True,
        {1: 0.1, 2: 0.01},
    ),
    "cauchy-convdiff-case2": ProblemCase(
        "cauchy-convdiff-case2", "cauchy-mixed", True, False, True,
        {1: 0.1, 2: 0.01},
    ),
    # verification variants: polynomial solutions in the FE space, so every
    # error column must vanish to solver precision
    "cauchy-laplace-linear": ProblemCase(
        "cauchy-laplace-linear", "cauchy-topright", False, False, False,
        {1: 0.01, 2: 0.001}, exact_factory=lambda: _polynomial_exact(1),
        zero_trace=False,
    ),
    "cauchy-laplace-quadratic": ProblemCase(
        "cauchy-laplace-quadratic", "cauchy-topright", False, False, False,
        {1: 0.01, 2: 0.001}, exact_factory=lambda: _polynomial_exact(2),
        zero_trace=False,
    ),
}


def _polynomial_exact(degree):
    """Harmonic polynomial solutions: x + y, or x^2 - y^2."""
    if degree == 1:
        return ExactSolution(
            value=lambda xy: xy[..., 0] + xy[..., 1],
            grad=lambda xy: np.broadcast_to(np.array([1.0, 1.0]), xy.shape).copy(),
            hess=lambda xy: np.zeros(xy.shape[:-1] + (2, 2)),
        )

    def hess(xy):
        h = np.zeros(xy.shape[:-1] + (2, 2))
        h[..., 0, 0] = 2.0
        h[..., 1, 1] = -2.0
        return h

    return ExactSolution(
        value=lambda xy: xy[..., 0] ** 2 - xy[..., 1] ** 2,
        grad=lambda xy: np.stack([2.0 * xy[..., 0], -2.0 * xy[..., 1]], axis=-1),
        hess=hess,
    )

DEFAULT_LEVELS = {1: [8, 16, 32, 64], 2: [4, 8, 16, 32]}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one study."""

    problem: str = "cauchy-laplace"
    degree: int = 1
    stab: str = "cip"
    gamma_s: Optional[float] = None
    gamma_d: float = 10.0
    levels: Optional[List[int]] = None
    jitter: float = 0.2
    seed: int = 0
    sigma: float = 0.0  # perturbation strength
    pert_seed: Optional[int] = None  # defaults to seed
    out: Optional[str] = None
    peclet: Optional[bool] = None

    def resolved(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem '{self.problem}'")
        case = PROBLEMS[self.problem]
        cfg = replace(self)
        if cfg.gamma_s is None:
            cfg.gamma_s = case.gamma_s_default[cfg.degree]
        if cfg.levels is None:
            cfg.levels = list(DEFAULT_LEVELS[cfg.degree])
        if list(cfg.levels) != sorted(cfg.levels) or len(cfg.levels) == 0:
            raise ValueError("levels must be nonempty and increasing")
        if cfg.sigma < 0.0:
            raise ValueError("perturbation strength must be nonnegative")
        if cfg.pert_seed is None:
            cfg.pert_seed = cfg.seed
        if cfg.peclet is None:
            cfg.peclet = case.peclet_default
        return cfg

    def stab_config(self):
        return StabilisationConfig(
            kind=self.stab,
            gamma_s=self.gamma_s,
            gamma_d=self.gamma_d,
            degree=self.degree,
            peclet_weighting=self.peclet,
        )

    def csv_values(self):
        return [self.problem, self.degree, self.stab, self.gamma_s, self.gamma_d,
                self.jitter, self.seed, self.sigma, self.pert_seed]


# ---------------------------------------------------------------------------
# data perturbation

_PERT_NODES = np.linspace(0.0, 1.0, 5)
_PERT_VANDERMONDE_INV = np.linalg.inv(np.vander(_PERT_NODES, increasing=True))


class PerturbationField:
    """Multiplicative flux perturbation delta psi = strength * v_rand * psi.

    v_rand is, on every Neumann face, the degree-4 polynomial in the face
    parameter interpolating 5 equispaced nodal values drawn uniformly from
    [0, 1].  Deterministic for a fixed seed.
    """

    def __init__(self, tmesh, strength, seed, psi):
        if strength < 0.0:
            raise ValueError("perturbation strength must be nonnegative")
        self.strength = float(strength)
        self.psi = psi
        rng = np.random.default_rng(seed)
        nf_total = tmesh.faces.num_faces
        self.nodal_values = np.zeros((nf_total, 5))
        self.nodal_values[tmesh.gamma_N] = rng.uniform(
            0.0, 1.0, size=(len(tmesh.gamma_N), 5)
        )
        # polynomial coefficients of the interpolant, low degree first
        self.coeffs = self.nodal_values @ _PERT_VANDERMONDE_INV.T

    def v_rand(self, face_ids, t):
        """Interpolated random factor at parameters t on the given faces."""
        c = self.coeffs[face_ids]
        out = np.zeros(c.shape[:1] + np.shape(t))
        for k in range(4, -1, -1):
            out = out * t + c[:, k][:, None]
        return out

    def eval_on_faces(self, face_ids, t, xy, normals):
        if self.strength == 0.0:
            return np.zeros(xy.shape[:2])
        base = np.broadcast_to(
            np.asarray(self.psi(xy, normals[:, None, :]), dtype=float), xy.shape[:2]
        )
        return self.strength * self.v_rand(face_ids, t) * base


def make_perturbation(tmesh, strength, seed, psi):
    """Random flux perturbation field on the Neumann faces of tmesh."""
    return PerturbationField(tmesh, strength, seed, psi)


# ---------------------------------------------------------------------------
# experiment drivers

@dataclass
class CaseResult:
    report: ErrorReport
    solution: object
    blocks: object
    space: FeSpace
    tmesh: object
    spec: ProblemSpec


def _build_tagged_mesh(cfg, n):
    mesh = build_unit_square_mesh(n, jitter=cfg.jitter, seed=[cfg.seed, n])
    return tag_boundary(mesh, PROBLEMS[cfg.problem].layout)


def run_case_full(config, n=None):
    """One solve at one level, returning the report plus all intermediates."""
    cfg = config.resolved()
    case = PROBLEMS[cfg.problem]
    if n is None:
        n = cfg.levels[-1]
    tmesh = _build_tagged_mesh(cfg, n)
    stab = cfg.stab_config()
    space = FeSpace(tmesh, cfg.degree)

    delta_psi = None
    if cfg.sigma > 0.0:
        probe = case.make_spec()
        delta_psi = make_perturbation(tmesh, cfg.sigma, [cfg.pert_seed, n, 17], probe.psi)
    spec = case.make_spec(delta_psi=delta_psi)

    system, blocks = assemble_system(
        tmesh,
        spec,
        stab,
        mean_constraint=case.mean_constraint,
        mean_value=BUBBLE_MEAN if case.mean_constraint else 0.0,
        space=space,
    )
    sol = solve(system)

    l2g, l2l, h1, u_norm = analysis.error_norms(space, sol.u, spec.exact)
    sv, sw, _ = analysis.seminorms(sol.u, sol.z, blocks)
    triple = analysis.triple_seminorm(
        space, spec, sol.u, sol.z, include_h1=(cfg.stab in ("h1", "h1adj"))
    )
    eta_v, eta = analysis.residual_estimator(space, spec, stab, sol.u, sol.z, blocks=blocks)
    ui = space.interpolate(lambda xy: spec.exact.value(xy))
    dv = ui - sol.u
    sv_err = float(np.sqrt(max(float(dv @ (blocks.S_V @ dv)), 0.0)))

    report = ErrorReport(
        level=n,
        h=1.0 / n,
        dof=system.size,
        l2_global=l2g,
        l2_local=l2l,
        h1=h1,
        s_v=sv,
        s_w=sw,
        triple=triple,
        eta_v=eta_v,
        eta=eta,
        h_max=tmesh.mesh.h_max,
        s_v_err=sv_err,
        u_norm=u_norm,
    )
    return CaseResult(report, sol, blocks, space, tmesh, spec)


def run_case(config, n=None):
    """Build, tag, assemble, solve and analyse one case; returns the report."""
    return run_case_full(config, n=n).report


def run_convergence(config):
    """One run per level; returns the table and writes the CSV if requested."""
    cfg = config.resolved()
    table = ConvergenceTable()
    for n in cfg.levels:
        table.add(run_case(cfg, n=n))
    if cfg.out:
        write_csv(cfg.out, analysis.CSV_COLUMNS + CONFIG_COLUMNS,
                  [rep.csv_row() + cfg.csv_values() for _, rep in table.rows])
    return table


def run_gamma_sweep(config, gammas):
    """Fixed mesh, varying gamma_S; reports error and the monitor."""
    cfg = config.resolved()
    n = cfg.levels[-1]
    rows = []
    for g in gammas:
        cfg_g = replace(cfg, gamma_s=float(g))
        rep = run_case(cfg_g, n=n)
        rows.append([float(g), rep.l2_global, rep.l2_global / rep.u_norm, rep.monitor])
    if cfg.out:
        write_csv(cfg.out, ["gamma_s", "l2_global", "l2_rel", "monitor"] + CONFIG_COLUMNS,
                  [r + cfg.csv_values() for r in rows])
    return rows


def run_perturbation_study(config, sigmas=None):
    """Sweep the perturbation strength at a fixed mesh, or h at fixed strength.

    With sigmas given, the finest configured level is reused for every
    strength (the random factor is identical across strengths, only its
    amplitude changes).  Without sigmas, a mesh sweep runs at the
    configured strength, regenerating the random factor per level with a
    level-derived seed.
    """
    cfg = config.resolved()
    rows = []
    header = ["sweep", "value"] + analysis.CSV_COLUMNS + ["monitor"]
    if sigmas is not None:
        n = cfg.levels[-1]
        for s in sigmas:
            rep = run_case(replace(cfg, sigma=float(s)), n=n)
            rows.append(["sigma", float(s)] + rep.csv_row() + [rep.monitor])
    else:
        for n in cfg.levels:
            rep = run_case(cfg, n=n)
            rows.append(["h", 1.0 / n] + rep.csv_row() + [rep.monitor])
    if cfg.out:
        write_csv(cfg.out, header + CONFIG_COLUMNS,
                  [r + cfg.csv_values() for r in rows])
    return rows


def verify_oswald(levels=(4, 8, 16, 32), n_fields=50, seed=0, jitter=0.2, gamma_s=1.0, out=None):
    """Numerical check of the nodal-averaging interpolation inequalities.

    For random P2 fields u_h, compares ||h (lap u_h - I_os lap u_h)||_h
    against the interior stabilisation seminorm, and the reconstruction
    stability sum against ||h lap u_h||_h.  Returns one row per level with
    the maximal ratios over the sampled fields.
    """
    from .assembly import assemble_data_penalty, assemble_interior_stabilisation

    rows = []
    for n in levels:
        mesh = build_unit_square_mesh(n, jitter=jitter, seed=[seed, n])
        tmesh = tag_boundary(mesh, "cauchy-topright")
        space = FeSpace(tmesh, 2)
        stab = StabilisationConfig(kind="cip", gamma_s=gamma_s, gamma_d=1.0, degree=2)
        spec = ProblemSpec(sigma=1.0)
        S_s, _, _ = assemble_interior_stabilisation(tmesh, spec, stab, "primal", space=space)
        S_d, _, _ = assemble_data_penalty(tmesh, spec, stab, space=space)
        S_full = (S_s + S_d).tocsr()
        vd = space.volume_data()
        h2 = mesh.h_cell ** 2
        rng = np.random.default_rng([seed, n, 23])
        r_int, r_stab = [], []
        for _ in range(n_fields):
            u = rng.uniform(-1.0, 1.0, size=space.ndofs)
            lap_nodes = analysis.cellwise_laplacian_at_nodes(space, u)
            rec = analysis.oswald_interpolant(space, lap_nodes)
            lap_q = np.einsum("cb,cbqii->cq", u[space.cell_dofs], vd.hess)
            rec_q = vd.field_values(rec)
            norm_diff = np.sqrt(np.einsum("cq,q,c->", (lap_q - rec_q) ** 2, vd.w, vd.det * h2))
            norm_lap = np.sqrt(np.einsum("cq,q,c->", lap_q ** 2, vd.w, vd.det * h2))
            s_val = np.sqrt(max(float(u @ (S_s @ u)), 0.0))
            r_int.append(norm_diff / s_val)

            all_faces = np.arange(tmesh.faces.num_faces)
            fd = space.face_data(all_faces)
            rec_f = np.einsum("fb,fbq->fq", rec[fd.dofs], fd.values)
            rec_dn = np.einsum("fb,fbqi,fi->fq", rec[fd.dofs], fd.grads, fd.normals)
            t_face = np.sqrt(analysis._face_norm(space, all_faces, rec_f, 3, 4))
            t_dn = np.sqrt(analysis._face_norm(space, all_faces, rec_dn, 5, 4))
            norm_rec = np.sqrt(np.einsum("cq,q,c->", rec_q ** 2, vd.w, vd.det * h2))
            w = (mesh.h_max ** 2) * rec
            s_full = np.sqrt(max(float(w @ (S_full @ w)), 0.0))
            r_stab.append((t_face + t_dn + norm_rec + s_full) / norm_lap)
        rows.append([n, mesh.h_max, float(np.max(r_int)), float(np.max(r_stab))])
    if out:
        write_csv(out, ["level", "h_max", "ratio_interp", "ratio_stability"], rows)
    return rows


def write_csv(path, header, rows):
    """Write rows with repr-exact floats so results diff bit-for-bit."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row]
            )


def save_snapshots(result, prefix):
    """Write mesh and nodal fields (u_h, z_h, interpolated error) as text."""
    from .mesh import save_field, save_mesh

    mesh = result.tmesh.mesh
    save_mesh(mesh, f"{prefix}_mesh.txt")
    nv = mesh.num_vertices
    save_field(result.solution.u[:nv], f"{prefix}_u.txt")
    save_field(result.solution.z[:nv], f"{prefix}_z.txt")
    if result.spec.exact is not None:
        ui = result.space.interpolate(lambda xy: result.spec.exact.value(xy))
        save_field((ui - result.solution.u)[:nv], f"{prefix}_err.txt")
