"""Error norms, stabilisation semi-norms, residual quantities and EOC.

All functions here are pure functions of immutable inputs.  The composite
stability semi-norm combines, as a plain sum of norms, the elementwise
strong residuals of both variables, the normal-gradient jumps, and the
four boundary terms; the computable residual quantity eta_V reproduces
its primal part from data alone, which the estimator-identity test relies
on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

__all__ = [
    "ErrorReport",
    "ConvergenceTable",
    "CSV_COLUMNS",
    "error_norms",
    "seminorms",
    "stabilisation_seminorm",
    "triple_seminorm",
    "residual_estimator",
    "oswald_interpolant",
    "cellwise_laplacian_at_nodes",
    "eoc",
]

CSV_COLUMNS = [
    "level",
    "h",
    "dof",
    "l2_global",
    "l2_local",
    "h1",
    "sV",
    "sW",
    "triple",
    "etaV",
    "eta",
]

DEFAULT_REGION = ((0.5, 1.0), (0.5, 1.0))
NORM_EXACTNESS = 6


@dataclass
class ErrorReport:
    """Error and monitor quantities of one solve."""

    level: int = 0
    h: float = 0.0
    dof: int = 0
    l2_global: float = 0.0
    l2_local: float = 0.0
    h1: float = 0.0
    s_v: float = 0.0
    s_w: float = 0.0
    triple: float = 0.0
    eta_v: float = 0.0
    eta: float = 0.0
    h_max: float = 0.0
    s_v_err: float = 0.0
    u_norm: float = 0.0

    @property
    def monitor(self):
        return self.s_v + self.s_w

    def csv_row(self):
        return [
            self.level,
            self.h,
            self.dof,
            self.l2_global,
            self.l2_local,
            self.h1,
            self.s_v,
            self.s_w,
            self.triple,
            self.eta_v,
            self.eta,
        ]


@dataclass
class ConvergenceTable:
    """Rows of (h, ErrorReport), sorted by decreasing h."""

    rows: List[Tuple[float, ErrorReport]] = field(default_factory=list)

    def add(self, report):
        self.rows.append((report.h, report))
        self.rows.sort(key=lambda r: -r[0])

    def column(self, name):
        return np.array([getattr(rep, name) for _, rep in self.rows])

    @property
    def hs(self):
        return np.array([h for h, _ in self.rows])

    def eoc_column(self, name):
        return eoc(self.hs, self.column(name))

    def monitors(self):
        return np.array([rep.monitor for _, rep in self.rows])


def eoc(hs, errors):
    """Pairwise experimental orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}).

    Non-positive errors make the rate undefined for that pair; those
    entries are flagged as NaN.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) < 2:
        raise ValueError("need at least two rows for EOC")
    rates = np.full(len(hs) - 1, np.nan)
    for i in range(len(hs) - 1):
        if errors[i] > 0.0 and errors[i + 1] > 0.0:
            rates[i] = np.log(errors[i] / errors[i + 1]) / np.log(hs[i] / hs[i + 1])
    return rates


def _field_gradients(space, vd, coeffs):
    return np.einsum("cb,cbqi->cqi", coeffs[space.cell_dofs], vd.grads)


def _field_hessians(space, vd, coeffs):
    return np.einsum("cb,cbqij->cqij", coeffs[space.cell_dofs], vd.hess)


def error_norms(space, u_coeffs, exact, region=DEFAULT_REGION, exactness=NORM_EXACTNESS):
    """Global and local L2 errors and the H1 seminorm error.

    The local norm is taken over the axis-aligned box `region`; a cell
    contributes exactly its quadrature points lying inside the box, so no
    mesh alignment is required.
    """
    (x0, x1), (y0, y1) = region
    if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
        raise ValueError("region must be a nonempty box inside the unit square")
    vd = space.volume_data(exactness)
    diff = exact.value(vd.xy) - vd.field_values(u_coeffs)
    l2_global = np.sqrt(vd.integrate(diff ** 2))
    inside = (
        (vd.xy[..., 0] >= x0)
        & (vd.xy[..., 0] <= x1)
        & (vd.xy[..., 1] >= y0)
        & (vd.xy[..., 1] <= y1)
    )
    l2_local = np.sqrt(vd.integrate(diff ** 2 * inside))
    dgrad = exact.grad(vd.xy) - _field_gradients(space, vd, u_coeffs)
    h1 = np.sqrt(vd.integrate(np.einsum("cqi,cqi->cq", dgrad, dgrad)))
    u_norm = np.sqrt(vd.integrate(exact.value(vd.xy) ** 2))
    return float(l2_global), float(l2_local), float(h1), float(u_norm)


def seminorms(u_coeffs, z_coeffs, blocks):
    """|u_h|_{s_V}, |z_h|_{s_W} and the monitor, from the assembled blocks.

    The primal value is the stabilisation semi-norm proper (this is the
    quantity whose optimal O(h^k) decay the studies track); its data part
    (the residual of the least-squares term) is evaluated in homogeneous
    form, jumps and residuals first and squares afterwards, so an exact
    discrete solution gives zero to full precision instead of the sqrt of
    the quadratic-form cancellation floor.  The boundary data misfit is
    monitored separately through the residual quantity eta_V.
    """
    sv = stabilisation_seminorm(blocks.space, blocks.spec, blocks.config, u_coeffs)
    sw2 = float(z_coeffs @ (blocks.S_W @ z_coeffs))
    sw = float(np.sqrt(max(sw2, 0.0)))
    return sv, sw, sv + sw


def stabilisation_seminorm(space, spec, config, u_coeffs):
    """Pointwise evaluation of the interior stabilisation semi-norm of u_h.

    Mirrors the assembled forms: gradient jumps (Peclet-weighted when
    enabled) plus either the Laplacian jumps (CIP) or the elementwise
    strong residual against the source data (least squares).
    """
    from .assembly import _peclet_factors, _volume_data_field

    tm = space.tmesh
    kind = config.kind
    if kind in ("h1adj", "h1"):
        kind = "cip"
    gs = config.gamma_s
    exactness = 2 * space.degree
    total = 0.0
    ids = tm.faces.interior_ids
    if len(ids):
        fd0, ju = _interior_jump_values(space, u_coeffs, "normal_gradient", exactness)
        omega = _peclet_factors(tm, spec, config, ids)
        total += gs * float(
            np.einsum("fq,q,f->", ju ** 2, fd0.w, omega * fd0.lengths ** 2)
        )
        if kind == "cip":
            _, jl = _interior_jump_values(space, u_coeffs, "laplacian", exactness)
            total += gs * float(
                np.einsum("fq,q,f->", jl ** 2, fd0.w, fd0.lengths ** 4)
            )
    if kind == "gals":
        vd = space.volume_data(exactness)
        res = spec.operator(
            vd.field_values(u_coeffs),
            _field_gradients(space, vd, u_coeffs),
            _field_hessians(space, vd, u_coeffs),
            vd.xy,
        )
        res = res - _volume_data_field(spec.f, vd) - _volume_data_field(spec.delta_f, vd)
        h2 = tm.mesh.h_cell ** 2
        total += gs * float(np.einsum("cq,q,c->", res ** 2, vd.w, vd.det * h2))
    return float(np.sqrt(max(total, 0.0)))


def _norm_h_volume(space, vals, exactness):
    """|| h v ||_h with the local cell diameter as weight."""
    vd = space.volume_data(exactness)
    h2 = space.tmesh.mesh.h_cell ** 2
    return float(np.einsum("cq,q,c->", vals ** 2, vd.w, vd.det * h2))


def _face_norm(space, face_ids, values, power, exactness):
    """|| h^{power/2} v ||^2 over the given faces."""
    fd = space.face_data(face_ids, exactness=exactness)
    w = fd.lengths ** power
    return float(np.einsum("fq,q,f->", values ** 2, fd.w, fd.lengths * w))


def _interior_jump_values(space, coeffs, which, exactness):
    ids = space.tmesh.faces.interior_ids
    fd0 = space.face_data(ids, side=0, exactness=exactness)
    fd1 = space.face_data(ids, side=1, exactness=exactness)
    if which == "normal_gradient":
        a0 = np.einsum("fbqi,fi->fbq", fd0.grads, fd0.normals)
        a1 = np.einsum("fbqi,fi->fbq", fd1.grads, fd1.normals)
    else:
        a0 = fd0.laplacians()
        a1 = fd1.laplacians()
    j0 = np.einsum("fb,fbq->fq", coeffs[fd0.dofs], a0)
    j1 = np.einsum("fb,fbq->fq", coeffs[fd1.dofs], a1)
    return fd0, j0 - j1


def triple_seminorm(space, spec, u_coeffs, z_coeffs, include_h1=False, exactness=NORM_EXACTNESS):
    """Composite stability semi-norm of (u - u_h, z_h).

    Sums, as in the discrete stability theory, the eight contributions
    ||h L(u-u_h)||_h, ||h L* z_h||_h, the normal-gradient jumps of both
    variables, and the boundary terms on Gamma_D, Gamma_N, Gamma_N' and
    Gamma_D'.  Requires the exact solution; with the H1 adjoint
    stabilisation an additional ||z_h||_{H1} term is included.
    """
    if spec.exact is None:
        raise ValueError("triple_seminorm requires an exact solution")
    tm = space.tmesh
    vd = space.volume_data(exactness)
    terms = []

    # primal residual against the exact operator
    Lu = spec.operator(
        spec.exact.value(vd.xy), spec.exact.grad(vd.xy), spec.exact.hess(vd.xy), vd.xy
    )
    Luh = spec.operator(
        vd.field_values(u_coeffs),
        _field_gradients(space, vd, u_coeffs),
        _field_hessians(space, vd, u_coeffs),
        vd.xy,
    )
    terms.append(np.sqrt(_norm_h_volume(space, Lu - Luh, exactness)))

    Lz = spec.operator(
        vd.field_values(z_coeffs),
        _field_gradients(space, vd, z_coeffs),
        _field_hessians(space, vd, z_coeffs),
        vd.xy,
        adjoint=True,
    )
    terms.append(np.sqrt(_norm_h_volume(space, Lz, exactness)))

    if len(tm.faces.interior_ids):
        _, ju = _interior_jump_values(space, u_coeffs, "normal_gradient", exactness)
        terms.append(np.sqrt(_face_norm(space, tm.faces.interior_ids, ju, 1, exactness)))
        _, jz = _interior_jump_values(space, z_coeffs, "normal_gradient", exactness)
        terms.append(np.sqrt(_face_norm(space, tm.faces.interior_ids, jz, 1, exactness)))

    if len(tm.gamma_D):
        fd = space.face_data(tm.gamma_D, exactness=exactness)
        vals = spec.exact.value(fd.xy) - np.einsum(
            "fb,fbq->fq", u_coeffs[fd.dofs], fd.values
        )
        terms.append(np.sqrt(_face_norm(space, tm.gamma_D, vals, -1, exactness)))
    if len(tm.gamma_N):
        fd = space.face_data(tm.gamma_N, exactness=exactness)
        flux_e = np.einsum(
            "fqi,ij,fqj->fq",
            np.broadcast_to(fd.normals[:, None, :], fd.xy.shape),
            spec.sigma_mat,
            spec.exact.grad(fd.xy),
        )
        flux_h = np.einsum("fb,fbq->fq", u_coeffs[fd.dofs], fd.normal_flux(spec.sigma_mat))
        terms.append(np.sqrt(_face_norm(space, tm.gamma_N, flux_e - flux_h, 1, exactness)))
    if len(tm.gamma_Np):
        fd = space.face_data(tm.gamma_Np, exactness=exactness)
        zvals = np.einsum("fb,fbq->fq", z_coeffs[fd.dofs], fd.values)
        terms.append(np.sqrt(_face_norm(space, tm.gamma_Np, zvals, -1, exactness)))
    if len(tm.gamma_Dp):
        fd = space.face_data(tm.gamma_Dp, exactness=exactness)
        dn = np.einsum("fb,fbqi,fi->fq", z_coeffs[fd.dofs], fd.grads, fd.normals)
        terms.append(np.sqrt(_face_norm(space, tm.gamma_Dp, dn, 1, exactness)))

    if include_h1:
        gz = _field_gradients(space, vd, z_coeffs)
        z2 = vd.field_values(z_coeffs) ** 2 + np.einsum("cqi,cqi->cq", gz, gz)
        terms.append(np.sqrt(vd.integrate(z2)))
    return float(sum(terms))


def residual_estimator(space, spec, config, u_coeffs, z_coeffs, blocks=None, exactness=NORM_EXACTNESS):
    """The computable residual quantities (eta_V, eta).

    eta_V(u_h) = ||h (f - L u_h)||_h + ||h^1/2 [dn u_h]||_{F_I}
               + ||h^1/2 (psi_n - n.sigma grad u_h)||_{Gamma_N}
               + ||h^-1/2 (u_h - g)||_{Gamma_D},

    and eta = eta_V + |z_h|_{s_W}.  Everything is computed from data; the
    exact solution is never used.
    """
    tm = space.tmesh
    vd = space.volume_data(exactness)
    terms = []

    fvals = np.broadcast_to(np.asarray(spec.f(vd.xy), dtype=float), vd.xy.shape[:2])
    if spec.delta_f is not None:
        fvals = fvals + spec.delta_f(vd.xy)
    Luh = spec.operator(
        vd.field_values(u_coeffs),
        _field_gradients(space, vd, u_coeffs),
        _field_hessians(space, vd, u_coeffs),
        vd.xy,
    )
    terms.append(np.sqrt(_norm_h_volume(space, fvals - Luh, exactness)))

    if len(tm.faces.interior_ids):
        _, ju = _interior_jump_values(space, u_coeffs, "normal_gradient", exactness)
        terms.append(np.sqrt(_face_norm(space, tm.faces.interior_ids, ju, 1, exactness)))

    if len(tm.gamma_N):
        fd = space.face_data(tm.gamma_N, exactness=exactness)
        data = _eval_boundary(spec.psi_n, fd) + _eval_boundary(spec.delta_psi, fd)
        flux_h = np.einsum("fb,fbq->fq", u_coeffs[fd.dofs], fd.normal_flux(spec.sigma_mat))
        terms.append(np.sqrt(_face_norm(space, tm.gamma_N, data - flux_h, 1, exactness)))
    if len(tm.gamma_D):
        fd = space.face_data(tm.gamma_D, exactness=exactness)
        vals = np.einsum("fb,fbq->fq", u_coeffs[fd.dofs], fd.values)
        if spec.g is not None:
            vals = vals - spec.g(fd.xy)
        terms.append(np.sqrt(_face_norm(space, tm.gamma_D, vals, -1, exactness)))

    eta_v = float(sum(terms))
    if blocks is not None:
        _, sw, _ = seminorms(u_coeffs, z_coeffs, blocks)
    else:
        from .assembly import assemble_adjoint_penalty, assemble_interior_stabilisation

        S_wd = assemble_adjoint_penalty(tm, config, space=space)
        S_ws, _, _ = assemble_interior_stabilisation(tm, spec, config, "adjoint", space=space)
        sw = np.sqrt(max(float(z_coeffs @ ((S_wd + S_ws) @ z_coeffs)), 0.0))
    return eta_v, eta_v + float(sw)


def _eval_boundary(fn, fd):
    if fn is None:
        return np.zeros(fd.xy.shape[:2])
    if hasattr(fn, "eval_on_faces"):
        return fn.eval_on_faces(fd.face_ids, fd.t, fd.xy, fd.normals)
    return np.broadcast_to(
        np.asarray(fn(fd.xy, fd.normals[:, None, :]), dtype=float), fd.xy.shape[:2]
    )


def cellwise_laplacian_at_nodes(space, coeffs):
    """Per-cell nodal values of the (elementwise) Laplacian of a FE field."""
    from .basis import eval_basis, node_barycentric

    table = eval_basis(space.degree, node_barycentric(space.degree), order=2)
    hess_phys = space.geometry.push_hessians(table.hessians)
    lap = np.einsum("cbnii->cbn", hess_phys)
    return np.einsum("cb,cbn->cn", coeffs[space.cell_dofs], lap)


def oswald_interpolant(space, cell_values):
    """Average per-node values of a discontinuous field into the space.

    cell_values has shape (num_cells, n_local): the field's value at each
    cell's nodes.  Each global node receives the arithmetic mean of the
    values from its adjacent cells.
    """
    sums = np.zeros(space.ndofs)
    counts = np.zeros(space.ndofs)
    np.add.at(sums, space.cell_dofs, cell_values)
    np.add.at(counts, space.cell_dofs, 1.0)
    counts[counts == 0.0] = 1.0
    return sums / counts
