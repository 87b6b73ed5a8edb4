"""Assembly of the stabilised saddle-point formulation.

The discrete problem couples a primal unknown u_h and an adjoint unknown
z_h through the symmetric block system

    [ S_V  A^T ] [U]   [b_V]
    [ A   -S_W ] [Z] = [b_W]

where A realises the boundary-aware bilinear form a_h (test index in the
adjoint space, trial index in the primal space), S_V collects the data
penalty and the primal interior stabilisation, and S_W the adjoint
penalties.  The PDE is written as

    L u = -div(sigma grad u + beta u) + c u = f,

with flux data psi = (sigma grad u + beta u) . n on the Neumann part and
trace data g on the Dirichlet part.  Boundary conditions are imposed
weakly, so both spaces are the full continuous P_k space.

Assembly is cellwise/facewise with private local buffers merged through
an associative COO accumulation, so the loops could be distributed over
workers without changing results beyond float reassociation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .space import FeSpace

__all__ = [
    "ExactSolution",
    "ProblemSpec",
    "StabilisationConfig",
    "AssembledBlocks",
    "SaddleSystem",
    "DiscreteSolution",
    "assemble_a_h",
    "assemble_data_penalty",
    "assemble_adjoint_penalty",
    "assemble_interior_stabilisation",
    "assemble_load",
    "build_saddle_system",
    "assemble_system",
    "conormal_flux",
    "normal_gradient",
]

STAB_KINDS = ("gals", "cip", "h1", "h1adj")


@dataclass(frozen=True)
class ExactSolution:
    """Manufactured solution with enough derivatives for residual terms.

    value(xy) -> (...), grad(xy) -> (..., 2), hess(xy) -> (..., 2, 2),
    all vectorized over point arrays xy of shape (..., 2).
    """

    value: Callable
    grad: Callable
    hess: Callable


def conormal_flux(exact, sigma, beta=None):
    """Boundary data (sigma grad u + beta u) . n of an exact solution."""
    sigma = _as_matrix(sigma)

    def flux(xy, normals):
        out = np.einsum("...i,ij,...j->...", normals, sigma, exact.grad(xy))
        if beta is not None:
            out = out + np.einsum("...i,...i->...", beta(xy), normals) * exact.value(xy)
        return out

    return flux


def normal_gradient(exact, sigma):
    """Boundary data n . (sigma grad u) of an exact solution."""
    sigma = _as_matrix(sigma)

    def flux(xy, normals):
        return np.einsum("...i,ij,...j->...", normals, sigma, exact.grad(xy))

    return flux


def _as_matrix(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 0:
        return float(sigma) * np.eye(2)
    if sigma.shape != (2, 2):
        raise ValueError("sigma must be a scalar or a 2x2 matrix")
    return sigma


@dataclass
class ProblemSpec:
    """Coefficients and data of one problem instance.

    sigma is a scalar or symmetric positive definite 2x2 matrix; beta and
    div_beta are vectorized callables (or None for no convection); f and g
    take point arrays, psi takes (points, normals).  psi_n is the data for
    the flux penalty (the conormal derivative of the exact solution) and
    defaults to psi, which is correct whenever the solution vanishes on
    the boundary.  delta_f / delta_psi carry data perturbations.
    """

    sigma: object = 1.0
    reaction: float = 0.0
    beta: Optional[Callable] = None
    div_beta: Optional[Callable] = None
    f: Optional[Callable] = None
    psi: Optional[Callable] = None
    psi_n: Optional[Callable] = None
    g: Optional[Callable] = None
    exact: Optional[ExactSolution] = None
    delta_f: Optional[Callable] = None
    delta_psi: Optional[Callable] = None

    def __post_init__(self):
        self.sigma_mat = _as_matrix(self.sigma)
        eigs = np.linalg.eigvalsh(self.sigma_mat)
        if eigs[0] <= 0.0:
            raise ValueError("sigma must be positive definite")
        if self.beta is not None and self.div_beta is None:
            raise ValueError("div_beta is required alongside beta")
        if self.psi_n is None:
            self.psi_n = self.psi

    @property
    def mu_min(self):
        """Smallest diffusion eigenvalue, used by the Peclet weighting."""
        return float(np.linalg.eigvalsh(self.sigma_mat)[0])

    def operator(self, values, grads, hess, xy, adjoint=False):
        """Apply L (or L*) pointwise to a field given by value/grad/hess.

        L u  = -sigma:D2u - beta . grad u - div(beta) u + c u
        L* z = -sigma:D2z + beta . grad z + c z
        """
        out = -np.einsum("ij,...ij->...", self.sigma_mat, hess) + self.reaction * values
        if self.beta is not None:
            conv = np.einsum("...i,...i->...", self.beta(xy), grads)
            if adjoint:
                out = out + conv
            else:
                out = out - conv - self.div_beta(xy) * values
        return out

    def exact_operator(self, xy, adjoint=False):
        if self.exact is None:
            raise ValueError("no exact solution attached")
        return self.operator(
            self.exact.value(xy), self.exact.grad(xy), self.exact.hess(xy), xy, adjoint
        )

    def manufactured_source(self):
        """Source term consistent with the exact solution."""
        return lambda xy: self.exact_operator(xy)

    def check_consistency(self, tmesh, degree=2, tol=1e-10):
        """Verify on one coarse mesh that (f, psi, g) match the exact solution."""
        if self.exact is None:
            return
        space = FeSpace(tmesh, degree)
        vol = space.volume_data(6)
        res = self.f(vol.xy) - self.exact_operator(vol.xy)
        scale = 1.0 + float(np.max(np.abs(self.f(vol.xy))))
        if float(np.max(np.abs(res))) > tol * scale:
            raise ValueError("source f is inconsistent with the exact solution")
        if len(tmesh.gamma_N):
            fd = space.face_data(tmesh.gamma_N, exactness=6)
            data = _boundary_data(self.psi, fd)
            ref = conormal_flux(self.exact, self.sigma_mat, self.beta)(
                fd.xy, fd.normals[:, None, :]
            )
            if float(np.max(np.abs(data - ref))) > tol * (1.0 + np.max(np.abs(ref))):
                raise ValueError("flux data psi is inconsistent with the exact solution")
        if len(tmesh.gamma_D):
            fd = space.face_data(tmesh.gamma_D, exactness=6)
            gval = self.g(fd.xy) if self.g is not None else 0.0
            ref = self.exact.value(fd.xy)
            if float(np.max(np.abs(gval - ref))) > tol * (1.0 + np.max(np.abs(ref))):
                raise ValueError("trace data g is inconsistent with the exact solution")


@dataclass
class StabilisationConfig:
    """Stabilisation kind and penalty parameters.

    kind: 'gals' or 'cip' use the same family on both sides; 'h1adj'
    pairs a CIP primal stabilisation with the strong H1 adjoint term;
    'h1' is the raw H1 term and is only valid on the adjoint side.
    """

    kind: str = "cip"
    gamma_s: float = 0.01
    gamma_d: float = 10.0
    degree: int = 1
    peclet_weighting: bool = False

    def __post_init__(self):
        if self.kind not in STAB_KINDS:
            raise ValueError(f"unknown stabilisation kind '{self.kind}'")
        if self.gamma_s <= 0.0 or self.gamma_d <= 0.0:
            raise ValueError("penalty parameters must be positive")
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")


def _scatter(shape, entries, rows, cols):
    rows = np.broadcast_to(rows[..., :, None], entries.shape)
    cols = np.broadcast_to(cols[..., None, :], entries.shape)
    return sp.coo_matrix(
        (entries.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def _boundary_data(fn, fd):
    """Evaluate boundary data on face quadrature points, (nf, nq)."""
    if fn is None:
        return np.zeros(fd.xy.shape[:2])
    if hasattr(fn, "eval_on_faces"):
        return fn.eval_on_faces(fd.face_ids, fd.t, fd.xy, fd.normals)
    return np.broadcast_to(
        np.asarray(fn(fd.xy, fd.normals[:, None, :]), dtype=float), fd.xy.shape[:2]
    )


def _volume_data_field(fn, vd):
    if fn is None:
        return np.zeros(vd.xy.shape[:2])
    return np.broadcast_to(np.asarray(fn(vd.xy), dtype=float), vd.xy.shape[:2])


def _face_quad_matrix(fd, left, right, coeff):
    """Local face matrices sum_q w_q coeff_f left[f,i,q] right[f,j,q]."""
    return np.einsum("q,fiq,fjq,f->fij", fd.w, left, right, coeff * fd.lengths)


def _face_quad_vector(fd, basis, data, coeff):
    return np.einsum("q,fiq,fq,f->fi", fd.w, basis, data, coeff * fd.lengths)


def _face_quad_scalar(fd, data, coeff):
    return float(np.einsum("q,fq,f->", fd.w, data ** 2, coeff * fd.lengths))


def _operator_on_basis(spec, vd, adjoint=False):
    """L phi_b (or L* phi_b) at volume quadrature points, (nc, nb, nq)."""
    out = -np.einsum("ij,cbqij->cbq", spec.sigma_mat, vd.hess)
    out = out + spec.reaction * vd.values[None, :, :]
    if spec.beta is not None:
        b = spec.beta(vd.xy)
        conv = np.einsum("cqi,cbqi->cbq", b, vd.grads)
        if adjoint:
            out = out + conv
        else:
            out = out - conv - spec.div_beta(vd.xy)[:, None, :] * vd.values[None, :, :]
    return out


def assemble_a_h(tmesh, spec, degree, space=None):
    """The boundary-aware form a_h; rows test (adjoint) side, columns trial.

    a_h(u, v) = (sigma grad u + beta u, grad v) + (c u, v)
                - <(sigma grad u + beta u) . n, v>_{Gamma_N'}
                - <n . sigma grad v, u>_{Gamma_D}
    """
    if space is None:
        space = FeSpace(tmesh, degree)
    vd = space.volume_data()
    N = space.ndofs
    flux = np.einsum("ij,cbqj->cbqi", spec.sigma_mat, vd.grads)
    if spec.beta is not None:
        flux = flux + spec.beta(vd.xy)[:, None, :, :] * vd.values[None, :, :, None]
    local = np.einsum("q,cjqd,ciqd,c->cij", vd.w, flux, vd.grads, vd.det)
    if spec.reaction != 0.0:
        mass = np.einsum("q,jq,iq->ij", vd.w, vd.values, vd.values)
        local = local + spec.reaction * vd.det[:, None, None] * mass[None, :, :]
    A = _scatter((N, N), local, space.cell_dofs, space.cell_dofs)

    if len(tmesh.gamma_Np):
        fd = space.face_data(tmesh.gamma_Np)
        fluxn = fd.normal_flux(spec.sigma_mat)
        if spec.beta is not None:
            bn = np.einsum("fqi,fi->fq", spec.beta(fd.xy), fd.normals)
            fluxn = fluxn + bn[:, None, :] * fd.values
        A = A - _scatter(
            (N, N),
            np.einsum("q,fiq,fjq,f->fij", fd.w, fd.values, fluxn, fd.lengths),
            fd.dofs,
            fd.dofs,
        )
    if len(tmesh.gamma_D):
        fd = space.face_data(tmesh.gamma_D)
        fluxv = fd.normal_flux(spec.sigma_mat)
        A = A - _scatter(
            (N, N),
            np.einsum("q,fiq,fjq,f->fij", fd.w, fluxv, fd.values, fd.lengths),
            fd.dofs,
            fd.dofs,
        )
    return A


def assemble_data_penalty(tmesh, spec, config, space=None):
    """Data penalty s_V^D, its data vector and the data constant.

    s_V^D(u, w) = gamma_D <h^-1 u, w>_{Gamma_D}
                + gamma_D <h (n.sigma grad u), (n.sigma grad w)>_{Gamma_N}

    Returns (matrix, vector, constant) so that the homogeneous penalty of
    u_h against the data is u.S.u - 2 b.u + constant.
    """
    if space is None:
        space = FeSpace(tmesh, config.degree)
    N = space.ndofs
    gd = config.gamma_d
    S = sp.csr_matrix((N, N))
    b = np.zeros(N)
    const = 0.0

    if len(tmesh.gamma_D):
        fd = space.face_data(tmesh.gamma_D)
        coeff = gd / fd.lengths
        S = S + _scatter((N, N), _face_quad_matrix(fd, fd.values, fd.values, coeff), fd.dofs, fd.dofs)
        if spec.g is not None:
            gdat = np.broadcast_to(np.asarray(spec.g(fd.xy), dtype=float), fd.xy.shape[:2])
            np.add.at(b, fd.dofs, _face_quad_vector(fd, fd.values, gdat, coeff))
            const += _face_quad_scalar(fd, gdat, coeff)

    if len(tmesh.gamma_N):
        fd = space.face_data(tmesh.gamma_N)
        fluxn = fd.normal_flux(spec.sigma_mat)
        coeff = gd * fd.lengths
        S = S + _scatter((N, N), _face_quad_matrix(fd, fluxn, fluxn, coeff), fd.dofs, fd.dofs)
        data = _boundary_data(spec.psi_n, fd) + _boundary_data(spec.delta_psi, fd)
        np.add.at(b, fd.dofs, _face_quad_vector(fd, fluxn, data, coeff))
        const += _face_quad_scalar(fd, data, coeff)

    return S, b, const


def assemble_adjoint_penalty(tmesh, config, space=None):
    """Adjoint boundary penalty s_W^D.

    s_W^D(z, v) = gamma_D <h^-1 z, v>_{Gamma_N'}
                + gamma_D <h dn z, dn v>_{Gamma_D'}
    """
    if space is None:
        space = FeSpace(tmesh, config.degree)
    N = space.ndofs
    gd = config.gamma_d
    S = sp.csr_matrix((N, N))
    if len(tmesh.gamma_Np):
        fd = space.face_data(tmesh.gamma_Np)
        coeff = gd / fd.lengths
        S = S + _scatter((N, N), _face_quad_matrix(fd, fd.values, fd.values, coeff), fd.dofs, fd.dofs)
    if len(tmesh.gamma_Dp):
        fd = space.face_data(tmesh.gamma_Dp)
        dn = np.einsum("fbqi,fi->fbq", fd.grads, fd.normals)
        coeff = gd * fd.lengths
        S = S + _scatter((N, N), _face_quad_matrix(fd, dn, dn, coeff), fd.dofs, fd.dofs)
    return S


def _interior_jump_traces(space, which):
    """Stacked two-sided traces on interior faces; jump = side0 - side1."""
    tm = space.tmesh
    ids = tm.faces.interior_ids
    fd0 = space.face_data(ids, side=0)
    fd1 = space.face_data(ids, side=1)
    if which == "normal_gradient":
        a0 = np.einsum("fbqi,fi->fbq", fd0.grads, fd0.normals)
        a1 = np.einsum("fbqi,fi->fbq", fd1.grads, fd1.normals)
    elif which == "laplacian":
        a0 = fd0.laplacians()
        a1 = fd1.laplacians()
    else:
        raise ValueError(which)
    jump = np.concatenate([a0, -a1], axis=1)
    dofs = np.concatenate([fd0.dofs, fd1.dofs], axis=1)
    return fd0, jump, dofs


def _peclet_factors(tmesh, spec, config, face_ids):
    """Face factor min(1, mu / (|beta|_F h_F)) on the given faces."""
    if not (config.peclet_weighting and spec.beta is not None):
        return np.ones(len(face_ids))
    faces = tmesh.faces
    mids = 0.5 * (
        tmesh.mesh.vertices[faces.faces[face_ids, 0]]
        + tmesh.mesh.vertices[faces.faces[face_ids, 1]]
    )
    speed = np.linalg.norm(spec.beta(mids), axis=-1)
    hf = faces.lengths[face_ids]
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, spec.mu_min / np.maximum(speed * hf, 1e-300))


def assemble_interior_stabilisation(tmesh, spec, config, side, space=None):
    """Interior stabilisation block for one side of the formulation.

    side is 'primal' (acts on u_h) or 'adjoint' (acts on z_h).  Returns
    (matrix, consistency vector, data constant); the vector and constant
    are nonzero only for the primal GaLS residual term, which carries the
    source data gamma_S (h^2 (f + delta f), L v)_h.
    """
    if side not in ("primal", "adjoint"):
        raise ValueError(f"unknown side '{side}'")
    if space is None:
        space = FeSpace(tmesh, config.degree)
    kind = config.kind
    if kind == "h1" and side == "primal":
        raise ValueError("H1 stabilisation is only admissible on the adjoint side")
    if kind == "h1adj":
        kind = "h1" if side == "adjoint" else "cip"

    N = space.ndofs
    gs = config.gamma_s
    b = np.zeros(N)
    const = 0.0

    if kind == "h1":
        vd = space.volume_data()
        local = gs * np.einsum("q,ciqd,cjqd,c->cij", vd.w, vd.grads, vd.grads, vd.det)
        return _scatter((N, N), local, space.cell_dofs, space.cell_dofs), b, const

    ids = space.tmesh.faces.interior_ids
    fd0, jump_dn, dofs = _interior_jump_traces(space, "normal_gradient")
    omega = _peclet_factors(tmesh, spec, config, ids)
    S = _scatter(
        (N, N),
        _face_quad_matrix(fd0, jump_dn, jump_dn, gs * omega * fd0.lengths),
        dofs,
        dofs,
    )

    if kind == "cip":
        _, jump_lap, dofs_l = _interior_jump_traces(space, "laplacian")
        S = S + _scatter(
            (N, N),
            _face_quad_matrix(fd0, jump_lap, jump_lap, gs * fd0.lengths ** 3),
            dofs_l,
            dofs_l,
        )
        return S, b, const

    # GaLS residual term gamma_S (h^2 L u, L v)_h
    vd = space.volume_data()
    h2 = tmesh.mesh.h_cell ** 2
    L = _operator_on_basis(spec, vd, adjoint=(side == "adjoint"))
    local = gs * np.einsum("q,ciq,cjq,c->cij", vd.w, L, L, vd.det * h2)
    S = S + _scatter((N, N), local, space.cell_dofs, space.cell_dofs)
    if side == "primal":
        fdat = _volume_data_field(spec.f, vd) + _volume_data_field(spec.delta_f, vd)
        b = np.zeros(N)
        np.add.at(
            b,
            space.cell_dofs,
            gs * np.einsum("q,ciq,cq,c->ci", vd.w, L, fdat, vd.det * h2),
        )
        const = gs * float(np.einsum("q,cq,c->", vd.w, fdat ** 2, vd.det * h2))
    return S, b, const


def assemble_load(tmesh, spec, degree, space=None):
    """Right-hand side of the first (adjoint-tested) equation.

    l_h(w) = (f + delta f, w) + <psi + delta psi, w>_{Gamma_N}
             - <n . sigma grad w, g>_{Gamma_D},

    the last term being the data companion of the Dirichlet term of a_h
    (absent in every experiment with g = 0).
    """
    if space is None:
        space = FeSpace(tmesh, degree)
    vd = space.volume_data()
    b = np.zeros(space.ndofs)
    fdat = _volume_data_field(spec.f, vd) + _volume_data_field(spec.delta_f, vd)
    np.add.at(
        b,
        space.cell_dofs,
        np.einsum("q,iq,cq,c->ci", vd.w, vd.values, fdat, vd.det),
    )
    if len(tmesh.gamma_N):
        fd = space.face_data(tmesh.gamma_N)
        data = _boundary_data(spec.psi, fd) + _boundary_data(spec.delta_psi, fd)
        np.add.at(b, fd.dofs, _face_quad_vector(fd, fd.values, data, np.ones(len(fd.lengths))))
    if spec.g is not None and len(tmesh.gamma_D):
        fd = space.face_data(tmesh.gamma_D)
        fluxw = fd.normal_flux(spec.sigma_mat)
        gdat = np.broadcast_to(np.asarray(spec.g(fd.xy), dtype=float), fd.xy.shape[:2])
        np.add.at(b, fd.dofs, -_face_quad_vector(fd, fluxw, gdat, np.ones(len(fd.lengths))))
    return b


@dataclass
class AssembledBlocks:
    """All blocks of one discrete problem, kept split for the semi-norms.

    The data penalty (S_Vd, b_Vd, c_Vd) and the interior stabilisation
    (S_Vs, b_Vs, c_Vs) are stored separately so that the monitor can
    evaluate the stabilisation semi-norm on its own; the saddle system
    uses their sum.
    """

    space: FeSpace
    A: sp.spmatrix
    S_Vd: sp.spmatrix
    S_Vs: sp.spmatrix
    S_W: sp.spmatrix
    b_Vd: np.ndarray
    b_Vs: np.ndarray
    b_W: np.ndarray
    c_Vd: float = 0.0
    c_Vs: float = 0.0
    spec: Optional[ProblemSpec] = None
    config: Optional[StabilisationConfig] = None

    @property
    def S_V(self):
        return (self.S_Vd + self.S_Vs).tocsr()

    @property
    def b_V(self):
        return self.b_Vd + self.b_Vs

    @property
    def sv_const(self):
        return self.c_Vd + self.c_Vs


@dataclass
class SaddleSystem:
    """Sparse symmetric indefinite system over (U, Z) plus constraints."""

    matrix: sp.spmatrix
    rhs: np.ndarray
    n_primal: int
    n_adjoint: int
    n_constraints: int = 0
    space: Optional[FeSpace] = None

    @property
    def size(self):
        return self.matrix.shape[0]


def mean_value_vector(space):
    """Integrals of the basis functions, the mean-constraint row."""
    vd = space.volume_data()
    m = np.zeros(space.ndofs)
    np.add.at(m, space.cell_dofs, np.einsum("q,iq,c->ci", vd.w, vd.values, vd.det))
    return m


def build_saddle_system(blocks, mean_constraint=False, mean_value=0.0):
    """Assemble the global symmetric system [[S_V, A^T], [A, -S_W]].

    With mean_constraint, two Lagrange-multiplier rows fix the averages of
    the approximate solutions: the mean of u_h to the prescribed value and
    the mean of z_h to zero (the pure-Neumann layout otherwise leaves a
    constant adjoint mode, and the primal mean selects among solutions of
    the flux-data problem).
    """
    nv = blocks.S_V.shape[0]
    nw = blocks.S_W.shape[0]
    if blocks.A.shape != (nw, nv):
        raise ValueError("block dimension mismatch")
    K = sp.bmat(
        [[blocks.S_V, blocks.A.T], [blocks.A, -blocks.S_W]], format="csr"
    )
    rhs = np.concatenate([blocks.b_V, blocks.b_W])
    ncon = 0
    if mean_constraint:
        m = mean_value_vector(blocks.space)
        C = sp.bmat(
            [
                [sp.csr_matrix(m[None, :]), sp.csr_matrix((1, nw))],
                [sp.csr_matrix((1, nv)), sp.csr_matrix(m[None, :])],
            ],
            format="csr",
        )
        K = sp.bmat([[K, C.T], [C, None]], format="csr")
        rhs = np.concatenate([rhs, [mean_value, 0.0]])
        ncon = 2
    return SaddleSystem(K.tocsc(), rhs, nv, nw, ncon, blocks.space)


def assemble_system(tmesh, spec, config, mean_constraint=False, mean_value=0.0, space=None):
    """Assemble every block and the global system in one call."""
    if space is None:
        space = FeSpace(tmesh, config.degree)
    A = assemble_a_h(tmesh, spec, config.degree, space=space)
    S_vd, b_vd, c_vd = assemble_data_penalty(tmesh, spec, config, space=space)
    S_vs, b_vs, c_vs = assemble_interior_stabilisation(tmesh, spec, config, "primal", space=space)
    S_wd = assemble_adjoint_penalty(tmesh, config, space=space)
    S_ws, _, _ = assemble_interior_stabilisation(tmesh, spec, config, "adjoint", space=space)
    b_W = assemble_load(tmesh, spec, config.degree, space=space)
    blocks = AssembledBlocks(
        space=space,
        A=A,
        S_Vd=S_vd.tocsr(),
        S_Vs=S_vs.tocsr(),
        S_W=(S_wd + S_ws).tocsr(),
        b_Vd=b_vd,
        b_Vs=b_vs,
        b_W=b_W,
        c_Vd=c_vd,
        c_Vs=c_vs,
        spec=spec,
        config=config,
    )
    system = build_saddle_system(blocks, mean_constraint, mean_value)
    return system, blocks


@dataclass
class DiscreteSolution:
    """Solution coefficients and solve diagnostics."""

    u: np.ndarray
    z: np.ndarray
    residual: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
