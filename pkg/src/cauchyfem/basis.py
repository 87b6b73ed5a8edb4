"""Reference Lagrange bases (P1, P2) and quadrature on triangles and segments.

The reference triangle has vertices (0,0), (1,0), (0,1); barycentric
coordinates are (1-x-y, x, y).  P2 edge node i sits at the midpoint of the
edge opposite vertex i, which fixes the global DOF numbering.  All tables
are immutable after construction.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "BasisTable",
    "QuadratureRule",
    "eval_basis",
    "quadrature",
    "node_barycentric",
    "CellGeometry",
    "reference_integral",
]

MAX_EXACTNESS = 6


class BasisTable:
    """Values and derivatives of the reference basis at a point set.

    values has shape (nb,) + pts, gradients (nb,) + pts + (2,) and second
    derivatives (nb,) + pts + (2, 2), where pts is the shape of the input
    point array without its barycentric axis.
    """

    def __init__(self, degree, values, gradients=None, hessians=None):
        self.degree = degree
        self.values = values
        self.gradients = gradients
        self.hessians = hessians

    @property
    def n_basis(self):
        return self.values.shape[0]


def node_barycentric(degree):
    """Barycentric coordinates of the P1/P2 nodes in local order."""
    if degree == 1:
        return np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    if degree == 2:
        return np.array(
            [
                [1.0, 0, 0],
                [0, 1.0, 0],
                [0, 0, 1.0],
                [0, 0.5, 0.5],
                [0.5, 0, 0.5],
                [0.5, 0.5, 0],
            ]
        )
    raise ValueError(f"unsupported degree {degree}")


def eval_basis(degree, points, order=2):
    """Evaluate the reference basis at barycentric points.

    points is an array (..., 3) of barycentric coordinates inside the
    closed reference triangle.  order selects how many derivative tables
    are filled (0: values, 1: +gradients, 2: +second derivatives).
    Derivatives are with respect to the reference coordinates (x, y).
    """
    if degree not in (1, 2):
        raise ValueError(f"unsupported degree {degree}")
    lam = np.asarray(points, dtype=float)
    if lam.shape[-1] != 3:
        raise ValueError("barycentric points must have a trailing axis of size 3")
    base = lam.shape[:-1]
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]

    # reference gradients of the barycentric coordinates
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

    if degree == 1:
        values = np.stack([l0, l1, l2])
        grads = hess = None
        if order >= 1:
            grads = np.broadcast_to(
                dlam.reshape((3,) + (1,) * len(base) + (2,)), (3,) + base + (2,)
            ).copy()
        if order >= 2:
            hess = np.zeros((3,) + base + (2, 2))
        return BasisTable(1, values, grads, hess)

    lams = [l0, l1, l2]
    values = np.empty((6,) + base)
    for i in range(3):
        values[i] = lams[i] * (2.0 * lams[i] - 1.0)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        values[3 + i] = 4.0 * lams[j] * lams[k]

    grads = hess = None
    if order >= 1:
        grads = np.empty((6,) + base + (2,))
        for i in range(3):
            grads[i] = (4.0 * lams[i] - 1.0)[..., None] * dlam[i]
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[3 + i] = 4.0 * (lams[j][..., None] * dlam[k] + lams[k][..., None] * dlam[j])
    if order >= 2:
        hess = np.empty((6,) + base + (2, 2))
        for i in range(3):
            hess[i] = 4.0 * np.multiply.outer(np.ones(base), np.outer(dlam[i], dlam[i]))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            sym = np.outer(dlam[j], dlam[k])
            sym = sym + sym.T
            hess[3 + i] = 4.0 * np.multiply.outer(np.ones(base), sym)
    return BasisTable(2, values, grads, hess)


class QuadratureRule:
    """Positive-weight rule on the reference triangle or the unit segment.

    Triangle points are barycentric (nq, 3) and weights sum to 1/2;
    segment points are parameters in [0, 1] and weights sum to 1.
    """

    def __init__(self, domain, points, weights, degree):
        self.domain = domain
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.degree = degree


def _orbit1(a):
    # permutations of (1-2a, a, a)
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _orbit2(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _triangle_rule(exactness):
    if exactness <= 1:
        return np.array([[1.0, 1.0, 1.0]]) / 3.0, np.array([0.5]), 1
    if exactness == 2:
        pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        return pts, np.full(3, 1.0 / 6.0), 2
    if exactness <= 4:
        # Dunavant degree 4, 6 points, all weights positive
        pts = _orbit1(0.445948490915965) + _orbit1(0.091576213509771)
        w = [0.223381589678011] * 3 + [0.109951743655322] * 3
        return np.array(pts), 0.5 * np.array(w), 4
    if exactness == 5:
        pts = [(1 / 3.0, 1 / 3.0, 1 / 3.0)]
        pts += _orbit1(0.470142064105115) + _orbit1(0.101286507323456)
        w = [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3
        return np.array(pts), 0.5 * np.array(w), 5
    if exactness == 6:
        # Dunavant degree 6, 12 points, all weights positive
        pts = _orbit1(0.249286745170910) + _orbit1(0.063089014491502)
        pts += _orbit2(0.310352451033785, 0.636502499121399)
        w = [0.116786275726379] * 3 + [0.050844906370207] * 3
        w += [0.082851075618374] * 6
        return np.array(pts), 0.5 * np.array(w), 6
    raise ValueError(f"triangle exactness {exactness} above supported maximum {MAX_EXACTNESS}")


def quadrature(domain, exactness):
    """Quadrature rule of the requested polynomial exactness (at most 6)."""
    if exactness > MAX_EXACTNESS:
        raise ValueError(f"exactness {exactness} above supported maximum {MAX_EXACTNESS}")
    if domain == "triangle":
        pts, w, deg = _triangle_rule(exactness)
        return QuadratureRule("triangle", pts, w, deg)
    if domain == "segment":
        npts = max(1, math.ceil((exactness + 1) / 2))
        x, w = np.polynomial.legendre.leggauss(npts)
        return QuadratureRule("segment", 0.5 * (x + 1.0), 0.5 * w, 2 * npts - 1)
    raise ValueError(f"unknown quadrature domain '{domain}'")


def reference_integral(px, py):
    """Exact integral of x^px * y^py over the reference triangle."""
    return math.factorial(px) * math.factorial(py) / math.factorial(px + py + 2)


class CellGeometry:
    """Affine maps of every cell of a mesh, vectorized.

    jac[c] maps reference to physical coordinates, x = v0 + jac @ xref.
    Gradients transform by inv_jac_t, second derivatives by
    inv_jac.T @ H @ inv_jac (affine maps carry no curvature terms).
    """

    def __init__(self, mesh):
        p = mesh.vertices[mesh.cells]
        self.v0 = p[:, 0]
        jac = np.empty((mesh.num_cells, 2, 2))
        jac[:, :, 0] = p[:, 1] - p[:, 0]
        jac[:, :, 1] = p[:, 2] - p[:, 0]
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(np.abs(det) < 1e-14):
            raise ValueError("singular cell Jacobian")
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv /= det[:, None, None]
        self.jac = jac
        self.det = det
        self.inv_jac = inv
        self.inv_jac_t = np.transpose(inv, (0, 2, 1))

    def map_points(self, ref):
        """Reference points (nq, 2) to physical points (nc, nq, 2)."""
        return self.v0[:, None, :] + np.einsum("cij,qj->cqi", self.jac, ref)

    def push_gradients(self, grads_ref):
        """Reference gradients (nb, nq, 2) to physical (nc, nb, nq, 2)."""
        return np.einsum("cij,bqj->cbqi", self.inv_jac_t, grads_ref)

    def push_hessians(self, hess_ref):
        """Reference second derivatives (nb, nq, 2, 2) to physical (nc, nb, nq, 2, 2)."""
        return np.einsum("cim,bqij,cjn->cbqmn", self.inv_jac, hess_ref, self.inv_jac)

    def pull_points(self, cells, xy):
        """Physical points (..., 2) to reference coordinates within given cells."""
        rel = xy - self.v0[cells]
        return np.einsum("...ij,...j->...i", self.inv_jac[cells], rel)
