"""Direct solution of the sparse symmetric indefinite saddle system.

The contract is the relative residual bound, not the algorithm: a sparse
LU factorization with pivoting is used, followed by a few steps of
iterative refinement if needed.  Each solve owns its factorization, so
distinct systems may be solved concurrently.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import DiscreteSolution

__all__ = ["solve", "interpolate", "SolverError", "SingularSystemError"]

DEFAULT_TOL = 1e-10
_REFINE_STEPS = 3


class SolverError(Exception):
    """Solve did not reach the requested residual; carries the achieved one."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularSystemError(SolverError):
    """Factorization detected an (exactly) singular system."""


def solve(system, tol=DEFAULT_TOL):
    """Solve a SaddleSystem to relative residual tol (default 1e-10)."""
    import scipy.sparse as sp

    K = system.matrix.tocsc()
    b = system.rhs
    # symmetric equilibration: the penalty weights spread the entry scales
    # over many orders of magnitude, which otherwise dominates the forward
    # error of the factorization
    d = np.sqrt(abs(K).max(axis=1).toarray().ravel())
    d[d == 0.0] = 1.0
    Dinv = sp.diags(1.0 / d)
    Ks = (Dinv @ K @ Dinv).tocsc()
    bs = b / d
    try:
        lu = spla.splu(Ks)
        y = lu.solve(bs)
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization breakdown: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise SingularSystemError("factorization produced non-finite values")

    bsnorm = float(np.linalg.norm(bs))
    for _ in range(_REFINE_STEPS):
        rs = bs - Ks @ y
        if np.linalg.norm(rs) <= 0.01 * tol * max(bsnorm, 1e-300):
            break
        y = y + lu.solve(rs)
    x = y / d

    bnorm = float(np.linalg.norm(b))
    res = float(np.linalg.norm(K @ x - b))
    rel = res / bnorm if bnorm > 0.0 else res
    if rel > tol:
        raise SolverError(
            f"solver did not converge: relative residual {rel:.3e} > {tol:.1e}",
            residual=rel,
        )

    nv, nw = system.n_primal, system.n_adjoint
    return DiscreteSolution(
        u=x[:nv],
        z=x[nv : nv + nw],
        residual=rel,
        multipliers=x[nv + nw :],
    )


def interpolate(field, space):
    """Nodal interpolation of a callable field onto the space's P_k nodes."""
    return space.interpolate(field)
