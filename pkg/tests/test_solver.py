import numpy as np
import pytest
import scipy.sparse as sp

from fem_cases import cip_config, linear_solution, polynomial_spec, quadratic_solution
from cauchyfem.assembly import ProblemSpec, SaddleSystem, assemble_system
from cauchyfem.harness import PROBLEMS, exact_bubble
from cauchyfem.mesh import build_unit_square_mesh, tag_boundary
from cauchyfem.solver import SingularSystemError, SolverError, interpolate, solve
from cauchyfem.space import FeSpace


def test_zero_rhs_zero_solution(cauchy_mesh):
    spec = ProblemSpec(sigma=1.0, f=lambda xy: np.zeros(xy.shape[:-1]),
                       psi=lambda xy, n: np.zeros(xy.shape[:-1]))
    system, _ = assemble_system(cauchy_mesh, spec, cip_config())
    sol = solve(system)
    assert np.linalg.norm(sol.u) == 0.0
    assert sol.residual == 0.0


@pytest.mark.parametrize("degree,exact,n", [(1, linear_solution(), 4),
                                            (1, linear_solution(), 8),
                                            (2, quadratic_solution(), 4)])
def test_exact_polynomial_reproduced(degree, exact, n):
    tm = tag_boundary(build_unit_square_mesh(n, jitter=0.2, seed=n), "cauchy-topright")
    spec = polynomial_spec(exact)
    system, blocks = assemble_system(tm, spec, cip_config(degree=degree))
    sol = solve(system)
    ui = blocks.space.interpolate(lambda xy: exact.value(xy))
    assert np.abs(sol.u - ui).max() < 1e-9
    assert np.abs(sol.z).max() < 1e-9


def test_residual_bound_holds(cauchy_mesh):
    case = PROBLEMS["cauchy-laplace"]
    spec = case.make_spec()
    system, _ = assemble_system(cauchy_mesh, spec, cip_config())
    sol = solve(system, tol=1e-10)
    assert sol.residual <= 1e-10


def test_quartic_not_representable_but_convergent():
    # the quartic bubble is outside the P2 space: errors are nonzero and
    # shrink under refinement
    from cauchyfem.analysis import error_norms

    case = PROBLEMS["cauchy-laplace"]
    errs = []
    for n in (4, 16):
        tm = tag_boundary(build_unit_square_mesh(n, jitter=0.2, seed=n), "cauchy-topright")
        spec = case.make_spec()
        system, blocks = assemble_system(tm, spec, cip_config(degree=2, gamma_s=0.001))
        sol = solve(system)
        l2, _, _, _ = error_norms(blocks.space, sol.u, spec.exact)
        errs.append(l2)
    assert errs[0] > 1e-4
    assert errs[1] < 0.5 * errs[0]


def test_permutation_invariance(cauchy_mesh):
    case = PROBLEMS["cauchy-laplace"]
    spec = case.make_spec()
    system, _ = assemble_system(cauchy_mesh, spec, cip_config())
    sol = solve(system)
    rng = np.random.default_rng(3)
    p = rng.permutation(system.size)
    P = sp.csr_matrix((np.ones(system.size), (np.arange(system.size), p)))
    permuted = SaddleSystem(
        (P @ system.matrix @ P.T).tocsc(), P @ system.rhs,
        system.n_primal, system.n_adjoint, system.n_constraints,
    )
    try:
        xp = sp.linalg.splu(permuted.matrix.tocsc()).solve(permuted.rhs)
    except RuntimeError:  # pragma: no cover
        pytest.skip("permuted factorization failed")
    x = np.concatenate([sol.u, sol.z, sol.multipliers])
    np.testing.assert_allclose(P.T @ xp, x, atol=1e-9)


def test_mean_constraint_enforced():
    from cauchyfem.assembly import mean_value_vector

    tm = tag_boundary(build_unit_square_mesh(6, jitter=0.15, seed=2), "full-neumann")
    case = PROBLEMS["convdiff-neumann"]
    spec = case.make_spec()
    target = 5.0 / 6.0
    system, blocks = assemble_system(tm, spec, cip_config(degree=1),
                                     mean_constraint=True, mean_value=target)
    sol = solve(system)
    m = mean_value_vector(blocks.space)
    assert m @ sol.u == pytest.approx(target, abs=1e-10)
    assert m @ sol.z == pytest.approx(0.0, abs=1e-10)
    assert sol.multipliers.shape == (2,)


def test_singular_system_reported():
    K = sp.csc_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    system = SaddleSystem(K, np.array([1.0, 1.0]), 1, 1)
    with pytest.raises(SolverError):
        solve(system)


def test_exactly_singular_distinct():
    K = sp.csc_matrix(np.zeros((2, 2)))
    system = SaddleSystem(K, np.array([1.0, 0.0]), 1, 1)
    with pytest.raises(SingularSystemError):
        solve(system)


def test_interpolate_examples(cauchy_mesh):
    space = FeSpace(cauchy_mesh, 2)
    ones = interpolate(lambda xy: np.ones(xy.shape[:-1]), space)
    np.testing.assert_array_equal(ones, 1.0)
    lin = interpolate(lambda xy: xy[..., 0] + xy[..., 1], space)
    corner = np.flatnonzero(
        (space.dof_coords[:, 0] == 1.0) & (space.dof_coords[:, 1] == 1.0)
    )
    assert lin[corner] == pytest.approx(2.0)
    bubble = exact_bubble()
    assert bubble.value(np.array([0.5, 0.5])) == pytest.approx(1.875)
