from fem_cases import cauchy_mesh, neumann_mesh  # noqa: F401
