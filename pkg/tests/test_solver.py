import dataclasses

import numpy as np
import pytest

from config import QuadratureSettings
from discretization import (
    LoadAssembler, TimeGrid, assemble_fem, assemble_load, build_lag_weights,
)
from exceptions import NumericalError, OracleSizeError
from harness import example_exponent, example_spec
from kernel_engine import VariableExponent, build_jacobi_rule, build_legendre_rule
from model_transform import build_transformed_problem
from solver import (
    SolutionGrid, build_step_system, dense_oracle_solve, solve_all, step,
)

SETTINGS = QuadratureSettings(jacobi_nodes=32, legendre_nodes=8, grading_levels=24)


def _setup(problem, N, M):
    grid = TimeGrid(N, problem.expiry)
    fem = assemble_fem(M, problem.x_domain)
    weights = build_lag_weights(problem.alpha, grid, build_jacobi_rule(problem.alpha.alpha0, 32),
                                build_legendre_rule(8), allow_nonflat=True)
    return grid, fem, weights


def test_zero_data_gives_zero_solution(zero_problem):
    grid = solve_all(zero_problem, 8, 8, SETTINGS)
    assert np.all(grid.w == 0.0)
    assert np.all(grid.u == 0.0)


def test_step_with_zero_load_is_zero(example_problem):
    problem = example_problem("2", 0.5)
    _, fem, weights = _setup(problem, 4, 4)
    system = build_step_system(fem, weights, problem.lam, problem.sigma)
    history = np.zeros((5, fem.size))
    assert np.all(step(3, history, fem, weights, np.zeros(fem.size), system) == 0.0)


def test_single_node_single_step(example_problem):
    problem = example_problem("2", 0.5)
    grid, fem, weights = _setup(problem, 1, 2)
    system = build_step_system(fem, weights, problem.lam, problem.sigma)
    load = assemble_load(problem, fem, grid, weights, 1)
    h = fem.h
    expected = load[0] / (system.a * 4.0 * h / 6.0 + system.b * 2.0 / h)
    result = step(1, np.zeros((2, 1)), fem, weights, load, system)
    assert result[0] == pytest.approx(expected, rel=1e-14)
    assert system.a == pytest.approx(1.0 + weights.q_lags[0] + problem.lam * weights.beta_lags[0])


def test_non_positive_step_matrix_is_rejected(example_problem):
    problem = example_problem("2", 0.5)
    _, fem, weights = _setup(problem, 4, 4)
    broken = dataclasses.replace(weights, q_lags=np.concatenate([[-2.0], weights.q_lags[1:]]))
    with pytest.raises(NumericalError, match="smaller time step"):
        build_step_system(fem, broken, problem.lam, problem.sigma)


def test_two_step_recursion_by_hand(example_problem):
    problem = example_problem("1", 0.4)
    grid, fem, weights = _setup(problem, 2, 3)
    assembler = LoadAssembler(problem, fem, grid, weights)
    mass, stiffness = fem.mass.toarray(), fem.stiffness.toarray()
    lam, diffusion = problem.lam, 0.5 * problem.sigma ** 2

    def block(lag, identity):
        return ((identity + weights.q_lags[lag] + lam * weights.beta_lags[lag]) * mass
                + diffusion * weights.beta_lags[lag] * stiffness)

    w1 = np.linalg.solve(block(0, 1.0), assembler.load(1))
    w2 = np.linalg.solve(block(0, 1.0), assembler.load(2) - block(1, 0.0) @ w1)

    solution = solve_all(problem, 2, 3, SETTINGS)
    assert np.allclose(solution.w[1], w1, rtol=0.0, atol=1e-13)
    assert np.allclose(solution.w[2], w2, rtol=0.0, atol=1e-13)


def test_solution_grid_invariants(example_problem):
    solution = solve_all(example_problem("3", 0.7), 8, 8, SETTINGS)
    assert solution.w.shape == (9, 7)
    assert np.all(solution.w[0] == 0.0)
    assert np.allclose(solution.u[0], np.sin(np.pi * solution.x_nodes), atol=1e-14)
    for key in ("N", "M", "alpha0", "sigma", "rate", "expiry", "quadrature",
                "stability_norm", "kernel_bounds", "gronwall_ok", "alpha_star"):
        assert key in solution.meta
    assert solution.meta["alpha_star"] == pytest.approx(0.7 + 1.0 / 11.0, rel=1e-12)
    assert solution.meta["gronwall_ok"]
    with pytest.raises(NumericalError):
        SolutionGrid(w=np.ones((2, 3)), u=np.ones((2, 3)), x_nodes=np.zeros(3), t_nodes=np.zeros(2))


def test_nonflat_exponent_is_reported(example_problem):
    solution = solve_all(example_problem("1", 0.4), 4, 4, SETTINGS)
    assert any("not flat" in note for note in solution.meta["diagnostics"])


def test_constant_exponent_code_paths_agree():
    spec = example_spec("2")
    constant = build_transformed_problem(spec, VariableExponent.constant(0.5))
    degenerate = build_transformed_problem(spec, VariableExponent.polynomial(0.5, 0.0, 1))
    first = solve_all(constant, 8, 8, SETTINGS)
    second = solve_all(degenerate, 8, 8, SETTINGS)
    assert np.array_equal(first.w, second.w)
    assert np.array_equal(first.u, second.u)


@pytest.mark.parametrize("example_id, alpha0", [
    ("1", 0.1), ("1", 0.9), ("2", 0.1), ("2", 0.9), ("3", 0.1), ("3", 0.9),
])
def test_step_matrix_positive_for_presets(example_id, alpha0):
    problem = build_transformed_problem(example_spec(example_id), example_exponent(example_id, alpha0))
    _, fem, weights = _setup(problem, 512, 8)
    system = build_step_system(fem, weights, problem.lam, problem.sigma)
    assert system.a > 0.0


def test_stability_norm_stays_bounded(example_problem):
    problem = example_problem("2", 0.5)
    norms = [solve_all(problem, N, 16, SETTINGS).meta["stability_norm"] for N in (16, 32, 64, 128, 256)]
    for coarse, fine in zip(norms[:-1], norms[1:]):
        assert fine / coarse == pytest.approx(1.0, abs=0.05)


def test_oracle_refuses_large_instances(example_problem):
    with pytest.raises(OracleSizeError):
        dense_oracle_solve(example_problem("2"), 128, 64, SETTINGS)


def test_oracle_zero_forcing(zero_problem):
    assert np.all(dense_oracle_solve(zero_problem, 2, 3, SETTINGS).w == 0.0)


@pytest.mark.parametrize("example_id", ["1", "2", "3"])
def test_oracle_agrees_at_small_size(example_problem, example_id):
    problem = example_problem(example_id, 0.4)
    fast = solve_all(problem, 4, 4, SETTINGS)
    dense = dense_oracle_solve(problem, 4, 4, SETTINGS)
    assert np.max(np.abs(fast.u - dense.u)) <= 1e-10


def test_oracle_agrees_with_boundary_lift():
    spec = example_spec("call")
    problem = build_transformed_problem(spec, example_exponent("call", 0.5))
    fast = solve_all(problem, 2, 4, SETTINGS)
    dense = dense_oracle_solve(problem, 2, 4, SETTINGS)
    assert np.max(np.abs(fast.u - dense.u)) <= 1e-10


@pytest.mark.slow
@pytest.mark.parametrize("example_id", ["1", "2", "3"])
@pytest.mark.parametrize("N, M", [(2, 3), (4, 4), (8, 8)])
def test_oracle_equivalence_grid(example_problem, example_id, N, M):
    problem = example_problem(example_id, 0.4)
    fast = solve_all(problem, N, M, SETTINGS)
    dense = dense_oracle_solve(problem, N, M, SETTINGS)
    assert np.max(np.abs(fast.u - dense.u)) <= 1e-10
