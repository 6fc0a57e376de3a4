import logging
import math
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import make_spec
from exceptions import DomainError, NumericalError, OutOfDomainError
from harness import example_exponent, example_spec
from kernel_engine import VariableExponent
import model_transform
from model_transform import (
    SpatialTransformWeight, build_transformed_problem, lambda_coeff, reconstruct_option_price,
    reconstruct_u, transform_u,
)

ALPHA = VariableExponent.polynomial(0.5, -1.0 / 11.0, 2)


def test_lambda_coeff_examples():
    assert lambda_coeff(0.45, 0.03) == pytest.approx(0.5 * (0.225 + 0.03 / 0.45) ** 2, rel=1e-14)
    assert lambda_coeff(0.45, 0.03) == pytest.approx(0.0425347, rel=1e-5)
    assert lambda_coeff(0.5, 0.25) == pytest.approx(0.28125, rel=1e-14)
    assert lambda_coeff(0.8, 0.0) == pytest.approx(0.8 ** 2 / 8.0, rel=1e-14)


def test_lambda_coeff_forms_agree():
    rng = np.random.default_rng(11)
    for sigma, rate in zip(rng.uniform(0.01, 2.0, 1000), rng.uniform(0.0, 1.0, 1000)):
        value = lambda_coeff(sigma, rate)
        expanded = sigma ** 2 / 8.0 + rate ** 2 / (2.0 * sigma ** 2) + rate / 2.0
        assert value > 0.0
        assert abs(value - expanded) / expanded <= 1e-13


def test_lambda_coeff_rejects_bad_sigma():
    with pytest.raises(DomainError):
        lambda_coeff(0.0, 0.1)


def test_model_spec_validation():
    with pytest.raises(DomainError):
        make_spec(sigma=-0.1)
    with pytest.raises(DomainError):
        make_spec(x_domain=(1.0, 0.0))
    with pytest.raises(DomainError):
        make_spec(x_domain=(0.0, math.inf))


def test_spatial_transform_round_trip():
    weight = SpatialTransformWeight.for_model(0.45, 0.03)
    rng = np.random.default_rng(5)
    x, value = rng.uniform(-2.0, 2.0, 50), rng.normal(size=50)
    assert np.allclose(weight.apply(x, weight.apply_inverse(x, value)), value, rtol=1e-15, atol=0.0)


def test_example_one_transform():
    problem = build_transformed_problem(example_spec("1"), example_exponent("1", 0.4))
    kappa = 0.5 - 0.03 / 0.45 ** 2
    x = np.linspace(0.0, 1.0, 11)
    assert problem.homogenization is None
    assert problem.kappa == pytest.approx(kappa)
    assert np.allclose(problem.c_star(x), np.exp(-kappa * x) * np.sin(np.pi * x), atol=1e-15)
    assert problem.chi_is_static
    assert np.all(problem.dtL_star(x, 0.3) == 0.0)
    assert problem.diagnostics == ()


def test_zero_data_gives_zero_forcing(zero_problem):
    x = np.linspace(0.0, 1.0, 7)
    assert np.all(zero_problem.c_star(x) == 0.0)
    assert np.all(zero_problem.c_star_prime(x) == 0.0)
    assert np.all(zero_problem.chi(x, 0.5) == 0.0)
    assert np.all(zero_problem.dtL_star(x, 0.5) == 0.0)


def test_constant_boundaries_are_lifted():
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    spec = make_spec(terminal_payoff=one, left_boundary=one, right_boundary=one)
    problem = build_transformed_problem(spec, ALPHA)
    x = np.linspace(0.0, 1.0, 9)
    assert problem.homogenization is not None
    assert np.allclose(problem.lift(x, 0.4), 1.0)
    assert np.allclose(problem.c_star(x), 0.0, atol=1e-15)
    assert np.allclose(problem.chi(x, 0.4), -spec.rate * np.exp(-problem.kappa * x), rtol=1e-14)
    assert np.allclose(problem.dtL_star(x, 0.4), 0.0)


def test_corner_mismatch_is_a_diagnostic(caplog):
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    spec = make_spec(terminal_payoff=lambda S: np.sin(np.pi * np.log(S)), left_boundary=one)
    with caplog.at_level(logging.WARNING):
        problem = build_transformed_problem(spec, ALPHA)
    assert any("corner mismatch" in note for note in problem.diagnostics)
    assert "corner mismatch" in caplog.text


def test_missing_derivatives_fall_back_to_differences():
    payoff = lambda S: np.sin(np.pi * np.log(S))
    exact = build_transformed_problem(
        make_spec(terminal_payoff=payoff, terminal_slope=lambda S: np.pi * np.cos(np.pi * np.log(S)) / S),
        ALPHA)
    approximate = build_transformed_problem(make_spec(terminal_payoff=payoff, terminal_slope=None), ALPHA)
    x = np.linspace(0.05, 0.95, 19)
    assert np.allclose(approximate.c_star_prime(x), exact.c_star_prime(x), atol=1e-7)
    assert any("terminal slope" in note for note in approximate.diagnostics)


def test_reversed_boundary_rate():
    spec = example_spec("call")
    problem = build_transformed_problem(spec, example_exponent("call", 0.5))
    lift = problem.homogenization
    t = 0.3
    h = 1e-6
    fd = (lift.right(t + h) - lift.right(t - h)) / (2 * h)
    assert lift.right_rate(t) == pytest.approx(fd, rel=1e-6)
    assert lift.right_rate(t) > 0.0
    assert problem.diagnostics == ()


def test_reconstruct_u_initial_level_recovers_payoff():
    problem = build_transformed_problem(example_spec("1"), example_exponent("1", 0.4))
    x = np.linspace(0.1, 0.9, 9)
    u0 = reconstruct_u(np.zeros_like(x), problem, 0, x, 0.1)
    assert np.allclose(u0, np.sin(np.pi * x), rtol=0.0, atol=1e-15)


def test_reconstruct_u_identity_transform():
    spec = make_spec(sigma=0.5, rate=0.125, terminal_payoff=lambda S: np.sin(np.pi * np.log(S)))
    problem = build_transformed_problem(spec, ALPHA)
    assert problem.kappa == 0.0
    x = np.linspace(0.1, 0.9, 9)
    w = np.linspace(-1.0, 1.0, 9)
    assert np.allclose(reconstruct_u(w, problem, 3, x, 0.1), w + problem.c_star(x), atol=1e-15)


def test_transform_round_trip():
    problem = build_transformed_problem(example_spec("call"), example_exponent("call", 0.5))
    x = np.linspace(-1.4, 1.4, 15)
    u = np.random.default_rng(2).normal(size=15)
    w = transform_u(u, problem, 4, x, 0.05)
    assert np.allclose(reconstruct_u(w, problem, 4, x, 0.05), u, rtol=0.0, atol=1e-12)


def _surface():
    spec = make_spec(terminal_payoff=lambda S: np.sin(np.pi * np.log(S)))
    x_interior = np.array([0.25, 0.5, 0.75])
    tau = np.array([0.0, 0.5, 1.0])
    u = np.vstack([np.sin(np.pi * x_interior), [0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    grid = SimpleNamespace(u=u, x_nodes=x_interior, t_nodes=tau)
    return reconstruct_option_price(grid, spec)


def test_price_surface_grid_points():
    surface = _surface()
    assert surface.price(math.exp(0.5), 0.5) == pytest.approx(0.2, rel=1e-13)
    assert surface.price(math.exp(0.75), 0.0) == pytest.approx(0.6, rel=1e-13)


def test_price_surface_expiry_is_payoff():
    surface = _surface()
    spots = np.exp(np.array([0.25, 0.5, 0.75]))
    assert np.allclose(surface.price(spots, 1.0), np.sin(np.pi * np.log(spots)), atol=1e-14)


def test_price_surface_mid_cell_interpolation():
    surface = _surface()
    assert surface.price(math.exp(0.375), 0.5) == pytest.approx(0.15, rel=1e-12)
    assert surface.price(math.exp(0.5), 0.25) == pytest.approx(0.35, rel=1e-12)


def test_price_surface_domain_errors():
    surface = _surface()
    with pytest.raises(OutOfDomainError):
        surface.price(0.5, 0.5)
    with pytest.raises(OutOfDomainError):
        surface.price(math.e * 1.01, 0.5)
    with pytest.raises(OutOfDomainError):
        surface.price(1.5, 1.5)


def test_price_surface_table():
    table = _surface().table()
    assert table.shape == (3, 5)
    assert table.index[0] == 0.0 and table.index[-1] == 1.0
    assert table.iloc[-1, 0] == 0.0


@pytest.mark.parametrize("example_id", ["1", "2", "3", "call"])
def test_presets_have_zero_omega_data_at_the_ends(example_id):
    spec = example_spec(example_id)
    problem = build_transformed_problem(spec, example_exponent(example_id, 0.5))
    a, b = problem.x_domain
    T = problem.expiry
    assert float(problem.c_star(a)) == pytest.approx(0.0, abs=1e-12)
    assert float(problem.c_star(b)) == pytest.approx(0.0, abs=1e-12)
    for t in (0.0, 0.37, T):
        assert float(problem.lift(a, t)) == pytest.approx(float(spec.left_boundary(T - t)), abs=1e-14)
        assert float(problem.lift(b, t)) == pytest.approx(float(spec.right_boundary(T - t)), abs=1e-14)


def test_lift_off_the_boundary_data_is_rejected(monkeypatch):
    original = model_transform.Homogenization.lift
    monkeypatch.setattr(model_transform.Homogenization, "lift",
                        lambda self, x, t: original(self, x, t) + 1e-6)
    with pytest.raises(NumericalError, match="lift misses"):
        build_transformed_problem(example_spec("call"), example_exponent("call", 0.5))


def test_nonzero_shifted_initial_data_is_rejected(monkeypatch):
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    spec = make_spec(terminal_payoff=one, left_boundary=one, right_boundary=one)
    original = SpatialTransformWeight.apply_inverse
    monkeypatch.setattr(SpatialTransformWeight, "apply_inverse",
                        lambda self, x, value: original(self, x, value) + 1e-6)
    with pytest.raises(NumericalError, match="shifted initial data"):
        build_transformed_problem(spec, ALPHA)


def test_corner_mismatch_skips_the_initial_data_check():
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    spec = make_spec(terminal_payoff=lambda S: np.sin(np.pi * np.log(S)), left_boundary=one)
    problem = build_transformed_problem(spec, ALPHA)
    assert float(problem.c_star(0.0)) == pytest.approx(-1.0)
