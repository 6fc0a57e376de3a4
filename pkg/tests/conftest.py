import numpy as np
import pytest

from harness import example_exponent, example_spec
from kernel_engine import VariableExponent, build_jacobi_rule, build_legendre_rule
from model_transform import ModelSpec, build_transformed_problem


def zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def make_spec(**overrides):
    """ModelSpec on (0, 1) with zero data unless overridden"""
    fields = dict(
        sigma=0.5,
        rate=0.25,
        expiry=1.0,
        s_domain=(1.0, np.e),
        x_domain=(0.0, 1.0),
        terminal_payoff=zero,
        terminal_slope=zero,
        left_boundary=zero,
        right_boundary=zero,
        left_rate=zero,
        right_rate=zero,
        forcing=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        static_forcing=True,
        label="test",
    )
    fields.update(overrides)
    return ModelSpec(**fields)


@pytest.fixture
def flat_alpha():
    return VariableExponent.polynomial(0.4, -1.0 / 11.0, 2)


@pytest.fixture
def jacobi():
    return build_jacobi_rule(0.4, 32)


@pytest.fixture
def legendre():
    return build_legendre_rule(8)


@pytest.fixture
def example_problem():
    def build(example_id, alpha0=0.4):
        return build_transformed_problem(example_spec(example_id), example_exponent(example_id, alpha0))
    return build


@pytest.fixture
def zero_problem():
    return build_transformed_problem(make_spec(), VariableExponent.polynomial(0.5, -1.0 / 11.0, 2))
