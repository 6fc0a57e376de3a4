"""
Kernel Engine - special functions and the variable-exponent memory kernel
Evaluates Gamma, the power kernel beta_mu, G(t) = t^(alpha0 - alpha(t)) and the
bounded convolution kernel q = beta_alpha0 * k together with its derivative.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from scipy import special

from exceptions import DomainError, PreconditionError

logger = logging.getLogger(__name__)

_SAMPLE_COUNT = 2001


def _as_output(values, t):
    """Return a Python float for scalar input and an array otherwise"""
    if np.ndim(t) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class VariableExponent:
    """The fractional order alpha(t) on [0, horizon] with its first two derivatives"""
    eval: Callable
    eval_deriv: Callable
    eval_second_deriv: Callable
    alpha0: float
    flat_at_zero: bool
    horizon: float = 1.0
    label: str = "custom"

    def __post_init__(self):
        samples = np.linspace(0.0, self.horizon, _SAMPLE_COUNT)
        values = np.broadcast_to(np.asarray(self.eval(samples), dtype=float), samples.shape)
        if not np.all(np.isfinite(values)):
            raise DomainError(f"alpha({self.label}) is not finite on [0, {self.horizon}]")
        if values.min() <= 0.0 or values.max() >= 1.0:
            raise DomainError(
                f"alpha({self.label}) must satisfy 0 < alpha(t) < 1 on [0, {self.horizon}], "
                f"sampled range is [{values.min():.6g}, {values.max():.6g}]"
            )
        if float(self.eval(0.0)) != self.alpha0:
            raise DomainError(f"alpha0={self.alpha0} differs from alpha(0)={float(self.eval(0.0))}")
        if self.flat_at_zero and float(self.eval_deriv(0.0)) != 0.0:
            raise DomainError(f"alpha({self.label}) is flagged flat but alpha'(0) != 0")

    def __call__(self, t):
        return self.eval(t)

    @property
    def alpha_star(self) -> float:
        """Sampled upper bound of alpha on [0, horizon]"""
        samples = np.linspace(0.0, self.horizon, _SAMPLE_COUNT)
        return float(np.max(np.broadcast_to(self.eval(samples), samples.shape)))

    @classmethod
    def constant(cls, alpha0: float, horizon: float = 1.0) -> "VariableExponent":
        return cls(
            eval=lambda t: np.full_like(np.asarray(t, dtype=float), alpha0),
            eval_deriv=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            eval_second_deriv=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            alpha0=alpha0,
            flat_at_zero=True,
            horizon=horizon,
            label=f"constant {alpha0}",
        )

    @classmethod
    def polynomial(cls, alpha0: float, coeff: float, power: int,
                   horizon: float = 1.0) -> "VariableExponent":
        """alpha(t) = alpha0 + coeff * t**power"""
        if power < 1:
            raise DomainError(f"power must be a positive integer, got {power}")

        def first(t):
            t = np.asarray(t, dtype=float)
            return coeff * power * np.power(t, power - 1)

        def second(t):
            t = np.asarray(t, dtype=float)
            if power < 2:
                return np.zeros_like(t)
            return coeff * power * (power - 1) * np.power(t, power - 2)

        return cls(
            eval=lambda t: alpha0 + coeff * np.power(np.asarray(t, dtype=float), power),
            eval_deriv=first,
            eval_second_deriv=second,
            alpha0=alpha0,
            flat_at_zero=(power > 1 or coeff == 0.0),
            horizon=horizon,
            label=f"{alpha0} + {coeff:.6g} t^{power}",
        )


@dataclass(frozen=True)
class JacobiRule:
    """Gauss-Jacobi rule on (0,1) for the weight s^(-alpha0) (1-s)^(alpha0-1)"""
    nodes: np.ndarray
    weights: np.ndarray
    exponent_left: float
    exponent_right: float


@dataclass(frozen=True)
class LegendreRule:
    """Gauss-Legendre rule on (-1,1)"""
    nodes: np.ndarray
    weights: np.ndarray


def gamma(x):
    """Gamma function for positive arguments"""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise DomainError("gamma is only provided for positive arguments")
    return _as_output(special.gamma(x_arr), x)


def digamma(x):
    """Logarithmic derivative Gamma'/Gamma for positive arguments"""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise DomainError("digamma is only provided for positive arguments")
    return _as_output(special.digamma(x_arr), x)


def beta_density(mu: float, t):
    """beta_mu(t) = t^(mu-1) / Gamma(mu)"""
    if not 0.0 < mu <= 2.0:
        raise DomainError(f"beta_mu needs mu in (0, 2], got {mu}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise DomainError("beta_mu is singular at t <= 0")
    return _as_output(np.power(t_arr, mu - 1.0) / gamma(mu), t)


def eval_G(alpha: VariableExponent, t):
    """G(t) = t^(alpha0 - alpha(t)), with the limit value G(0) = 1"""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("G is defined for t >= 0")
    positive = t_arr > 0.0
    safe = np.where(positive, t_arr, 1.0)
    values = np.where(positive, np.exp((alpha.alpha0 - alpha(safe)) * np.log(safe)), 1.0)
    return _as_output(values, t)


def build_jacobi_rule(alpha0: float, count: int) -> JacobiRule:
    """Gauss-Jacobi rule exact to degree 2*count-1 against s^(-alpha0) (1-s)^(alpha0-1)"""
    if not 0.0 < alpha0 < 1.0:
        raise DomainError(f"alpha0 must lie in (0, 1), got {alpha0}")
    if count < 4:
        raise DomainError(f"Jacobi rule needs at least 4 nodes, got {count}")

    # (1-x)^(alpha0-1) (1+x)^(-alpha0) on (-1,1) maps onto the (0,1) weight with unit Jacobian
    # a + b = -1 hits a 0/0 in scipy's recurrence setup; the nodes and weights are unaffected
    with np.errstate(divide="ignore", invalid="ignore"):
        x, w = special.roots_jacobi(count, alpha0 - 1.0, -alpha0)
    order = np.argsort(x)
    nodes = 0.5 * (1.0 + x[order])
    weights = w[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return JacobiRule(nodes=nodes, weights=weights,
                      exponent_left=-alpha0, exponent_right=alpha0 - 1.0)


def build_legendre_rule(count: int) -> LegendreRule:
    if count < 1:
        raise DomainError(f"Legendre rule needs at least one node, got {count}")
    nodes, weights = np.polynomial.legendre.leggauss(count)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return LegendreRule(nodes=nodes, weights=weights)


def eval_q(alpha: VariableExponent, rule: JacobiRule, t):
    """q(t) = (beta_alpha0 * k)(t), bounded with q(0) = 1"""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("q is defined for t >= 0")
    s = t_arr[..., None] * rule.nodes
    integrand = eval_G(alpha, s) / gamma(1.0 - alpha(s))
    values = integrand @ rule.weights / gamma(alpha.alpha0)
    values = np.where(t_arr == 0.0, 1.0, values)
    return _as_output(values, t)


def eval_q_prime(alpha: VariableExponent, rule: JacobiRule, t, allow_nonflat: bool = False):
    """Derivative of q, differentiated under the Jacobi-weighted integral"""
    if not alpha.flat_at_zero:
        if not allow_nonflat:
            raise PreconditionError(
                f"q' needs alpha'(0) = 0; alpha({alpha.label}) is not flat at zero"
            )
        logger.debug(f"Evaluating q' for non-flat exponent {alpha.label}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("q' is defined for t >= 0")

    s = t_arr[..., None] * rule.nodes
    positive = s > 0.0
    safe = np.where(positive, s, 1.0)
    a = alpha(s)
    da = alpha.eval_deriv(s)
    # d/ds log G(s); the limit at s = 0 is zero when alpha'(0) = 0
    log_slope = np.where(positive, -da * np.log(safe) + (alpha.alpha0 - a) / safe, 0.0)
    bracket = log_slope + da * digamma(1.0 - a)
    integrand = rule.nodes * eval_G(alpha, s) / gamma(1.0 - a) * bracket
    values = integrand @ rule.weights / gamma(alpha.alpha0)
    values = np.where(t_arr == 0.0, 0.0, values)
    return _as_output(values, t)


def kernel_bounds(alpha: VariableExponent, rule: JacobiRule,
                  horizon: Optional[float] = None, samples: int = 1001) -> Dict[str, float]:
    """Sampled max|q| and max|q'| on [0, horizon]"""
    horizon = alpha.horizon if horizon is None else horizon
    grid = np.linspace(0.0, horizon, samples)
    q_values = eval_q(alpha, rule, grid)
    q_slopes = eval_q_prime(alpha, rule, grid, allow_nonflat=True)
    return {
        "max_q": float(np.max(np.abs(q_values))),
        "max_q_prime": float(np.max(np.abs(q_slopes))),
    }
