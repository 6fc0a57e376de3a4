"""
Model Transform - option-pricing data and its reduction to the omega problem
Time reversal, log-price change of variables, boundary homogenization and the
exponential spatial transform, plus the inverse maps back to option prices.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from exceptions import DomainError, NumericalError, OutOfDomainError
from kernel_engine import VariableExponent

logger = logging.getLogger(__name__)

_CORNER_TOLERANCE = 1e-12
_BOUNDARY_SAMPLES = 257


@dataclass(frozen=True)
class ModelSpec:
    """Financial inputs of the terminal-value pricing problem.

    Boundary functions take calendar time t in [0, T]. The forcing takes the
    log-price x and the time to expiry, i.e. the variables of the reversed problem.
    """
    sigma: float
    rate: float
    expiry: float
    s_domain: Tuple[float, float]
    x_domain: Tuple[float, float]
    terminal_payoff: Callable
    left_boundary: Callable
    right_boundary: Callable
    forcing: Callable
    terminal_slope: Optional[Callable] = None
    left_rate: Optional[Callable] = None
    right_rate: Optional[Callable] = None
    static_forcing: bool = False
    label: str = "custom"

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.rate >= 0.0:
            raise DomainError(f"rate must be nonnegative, got {self.rate}")
        if not self.expiry > 0.0:
            raise DomainError(f"expiry must be positive, got {self.expiry}")
        lo, hi = self.x_domain
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise DomainError(f"x_domain must be a bounded interval with a < b, got {self.x_domain}")


def lambda_coeff(sigma: float, rate: float) -> float:
    """Reaction coefficient 1/2 (sigma/2 + r/sigma)^2 left by the exponential transform"""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if rate < 0.0:
        raise DomainError(f"rate must be nonnegative, got {rate}")
    return 0.5 * (0.5 * sigma + rate / sigma) ** 2


@dataclass(frozen=True)
class SpatialTransformWeight:
    """u = exp(kappa x) phi with kappa = 1/2 - r/sigma^2"""
    exponent_coeff: float

    @classmethod
    def for_model(cls, sigma: float, rate: float) -> "SpatialTransformWeight":
        return cls(exponent_coeff=0.5 - rate / sigma ** 2)

    def apply(self, x, value):
        return value * np.exp(self.exponent_coeff * np.asarray(x, dtype=float))

    def apply_inverse(self, x, value):
        return value * np.exp(-self.exponent_coeff * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Homogenization:
    """Linear-in-x lift L(x, t) of the reversed Dirichlet data"""
    x_domain: Tuple[float, float]
    left: Callable
    right: Callable
    left_rate: Callable
    right_rate: Callable

    def _shape(self, x):
        a, b = self.x_domain
        x = np.asarray(x, dtype=float)
        return (b - x) / (b - a), (x - a) / (b - a)

    def lift(self, x, t):
        to_left, to_right = self._shape(x)
        return to_left * self.left(t) + to_right * self.right(t)

    def lift_dx(self, t) -> float:
        a, b = self.x_domain
        return (self.right(t) - self.left(t)) / (b - a)

    def lift_dt(self, x, t):
        to_left, to_right = self._shape(x)
        return to_left * self.left_rate(t) + to_right * self.right_rate(t)


@dataclass(frozen=True)
class TransformedProblem:
    """The omega-form Volterra problem with zero initial and boundary data"""
    lam: float
    kappa: float
    weight: SpatialTransformWeight
    c_bar: Callable
    c_star: Callable
    c_star_prime: Callable
    chi: Callable
    chi_is_static: bool
    dtL_star: Callable
    alpha: VariableExponent
    x_domain: Tuple[float, float]
    expiry: float
    sigma: float
    rate: float
    homogenization: Optional[Homogenization] = None
    diagnostics: Tuple[str, ...] = ()

    @property
    def diffusion(self) -> float:
        return 0.5 * self.sigma ** 2

    def lift(self, x, t):
        if self.homogenization is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.homogenization.lift(x, t)


def _finite_difference(func: Callable, step: float) -> Callable:
    def derivative(x):
        x = np.asarray(x, dtype=float)
        return (func(x + step) - func(x - step)) / (2.0 * step)
    return derivative


def _reversed_rate(rate: Optional[Callable], boundary: Callable, expiry: float,
                   notes: List[str], side: str) -> Callable:
    """d/dt of c(T - t); calendar-time rates flip sign under reversal"""
    if rate is not None:
        return lambda t: -np.asarray(rate(expiry - np.asarray(t, dtype=float)), dtype=float)
    step = 1e-6 * expiry
    message = f"{side} boundary rate not supplied, using a centered difference with h={step:.3g}"
    logger.warning(message)
    notes.append(message)
    return lambda t: -(np.asarray(boundary(expiry - t + step), dtype=float)
                       - np.asarray(boundary(expiry - t - step), dtype=float)) / (2.0 * step)


def _boundaries_vanish(spec: ModelSpec) -> bool:
    samples = np.linspace(0.0, spec.expiry, _BOUNDARY_SAMPLES)
    left = np.broadcast_to(spec.left_boundary(samples), samples.shape)
    right = np.broadcast_to(spec.right_boundary(samples), samples.shape)
    return bool(np.all(left == 0.0) and np.all(right == 0.0))


def _check_zero_data(problem: TransformedProblem, c_left: Callable, c_right: Callable,
                     corners_match: bool) -> None:
    """The omega problem must start from zero and see zero Dirichlet data at both ends"""
    a, b = problem.x_domain
    if problem.homogenization is not None:
        samples = np.linspace(0.0, problem.expiry, _BOUNDARY_SAMPLES)
        for side, x_end, data in (("left", a, c_left), ("right", b, c_right)):
            target = np.broadcast_to(data(samples), samples.shape)
            lifted = np.broadcast_to(problem.homogenization.lift(x_end, samples), samples.shape)
            gap = float(np.max(np.abs(lifted - target)))
            if gap > _CORNER_TOLERANCE * max(1.0, float(np.max(np.abs(target)))):
                raise NumericalError(f"lift misses the {side} boundary data by {gap:.3e}")
    if not corners_match:
        # omega boundary values equal -c_star at the ends, nonzero by the mismatch
        return
    for side, x_end in (("left", a), ("right", b)):
        residual = abs(float(problem.weight.apply(x_end, problem.c_star(x_end))))
        if residual > 10.0 * _CORNER_TOLERANCE * max(1.0, abs(float(problem.c_bar(x_end)))):
            raise NumericalError(f"shifted initial data is {residual:.3e} at the {side} end, expected 0")


def build_transformed_problem(spec: ModelSpec, alpha: VariableExponent) -> TransformedProblem:
    """Apply reversal, log transform, homogenization and the exponential transform"""
    a, b = spec.x_domain
    T = spec.expiry
    sigma, rate = spec.sigma, spec.rate
    notes: List[str] = []

    if alpha.horizon < T:
        raise DomainError(f"alpha is validated on [0, {alpha.horizon}] but expiry is {T}")

    # reversed boundary data and terminal data in log-price
    c_left = lambda t: np.asarray(spec.left_boundary(T - np.asarray(t, dtype=float)), dtype=float)
    c_right = lambda t: np.asarray(spec.right_boundary(T - np.asarray(t, dtype=float)), dtype=float)
    c_bar = lambda x: np.asarray(spec.terminal_payoff(np.exp(np.asarray(x, dtype=float))), dtype=float)

    if spec.terminal_slope is not None:
        c_bar_prime = lambda x: (np.exp(np.asarray(x, dtype=float))
                                 * spec.terminal_slope(np.exp(np.asarray(x, dtype=float))))
    else:
        step = 1e-6 * (b - a)
        message = f"terminal slope not supplied, using a centered difference with h={step:.3g}"
        logger.warning(message)
        notes.append(message)
        c_bar_prime = _finite_difference(c_bar, step)

    for corner, payoff_value, boundary_value in (
        ("left", float(c_bar(a)), float(c_left(0.0))),
        ("right", float(c_bar(b)), float(c_right(0.0))),
    ):
        if abs(payoff_value - boundary_value) > _CORNER_TOLERANCE * max(1.0, abs(payoff_value)):
            message = (f"{corner} corner mismatch: payoff {payoff_value:.6g} "
                       f"vs boundary {boundary_value:.6g}")
            logger.warning(message)
            notes.append(message)

    homogenization = None
    if not _boundaries_vanish(spec):
        homogenization = Homogenization(
            x_domain=(a, b),
            left=c_left,
            right=c_right,
            left_rate=_reversed_rate(spec.left_rate, spec.left_boundary, T, notes, "left"),
            right_rate=_reversed_rate(spec.right_rate, spec.right_boundary, T, notes, "right"),
        )

    weight = SpatialTransformWeight.for_model(sigma, rate)
    kappa = weight.exponent_coeff
    lam = lambda_coeff(sigma, rate)

    if homogenization is None:
        def c_star(x):
            return weight.apply_inverse(x, c_bar(x))

        def c_star_prime(x):
            return weight.apply_inverse(x, c_bar_prime(x)) - kappa * c_star(x)

        def chi(x, t):
            return weight.apply_inverse(x, np.asarray(spec.forcing(x, t), dtype=float))

        def dtL_star(x, t):
            return np.zeros_like(np.asarray(x, dtype=float))
    else:
        lift = homogenization

        def c_star(x):
            return weight.apply_inverse(x, c_bar(x) - lift.lift(x, 0.0))

        def c_star_prime(x):
            return weight.apply_inverse(x, c_bar_prime(x) - lift.lift_dx(0.0)) - kappa * c_star(x)

        # u = u_tilde + L moves the convection and reaction terms applied to L to the right side
        def chi(x, t):
            corrected = (np.asarray(spec.forcing(x, t), dtype=float)
                         + (rate - 0.5 * sigma ** 2) * lift.lift_dx(t)
                         - rate * lift.lift(x, t))
            return weight.apply_inverse(x, corrected)

        def dtL_star(x, t):
            return weight.apply_inverse(x, lift.lift_dt(x, t))

    problem = TransformedProblem(
        lam=lam,
        kappa=kappa,
        weight=weight,
        c_bar=c_bar,
        c_star=c_star,
        c_star_prime=c_star_prime,
        chi=chi,
        chi_is_static=spec.static_forcing and homogenization is None,
        dtL_star=dtL_star,
        alpha=alpha,
        x_domain=(a, b),
        expiry=T,
        sigma=sigma,
        rate=rate,
        homogenization=homogenization,
        diagnostics=tuple(notes),
    )
    _check_zero_data(problem, c_left, c_right,
                     corners_match=not any("corner mismatch" in note for note in notes))
    logger.debug(f"Transformed {spec.label}: lambda={lam:.6g}, kappa={kappa:.6g}, "
                 f"homogenized={homogenization is not None}")
    return problem


def reconstruct_u(w_values, problem: TransformedProblem, t_index: int,
                  x_nodes: np.ndarray, tau: float) -> np.ndarray:
    """U^n = exp(kappa x) (W^n + c_star) + L(x, t_n)"""
    x_nodes = np.asarray(x_nodes, dtype=float)
    t_n = t_index * tau
    phi = np.asarray(w_values, dtype=float) + problem.c_star(x_nodes)
    return problem.weight.apply(x_nodes, phi) + problem.lift(x_nodes, t_n)


def transform_u(u_values, problem: TransformedProblem, t_index: int,
                x_nodes: np.ndarray, tau: float) -> np.ndarray:
    """Inverse of reconstruct_u: omega nodal values of a known u"""
    x_nodes = np.asarray(x_nodes, dtype=float)
    t_n = t_index * tau
    shifted = np.asarray(u_values, dtype=float) - problem.lift(x_nodes, t_n)
    return problem.weight.apply_inverse(x_nodes, shifted) - problem.c_star(x_nodes)


@dataclass
class PriceSurface:
    """Option value v(S, t) on the truncated domain, bilinear in (ln S, t)"""
    x_nodes: np.ndarray
    tau_nodes: np.ndarray
    values: np.ndarray
    expiry: float
    label: str = "custom"
    s_bounds: Tuple[float, float] = field(init=False)

    def __post_init__(self):
        self.s_bounds = (float(np.exp(self.x_nodes[0])), float(np.exp(self.x_nodes[-1])))

    def price(self, spot, t: float):
        """Value at asset price(s) spot and calendar time t"""
        if not 0.0 <= t <= self.expiry:
            raise OutOfDomainError(f"time {t} outside [0, {self.expiry}]")
        spot_arr = np.asarray(spot, dtype=float)
        lo, hi = self.s_bounds
        if np.any(spot_arr < lo * (1.0 - 1e-14)) or np.any(spot_arr > hi * (1.0 + 1e-14)):
            raise OutOfDomainError(f"asset price outside [{lo:.6g}, {hi:.6g}]")
        x = np.clip(np.log(spot_arr), self.x_nodes[0], self.x_nodes[-1])

        tau = self.expiry - t
        upper = int(np.searchsorted(self.tau_nodes, tau, side="left"))
        upper = min(max(upper, 1), len(self.tau_nodes) - 1)
        lower = upper - 1
        theta = (tau - self.tau_nodes[lower]) / (self.tau_nodes[upper] - self.tau_nodes[lower])
        below = np.interp(x, self.x_nodes, self.values[lower])
        above = np.interp(x, self.x_nodes, self.values[upper])
        result = (1.0 - theta) * below + theta * above
        if np.ndim(spot) == 0:
            return float(result)
        return result

    def table(self) -> pd.DataFrame:
        """Nodal values with calendar time rows and asset price columns"""
        frame = pd.DataFrame(
            self.values[::-1],
            index=pd.Index(self.expiry - self.tau_nodes[::-1], name="t"),
            columns=pd.Index(np.exp(self.x_nodes), name="S"),
        )
        return frame


def reconstruct_option_price(u_grid, spec: ModelSpec) -> PriceSurface:
    """Pull u(x, tau) back to v(S, t) = u(ln S, T - t), boundary columns from the data"""
    T = spec.expiry
    a, b = spec.x_domain
    tau_nodes = np.asarray(u_grid.t_nodes, dtype=float)
    left = np.broadcast_to(spec.left_boundary(T - tau_nodes), tau_nodes.shape)
    right = np.broadcast_to(spec.right_boundary(T - tau_nodes), tau_nodes.shape)
    values = np.column_stack([left, u_grid.u, right])
    x_nodes = np.concatenate([[a], u_grid.x_nodes, [b]])
    return PriceSurface(x_nodes=x_nodes, tau_nodes=tau_nodes, values=values,
                        expiry=T, label=spec.label)
