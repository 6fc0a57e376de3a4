"""
Discretization - uniform time grid, product-quadrature lag weights and P1 elements
Builds the lag-stationary convolution weights for q' and beta_alpha0, the
tridiagonal mass and stiffness matrices and the load vectors of each time level.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse, special

from config import GRADING_LEVELS
from exceptions import DomainError, PreconditionError
from kernel_engine import JacobiRule, LegendreRule, VariableExponent, eval_q
from model_transform import TransformedProblem

logger = logging.getLogger(__name__)

# points of the 3-point Gauss-Legendre rule mapped to [0, 1], and weights summing to 1
_CELL_POINTS = 0.5 * (1.0 + np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)]))
_CELL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0

# intervals next to the origin where q is split before Gauss-Legendre
_NEAR_INTERVALS = 3
_NEAR_PIECES = 4


@dataclass(frozen=True)
class TimeGrid:
    count: int
    expiry: float

    def __post_init__(self):
        if self.count < 1:
            raise DomainError(f"time grid needs at least one step, got N={self.count}")
        if not self.expiry > 0.0:
            raise DomainError(f"expiry must be positive, got {self.expiry}")

    @property
    def step(self) -> float:
        return self.expiry / self.count

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.count + 1) * self.step
        nodes[-1] = self.expiry
        nodes.setflags(write=False)
        return nodes


def B1(alpha0: float, t):
    """Integral of beta_alpha0 from 0 to t"""
    return np.power(t, alpha0) / special.gamma(alpha0 + 1.0)


def B2(alpha0: float, t):
    """Second antiderivative of beta_alpha0"""
    return np.power(t, alpha0 + 1.0) / special.gamma(alpha0 + 2.0)


def beta_lag_weights(alpha0: float, grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form weights of beta_alpha0 against the piecewise-linear interpolant.

    beta_node0 has length N+1; entry n multiplies the value at t_0 in the
    convolution evaluated at t_n, entry 0 is unused.
    """
    if not 0.0 < alpha0 < 1.0:
        raise DomainError(f"alpha0 must lie in (0, 1), got {alpha0}")
    tau = grid.step
    lags = np.arange(grid.count, dtype=float)
    scale = tau ** alpha0 / special.gamma(alpha0 + 2.0)
    p = alpha0 + 1.0
    beta_lags = np.empty(grid.count)
    beta_lags[0] = scale
    ell = lags[1:]
    beta_lags[1:] = scale * ((ell + 1.0) ** p - 2.0 * ell ** p + (ell - 1.0) ** p)

    t = grid.nodes
    beta_node0 = np.zeros(grid.count + 1)
    beta_node0[1:] = B1(alpha0, t[1:]) - (B2(alpha0, t[1:]) - B2(alpha0, t[:-1])) / tau
    return beta_lags, beta_node0


def _interval_pieces(count: int, tau: float, levels: int) -> np.ndarray:
    """Rows (interval, lower, upper) covering [0, count*tau], graded towards t = 0"""
    pieces = [(0, 0.0, tau * 2.0 ** -levels)]
    pieces += [(0, tau * 2.0 ** -(k + 1), tau * 2.0 ** -k) for k in range(levels)]
    for m in range(1, count):
        if m <= _NEAR_INTERVALS:
            edges = m * tau + tau * np.linspace(0.0, 1.0, _NEAR_PIECES + 1)
            pieces += [(m, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
        else:
            pieces.append((m, m * tau, (m + 1) * tau))
    return np.array(pieces)


def q_moments(alpha: VariableExponent, grid: TimeGrid, jacobi: JacobiRule,
              gl: LegendreRule, levels: int = GRADING_LEVELS):
    """Per-interval integrals of q against the falling and rising hat on [m tau, (m+1) tau]"""
    tau = grid.step
    pieces = _interval_pieces(grid.count, tau, levels)
    index = pieces[:, 0].astype(int)
    lower, upper = pieces[:, 1], pieces[:, 2]
    half = 0.5 * (upper - lower)
    points = lower[:, None] + half[:, None] * (gl.nodes + 1.0)
    values = eval_q(alpha, jacobi, points)
    rising_shape = (points - index[:, None] * tau) / tau
    weights = half[:, None] * gl.weights
    rising = np.zeros(grid.count)
    falling = np.zeros(grid.count)
    np.add.at(rising, index, np.sum(weights * values * rising_shape, axis=1))
    np.add.at(falling, index, np.sum(weights * values * (1.0 - rising_shape), axis=1))
    return rising, falling


def q_lag_weights(alpha: VariableExponent, grid: TimeGrid, gl: LegendreRule,
                  jacobi: JacobiRule, levels: int = GRADING_LEVELS,
                  allow_nonflat: bool = False) -> np.ndarray:
    """Weights of q' through the antiderivative identity, w_l = Qbar_l - Qbar_(l-1)"""
    _check_flat(alpha, allow_nonflat)
    rising, falling = q_moments(alpha, grid, jacobi, gl, levels)
    return _q_lags_from_moments(rising, falling, grid.step)


def _check_flat(alpha: VariableExponent, allow_nonflat: bool):
    if alpha.flat_at_zero:
        return
    if not allow_nonflat:
        raise PreconditionError(f"q' weights need alpha'(0) = 0; got alpha(t) = {alpha.label}")
    logger.warning(f"alpha(t) = {alpha.label} has alpha'(0) != 0; q' weights computed anyway")


def _q_lags_from_moments(rising: np.ndarray, falling: np.ndarray, tau: float) -> np.ndarray:
    averages = (rising + falling) / tau
    lags = np.empty_like(averages)
    lags[0] = averages[0] - 1.0
    lags[1:] = np.diff(averages)
    return lags


@dataclass(frozen=True)
class LagWeights:
    """Lag-stationary convolution weights on a uniform grid.

    kernel_lags/kernel_node0 convolve q itself against the piecewise-linear
    interpolant; they carry the boundary-lift correction.
    """
    q_lags: np.ndarray
    beta_lags: np.ndarray
    beta_node0: np.ndarray
    kernel_lags: np.ndarray
    kernel_node0: np.ndarray
    tau: float
    alpha0: float

    @property
    def max_q_lag(self) -> float:
        return float(np.max(np.abs(self.q_lags)))


def build_lag_weights(alpha: VariableExponent, grid: TimeGrid, jacobi: JacobiRule,
                      gl: LegendreRule, levels: int = GRADING_LEVELS,
                      allow_nonflat: bool = False) -> LagWeights:
    _check_flat(alpha, allow_nonflat)
    tau = grid.step
    rising, falling = q_moments(alpha, grid, jacobi, gl, levels)
    beta_lags, beta_node0 = beta_lag_weights(alpha.alpha0, grid)

    kernel_lags = falling.copy()
    kernel_lags[1:] += rising[:-1]
    kernel_node0 = np.zeros(grid.count + 1)
    kernel_node0[1:] = rising

    weights = LagWeights(
        q_lags=_q_lags_from_moments(rising, falling, tau),
        beta_lags=beta_lags,
        beta_node0=beta_node0,
        kernel_lags=kernel_lags,
        kernel_node0=kernel_node0,
        tau=tau,
        alpha0=alpha.alpha0,
    )
    logger.debug(f"Lag weights N={grid.count}: max|w_l|={weights.max_q_lag:.3e}, "
                 f"beta_lags[0]={beta_lags[0]:.3e}")
    return weights


def discrete_convolution(lags: np.ndarray, node0: np.ndarray, levels: np.ndarray, n: int):
    """sum_{j=1..n} lags[n-j] levels[j] + node0[n] levels[0]"""
    if n == 0:
        return np.zeros_like(levels[0])
    return lags[:n][::-1] @ levels[1:n + 1] + node0[n] * levels[0]


@dataclass(frozen=True)
class FemSpace:
    """Uniform P1 elements on [a, b] with Dirichlet rows removed"""
    cell_count: int
    x_domain: Tuple[float, float]

    def __post_init__(self):
        if self.cell_count < 2:
            raise DomainError(f"need at least two cells, got M={self.cell_count}")
        a, b = self.x_domain
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise DomainError(f"x_domain must be a bounded interval with a < b, got {self.x_domain}")

    @property
    def h(self) -> float:
        a, b = self.x_domain
        return (b - a) / self.cell_count

    @cached_property
    def nodes(self) -> np.ndarray:
        a, b = self.x_domain
        nodes = a + np.arange(self.cell_count + 1) * self.h
        nodes[-1] = b
        return nodes

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def size(self) -> int:
        return self.cell_count - 1

    @property
    def mass_bands(self) -> Tuple[float, float]:
        return 4.0 * self.h / 6.0, self.h / 6.0

    @property
    def stiffness_bands(self) -> Tuple[float, float]:
        return 2.0 / self.h, -1.0 / self.h

    def _tridiagonal(self, diagonal: float, off: float) -> sparse.csr_matrix:
        k = self.size
        return sparse.diags(
            [np.full(k - 1, off), np.full(k, diagonal), np.full(k - 1, off)],
            [-1, 0, 1], shape=(k, k), format="csr",
        )

    @cached_property
    def mass(self) -> sparse.csr_matrix:
        return self._tridiagonal(*self.mass_bands)

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        return self._tridiagonal(*self.stiffness_bands)

    @cached_property
    def _quadrature_points(self) -> np.ndarray:
        return self.nodes[:-1, None] + self.h * _CELL_POINTS

    def _scatter(self, left_part: np.ndarray, right_part: np.ndarray) -> np.ndarray:
        full = np.zeros(self.cell_count + 1)
        full[:-1] += left_part
        full[1:] += right_part
        return full[1:-1]

    def pair(self, func: Callable) -> np.ndarray:
        """(f, phi_j) for every interior hat function"""
        values = np.asarray(func(self._quadrature_points), dtype=float)
        weighted = self.h * _CELL_WEIGHTS * values
        return self._scatter(weighted @ (1.0 - _CELL_POINTS), weighted @ _CELL_POINTS)

    def pair_gradient(self, func: Callable) -> np.ndarray:
        """(f, phi_j') for every interior hat function"""
        values = np.asarray(func(self._quadrature_points), dtype=float)
        cell_integral = values @ _CELL_WEIGHTS
        return self._scatter(-cell_integral, cell_integral)


def assemble_fem(M: int, x_domain: Tuple[float, float]) -> FemSpace:
    return FemSpace(cell_count=M, x_domain=tuple(x_domain))


class LoadAssembler:
    """Spatial pairings of the forcing parts, convolved in time on request"""

    def __init__(self, problem: TransformedProblem, fem: FemSpace, grid: TimeGrid,
                 weights: Optional[LagWeights] = None):
        self.problem = problem
        self.fem = fem
        self.grid = grid
        self.weights = weights
        alpha0 = problem.alpha.alpha0

        self.static_pairing = (-problem.diffusion * fem.pair_gradient(problem.c_star_prime)
                               - problem.lam * fem.pair(problem.c_star))
        self.b1 = np.zeros(grid.count + 1)
        self.b1[1:] = B1(alpha0, grid.nodes[1:])

        times = grid.nodes
        if problem.chi_is_static:
            self.chi_pairings = np.tile(fem.pair(lambda x: problem.chi(x, 0.0)), (grid.count + 1, 1))
        else:
            self.chi_pairings = np.array([fem.pair(lambda x, t=t: problem.chi(x, t)) for t in times])

        if problem.homogenization is None:
            self.lift_pairings = None
        else:
            self.lift_pairings = np.array([fem.pair(lambda x, t=t: problem.dtL_star(x, t))
                                           for t in times])

    def load(self, n: int) -> np.ndarray:
        if self.weights is None:
            raise PreconditionError("LoadAssembler.load needs lag weights")
        w = self.weights
        if self.problem.chi_is_static:
            chi_part = self.b1[n] * self.chi_pairings[0]
        else:
            chi_part = discrete_convolution(w.beta_lags, w.beta_node0, self.chi_pairings, n)
        lift_part = None
        if self.lift_pairings is not None:
            lift_part = discrete_convolution(w.kernel_lags, w.kernel_node0, self.lift_pairings, n)
        return self._combine(n, chi_part, lift_part)

    def load_with(self, n: int, beta_row: np.ndarray, kernel_row: Optional[np.ndarray] = None):
        """Load at level n from explicit per-node weights (index j = 0..n)"""
        chi_part = beta_row[:n + 1] @ self.chi_pairings[:n + 1]
        lift_part = None
        if self.lift_pairings is not None:
            lift_part = kernel_row[:n + 1] @ self.lift_pairings[:n + 1]
        return self._combine(n, chi_part, lift_part)

    def _combine(self, n: int, chi_part: np.ndarray, lift_part: Optional[np.ndarray]) -> np.ndarray:
        load = self.b1[n] * self.static_pairing + chi_part
        if lift_part is not None:
            load = load - lift_part
        return load


def assemble_load(problem: TransformedProblem, fem: FemSpace, grid: TimeGrid,
                  weights: LagWeights, n: int) -> np.ndarray:
    """Interior load vector (F^n, phi_j) at time level n"""
    if not 1 <= n <= grid.count:
        raise DomainError(f"time level must satisfy 1 <= n <= {grid.count}, got {n}")
    return LoadAssembler(problem, fem, grid, weights).load(n)
