"""
Solver - fully discrete time stepping for the omega problem
Each level solves one symmetric tridiagonal system whose matrix is the same for
every n, so it is factored once. A dense block solver with independently
integrated weights serves as a verification oracle on small instances.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy import integrate, linalg, special

from config import ORACLE_CAP, QuadratureSettings
from discretization import (
    FemSpace, LagWeights, LoadAssembler, TimeGrid, assemble_fem, build_lag_weights,
)
from exceptions import DomainError, NumericalError, OracleSizeError
from kernel_engine import (
    build_jacobi_rule, build_legendre_rule, eval_q, eval_q_prime, kernel_bounds,
)
from model_transform import TransformedProblem, reconstruct_u

logger = logging.getLogger(__name__)


@dataclass
class SolutionGrid:
    """Nodal omega values and reconstructed u, rows n = 0..N, interior columns"""
    w: np.ndarray
    u: np.ndarray
    x_nodes: np.ndarray
    t_nodes: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.w.shape != self.u.shape:
            raise NumericalError(f"w and u shapes differ: {self.w.shape} vs {self.u.shape}")
        if np.any(self.w[0] != 0.0):
            raise NumericalError("omega must vanish at the initial level")
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.u))):
            raise NumericalError("solution contains non-finite values")

    @property
    def N(self) -> int:
        return self.w.shape[0] - 1

    @property
    def M(self) -> int:
        return self.w.shape[1] + 1

    @property
    def x_domain(self):
        return tuple(self.meta.get("x_domain", (None, None)))


@dataclass(frozen=True)
class StepSystem:
    """a Mass + b Stiffness with a = 1 + w_0 + lam wt_0 and b = sigma^2/2 wt_0"""
    a: float
    b: float
    lam: float
    diffusion: float
    factor: np.ndarray

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve_banded((self.factor, False), rhs)


def build_step_system(fem: FemSpace, weights: LagWeights, lam: float, sigma: float) -> StepSystem:
    diffusion = 0.5 * sigma ** 2
    a = 1.0 + weights.q_lags[0] + lam * weights.beta_lags[0]
    b = diffusion * weights.beta_lags[0]
    if not a > 0.0:
        raise NumericalError(
            f"step matrix is not positive definite (a={a:.6g}); use a smaller time step"
        )
    mass_diag, mass_off = fem.mass_bands
    stiff_diag, stiff_off = fem.stiffness_bands
    bands = np.zeros((2, fem.size))
    bands[0, 1:] = a * mass_off + b * stiff_off
    bands[1, :] = a * mass_diag + b * stiff_diag
    try:
        factor = linalg.cholesky_banded(bands, lower=False)
    except linalg.LinAlgError as e:
        raise NumericalError(f"step matrix factorization failed ({e}); use a smaller time step")
    return StepSystem(a=a, b=b, lam=lam, diffusion=diffusion, factor=factor)


def step(n: int, history: np.ndarray, fem: FemSpace, weights: LagWeights,
         load: np.ndarray, system: StepSystem) -> np.ndarray:
    """Solve for W^n given rows 0..n-1 of history"""
    rhs = np.array(load, dtype=float)
    if n > 1:
        past = history[1:n]
        mass_coeff = (weights.q_lags[1:n] + system.lam * weights.beta_lags[1:n])[::-1]
        stiff_coeff = (system.diffusion * weights.beta_lags[1:n])[::-1]
        rhs -= fem.mass @ (mass_coeff @ past) + fem.stiffness @ (stiff_coeff @ past)
    values = system.solve(rhs)
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite values at time level {n}")
    return values


def _quadrature(settings: Optional[QuadratureSettings], alpha0: float):
    settings = settings or QuadratureSettings.from_env()
    return (settings,
            build_jacobi_rule(alpha0, settings.jacobi_nodes),
            build_legendre_rule(settings.legendre_nodes))


def _check_sizes(N: int, M: int):
    if N < 1:
        raise DomainError(f"N must be at least 1, got {N}")
    if M < 2:
        raise DomainError(f"M must be at least 2, got {M}")


def _reconstruct(problem: TransformedProblem, w: np.ndarray, fem: FemSpace,
                 grid: TimeGrid) -> np.ndarray:
    return np.array([reconstruct_u(w[n], problem, n, fem.interior, grid.step)
                     for n in range(grid.count + 1)])


def _base_meta(problem: TransformedProblem, N: int, M: int,
               settings: QuadratureSettings) -> Dict[str, Any]:
    return {
        "N": N,
        "M": M,
        "alpha0": problem.alpha.alpha0,
        "sigma": problem.sigma,
        "rate": problem.rate,
        "expiry": problem.expiry,
        "x_domain": problem.x_domain,
        "quadrature": settings.to_dict(),
        "diagnostics": list(problem.diagnostics),
    }


def stability_norm(u: np.ndarray, tau: float, h: float) -> float:
    """sqrt(tau sum_n h sum_j (U^n_j)^2) over n = 1..N"""
    return float(np.sqrt(tau * h * np.sum(u[1:] ** 2)))


def solve_all(problem: TransformedProblem, N: int, M: int,
              settings: Optional[QuadratureSettings] = None) -> SolutionGrid:
    """Run the scheme for n = 1..N and reconstruct u"""
    _check_sizes(N, M)
    settings, jacobi, gl = _quadrature(settings, problem.alpha.alpha0)
    grid = TimeGrid(N, problem.expiry)
    fem = assemble_fem(M, problem.x_domain)
    meta = _base_meta(problem, N, M, settings)

    if not problem.alpha.flat_at_zero:
        meta["diagnostics"].append(
            f"alpha(t) = {problem.alpha.label} is not flat at zero; q' evaluated at t > 0 only"
        )
    weights = build_lag_weights(problem.alpha, grid, jacobi, gl,
                                settings.grading_levels, allow_nonflat=True)
    system = build_step_system(fem, weights, problem.lam, problem.sigma)
    assembler = LoadAssembler(problem, fem, grid, weights)

    w = np.zeros((N + 1, fem.size))
    for n in range(1, N + 1):
        w[n] = step(n, w, fem, weights, assembler.load(n), system)

    u = _reconstruct(problem, w, fem, grid)
    bounds = kernel_bounds(problem.alpha, jacobi, problem.expiry)
    gronwall_ok = weights.max_q_lag < 0.5
    if not gronwall_ok:
        message = f"max|w_l| = {weights.max_q_lag:.3g} >= 1/2; time step may be too large"
        logger.warning(message)
        meta["diagnostics"].append(message)
    meta.update({
        "step_a": system.a,
        "step_b": system.b,
        "max_q_lag": weights.max_q_lag,
        "gronwall_ok": bool(gronwall_ok),
        "kernel_bounds": (bounds["max_q"], bounds["max_q_prime"]),
        "alpha_star": problem.alpha.alpha_star,
        "stability_norm": stability_norm(u, grid.step, fem.h),
    })
    logger.info(f"Solved N={N}, M={M}, alpha0={problem.alpha.alpha0}: "
                f"||U||={meta['stability_norm']:.6g}")
    return SolutionGrid(w=w, u=u, x_nodes=fem.interior.copy(), t_nodes=grid.nodes.copy(), meta=meta)


_QUAD_OPTIONS = dict(epsabs=1e-14, epsrel=1e-12, limit=200)


class _OracleWeights:
    """Convolution weights for every (n, j) pair from nested adaptive quadrature"""

    def __init__(self, problem: TransformedProblem, grid: TimeGrid, jacobi):
        self.alpha = problem.alpha
        self.alpha0 = problem.alpha.alpha0
        self.grid = grid
        self.jacobi = jacobi
        self.tau = grid.step

    def _q_prime(self, t: float) -> float:
        return eval_q_prime(self.alpha, self.jacobi, t, allow_nonflat=True)

    def _beta(self, t: float) -> float:
        return t ** (self.alpha0 - 1.0) / special.gamma(self.alpha0)

    def q_prime_weight(self, n: int, j: int) -> float:
        t = self.grid.nodes

        def inner(time):
            upper = min(time, t[j])
            value, _ = integrate.quad(lambda s: self._q_prime(time - s), t[j - 1], upper, **_QUAD_OPTIONS)
            return value

        value, _ = integrate.quad(inner, t[n - 1], t[n], **_QUAD_OPTIONS)
        return value / self.tau

    def beta_weight(self, n: int, j: int) -> float:
        t = self.grid.nodes
        inv_gamma = 1.0 / special.gamma(self.alpha0)

        def inner(time):
            if j == n:
                # (time - s)^(alpha0 - 1) as the QAWS algebraic weight at the upper end
                value, _ = integrate.quad(lambda s: inv_gamma, t[j - 1], time,
                                          weight="alg", wvar=(0.0, self.alpha0 - 1.0), **_QUAD_OPTIONS)
                return value
            value, _ = integrate.quad(lambda s: self._beta(time - s), t[j - 1], t[j], **_QUAD_OPTIONS)
            return value

        value, _ = integrate.quad(inner, t[n - 1], t[n], **_QUAD_OPTIONS)
        return value / self.tau

    def beta_node0(self, n: int) -> float:
        t_n, tau = self.grid.nodes[n], self.tau
        if n == 1:
            value, _ = integrate.quad(lambda s: (tau - s) / tau / special.gamma(self.alpha0),
                                      0.0, tau, weight="alg", wvar=(0.0, self.alpha0 - 1.0), **_QUAD_OPTIONS)
            return value
        value, _ = integrate.quad(lambda s: self._beta(t_n - s) * (tau - s) / tau, 0.0, tau,
                                  **_QUAD_OPTIONS)
        return value

    def kernel_weight(self, n: int, j: int) -> float:
        """int q(t_n - s) phi_j(s) ds over the support of the hat at t_j"""
        t, tau = self.grid.nodes, self.tau
        q = lambda s: eval_q(self.alpha, self.jacobi, max(t[n] - s, 0.0))
        total = 0.0
        if j >= 1:
            value, _ = integrate.quad(lambda s: q(s) * (s - t[j - 1]) / tau, t[j - 1], t[j], **_QUAD_OPTIONS)
            total += value
        if j < n:
            value, _ = integrate.quad(lambda s: q(s) * (t[j + 1] - s) / tau, t[j], t[j + 1], **_QUAD_OPTIONS)
            total += value
        return total


def dense_oracle_solve(problem: TransformedProblem, N: int, M: int,
                       settings: Optional[QuadratureSettings] = None,
                       cap: int = ORACLE_CAP) -> SolutionGrid:
    """Block lower-triangular solve over all levels with quadrature-integrated weights"""
    _check_sizes(N, M)
    if N * M > cap:
        raise OracleSizeError(f"dense oracle is limited to N*M <= {cap}, got {N * M}")
    settings, jacobi, _ = _quadrature(settings, problem.alpha.alpha0)
    grid = TimeGrid(N, problem.expiry)
    fem = assemble_fem(M, problem.x_domain)
    assembler = LoadAssembler(problem, fem, grid)
    oracle = _OracleWeights(problem, grid, jacobi)

    mass = fem.mass.toarray()
    stiffness = fem.stiffness.toarray()
    lam, diffusion = problem.lam, problem.diffusion
    homogenized = problem.homogenization is not None
    logger.info(f"Dense oracle solve N={N}, M={M}")

    w = np.zeros((N + 1, fem.size))
    for n in range(1, N + 1):
        beta_row = np.zeros(n + 1)
        kernel_row = np.zeros(n + 1) if homogenized else None
        beta_row[0] = oracle.beta_node0(n)
        if homogenized:
            kernel_row[0] = oracle.kernel_weight(n, 0)
        blocks = {}
        for j in range(1, n + 1):
            q_w = oracle.q_prime_weight(n, j)
            beta_row[j] = oracle.beta_weight(n, j)
            if homogenized:
                kernel_row[j] = oracle.kernel_weight(n, j)
            identity = 1.0 if j == n else 0.0
            blocks[j] = (identity + q_w + lam * beta_row[j]) * mass + diffusion * beta_row[j] * stiffness

        rhs = assembler.load_with(n, beta_row, kernel_row)
        for j in range(1, n):
            rhs = rhs - blocks[j] @ w[j]
        w[n] = np.linalg.solve(blocks[n], rhs)

    u = _reconstruct(problem, w, fem, grid)
    meta = _base_meta(problem, N, M, settings)
    meta["oracle"] = True
    return SolutionGrid(w=w, u=u, x_nodes=fem.interior.copy(), t_nodes=grid.nodes.copy(), meta=meta)
