"""
Harness - example presets, two-mesh error estimates and convergence studies
Reproduces the refinement ladders in time and space and writes them as CSV plus
an aligned text table.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import click
import numpy as np
import pandas as pd

from config import OUTPUT_PATH, QuadratureSettings
from exceptions import ConfigurationError, DomainError
from kernel_engine import VariableExponent
from model_transform import ModelSpec, TransformedProblem, build_transformed_problem
from solver import SolutionGrid, dense_oracle_solve, solve_all

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["example", "alpha0", "axis", "N", "M", "error", "order", "theory_order"]
ORACLE_SIZES = ((2, 3), (4, 4), (8, 8))

# (sigma, rate, forcing scaled by pi cos(pi x), exponent slope, exponent power)
_SINE_EXAMPLES = {
    "1": (0.45, 0.03, True, -1.0 / 11.0, 1),
    "2": (0.5, 0.25, False, -1.0 / 11.0, 2),
    "3": (0.4, 0.1, True, 1.0 / 11.0, 3),
}

CALL_STRIKE = 1.0
CALL_X_DOMAIN = (-1.5, 1.5)


def normalized_forcing_coeff(sigma: float, rate: float) -> float:
    """Coefficient of pi cos(pi x) in the forced sine examples, stated for the equation divided by -sigma^4"""
    return rate / sigma ** 4 - 1.0 / (2.0 * sigma ** 2)


def _sine_spec(example_id: str) -> ModelSpec:
    sigma, rate, forced, _, _ = _SINE_EXAMPLES[example_id]
    # (sigma^2/2 - r) pi cos(pi x) cancels the advection of sin(pi x) at both ends
    amplitude = -sigma ** 4 * normalized_forcing_coeff(sigma, rate) * np.pi if forced else 0.0

    def forcing(x, t):
        return amplitude * np.cos(np.pi * np.asarray(x, dtype=float)) + 0.0 * np.asarray(t, dtype=float)

    return ModelSpec(
        sigma=sigma,
        rate=rate,
        expiry=1.0,
        s_domain=(1.0, math.e),
        x_domain=(0.0, 1.0),
        terminal_payoff=lambda S: np.sin(np.pi * np.log(S)),
        terminal_slope=lambda S: np.pi * np.cos(np.pi * np.log(S)) / S,
        left_boundary=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        right_boundary=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        left_rate=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        right_rate=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        forcing=forcing,
        static_forcing=True,
        label=f"example {example_id}",
    )


def _call_spec() -> ModelSpec:
    sigma, rate, expiry, strike = 0.3, 0.05, 1.0, CALL_STRIKE
    s_max = math.exp(CALL_X_DOMAIN[1])

    return ModelSpec(
        sigma=sigma,
        rate=rate,
        expiry=expiry,
        s_domain=(0.0, math.inf),
        x_domain=CALL_X_DOMAIN,
        terminal_payoff=lambda S: np.maximum(np.asarray(S, dtype=float) - strike, 0.0),
        terminal_slope=lambda S: np.where(np.asarray(S, dtype=float) > strike, 1.0, 0.0),
        left_boundary=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        right_boundary=lambda t: s_max - strike * np.exp(-rate * (expiry - np.asarray(t, dtype=float))),
        left_rate=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        right_rate=lambda t: -strike * rate * np.exp(-rate * (expiry - np.asarray(t, dtype=float))),
        forcing=lambda x, t: np.zeros_like(np.asarray(x, dtype=float) + np.asarray(t, dtype=float)),
        static_forcing=True,
        label="european call",
    )


def example_spec(example_id: str) -> ModelSpec:
    example_id = str(example_id)
    if example_id in _SINE_EXAMPLES:
        return _sine_spec(example_id)
    if example_id == "call":
        return _call_spec()
    raise ConfigurationError(f"unknown example '{example_id}'")


def example_exponent(example_id: str, alpha0: float) -> VariableExponent:
    example_id = str(example_id)
    if example_id in _SINE_EXAMPLES:
        _, _, _, slope, power = _SINE_EXAMPLES[example_id]
        return VariableExponent.polynomial(alpha0, slope, power)
    if example_id == "call":
        return VariableExponent.polynomial(alpha0, -1.0 / 11.0, 2)
    raise ConfigurationError(f"unknown example '{example_id}'")


def example_catalogue() -> List[Dict[str, Any]]:
    """Preset parameters for display"""
    catalogue = []
    for example_id, exponent in (("1", "alpha0 - t/11"), ("2", "alpha0 - t^2/11"),
                                 ("3", "alpha0 + t^3/11"), ("call", "alpha0 - t^2/11")):
        spec = example_spec(example_id)
        catalogue.append({
            "id": example_id,
            "label": spec.label,
            "sigma": spec.sigma,
            "rate": spec.rate,
            "expiry": spec.expiry,
            "x_domain": list(spec.x_domain),
            "exponent": exponent,
        })
    return catalogue


@dataclass
class ExperimentConfig:
    example_id: Union[int, str]
    alpha0: float
    N: int
    M: int
    refine_axis: str = "time"
    refine_levels: int = 4
    output_path: str = OUTPUT_PATH
    jacobi_nodes: Optional[int] = None
    legendre_nodes: Optional[int] = None
    custom_spec: Optional[ModelSpec] = None
    custom_exponent: Optional[VariableExponent] = None

    def __post_init__(self):
        self.example_id = str(self.example_id)
        if self.example_id not in ("1", "2", "3", "call", "custom"):
            raise ConfigurationError(f"unknown example '{self.example_id}'")
        if self.example_id == "custom" and (self.custom_spec is None or self.custom_exponent is None):
            raise ConfigurationError("custom experiments need custom_spec and custom_exponent")
        if self.refine_axis not in ("time", "space"):
            raise ConfigurationError(f"refine_axis must be 'time' or 'space', got '{self.refine_axis}'")
        if self.refine_levels < 1:
            raise ConfigurationError(f"refine_levels must be at least 1, got {self.refine_levels}")
        if self.N < 1 or self.M < 2:
            raise ConfigurationError(f"need N >= 1 and M >= 2, got N={self.N}, M={self.M}")
        for name in ("jacobi_nodes", "legendre_nodes"):
            value = getattr(self, name)
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.example_id == "custom":
            # custom studies report the exponent's own alpha(0)
            self.alpha0 = self.custom_exponent.alpha0
        elif not 0.0 < self.alpha0 < 1.0:
            raise ConfigurationError(f"alpha0 must lie in (0, 1), got {self.alpha0}")

    def settings(self) -> QuadratureSettings:
        return QuadratureSettings.from_env().override(self.jacobi_nodes, self.legendre_nodes)

    def model_spec(self) -> ModelSpec:
        if self.example_id == "custom":
            return self.custom_spec
        return example_spec(self.example_id)

    def exponent(self) -> VariableExponent:
        if self.example_id == "custom":
            return self.custom_exponent
        try:
            return example_exponent(self.example_id, self.alpha0)
        except DomainError as e:
            raise ConfigurationError(f"alpha0={self.alpha0} is not admissible for example "
                                     f"{self.example_id}: {e}")

    def build_problem(self) -> TransformedProblem:
        return build_transformed_problem(self.model_spec(), self.exponent())


@dataclass
class ConvergenceRow:
    N: int
    M: int
    error: float
    order: Optional[float] = None


@dataclass
class ConvergenceReport:
    example: str
    alpha0: float
    axis: str
    theory_order: float
    rows: List[ConvergenceRow] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)

    @property
    def errors(self) -> List[float]:
        return [row.error for row in self.rows]

    @property
    def orders(self) -> List[float]:
        return [row.order for row in self.rows if row.order is not None]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{
                "example": self.example,
                "alpha0": self.alpha0,
                "axis": self.axis,
                "N": row.N,
                "M": row.M,
                "error": row.error,
                "order": np.nan if row.order is None else row.order,
                "theory_order": self.theory_order,
            } for row in self.rows],
            columns=CSV_COLUMNS,
        )


def theory_order(axis: str, alpha0: float) -> float:
    return 0.5 + 1.5 * alpha0 if axis == "time" else 2.0


def _check_domains(fine: SolutionGrid, coarse: SolutionGrid):
    if fine.x_domain != coarse.x_domain:
        raise DomainError(f"solutions live on different domains: {fine.x_domain} vs {coarse.x_domain}")
    if fine.t_nodes[-1] != coarse.t_nodes[-1]:
        raise DomainError("solutions have different expiries")


def time_error(fine: SolutionGrid, coarse: SolutionGrid) -> float:
    """Two-mesh L2 error between (2N, M) and (N, M) at the coarse time levels"""
    _check_domains(fine, coarse)
    if fine.N != 2 * coarse.N or fine.M != coarse.M:
        raise DomainError(f"expected a (2N, M) / (N, M) pair, got ({fine.N}, {fine.M}) / "
                          f"({coarse.N}, {coarse.M})")
    a, b = coarse.x_domain
    tau = coarse.t_nodes[-1] / coarse.N
    h = (b - a) / coarse.M
    diff = fine.u[2::2] - coarse.u[1:]
    return float(np.sqrt(tau * h * np.sum(diff ** 2)))


def space_error(fine: SolutionGrid, coarse: SolutionGrid) -> float:
    """Two-mesh L2 error between (N, 2M) and (N, M) at the coarse nodes"""
    _check_domains(fine, coarse)
    if fine.M != 2 * coarse.M or fine.N != coarse.N:
        raise DomainError(f"expected an (N, 2M) / (N, M) pair, got ({fine.N}, {fine.M}) / "
                          f"({coarse.N}, {coarse.M})")
    a, b = coarse.x_domain
    tau = coarse.t_nodes[-1] / coarse.N
    h = (b - a) / coarse.M
    diff = fine.u[1:, 1::2] - coarse.u[1:]
    return float(np.sqrt(tau * h * np.sum(diff ** 2)))


def two_mesh_error_time(problem: TransformedProblem, N: int, M: int,
                        settings: Optional[QuadratureSettings] = None,
                        solver: Callable = solve_all) -> float:
    return time_error(solver(problem, 2 * N, M, settings), solver(problem, N, M, settings))


def two_mesh_error_space(problem: TransformedProblem, N: int, M: int,
                         settings: Optional[QuadratureSettings] = None,
                         solver: Callable = solve_all) -> float:
    return space_error(solver(problem, N, 2 * M, settings), solver(problem, N, M, settings))


def _orders(errors: Sequence[float]) -> List[Optional[float]]:
    orders: List[Optional[float]] = [None]
    for previous, current in zip(errors[:-1], errors[1:]):
        if previous > 0.0 and current > 0.0:
            orders.append(math.log2(previous / current))
        else:
            orders.append(None)
    return orders


def convergence_study(config: ExperimentConfig, solver: Callable = solve_all) -> ConvergenceReport:
    """Run the doubling ladder along config.refine_axis"""
    problem = config.build_problem()
    settings = config.settings()
    axis = config.refine_axis
    cache: Dict[Tuple[int, int], SolutionGrid] = {}

    def solution(N: int, M: int) -> SolutionGrid:
        if (N, M) not in cache:
            cache[(N, M)] = solver(problem, N, M, settings)
        return cache[(N, M)]

    sizes, errors = [], []
    for level in range(config.refine_levels):
        if axis == "time":
            N, M = config.N * 2 ** level, config.M
            error = time_error(solution(2 * N, M), solution(N, M))
        else:
            N, M = config.N, config.M * 2 ** level
            error = space_error(solution(N, 2 * M), solution(N, M))
        sizes.append((N, M))
        errors.append(error)
        logger.info(f"Example {config.example_id} alpha0={config.alpha0} {axis}: "
                    f"N={N}, M={M}, error={error:.4e}")

    diagnostics: List[str] = []
    for grid in cache.values():
        for note in grid.meta.get("diagnostics", []):
            if note not in diagnostics:
                diagnostics.append(note)

    report = ConvergenceReport(
        example=config.example_id,
        alpha0=config.alpha0,
        axis=axis,
        theory_order=theory_order(axis, config.alpha0),
        rows=[ConvergenceRow(N=N, M=M, error=e, order=o)
              for (N, M), e, o in zip(sizes, errors, _orders(errors))],
        diagnostics=diagnostics,
    )
    return report


def format_table(report: ConvergenceReport) -> str:
    """Aligned text table: one line per refinement level"""
    size_column = "N" if report.axis == "time" else "M"
    frame = pd.DataFrame({
        size_column: [row.N if report.axis == "time" else row.M for row in report.rows],
        "Error": [f"{row.error:.4e}" for row in report.rows],
        "Order": ["" if row.order is None else f"{row.order:.2f}" for row in report.rows],
    })
    header = (f"Example {report.example}, alpha0 = {report.alpha0}, {report.axis} refinement "
              f"(theory {report.theory_order:.2f})")
    return header + "\n" + frame.to_string(index=False)


def emit_report(report: ConvergenceReport, path: str,
                echo: Optional[Callable[[str], Any]] = click.echo) -> str:
    """Write the report CSV and print its text table; returns the table"""
    report.to_frame().to_csv(path, index=False, na_rep="", lineterminator="\n")
    logger.info(f"Wrote {len(report.rows)} rows to {path}")
    table = format_table(report)
    if echo is not None:
        echo(table)
    return table


def oracle_cross_check(problem: TransformedProblem,
                       sizes: Sequence[Tuple[int, int]] = ORACLE_SIZES,
                       settings: Optional[QuadratureSettings] = None) -> List[Dict[str, float]]:
    """Max componentwise difference between the stepping solver and the dense oracle"""
    results = []
    for N, M in sizes:
        fast = solve_all(problem, N, M, settings)
        dense = dense_oracle_solve(problem, N, M, settings)
        difference = float(np.max(np.abs(fast.u - dense.u)))
        logger.info(f"Oracle check N={N}, M={M}: max difference {difference:.3e}")
        results.append({"N": N, "M": M, "max_difference": difference})
    return results
