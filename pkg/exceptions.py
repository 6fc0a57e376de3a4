"""
Exception hierarchy for the variable-exponent Black-Scholes solver
"""


class SolverError(Exception):
    """Base class for every error raised by the solver modules"""


class DomainError(SolverError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class OutOfDomainError(DomainError):
    """Asset price or time outside the truncated pricing domain"""


class PreconditionError(SolverError):
    """Operation called without the hypothesis its formula relies on"""


class ConfigurationError(SolverError):
    """Invalid experiment or request configuration"""


class NumericalError(SolverError):
    """Step matrix not positive definite or non-finite values produced"""


class OracleSizeError(SolverError):
    """Dense oracle refuses instances above its size cap"""
