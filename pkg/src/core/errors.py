"""
Exception types raised by the design pipeline.

Every error carries a stable ``error_code`` so the CLI can map failures to exit
codes and reports can name the failing stage.
"""
from typing import Optional, Tuple


class SpikeDesignError(Exception):
    """Base exception for all design, numerics and simulation failures."""

    def __init__(self, error_code: str, message: str):
        self.error_code = error_code
        self.message = message
        super().__init__(f"{error_code}: {message}")


class ModelDomainError(SpikeDesignError, ValueError):
    """Parameter outside its admissible domain (ω ≤ 0, z_d ≤ 0, M ≤ 0, ...)."""

    def __init__(self, message: str):
        super().__init__("MODEL_DOMAIN", message)


class QuadratureError(SpikeDesignError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, value: float, error_bound: float):
        self.value = value
        self.error_bound = error_bound
        super().__init__("QUADRATURE_NO_CONVERGENCE",
                         f"{message} (estimate={value!r}, error bound={error_bound!r})")


class BracketError(SpikeDesignError):
    """Residual has no sign change over the bracket."""

    def __init__(self, bracket: Tuple[float, float], f_lo: float, f_hi: float):
        self.bracket = bracket
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__("ROOT_NO_BRACKET",
                         f"no sign change on [{bracket[0]!r}, {bracket[1]!r}]: "
                         f"residuals {f_lo!r}, {f_hi!r}")


class RootFindingError(SpikeDesignError):
    """Root solver finished without meeting the residual tolerance."""

    def __init__(self, message: str, root: float, residual: float):
        self.root = root
        self.residual = residual
        super().__init__("ROOT_NO_CONVERGENCE", f"{message} (root={root!r}, residual={residual!r})")


class SpikeTimeoutError(SpikeDesignError):
    """Phase did not reach its target before the time limit, or stalled."""

    def __init__(self, message: str, final_theta: float, final_time: float):
        self.final_theta = final_theta
        self.final_time = final_time
        super().__init__("SPIKE_TIMEOUT",
                         f"{message} (theta={final_theta!r} at t={final_time!r})")


class InfeasibleCostateError(SpikeDesignError):
    """Initial costate at or above the feasibility limit of the model."""

    def __init__(self, lambda0: float, limit: float):
        self.lambda0 = lambda0
        self.limit = limit
        super().__init__("COSTATE_INFEASIBLE",
                         f"lambda0={lambda0!r} must be strictly below {limit!r}")


class InfeasibleTimeError(SpikeDesignError):
    """Requested spike time lies outside the attainable range of the unbounded design."""

    def __init__(self, target: float, attainable: Tuple[float, float]):
        self.target = target
        self.attainable = attainable
        super().__init__("TIME_UNATTAINABLE",
                         f"T={target!r} outside attainable range "
                         f"({attainable[0]!r}, {attainable[1]!r})")


class NoSaturationError(SpikeDesignError):
    """The analytic control never reaches the bound for this costate."""

    def __init__(self, message: str):
        super().__init__("NO_SATURATION", message)


class RegimeMismatchError(SpikeDesignError):
    """Target time belongs to a different control regime than the one requested."""

    def __init__(self, expected: str, actual: str, target: float):
        self.expected = expected
        self.actual = actual
        self.target = target
        super().__init__("REGIME_MISMATCH",
                         f"T={target!r} is in regime {actual}, not {expected}")


class InfeasibleTargetError(SpikeDesignError):
    """Target time outside the feasible window under the amplitude bound."""

    def __init__(self, target: float, bounds: Optional[object] = None):
        self.target = target
        self.bounds = bounds
        super().__init__("TARGET_OUTSIDE_WINDOW",
                         f"T={target!r} is not reachable with the given bound ({bounds})")


class OracleConvergenceError(SpikeDesignError):
    """Direct transcription could not meet the terminal constraint."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__("ORACLE_NO_CONVERGENCE", f"{message} (terminal residual={residual!r})")
