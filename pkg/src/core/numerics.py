"""
Numerical building blocks shared by the design services.

- adaptive_integral: adaptive Gauss-Kronrod quadrature (QUADPACK via scipy)
- solve_monotone: bracketed root finding for monotone residuals (Brent)
- integrate_until_spike: fixed-step RK4 with cubic Hermite event refinement
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from src.core.errors import (
    BracketError,
    ModelDomainError,
    QuadratureError,
    RootFindingError,
    SpikeTimeoutError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for adaptive quadrature."""
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ModelDomainError(f"Quadrature tolerances must be positive ({self.rel_tol}, {self.abs_tol})")
        if int(self.max_subdivisions) < 1:
            raise ModelDomainError(f"max_subdivisions must be >= 1, got {self.max_subdivisions}")

    @classmethod
    def from_config(cls, config_manager=None) -> "QuadratureSpec":
        if config_manager is None:
            return cls()
        return cls(
            rel_tol=float(config_manager.get("quadrature.rel_tol", 1e-10)),
            abs_tol=float(config_manager.get("quadrature.abs_tol", 1e-12)),
            max_subdivisions=int(config_manager.get("quadrature.max_subdivisions", 200)),
        )


@dataclass(frozen=True)
class RootSpec:
    """Bracket and tolerances for a monotone root solve."""
    bracket: Tuple[float, float]
    x_tol: float = 1e-14
    f_tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        lo, hi = self.bracket
        if not lo < hi:
            raise ModelDomainError(f"Bracket must satisfy lo < hi, got {self.bracket}")
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise ModelDomainError("Root tolerances must be positive")

    def with_bracket(self, lo: float, hi: float) -> "RootSpec":
        return RootSpec((lo, hi), self.x_tol, self.f_tol, self.max_iter)

    @classmethod
    def from_config(cls, bracket: Tuple[float, float], config_manager=None) -> "RootSpec":
        if config_manager is None:
            return cls(bracket)
        return cls(
            bracket,
            x_tol=float(config_manager.get("root.x_tol", 1e-14)),
            f_tol=float(config_manager.get("root.f_tol", 1e-9)),
            max_iter=int(config_manager.get("root.max_iter", 200)),
        )


def adaptive_integral(g: Callable[[float], float], a: float, b: float,
                      spec: Optional[QuadratureSpec] = None) -> float:
    """
    Integrate ``g`` over [a, b] to the requested tolerance.

    Args:
        g: Scalar integrand; may have integrable endpoint behavior
        a: Lower limit
        b: Upper limit, a <= b
        spec: Quadrature tolerances

    Returns:
        Integral estimate with error <= max(abs_tol, rel_tol*|result|)

    Raises:
        QuadratureError: If QUADPACK reports non-convergence
    """
    spec = spec or QuadratureSpec()
    if b < a:
        raise ModelDomainError(f"Integration limits must satisfy a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0

    result = integrate.quad(
        g, a, b,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=int(spec.max_subdivisions),
        full_output=1,
    )
    value, error = float(result[0]), float(result[1])
    # quad appends a message only when ier != 0
    if len(result) > 3:
        raise QuadratureError(str(result[3]).splitlines()[0], value, error)
    if not math.isfinite(value):
        raise QuadratureError("non-finite integral", value, error)
    return value


def solve_monotone(residual: Callable[[float], float], spec: RootSpec) -> float:
    """
    Find the root of a continuous monotone residual inside ``spec.bracket``.

    Args:
        residual: Scalar map with a sign change over the bracket
        spec: Bracket and tolerances

    Returns:
        Root with |residual(root)| <= f_tol

    Raises:
        BracketError: If the residual has no sign change on the bracket
        RootFindingError: If Brent's method stops above the residual tolerance
    """
    lo, hi = spec.bracket
    f_lo, f_hi = residual(lo), residual(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError((lo, hi), f_lo, f_hi)

    root, info = optimize.brentq(
        residual, lo, hi,
        xtol=spec.x_tol,
        maxiter=int(spec.max_iter),
        full_output=True,
        disp=False,
    )
    f_root = residual(root)
    logger.debug(f"brentq: root={root!r} residual={f_root!r} iterations={info.iterations}")
    if abs(f_root) > spec.f_tol:
        raise RootFindingError(f"residual above tolerance {spec.f_tol}", root, f_root)
    return float(root)


@dataclass
class SpikeCrossing:
    """Outcome of integrating a phase until it reaches its target."""
    t_spike: float
    times: np.ndarray
    thetas: np.ndarray


def _rk4_step(velocity: Callable[[float, float], float], t: float, theta: float,
              h: float, k1: float) -> Tuple[float, float]:
    k2 = velocity(t + 0.5 * h, theta + 0.5 * h * k1)
    k3 = velocity(t + 0.5 * h, theta + 0.5 * h * k2)
    k4 = velocity(t + h, theta + h * k3)
    theta_next = theta + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return theta_next, velocity(t + h, theta_next)


def _hermite(s: float, h: float, y0: float, y1: float, d0: float, d1: float) -> float:
    """Cubic Hermite interpolant on a step of length h at fraction s."""
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)


def integrate_until_spike(velocity: Callable[[float, float], float], theta0: float,
                          t_max: float, step: float, t0: float = 0.0,
                          target: float = TWO_PI, event_tol: float = 1e-10) -> SpikeCrossing:
    """
    Integrate dθ/dt = velocity(t, θ) with fixed-step RK4 until θ reaches ``target``.

    The crossing is located by root finding on the cubic Hermite interpolant of the
    crossing step, so the returned time carries the local O(step⁴) accuracy of the
    stepper. The last sample is exactly (t_spike, target).

    Args:
        velocity: Phase velocity map (t, θ) -> rate, positive along the path
        theta0: Initial phase
        t_max: Time limit (absolute)
        step: Fixed step size
        t0: Initial time
        target: Phase to reach
        event_tol: Phase tolerance of the crossing location

    Returns:
        SpikeCrossing with the crossing time and the sampled path

    Raises:
        SpikeTimeoutError: If θ stalls (velocity <= 0) or misses the target by t_max
    """
    if not step > 0:
        raise ModelDomainError(f"step must be positive, got {step}")

    t, theta = float(t0), float(theta0)
    times: List[float] = [t]
    thetas: List[float] = [theta]
    if theta >= target:
        return SpikeCrossing(t, np.array(times), np.array(thetas))

    v = velocity(t, theta)
    while t < t_max:
        if not v > 0:
            raise SpikeTimeoutError("phase velocity is not positive", theta, t)
        theta_next, v_next = _rk4_step(velocity, t, theta, step, v)

        if theta_next >= target:
            y0, y1, d0, d1 = theta, theta_next, v, v_next
            s_tol = event_tol / max(abs(v), abs(v_next), 1e-300) / step
            s_star = optimize.brentq(
                lambda s: _hermite(s, step, y0, y1, d0, d1) - target,
                0.0, 1.0, xtol=max(s_tol, 1e-15),
            )
            t_spike = t + s_star * step
            if t_spike > times[-1]:
                times.append(t_spike)
                thetas.append(target)
            else:
                thetas[-1] = target
            return SpikeCrossing(t_spike, np.array(times), np.array(thetas))

        t += step
        theta, v = theta_next, v_next
        times.append(t)
        thetas.append(theta)

    raise SpikeTimeoutError(f"target phase {target!r} not reached by t_max={t_max!r}", theta, t)

