"""
Minimum-power stimulus design without an amplitude bound.

Along an extremal the Hamiltonian H = I² + λ(ω + Z(θ)I) stays at its initial value
ωλ₀, which fixes the costate and the control as functions of phase:

    θ̇  = √R,  R = ω² − ωλ₀·z_d²·S(θ)²
    I* = −ωλ₀·z_d·S(θ) / (ω + √R)
    λ  = 2ωλ₀ / (ω + √R)

S(θ) = sinθ (sinusoidal) or 1 − cosθ (SNIPER). The rationalized forms are exact at
the zeros of S, where I* → 0 and λ → λ₀. The spike time is strictly increasing in
λ₀ and grows without bound as λ₀ approaches the costate limit ω/(z_d²·S_max²), so
R is evaluated through the gap δ = limit − λ₀:

    R = ω²·(1 − S²/S_max²) + ω·δ·z_d²·S²

For the sinusoidal PRC the period is the complete elliptic integral 4K(λ₀z_d²/ω)/ω.
The energy follows from integrating H over the cycle: E = ωλ₀·T − ∫₀^{2π} λ dθ.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy import special

from src.core.errors import (
    InfeasibleCostateError,
    InfeasibleTimeError,
    ModelDomainError,
    QuadratureError,
)
from src.core.numerics import QuadratureSpec, RootSpec, adaptive_integral, solve_monotone
from src.models.phase_model import ArrayLike, ModelKind, PhaseModel, design_model

logger = logging.getLogger(__name__)

# Decades below the costate limit tried before the last double under it
LADDER_DEPTH = 15
BRACKET_DOUBLINGS = 200


@dataclass(frozen=True)
class UnboundedDesign:
    """Analytic design for a target spike time: costate seed, time and energy."""
    model: PhaseModel
    lambda0: float
    T: float
    E: float

    def to_dict(self) -> Dict[str, object]:
        return {"model": self.model.to_dict(), "lambda0": self.lambda0, "T": self.T, "E": self.E}


def half_wave(model: PhaseModel) -> Tuple[float, float]:
    """
    Fundamental domain of the S(θ)² integrands and its multiplicity.

    Returns:
        (upper limit, factor): (π/2, 4) for sinusoidal, (π, 2) for SNIPER
    """
    if model.kind is ModelKind.SINUSOIDAL:
        return 0.5 * math.pi, 4.0
    return math.pi, 2.0


def _limit(model: PhaseModel) -> float:
    return model.omega / (model.z_d ** 2 * model.shape_max ** 2)


def feasibility_limit(model: PhaseModel) -> float:
    """Costate bound ω/(z_d²·max S²): ω/z_d² sinusoidal, ω/(4z_d²) SNIPER."""
    return _limit(design_model(model))


def check_feasible(model: PhaseModel, lambda0: float) -> None:
    """Raise InfeasibleCostateError unless λ₀ is finite and strictly below the limit."""
    limit = feasibility_limit(model)
    if not (math.isfinite(lambda0) and lambda0 < limit):
        raise InfeasibleCostateError(lambda0, limit)


def radicand_from_gap(model: PhaseModel, gap: float, theta: ArrayLike) -> ArrayLike:
    """R at distance ``gap`` below the costate limit; negative gaps seed beyond it."""
    s = model.prc_shape(theta)
    return model.omega ** 2 * model.prc_deficit(theta) + model.omega * gap * model.z_d ** 2 * s * s


def radicand(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    return radicand_from_gap(model, _limit(model) - lambda0, theta)


def analytic_speed(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    """√R without the global feasibility check (used inside bounded plans)."""
    return np.sqrt(np.maximum(radicand(model, lambda0, theta), 0.0))


def analytic_control(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    s = model.prc_shape(theta)
    return -model.omega * lambda0 * model.z_d * s / (model.omega + analytic_speed(model, lambda0, theta))


def analytic_costate(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    return 2.0 * model.omega * lambda0 / (model.omega + analytic_speed(model, lambda0, theta))


def optimal_phase_speed(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    """
    Phase velocity along the extremal, √(ω² − ωλ₀z_d²S(θ)²).

    Raises:
        InfeasibleCostateError: If λ₀ is at or above the feasibility limit
    """
    m = design_model(model)
    check_feasible(m, lambda0)
    return analytic_speed(m, lambda0, theta)


def feedback_control(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    """
    Minimum-power feedback law I*(θ).

    Raises:
        InfeasibleCostateError: If λ₀ is at or above the feasibility limit
    """
    m = design_model(model)
    check_feasible(m, lambda0)
    return analytic_control(m, lambda0, theta)


def costate_of(model: PhaseModel, lambda0: float, theta: ArrayLike) -> ArrayLike:
    """
    Costate λ(θ) on the branch with λ(0) = λ₀; equals −2I*/Z.

    Raises:
        InfeasibleCostateError: If λ₀ is at or above the feasibility limit
    """
    m = design_model(model)
    check_feasible(m, lambda0)
    return analytic_costate(m, lambda0, theta)


def energy_sensitivity(model: PhaseModel, lambda0: float) -> float:
    """dE/dT = H = ωλ₀."""
    return design_model(model).omega * lambda0


class UnboundedDesigner:
    """
    Designs minimum-power stimuli when the current amplitude is not limited.

    Features:
    - Period map T(λ₀) and its inversion
    - Design energy and its sensitivity to the target time
    - Attainable spike-time range
    """

    def __init__(self, config_manager=None):
        """
        Initialize the designer.

        Args:
            config_manager: Optional ConfigManager for quadrature/root tolerances
        """
        self.config = config_manager
        self.quad_spec = QuadratureSpec.from_config(config_manager)
        self._top_cache: Dict[PhaseModel, Tuple[float, float]] = {}

    def _period_at_gap(self, m: PhaseModel, gap: float) -> float:
        """Spike time of the seed ``gap`` below the costate limit (gap > 0)."""
        if m.kind is ModelKind.SINUSOIDAL:
            return 4.0 * float(special.ellipkm1(gap * m.z_d ** 2 / m.omega)) / m.omega
        upper, factor = half_wave(m)
        return factor * adaptive_integral(
            lambda th: 1.0 / math.sqrt(float(radicand_from_gap(m, gap, th))), 0.0, upper, self.quad_spec
        )

    def spike_time_of(self, model: PhaseModel, lambda0: float) -> float:
        """
        Spike time T(λ₀) = ∫₀^{2π} dθ/θ̇.

        Args:
            model: Phase model
            lambda0: Initial costate, strictly below the feasibility limit

        Returns:
            Spike time
        """
        m = design_model(model)
        check_feasible(m, lambda0)
        return self._period_at_gap(m, _limit(m) - lambda0)

    def design_energy(self, model: PhaseModel, lambda0: float) -> float:
        """Minimum power E = ∫ I*² dt, evaluated as ωλ₀·T − ∫₀^{2π} λ(θ) dθ."""
        m = design_model(model)
        check_feasible(m, lambda0)
        if lambda0 == 0.0:
            return 0.0
        upper, factor = half_wave(m)
        costate_area = factor * adaptive_integral(
            lambda th: float(analytic_costate(m, lambda0, th)), 0.0, upper, self.quad_spec
        )
        return m.omega * lambda0 * self.spike_time_of(m, lambda0) - costate_area

    def _ladder(self, m: PhaseModel) -> List[float]:
        """Seeds 10⁻¹ … 10⁻¹⁵ (units ω/z_d²) below the costate limit, then the last double under it."""
        limit = _limit(m)
        scale = m.omega / m.z_d ** 2
        rungs = [limit - scale * 10.0 ** -k for k in range(1, LADDER_DEPTH + 1)]
        rungs.append(float(np.nextafter(limit, -np.inf)))
        return [lam for lam in rungs if 0.0 < lam < limit]

    def _top(self, m: PhaseModel) -> Tuple[float, float]:
        """(λ₀, T) at the deepest seed under the costate limit whose period evaluates."""
        if m not in self._top_cache:
            top = (0.0, m.natural_period)
            for lam in self._ladder(m):
                try:
                    top = (lam, self.spike_time_of(m, lam))
                except QuadratureError as e:
                    logger.warning(f"Spike time failed to evaluate {_limit(m) - lam:.3g} below the costate limit: {e}")
                    break
            self._top_cache[m] = top
            logger.debug(f"Deepest period for {m}: lambda0={top[0]!r} T={top[1]!r}")
        return self._top_cache[m]

    def attainable_spike_times(self, model: PhaseModel) -> Tuple[float, float]:
        """
        Range of spike times reachable by the analytic law.

        The lower end is 0 (λ₀ → −∞). The period diverges at the costate limit; the
        upper end is the period at the closest seed below the limit that double
        precision represents and the quadrature resolves.

        Returns:
            (0.0, largest attainable spike time)
        """
        return 0.0, self._top(design_model(model))[1]

    def lambda0_for_spike_time(self, model: PhaseModel, T: float) -> float:
        """
        Invert the period map.

        Targets beyond the natural period are solved in log δ, δ = limit − λ₀, which
        keeps the residual smooth where T(λ₀) is steep.

        Args:
            model: Phase model
            T: Target spike time, T > 0

        Returns:
            λ₀ with spike_time_of(model, λ₀) = T

        Raises:
            InfeasibleTimeError: If T lies outside the attainable range
        """
        m = design_model(model)
        if not (math.isfinite(T) and T > 0):
            raise ModelDomainError(f"Target spike time must be positive, got {T!r}")

        natural = m.natural_period
        if math.isclose(T, natural, rel_tol=1e-14, abs_tol=0.0):
            return 0.0

        limit = _limit(m)
        if T > natural:
            top_lambda, top_T = self._top(m)
            if T > top_T:
                raise InfeasibleTimeError(T, (0.0, top_T))
            if T == top_T:
                return top_lambda

            def log_gap_residual(u: float) -> float:
                return T - self._period_at_gap(m, math.exp(u))

            bracket = (math.log(limit - top_lambda), math.log(limit))
            u = solve_monotone(log_gap_residual, RootSpec.from_config(bracket, self.config))
            lambda0 = min(limit - math.exp(u), top_lambda)
        else:
            def residual(lam: float) -> float:
                return self.spike_time_of(m, lam) - T

            lo = -m.omega / m.z_d ** 2
            for _ in range(BRACKET_DOUBLINGS):
                if self.spike_time_of(m, lo) < T:
                    break
                lo *= 2.0
            else:
                raise InfeasibleTimeError(T, self.attainable_spike_times(m))
            lambda0 = solve_monotone(residual, RootSpec.from_config((lo, 0.0), self.config))

        logger.info(f"Unbounded design {m}: T={T!r} -> lambda0={lambda0!r}")
        return lambda0

    def design(self, model: PhaseModel, T: float) -> UnboundedDesign:
        """Full (λ₀, T, E) triple for a target spike time."""
        lambda0 = self.lambda0_for_spike_time(model, T)
        return UnboundedDesign(model, lambda0, T, self.design_energy(model, lambda0))
