"""
Minimum-power stimulus design under an amplitude bound |I| ≤ M.

The feasible spike-time window [T^M_min, T^M_max] is spanned by the bang-bang
controls ±M. Inside it, the analytic law alone covers [T^{I*}_min, T^{I*}_max];
the remaining fast and slow bands are reached by plans that follow I* away from
the PRC peak and saturate at ±M around it.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.errors import (
    InfeasibleCostateError,
    InfeasibleTargetError,
    ModelDomainError,
    NoSaturationError,
    RegimeMismatchError,
)
from src.core.numerics import TWO_PI, QuadratureSpec, RootSpec, adaptive_integral, solve_monotone
from src.models.phase_model import ArrayLike, ModelKind, PhaseModel, design_model
from src.services.unbounded import (
    UnboundedDesigner,
    analytic_control,
    analytic_costate,
    analytic_speed,
    feasibility_limit,
    half_wave,
)

logger = logging.getLogger(__name__)

# Relative distance to T^M_min / T^M_max at which the pure bang-bang plan is used
EDGE_REL_TOL = 1e-9
BRACKET_DOUBLINGS = 200


class Regime(Enum):
    """Control regime of a target spike time under a bound."""
    INFEASIBLE = "Infeasible"
    FAST_SWITCHED = "FastSwitched"
    ANALYTIC_ONLY = "AnalyticOnly"
    SLOW_SWITCHED = "SlowSwitched"


class Direction(Enum):
    """Which side of the natural period a switched plan serves."""
    FAST = "fast"
    SLOW = "slow"


class ControlKind(Enum):
    """Control law applied on a plan segment."""
    ANALYTIC = "analytic"
    SAT_PLUS = "sat+"
    SAT_MINUS = "sat-"


@dataclass
class SpikeTimeBounds:
    """Feasible spike-time window under the bound M."""
    bound: float
    t_bang_min: float
    t_analytic_min: float
    t_analytic_max: float
    t_bang_max: float
    case: str

    @property
    def bounded_above(self) -> bool:
        return math.isfinite(self.t_bang_max)

    def contains(self, T: float) -> bool:
        return self.t_bang_min <= T <= self.t_bang_max

    def to_dict(self) -> Dict[str, Any]:
        return {
            "M": self.bound,
            "case": self.case,
            "t_bang_min": self.t_bang_min,
            "t_analytic_min": self.t_analytic_min,
            "t_analytic_max": self.t_analytic_max,
            "t_bang_max": self.t_bang_max,
        }

    def __str__(self) -> str:
        return (f"[{self.t_bang_min:.6g}, {self.t_bang_max:.6g}] "
                f"analytic [{self.t_analytic_min:.6g}, {self.t_analytic_max:.6g}]")


@dataclass(frozen=True)
class PlanSegment:
    """Phase interval [start, end) with its control law."""
    start: float
    end: float
    kind: ControlKind

    def to_dict(self) -> Dict[str, Any]:
        return {"from": self.start, "to": self.end, "kind": self.kind.value}


@dataclass
class PiecewisePlan:
    """
    Phase-indexed stimulus: an ordered partition of [0, 2π] into analytic and
    saturated segments.

    ``lambda0`` is -inf / +inf for the pure bang-bang plans at the window edges,
    where no finite costate seed exists.
    """
    model: PhaseModel
    lambda0: float
    segments: Tuple[PlanSegment, ...]
    bound: Optional[float] = None
    regime: Regime = Regime.ANALYTIC_ONLY
    _starts: List[float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.segments:
            raise ModelDomainError("A plan needs at least one segment")
        if self.segments[0].start != 0.0 or not math.isclose(self.segments[-1].end, TWO_PI, abs_tol=1e-12):
            raise ModelDomainError("Plan segments must cover [0, 2π]")
        for left, right in zip(self.segments, self.segments[1:]):
            if left.end != right.start or left.end < left.start:
                raise ModelDomainError(f"Plan segments are not contiguous at {left.end!r}")
        if self.bound is None and any(s.kind is not ControlKind.ANALYTIC for s in self.segments):
            raise ModelDomainError("Saturated segments need a bound")
        self._starts = [s.start for s in self.segments]

    @property
    def switching_angles(self) -> Tuple[float, ...]:
        return tuple(s.start for s in self.segments[1:])

    def segment_at(self, theta: float) -> PlanSegment:
        idx = bisect.bisect_right(self._starts, float(theta)) - 1
        return self.segments[min(max(idx, 0), len(self.segments) - 1)]

    def segment_control(self, kind: ControlKind, theta: ArrayLike) -> ArrayLike:
        if kind is ControlKind.ANALYTIC:
            return analytic_control(self.model, self.lambda0, theta)
        sign = 1.0 if kind is ControlKind.SAT_PLUS else -1.0
        return sign * float(self.bound) + 0.0 * np.asarray(theta, dtype=float)

    def _costate(self, kind: ControlKind, theta: ArrayLike) -> ArrayLike:
        if kind is ControlKind.ANALYTIC:
            return analytic_costate(self.model, self.lambda0, theta)
        u = self.segment_control(kind, theta)
        z = self.model.z_d * self.model.prc_shape(theta)
        return (self.model.omega * self.lambda0 - float(self.bound) ** 2) / (self.model.omega + z * u)

    def _by_segment(self, fn, theta: ArrayLike) -> ArrayLike:
        if np.ndim(theta) == 0:
            return float(fn(self.segment_at(theta).kind, float(theta)))
        thetas = np.asarray(theta, dtype=float)
        idx = np.clip(np.searchsorted(self._starts, thetas, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty_like(thetas)
        for i, seg in enumerate(self.segments):
            mask = idx == i
            if np.any(mask):
                out[mask] = fn(seg.kind, thetas[mask])
        return out

    def control_at(self, theta: ArrayLike) -> ArrayLike:
        """Stimulus I(θ) prescribed by the plan."""
        return self._by_segment(self.segment_control, theta)

    def speed_at(self, theta: ArrayLike) -> ArrayLike:
        """Closed-loop phase velocity ω + Z(θ)·I(θ)."""
        z = self.model.z_d * self.model.prc_shape(theta)
        return self.model.omega + z * self.control_at(theta)

    def costate_at(self, theta: ArrayLike) -> ArrayLike:
        """Multiplier λ(θ); NaN on bang-bang plans."""
        if not math.isfinite(self.lambda0):
            return float("nan") if np.ndim(theta) == 0 else np.full(np.shape(theta), np.nan)
        return self._by_segment(self._costate, theta)

    def hamiltonian_at(self, theta: ArrayLike) -> ArrayLike:
        u = self.control_at(theta)
        return u * u + self.costate_at(theta) * self.speed_at(theta)

    def _integrate(self, integrand, spec: Optional[QuadratureSpec]) -> float:
        total = 0.0
        for seg in self.segments:
            kind = seg.kind
            if kind is ControlKind.ANALYTIC:
                def g(th: float) -> float:
                    return integrand(float(analytic_control(self.model, self.lambda0, th)),
                                     float(analytic_speed(self.model, self.lambda0, th)))

                # peaks become endpoints; θ̇ is smallest there
                cuts = [seg.start] + [p for p in self.model.prc_peaks if seg.start < p < seg.end] + [seg.end]
            else:
                def g(th: float, kind=kind) -> float:
                    u = float(self.segment_control(kind, th))
                    return integrand(u, self.model.omega + self.model.z_d * float(self.model.prc_shape(th)) * u)

                cuts = [seg.start, seg.end]
            total += sum(adaptive_integral(g, a, b, spec) for a, b in zip(cuts, cuts[1:]))
        return total

    def traversal_time(self, spec: Optional[QuadratureSpec] = None) -> float:
        """Spike time of the plan, Σ ∫ dθ/θ̇ over segments."""
        return self._integrate(lambda u, speed: 1.0 / speed, spec)

    def energy(self, spec: Optional[QuadratureSpec] = None) -> float:
        """Stimulus energy ∫ I² dt = Σ ∫ I(θ)²/θ̇ dθ over segments."""
        if all(s.kind is ControlKind.ANALYTIC for s in self.segments) and self.lambda0 == 0.0:
            return 0.0
        return self._integrate(lambda u, speed: u * u / speed, spec)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "bound": self.bound,
            "lambda0": self.lambda0,
            "regime": self.regime.value,
            "segments": [s.to_dict() for s in self.segments],
        }


def _check_bound(M: float) -> float:
    if M is None or not (math.isfinite(M) and M > 0):
        raise ModelDomainError(f"Amplitude bound M must be positive, got {M!r}")
    return float(M)


def lambda0_saturation_limits(model: PhaseModel, M: float) -> Tuple[float, Optional[float]]:
    """
    Costate seeds at which |I*| first touches M at the PRC peak.

    Solves √R(peak) = ω ± z_d·M·S_max for λ₀.

    Args:
        model: Phase model
        M: Amplitude bound

    Returns:
        (fast limit, slow limit); the slow limit is None when z_d·M·S_max >= ω
    """
    m = design_model(model)
    M = _check_bound(M)
    a = m.z_d * M * m.shape_max
    denom = m.omega * (m.z_d * m.shape_max) ** 2
    fast = -a * (2.0 * m.omega + a) / denom
    slow = a * (2.0 * m.omega - a) / denom if a < m.omega else None
    return fast, slow


def switching_angles(model: PhaseModel, M: float, lambda0: float,
                     direction: Direction) -> Tuple[float, ...]:
    """
    Phases where the analytic law meets ±M.

    Args:
        model: Phase model
        M: Amplitude bound
        lambda0: Costate seed at or beyond the saturation limit of ``direction``
        direction: FAST (I* meets +M) or SLOW (I* meets −M)

    Returns:
        Sinusoidal: (θ₁, π−θ₁, π+θ₁, 2π−θ₁); SNIPER: (θ_s, 2π−θ_s)

    Raises:
        NoSaturationError: If I* stays inside the bound for this λ₀
    """
    m = design_model(model)
    fast_limit, slow_limit = lambda0_saturation_limits(m, M)

    if direction is Direction.FAST:
        tol = 1e-12 * max(1.0, abs(fast_limit))
        if not lambda0 <= fast_limit + tol:
            raise NoSaturationError(f"lambda0={lambda0!r} is above the fast saturation limit {fast_limit!r}")
        denom = m.z_d * (-m.omega * lambda0 - M * M)
        target = M
    else:
        if slow_limit is None:
            raise NoSaturationError(f"I* never reaches -{M!r} for {m} (no slow saturation)")
        tol = 1e-12 * max(1.0, abs(slow_limit))
        if not lambda0 >= slow_limit - tol:
            raise NoSaturationError(f"lambda0={lambda0!r} is below the slow saturation limit {slow_limit!r}")
        denom = m.z_d * (M * M + m.omega * lambda0)
        target = -M

    s_switch = min(2.0 * M * m.omega / denom, m.shape_max)
    if m.kind is ModelKind.SINUSOIDAL:
        a = math.asin(s_switch)
        angles: Tuple[float, ...] = (a, math.pi - a, math.pi + a, TWO_PI - a)
    else:
        a = math.acos(1.0 - s_switch)
        angles = (a, TWO_PI - a)

    mismatch = abs(float(analytic_control(m, lambda0, a)) - target)
    if mismatch > 1e-8 * max(1.0, M):
        raise NoSaturationError(f"I*(θ_switch) misses the bound by {mismatch!r} at θ={a!r}")
    return angles


def _bang_bang_segments(kind: ModelKind, direction: Direction) -> Tuple[PlanSegment, ...]:
    first, second = ((ControlKind.SAT_PLUS, ControlKind.SAT_MINUS) if direction is Direction.FAST
                     else (ControlKind.SAT_MINUS, ControlKind.SAT_PLUS))
    if kind is ModelKind.SINUSOIDAL:
        return (PlanSegment(0.0, math.pi, first), PlanSegment(math.pi, TWO_PI, second))
    return (PlanSegment(0.0, TWO_PI, first),)


def _switched_segments(kind: ModelKind, angles: Tuple[float, ...],
                       direction: Direction) -> Tuple[PlanSegment, ...]:
    near, far = ((ControlKind.SAT_PLUS, ControlKind.SAT_MINUS) if direction is Direction.FAST
                 else (ControlKind.SAT_MINUS, ControlKind.SAT_PLUS))
    if kind is ModelKind.SINUSOIDAL:
        a1, a2, a3, a4 = angles
        return (
            PlanSegment(0.0, a1, ControlKind.ANALYTIC),
            PlanSegment(a1, a2, near),
            PlanSegment(a2, a3, ControlKind.ANALYTIC),
            PlanSegment(a3, a4, far),
            PlanSegment(a4, TWO_PI, ControlKind.ANALYTIC),
        )
    a1, a2 = angles
    return (
        PlanSegment(0.0, a1, ControlKind.ANALYTIC),
        PlanSegment(a1, a2, near),
        PlanSegment(a2, TWO_PI, ControlKind.ANALYTIC),
    )


class BoundedDesigner:
    """
    Designs minimum-power stimuli under |I| ≤ M.

    Features:
    - Feasible window and regime classification
    - Switching angles and piecewise plans for the fast/slow bands
    - Bounded λ₀–T inversion
    """

    def __init__(self, config_manager=None, unbounded: Optional[UnboundedDesigner] = None):
        """
        Initialize the designer.

        Args:
            config_manager: Optional ConfigManager for quadrature/root tolerances
            unbounded: Analytic designer to share (created when None)
        """
        self.config = config_manager
        self.quad_spec = QuadratureSpec.from_config(config_manager)
        self.unbounded = unbounded or UnboundedDesigner(config_manager)
        self._bounds_cache: Dict[Tuple[PhaseModel, float], SpikeTimeBounds] = {}

    def _half_wave_integral(self, model: PhaseModel, g, a: float = 0.0) -> float:
        upper, factor = half_wave(model)
        return factor * adaptive_integral(g, a, upper, self.quad_spec)

    def bang_bang_extremes(self, model: PhaseModel, M: float) -> Tuple[float, float]:
        """
        Shortest and longest spike times reachable with |I| ≤ M.

        Returns:
            (T^M_min, T^M_max); T^M_max is inf when −M cannot keep θ̇ positive
        """
        m = design_model(model)
        M = _check_bound(M)
        a = m.z_d * M
        t_min = self._half_wave_integral(m, lambda th: 1.0 / (m.omega + a * math.fabs(m.prc_shape(th))))
        if m.omega - a * m.shape_max > 0:
            t_max = self._half_wave_integral(m, lambda th: 1.0 / (m.omega - a * math.fabs(m.prc_shape(th))))
        else:
            t_max = math.inf
        return t_min, t_max

    def bang_bang_closed_form(self, model: PhaseModel, M: float) -> Tuple[float, float]:
        """Closed forms of bang_bang_extremes, used as cross-checks."""
        m = design_model(model)
        M = _check_bound(M)
        w, a = m.omega, m.z_d * M
        if m.kind is ModelKind.SINUSOIDAL:
            if a < w:
                r = math.sqrt(w * w - a * a)
                shift = 4.0 * math.atan(a / r)
                return (TWO_PI - shift) / r, (TWO_PI + shift) / r
            if a == w:
                return 4.0 / w, math.inf
            s = math.sqrt(a * a - w * w)
            return 2.0 * math.log((a + s) / (a - s)) / s, math.inf
        t_min = TWO_PI / math.sqrt(w * w + 2.0 * w * a)
        t_max = TWO_PI / math.sqrt(w * w - 2.0 * w * a) if 2.0 * a < w else math.inf
        return t_min, t_max

    def analytic_time_window(self, model: PhaseModel, M: float) -> Tuple[float, float]:
        """
        Spike times the analytic law reaches without exceeding M.

        Returns:
            (T^{I*}_min, T^{I*}_max); T^{I*}_max is inf when there is no slow limit
        """
        m = design_model(model)
        fast, slow = lambda0_saturation_limits(m, M)
        t_min = self.unbounded.spike_time_of(m, fast)
        t_max = self.unbounded.spike_time_of(m, slow) if slow is not None else math.inf
        return t_min, t_max

    def spike_time_bounds(self, model: PhaseModel, M: float) -> SpikeTimeBounds:
        """All four window values with the case label."""
        m = design_model(model)
        M = _check_bound(M)
        key = (m, M)
        if key not in self._bounds_cache:
            t_bang_min, t_bang_max = self.bang_bang_extremes(m, M)
            t_an_min, t_an_max = self.analytic_time_window(m, M)
            threshold = "omega/zd" if m.kind is ModelKind.SINUSOIDAL else "omega/(2zd)"
            relation = "<" if math.isfinite(t_bang_max) else ">="
            bounds = SpikeTimeBounds(M, t_bang_min, t_an_min, t_an_max, t_bang_max, f"M {relation} {threshold}")
            logger.debug(f"Window for {m}, M={M:g}: {bounds}")
            self._bounds_cache[key] = bounds
        return self._bounds_cache[key]

    def classify_target(self, model: PhaseModel, M: float, T: float) -> Regime:
        """
        Regime of a target spike time.

        Boundaries: T^M_min and T^M_max belong to the switched bands, T^{I*}_min and
        T^{I*}_max to the analytic band.
        """
        b = self.spike_time_bounds(model, M)
        if not b.contains(T):
            return Regime.INFEASIBLE
        if T < b.t_analytic_min:
            return Regime.FAST_SWITCHED
        if T <= b.t_analytic_max:
            return Regime.ANALYTIC_ONLY
        return Regime.SLOW_SWITCHED

    def bounded_spike_time_of(self, model: PhaseModel, M: float, lambda0: float,
                              direction: Direction) -> float:
        """
        Traversal time of the switched plan seeded by λ₀.

        Integrates over the fundamental half wave: the analytic speed up to the first
        switching angle, the saturated speed ω ± z_d·M·S(θ) beyond it.
        """
        m = design_model(model)
        M = _check_bound(M)
        a = switching_angles(m, M, lambda0, direction)[0]
        sign = 1.0 if direction is Direction.FAST else -1.0
        upper, factor = half_wave(m)
        analytic = adaptive_integral(lambda th: 1.0 / float(analytic_speed(m, lambda0, th)), 0.0, a, self.quad_spec)
        saturated = adaptive_integral(
            lambda th: 1.0 / (m.omega + sign * m.z_d * M * float(m.prc_shape(th))), a, upper, self.quad_spec
        )
        return factor * (analytic + saturated)

    def bounded_lambda0_for_spike_time(self, model: PhaseModel, M: float, T: float,
                                       direction: Direction) -> float:
        """
        Invert the switched period map of one direction.

        Returns:
            λ₀ in (−∞, λ_fast] (fast) or [λ_slow, ∞) (slow); ∓inf at the bang-bang edges

        Raises:
            RegimeMismatchError: If T does not belong to the requested band
        """
        m = design_model(model)
        M = _check_bound(M)
        b = self.spike_time_bounds(m, M)
        fast_limit, slow_limit = lambda0_saturation_limits(m, M)

        if direction is Direction.FAST:
            expected, edge, limit = Regime.FAST_SWITCHED, b.t_analytic_min, fast_limit
            bang_edge, unbounded_seed = b.t_bang_min, -math.inf
        else:
            expected, edge, limit = Regime.SLOW_SWITCHED, b.t_analytic_max, slow_limit
            bang_edge, unbounded_seed = b.t_bang_max, math.inf

        if limit is not None and math.isclose(T, edge, rel_tol=1e-12):
            return limit
        actual = self.classify_target(m, M, T)
        if actual is not expected:
            raise RegimeMismatchError(expected.value, actual.value, T)
        if math.isclose(T, bang_edge, rel_tol=EDGE_REL_TOL):
            return unbounded_seed

        def residual(lam: float) -> float:
            return self.bounded_spike_time_of(m, M, lam, direction) - T

        span = max(abs(limit), m.omega / m.z_d ** 2)
        if direction is Direction.FAST:
            lo = limit - span
            for _ in range(BRACKET_DOUBLINGS):
                if residual(lo) < 0:
                    break
                span *= 2.0
                lo = limit - span
            bracket = (lo, limit)
        else:
            hi = limit + span
            for _ in range(BRACKET_DOUBLINGS):
                if residual(hi) > 0:
                    break
                span *= 2.0
                hi = limit + span
            bracket = (limit, hi)

        lambda0 = solve_monotone(residual, RootSpec.from_config(bracket, self.config))
        logger.info(f"Bounded {direction.value} design {m}, M={M:g}: T={T!r} -> lambda0={lambda0!r}")
        return lambda0

    def spike_time_for_lambda0(self, model: PhaseModel, M: Optional[float],
                               lambda0: float) -> Tuple[float, float, Optional[Direction]]:
        """
        Spike time and energy of the optimal plan seeded by an arbitrary λ₀.

        Args:
            model: Phase model
            M: Amplitude bound, or None for the unbounded law
            lambda0: Costate seed

        Returns:
            (T, E, direction) with direction None when the plan is purely analytic

        Raises:
            InfeasibleCostateError: If λ₀ admits no plan (unbounded law above its limit)
        """
        m = design_model(model)
        if M is None:
            return self.unbounded.spike_time_of(m, lambda0), self.unbounded.design_energy(m, lambda0), None

        fast_limit, slow_limit = lambda0_saturation_limits(m, M)
        if lambda0 < fast_limit:
            direction: Optional[Direction] = Direction.FAST
        elif slow_limit is not None and lambda0 > slow_limit:
            direction = Direction.SLOW
        else:
            if lambda0 >= feasibility_limit(m):
                raise InfeasibleCostateError(lambda0, feasibility_limit(m))
            return self.unbounded.spike_time_of(m, lambda0), self.unbounded.design_energy(m, lambda0), None

        angles = switching_angles(m, M, lambda0, direction)
        plan = PiecewisePlan(m, lambda0, _switched_segments(m.kind, angles, direction), M,
                             Regime.FAST_SWITCHED if direction is Direction.FAST else Regime.SLOW_SWITCHED)
        return self.bounded_spike_time_of(m, M, lambda0, direction), plan.energy(self.quad_spec), direction

    def build_plan(self, model: PhaseModel, M: Optional[float], T: float) -> PiecewisePlan:
        """
        Minimum-power plan for target spike time T.

        Args:
            model: Phase model (theta neurons are designed on their SNIPER reduction)
            M: Amplitude bound, or None
            T: Target spike time

        Returns:
            PiecewisePlan on the design model

        Raises:
            InfeasibleTargetError: If T lies outside the feasible window
            ModelDomainError: If T <= 0 or M <= 0
        """
        if not (math.isfinite(T) and T > 0):
            raise ModelDomainError(f"Target spike time must be positive, got {T!r}")
        m = design_model(model)
        full_cycle = (PlanSegment(0.0, TWO_PI, ControlKind.ANALYTIC),)

        if M is None:
            lambda0 = self.unbounded.lambda0_for_spike_time(m, T)
            return PiecewisePlan(m, lambda0, full_cycle, None, Regime.ANALYTIC_ONLY)

        M = _check_bound(M)
        regime = self.classify_target(m, M, T)
        if regime is Regime.INFEASIBLE:
            bounds = self.spike_time_bounds(m, M)
            logger.error(f"T={T!r} outside window {bounds} for {m}, M={M:g}")
            raise InfeasibleTargetError(T, bounds)

        if regime is Regime.ANALYTIC_ONLY:
            lambda0 = self.unbounded.lambda0_for_spike_time(m, T)
            plan = PiecewisePlan(m, lambda0, full_cycle, M, regime)
        else:
            direction = Direction.FAST if regime is Regime.FAST_SWITCHED else Direction.SLOW
            lambda0 = self.bounded_lambda0_for_spike_time(m, M, T, direction)
            if math.isinf(lambda0):
                segments = _bang_bang_segments(m.kind, direction)
            else:
                segments = _switched_segments(m.kind, switching_angles(m, M, lambda0, direction), direction)
            plan = PiecewisePlan(m, lambda0, segments, M, regime)

        logger.info(f"Built {regime.value} plan for {m}, M={M:g}, T={T!r}: "
                    f"{len(plan.segments)} segment(s)")
        return plan
