"""
Direct-transcription check of designed stimuli.

The control is discretized into N piecewise-constant values on [0, T], the
phase is propagated with RK4, and the energy Σ u_k²Δt is minimized under
|u_k| ≤ M with an augmented-Lagrangian penalty on θ(T) − 2π. Nothing in here
uses the analytic solution; compare_with_analytic puts the two side by side.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.core.errors import ModelDomainError, OracleConvergenceError
from src.core.numerics import TWO_PI
from src.models.phase_model import ModelKind, PhaseModel, eval_f, eval_Z, theta_to_sniper
from src.services.bounded import BoundedDesigner, ControlKind, PiecewisePlan
from src.services.simulator import PlanSimulator

logger = logging.getLogger(__name__)

ScalarFn = Callable[[float], float]


@dataclass(frozen=True)
class TranscriptionSpec:
    """Discretization and optimizer settings of the oracle."""
    steps: int = 2000
    penalty_weights: Tuple[float, ...] = (10.0, 100.0, 1000.0, 10000.0)
    max_outer: int = 30
    max_iters: int = 3000
    grad_tol: float = 1e-10
    terminal_tol: float = 1e-6

    def __post_init__(self):
        if int(self.steps) < 10:
            raise ModelDomainError(f"Transcription needs at least 10 steps, got {self.steps}")
        weights = tuple(float(w) for w in self.penalty_weights)
        if not weights or weights[0] <= 0 or any(b <= a for a, b in zip(weights, weights[1:])):
            raise ModelDomainError(f"Penalty weights must be positive and increasing, got {self.penalty_weights}")
        object.__setattr__(self, "penalty_weights", weights)
        if self.max_outer < len(weights):
            raise ModelDomainError("max_outer must cover the penalty schedule")

    @classmethod
    def from_config(cls, config_manager=None, steps: Optional[int] = None) -> "TranscriptionSpec":
        if config_manager is None:
            return cls() if steps is None else cls(steps=int(steps))
        return cls(
            steps=int(steps if steps is not None else config_manager.get("oracle.steps", 2000)),
            penalty_weights=tuple(config_manager.get("oracle.penalty_weights", [10.0, 100.0, 1000.0, 10000.0])),
            max_outer=int(config_manager.get("oracle.max_outer", 30)),
            max_iters=int(config_manager.get("oracle.max_iters", 3000)),
            grad_tol=float(config_manager.get("oracle.grad_tol", 1e-10)),
            terminal_tol=float(config_manager.get("oracle.terminal_tol", 1e-6)),
        )


@dataclass
class TranscriptionResult:
    """Optimized piecewise-constant control and its discrete trajectory."""
    controls: np.ndarray
    energy: float
    theta_end: float
    thetas: np.ndarray
    dt: float
    outer_iterations: int

    @property
    def residual(self) -> float:
        return self.theta_end - TWO_PI

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(len(self.controls)) + 0.5) * self.dt


@dataclass
class OracleReport:
    """Analytic design against the direct-transcription optimum."""
    e_analytic: float
    e_oracle: float
    rel_gap: float
    max_dev: float
    n: int
    converged: bool
    status: str
    terminal_residual: float
    switching_angles: List[float] = field(default_factory=list)
    saturation_bands: List[Tuple[float, float]] = field(default_factory=list)
    bands_match: bool = True
    issues: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "e_analytic": self.e_analytic,
            "e_oracle": self.e_oracle,
            "rel_gap": self.rel_gap,
            "max_dev": self.max_dev,
            "n": self.n,
            "converged": self.converged,
            "status": self.status,
            "terminal_residual": self.terminal_residual,
            "switching_angles": self.switching_angles,
            "saturation_bands": [list(b) for b in self.saturation_bands],
            "bands_match": self.bands_match,
            "issues": self.issues,
        }


def _vector_field(model: PhaseModel) -> Tuple[Callable[[float, float], float],
                                              Callable[[float, float], float], ScalarFn]:
    """Scalar F(θ, u) = f + Z·u, ∂F/∂θ = f' + Z'·u and ∂F/∂u = Z for the transcription loops."""
    def Z(th: float) -> float:
        return float(eval_Z(model, th))

    def F(th: float, u: float) -> float:
        return float(eval_f(model, th)) + Z(th) * u

    def F_theta(th: float, u: float) -> float:
        return float(model.drift_derivative(th)) + model.z_d * float(model.prc_shape_derivative(th)) * u

    return F, F_theta, Z


class TranscriptionOracle:
    """
    Brute-force minimum-power solver.

    Features:
    - RK4 propagation of piecewise-constant controls
    - Reverse-mode gradient through the discrete dynamics
    - L-BFGS-B with box bounds and an augmented-Lagrangian terminal constraint
    """

    def __init__(self, config_manager=None):
        """
        Initialize the oracle.

        Args:
            config_manager: Optional ConfigManager for the transcription settings
        """
        self.config = config_manager

    def _propagate(self, model: PhaseModel, T: float, controls: Sequence[float]) -> List[float]:
        F, _, _ = _vector_field(model)
        h = T / len(controls)
        theta = 0.0
        thetas = [theta]
        for u in [float(x) for x in controls]:
            k1 = F(theta, u)
            k2 = F(theta + 0.5 * h * k1, u)
            k3 = F(theta + 0.5 * h * k2, u)
            k4 = F(theta + h * k3, u)
            theta += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            thetas.append(theta)
        return thetas

    def objective_and_gradient(self, model: PhaseModel, T: float, controls: np.ndarray,
                               multiplier: float = 0.0, weight: float = 1.0) -> Tuple[float, np.ndarray]:
        """
        Augmented objective Σu²Δt + μr + (w/2)r², r = θ_N − 2π, and its gradient.

        Args:
            model: Phase model (evaluated directly, no reduction)
            T: Horizon
            controls: Piecewise-constant control values
            multiplier: Terminal multiplier μ
            weight: Penalty weight w

        Returns:
            (objective, gradient with respect to the controls)
        """
        F, F_theta, Z = _vector_field(model)
        u_list = [float(u) for u in controls]
        n = len(u_list)
        h = T / n
        half = 0.5 * h

        stages = []
        theta = 0.0
        for u in u_list:
            s1 = theta
            k1 = F(s1, u)
            s2 = theta + half * k1
            k2 = F(s2, u)
            s3 = theta + half * k2
            k3 = F(s3, u)
            s4 = theta + h * k3
            k4 = F(s4, u)
            stages.append((s1, s2, s3, s4))
            theta += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

        r = theta - TWO_PI
        energy = h * sum(u * u for u in u_list)
        objective = energy + multiplier * r + 0.5 * weight * r * r

        grad = [0.0] * n
        adj = multiplier + weight * r
        for k in range(n - 1, -1, -1):
            u = u_list[k]
            s1, s2, s3, s4 = stages[k]
            a1, a2, a3, a4 = F_theta(s1, u), F_theta(s2, u), F_theta(s3, u), F_theta(s4, u)

            dk1 = a1
            dk2 = a2 * (1.0 + half * dk1)
            dk3 = a3 * (1.0 + half * dk2)
            dk4 = a4 * (1.0 + h * dk3)
            d_theta = 1.0 + h * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4) / 6.0

            du1 = Z(s1)
            du2 = Z(s2) + a2 * half * du1
            du3 = Z(s3) + a3 * half * du2
            du4 = Z(s4) + a4 * h * du3
            d_u = h * (du1 + 2.0 * du2 + 2.0 * du3 + du4) / 6.0

            grad[k] = 2.0 * u * h + adj * d_u
            adj *= d_theta

        return objective, np.asarray(grad)

    def initial_guess(self, model: PhaseModel, T: float, n: int, M: Optional[float]) -> np.ndarray:
        """
        Control proportional to the PRC along the uniform phase ramp 2πt/T, scaled so
        the propagated phase ends at 2π; zero control if no scale achieves that.
        """
        _, _, Z = _vector_field(model)
        shape = np.array([Z(TWO_PI * (k + 0.5) / n) for k in range(n)])
        peak = float(np.max(np.abs(shape))) or 1.0
        shape = shape / peak

        def candidate(c: float) -> np.ndarray:
            u = c * shape
            return np.clip(u, -M, M) if M is not None else u

        def residual(c: float) -> float:
            return self._propagate(model, T, candidate(c))[-1] - TWO_PI

        r0 = residual(0.0)
        if abs(r0) < 1e-12:
            return candidate(0.0)
        c = -1.0 if r0 > 0 else 1.0
        for _ in range(60):
            if np.sign(residual(c)) != np.sign(r0):
                lo, hi = sorted((0.0, c))
                return candidate(optimize.brentq(residual, lo, hi, xtol=1e-12))
            if M is not None and abs(c) > 1e3 * M:
                break
            c *= 2.0
        logger.warning(f"No scaled PRC guess reaches 2π at T={T!r}; starting from zero control")
        return candidate(0.0)

    def brute_force_design(self, model: PhaseModel, T: float, M: Optional[float] = None,
                           spec: Optional[TranscriptionSpec] = None) -> TranscriptionResult:
        """
        Minimize the discrete energy subject to θ(T) = 2π and |u| ≤ M.

        Args:
            model: Phase model
            T: Target spike time
            M: Amplitude bound, or None
            spec: Transcription settings; defaults from configuration

        Returns:
            TranscriptionResult of the last outer iteration

        Raises:
            OracleConvergenceError: If |θ(T) − 2π| stays above terminal_tol
        """
        spec = spec or TranscriptionSpec.from_config(self.config)
        if not (math.isfinite(T) and T > 0):
            raise ModelDomainError(f"Target spike time must be positive, got {T!r}")
        if M is not None and not M > 0:
            raise ModelDomainError(f"Amplitude bound M must be positive, got {M!r}")

        n = int(spec.steps)
        h = T / n
        bounds = [(-M, M)] * n if M is not None else None
        u = self.initial_guess(model, T, n, M)
        multiplier = 0.0
        residual = math.inf
        outer = 0

        for outer in range(1, spec.max_outer + 1):
            weight = spec.penalty_weights[min(outer, len(spec.penalty_weights)) - 1]

            def scaled(x: np.ndarray, mu: float = multiplier, w: float = weight) -> Tuple[float, np.ndarray]:
                value, grad = self.objective_and_gradient(model, T, x, mu, w)
                return value / h, grad / h

            result = optimize.minimize(
                scaled, u, jac=True, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": spec.max_iters, "ftol": 1e-15, "gtol": spec.grad_tol},
            )
            u = np.asarray(result.x, dtype=float)
            residual = self._propagate(model, T, u)[-1] - TWO_PI
            multiplier += weight * residual
            logger.debug(f"Oracle outer {outer}: w={weight:g} residual={residual!r} "
                         f"mu={multiplier!r} iterations={result.nit}")
            if abs(residual) <= spec.terminal_tol:
                break
        else:
            raise OracleConvergenceError(f"terminal constraint not met after {spec.max_outer} outer iterations",
                                         residual)

        thetas = np.asarray(self._propagate(model, T, u))
        energy = float(h * np.dot(u, u))
        logger.info(f"Oracle {model}, T={T!r}, M={M}: energy={energy!r} residual={residual!r} (N={n})")
        return TranscriptionResult(u, energy, float(thetas[-1]), thetas, h, outer)

    def compare_with_analytic(self, model: PhaseModel, T: float, M: Optional[float] = None,
                              spec: Optional[TranscriptionSpec] = None, tol: Optional[float] = None,
                              shape_tol: Optional[float] = None) -> OracleReport:
        """
        Run the oracle next to the analytic design.

        Args:
            model: Phase model
            T: Target spike time
            M: Amplitude bound, or None
            spec: Transcription settings
            tol: Relative energy tolerance (validate.tol)
            shape_tol: Allowed control deviation relative to max(1, max|I|)

        Returns:
            OracleReport with status PASS or FAIL

        Raises:
            OracleConvergenceError: If the oracle does not converge
        """
        spec = spec or TranscriptionSpec.from_config(self.config)
        tol = tol if tol is not None else float(self._cfg("validate.tol", 0.02))
        shape_tol = shape_tol if shape_tol is not None else float(self._cfg("oracle.shape_tol", 0.1))

        plan = BoundedDesigner(self.config).build_plan(model, M, T)
        e_analytic = plan.energy()
        oracle = self.brute_force_design(model, T, M, spec)

        traj = PlanSimulator(self.config).simulate_plan(plan, target_time=T)
        analytic_current = np.interp(oracle.midpoints, traj.times, traj.currents)
        max_dev = float(np.max(np.abs(oracle.controls - analytic_current)))

        denom = max(e_analytic, 1e-6)
        rel_gap = (oracle.energy - e_analytic) / denom
        issues = []
        if oracle.energy < e_analytic - tol * denom:
            issues.append("oracle energy below the analytic design")
        if abs(rel_gap) > tol:
            issues.append(f"relative energy gap {rel_gap:.3g} exceeds {tol:g}")
        scale = max(1.0, float(np.max(np.abs(traj.currents))))
        if max_dev > shape_tol * scale:
            issues.append(f"control deviation {max_dev:.3g} exceeds {shape_tol * scale:.3g}")

        phases = self._design_phases(oracle, model)
        bands = self._saturation_bands(oracle, M, model)
        bands_match = self._bands_match(bands, plan, phases)
        if not bands_match:
            issues.append(f"saturation bands {bands} do not match switching angles {list(plan.switching_angles)}")

        report = OracleReport(
            e_analytic=e_analytic,
            e_oracle=oracle.energy,
            rel_gap=rel_gap,
            max_dev=max_dev,
            n=len(oracle.controls),
            converged=True,
            status="FAIL" if issues else "PASS",
            terminal_residual=oracle.residual,
            switching_angles=list(plan.switching_angles),
            saturation_bands=bands,
            bands_match=bands_match,
            issues=issues,
        )
        logger.info(f"Validation {model}, T={T!r}, M={M}: {report.status} "
                    f"(E_analytic={e_analytic:.6g}, E_oracle={oracle.energy:.6g}, gap={rel_gap:.3g})")
        return report

    def _cfg(self, key: str, default: Any) -> Any:
        return self.config.get(key, default) if self.config is not None else default

    @staticmethod
    def _design_phases(oracle: TranscriptionResult, model: PhaseModel) -> np.ndarray:
        """Oracle grid phases in the coordinates the plan is written in."""
        if model.kind is ModelKind.THETA:
            return np.asarray(theta_to_sniper(model).phase_map.to_phi(oracle.thetas))
        return np.asarray(oracle.thetas)

    @classmethod
    def _saturation_bands(cls, oracle: TranscriptionResult, M: Optional[float],
                          model: PhaseModel) -> List[Tuple[float, float]]:
        """Phase intervals (in design coordinates) where the oracle control sits on +M or on −M."""
        if M is None:
            return []
        phases = cls._design_phases(oracle, model)
        side = np.where(oracle.controls >= M * (1.0 - 1e-6), 1, 0)
        side[oracle.controls <= -M * (1.0 - 1e-6)] = -1
        bands: List[Tuple[float, float]] = []
        start = None
        for k, s in enumerate(side):
            if start is not None and s != side[start]:
                bands.append((float(phases[start]), float(phases[k])))
                start = None
            if s != 0 and start is None:
                start = k
        if start is not None:
            bands.append((float(phases[start]), float(phases[-1])))
        return bands

    @staticmethod
    def _bands_match(bands: List[Tuple[float, float]], plan: PiecewisePlan, phases: np.ndarray) -> bool:
        """One oracle band per saturated plan segment, both ends within one grid cell."""
        saturated = [s for s in plan.segments if s.kind is not ControlKind.ANALYTIC and s.end > s.start]
        if len(bands) != len(saturated):
            return False
        if not saturated:
            return True
        cell = float(np.max(np.diff(phases)))
        return all(abs(a - seg.start) <= cell and abs(b - seg.end) <= cell
                   for seg, (a, b) in zip(saturated, bands))
