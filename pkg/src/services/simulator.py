"""
Closed-loop execution of piecewise stimulus plans.

Controls are applied as feedback in phase: at every integrator stage the
current is read from the plan at the present θ. Each plan segment is integrated
separately with its end phase as the event target, so the switching kinks sit
exactly on sample points.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate

from src.core.errors import ModelDomainError
from src.core.numerics import TWO_PI, QuadratureSpec, integrate_until_spike
from src.models.phase_model import ModelKind, PhaseModel, eval_f, eval_Z, theta_to_sniper
from src.services.bounded import ControlKind, PiecewisePlan
from src.utils.serialization import dumps, format_float

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "theta", "lambda", "current")


@dataclass(frozen=True)
class SimulationConfig:
    """Integrator settings; ``step=None`` means target time / steps_per_period."""
    step: Optional[float] = None
    event_tol: float = 1e-10
    steps_per_period: int = 10000
    timeout_factor: float = 20.0

    def __post_init__(self):
        if self.step is not None and not (math.isfinite(self.step) and self.step > 0):
            raise ModelDomainError(f"Simulation step must be positive, got {self.step!r}")
        if not self.event_tol > 0:
            raise ModelDomainError(f"event_tol must be positive, got {self.event_tol!r}")
        if int(self.steps_per_period) < 1:
            raise ModelDomainError(f"steps_per_period must be >= 1, got {self.steps_per_period!r}")

    def resolve_step(self, duration: float) -> float:
        return self.step if self.step is not None else duration / self.steps_per_period

    @classmethod
    def from_config(cls, config_manager=None, step: Optional[float] = None) -> "SimulationConfig":
        if config_manager is None:
            return cls(step=step)
        return cls(
            step=step,
            event_tol=float(config_manager.get("simulation.event_tol", 1e-10)),
            steps_per_period=int(config_manager.get("simulation.steps_per_period", 10000)),
            timeout_factor=float(config_manager.get("simulation.timeout_factor", 20.0)),
        )


@dataclass
class Trajectory:
    """Sampled (t, θ, λ, I) path ending at the spike."""
    times: np.ndarray
    thetas: np.ndarray
    costates: np.ndarray
    currents: np.ndarray
    spike_time: float
    energy: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def samples(self) -> List[Tuple[float, float, float, float]]:
        return [
            (float(t), float(th), float(lam), float(cur))
            for t, th, lam, cur in zip(self.times, self.thetas, self.costates, self.currents)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spike_time": self.spike_time,
            "energy": self.energy,
            "samples": [dict(zip(CSV_COLUMNS, s)) for s in self.samples],
        }


def trajectory_energy(traj: Trajectory) -> float:
    """
    ∫ I(t)² dt over the sampled trajectory (composite Simpson rule).

    Args:
        traj: Non-empty trajectory

    Returns:
        Energy; 0 for a single sample
    """
    if len(traj) == 0:
        raise ModelDomainError("Cannot integrate an empty trajectory")
    if len(traj) == 1:
        return 0.0
    return float(integrate.simpson(np.square(traj.currents), x=traj.times))


def export_trajectory(traj: Trajectory, fmt: str = "csv") -> bytes:
    """
    Serialize a trajectory.

    Args:
        traj: Trajectory to export
        fmt: "csv" (columns t,theta,lambda,current) or "json"

    Returns:
        UTF-8 encoded document
    """
    fmt = fmt.lower()
    if fmt == "json":
        return dumps(traj).encode("utf-8")
    if fmt != "csv":
        raise ModelDomainError(f"Unknown trajectory format: {fmt!r}")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for sample in traj.samples:
        writer.writerow([format_float(v) for v in sample])
    return buffer.getvalue().encode("utf-8")


def parse_trajectory_csv(data: bytes) -> Trajectory:
    """Rebuild a trajectory from export_trajectory CSV output."""
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ModelDomainError(f"Trajectory CSV header must be {','.join(CSV_COLUMNS)}, got {header!r}")
    rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float).reshape(-1, 4)
    traj = Trajectory(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3],
                      spike_time=float(rows[-1, 0]) if len(rows) else math.nan, energy=0.0)
    if len(rows):
        traj.energy = trajectory_energy(traj)
    return traj


class PlanSimulator:
    """
    Runs piecewise plans on the phase dynamics.

    Features:
    - Segment-wise fixed-step RK4 with exact switching events
    - Costate and current recorded at every sample
    - Direct theta-neuron execution through the phase map
    """

    def __init__(self, config_manager=None):
        """
        Initialize the simulator.

        Args:
            config_manager: Optional ConfigManager for simulation defaults
        """
        self.config = config_manager
        self.quad_spec = QuadratureSpec.from_config(config_manager)

    def _settings(self, config: Optional[SimulationConfig]) -> SimulationConfig:
        return config or SimulationConfig.from_config(self.config)

    def _run_segments(self, plan: PiecewisePlan, velocity_for, targets: List[float],
                      settings: SimulationConfig, duration: float) -> Tuple[np.ndarray, np.ndarray]:
        step = settings.resolve_step(duration)
        timeout = settings.timeout_factor * duration
        times: List[np.ndarray] = []
        thetas: List[np.ndarray] = []
        t, theta = 0.0, 0.0

        for seg, target in zip(plan.segments, targets):
            if target <= theta:
                continue
            crossing = integrate_until_spike(
                velocity_for(seg.kind), theta, t + timeout, step,
                t0=t, target=target, event_tol=settings.event_tol,
            )
            skip = 1 if times else 0
            times.append(crossing.times[skip:])
            thetas.append(crossing.thetas[skip:])
            t, theta = crossing.t_spike, target
            logger.debug(f"Segment {seg.kind.value} [{seg.start:.6g}, {seg.end:.6g}) done at t={t!r}")

        if not times:
            return np.array([0.0]), np.array([0.0])
        return np.concatenate(times), np.concatenate(thetas)

    def simulate_plan(self, plan: PiecewisePlan, config: Optional[SimulationConfig] = None,
                      target_time: Optional[float] = None) -> Trajectory:
        """
        Integrate θ̇ = ω + Z(θ)·I(θ) under the plan until θ = 2π.

        Args:
            plan: Plan to execute
            config: Integrator settings; defaults from configuration
            target_time: Scale for the default step (plan traversal time when None)

        Returns:
            Trajectory with samples, achieved spike time and energy

        Raises:
            SpikeTimeoutError: If θ̇ <= 0 somewhere or the spike is not reached in time
        """
        settings = self._settings(config)
        model = plan.model
        duration = target_time if target_time is not None else plan.traversal_time(self.quad_spec)

        def velocity_for(kind: ControlKind):
            def velocity(_t: float, theta: float) -> float:
                u = float(plan.segment_control(kind, theta))
                return model.omega + model.z_d * float(model.prc_shape(theta)) * u
            return velocity

        targets = [seg.end for seg in plan.segments]
        targets[-1] = TWO_PI
        times, thetas = self._run_segments(plan, velocity_for, targets, settings, duration)

        traj = Trajectory(
            times=times,
            thetas=thetas,
            costates=np.asarray(plan.costate_at(thetas), dtype=float),
            currents=np.asarray(plan.control_at(thetas), dtype=float),
            spike_time=float(times[-1]),
            energy=0.0,
        )
        traj.energy = trajectory_energy(traj)
        logger.info(f"Simulated {plan.regime.value} plan on {model}: "
                    f"spike at t={traj.spike_time!r}, energy={traj.energy!r}, {len(traj)} samples")
        return traj

    def simulate_in_theta_coordinates(self, model: PhaseModel, plan: PiecewisePlan,
                                      config: Optional[SimulationConfig] = None,
                                      target_time: Optional[float] = None) -> Trajectory:
        """
        Execute a plan designed on the SNIPER reduction directly on the theta neuron.

        The current at theta-neuron phase θ is the plan's current at φ(θ); the
        recorded costate is the reduced-model multiplier at φ(θ).

        Args:
            model: Theta-neuron model
            plan: Plan built for design_model(model)
            config: Integrator settings
            target_time: Scale for the default step

        Returns:
            Trajectory in theta-neuron phase
        """
        if model.kind is not ModelKind.THETA:
            raise ModelDomainError(f"Theta-coordinate simulation needs a theta neuron, got {model.kind.value}")
        reduction = theta_to_sniper(model)
        if reduction.model != plan.model:
            raise ModelDomainError(f"Plan was built for {plan.model}, not for the reduction {reduction.model}")
        phase_map = reduction.phase_map
        settings = self._settings(config)
        duration = target_time if target_time is not None else plan.traversal_time(self.quad_spec)

        def velocity_for(kind: ControlKind):
            def velocity(_t: float, theta: float) -> float:
                u = float(plan.segment_control(kind, phase_map.to_phi(theta)))
                return float(eval_f(model, theta)) + float(eval_Z(model, theta)) * u
            return velocity

        targets = [phase_map.to_theta(seg.end) for seg in plan.segments]
        targets[-1] = TWO_PI
        times, thetas = self._run_segments(plan, velocity_for, targets, settings, duration)

        phis = np.asarray(phase_map.to_phi(thetas), dtype=float)
        traj = Trajectory(
            times=times,
            thetas=thetas,
            costates=np.asarray(plan.costate_at(phis), dtype=float),
            currents=np.asarray(plan.control_at(phis), dtype=float),
            spike_time=float(times[-1]),
            energy=0.0,
        )
        traj.energy = trajectory_energy(traj)
        logger.info(f"Simulated theta neuron {model}: spike at t={traj.spike_time!r}, energy={traj.energy!r}")
        return traj
