"""
Phase-reduced neuron oscillators.

A phase model is the scalar ODE dθ/dt = f(θ) + Z(θ)·I(t); the neuron spikes when
θ reaches 2π. Three models are supported: the sinusoidal PRC, the SNIPER PRC and
the theta neuron. The theta neuron is handled by reduction to SNIPER through a
tangent half-angle change of phase.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from src.core.errors import ModelDomainError

TWO_PI = 2.0 * math.pi

ArrayLike = Union[float, np.ndarray]


class ModelKind(Enum):
    """Supported phase response families."""
    SINUSOIDAL = "sinusoidal"
    SNIPER = "sniper"
    THETA = "theta"


@dataclass(frozen=True)
class PhaseModel:
    """
    Immutable oscillator definition.

    For SINUSOIDAL and SNIPER models the baseline drift is the constant ω. For the
    theta neuron ω is derived from the baseline current, ω = 2√(z_d·I_b).
    """
    kind: ModelKind
    omega: float
    z_d: float
    i_b: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.kind, ModelKind):
            raise ModelDomainError(f"Unknown model kind: {self.kind!r}")
        if not (math.isfinite(self.z_d) and self.z_d > 0):
            raise ModelDomainError(f"z_d must be positive, got {self.z_d!r}")
        if self.kind is ModelKind.THETA:
            if self.i_b is None or not (math.isfinite(self.i_b) and self.i_b > 0):
                raise ModelDomainError(f"Theta neuron needs a positive baseline current, got {self.i_b!r}")
            expected = 2.0 * math.sqrt(self.z_d * self.i_b)
            if not math.isclose(self.omega, expected, rel_tol=1e-12):
                raise ModelDomainError(
                    f"Theta neuron omega must equal 2*sqrt(z_d*I_b)={expected!r}, got {self.omega!r}"
                )
        elif self.i_b is not None:
            raise ModelDomainError(f"Baseline current only applies to the theta neuron ({self.kind.value})")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ModelDomainError(f"omega must be positive, got {self.omega!r}")

    @classmethod
    def sinusoidal(cls, omega: float, z_d: float) -> "PhaseModel":
        return cls(ModelKind.SINUSOIDAL, float(omega), float(z_d))

    @classmethod
    def sniper(cls, omega: float, z_d: float) -> "PhaseModel":
        return cls(ModelKind.SNIPER, float(omega), float(z_d))

    @classmethod
    def theta_neuron(cls, i_b: float, z_d: float = 1.0) -> "PhaseModel":
        """Theta neuron with baseline current ``i_b``; ω follows from ``i_b`` and ``z_d``."""
        if i_b is None or not i_b > 0:
            raise ModelDomainError(f"Theta neuron needs a positive baseline current, got {i_b!r}")
        if not z_d > 0:
            raise ModelDomainError(f"z_d must be positive, got {z_d!r}")
        return cls(ModelKind.THETA, 2.0 * math.sqrt(z_d * i_b), float(z_d), float(i_b))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PhaseModel":
        """
        Build a model from its configuration form.

        Args:
            data: ``{"kind": "sinusoidal"|"sniper"|"theta", "omega": float, "zd": float, "ib": float?}``

        Returns:
            Validated PhaseModel
        """
        try:
            kind = ModelKind(str(data["kind"]).lower())
        except (KeyError, ValueError):
            raise ModelDomainError(f"Model needs a kind in {[k.value for k in ModelKind]}, got {data.get('kind')!r}")

        z_d = data.get("zd", data.get("z_d"))
        if kind is ModelKind.THETA:
            return cls.theta_neuron(_as_float(data.get("ib", data.get("i_b")), "ib"),
                                    _as_float(z_d, "zd") if z_d is not None else 1.0)
        return cls(kind, _as_float(data.get("omega"), "omega"), _as_float(z_d, "zd"))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value, "omega": self.omega, "zd": self.z_d}
        if self.i_b is not None:
            data["ib"] = self.i_b
        return data

    @property
    def natural_period(self) -> float:
        """Spike period without stimulus, 2π/ω."""
        return TWO_PI / self.omega

    @property
    def shape_max(self) -> float:
        """Maximum of |S(θ)| where Z(θ) = z_d·S(θ)."""
        return 1.0 if self.kind is ModelKind.SINUSOIDAL else 2.0

    def prc_shape(self, theta: ArrayLike) -> ArrayLike:
        """Unit phase response S(θ): sinθ for sinusoidal, 1−cosθ otherwise."""
        if self.kind is ModelKind.SINUSOIDAL:
            return np.sin(theta)
        return 1.0 - np.cos(theta)

    @property
    def prc_peaks(self) -> Tuple[float, ...]:
        """Phases in (0, 2π) where |S| attains its maximum."""
        if self.kind is ModelKind.SINUSOIDAL:
            return 0.5 * math.pi, 1.5 * math.pi
        return (math.pi,)

    def prc_deficit(self, theta: ArrayLike) -> ArrayLike:
        """
        1 − S(θ)²/S_max², in a factored form without cancellation at the PRC peak.

        cos²θ for sinusoidal; cos²(θ/2)·(3 − cosθ)/2 otherwise.
        """
        if self.kind is ModelKind.SINUSOIDAL:
            return np.cos(theta) ** 2
        return np.cos(0.5 * np.asarray(theta)) ** 2 * (3.0 - np.cos(theta)) * 0.5

    def prc_shape_derivative(self, theta: ArrayLike) -> ArrayLike:
        """dS/dθ."""
        if self.kind is ModelKind.SINUSOIDAL:
            return np.cos(theta)
        return np.sin(theta)

    def drift_derivative(self, theta: ArrayLike) -> ArrayLike:
        """df/dθ (zero for constant-drift models)."""
        if self.kind is ModelKind.THETA:
            return -np.sin(theta) + self.z_d * np.sin(theta) * self.i_b
        return np.zeros_like(np.asarray(theta, dtype=float)) if np.ndim(theta) else 0.0

    def __str__(self) -> str:
        if self.kind is ModelKind.THETA:
            return f"theta(ib={self.i_b:g}, zd={self.z_d:g}, omega={self.omega:g})"
        return f"{self.kind.value}(omega={self.omega:g}, zd={self.z_d:g})"


def _as_float(value: Any, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ModelDomainError(f"Model field '{name}' must be a number, got {value!r}")


def eval_f(model: PhaseModel, theta: ArrayLike) -> ArrayLike:
    """
    Baseline phase velocity f(θ).

    Args:
        model: Phase model
        theta: Phase(s) in radians

    Returns:
        ω for sinusoidal/SNIPER; 1 + cosθ + z_d(1 − cosθ)I_b for the theta neuron
    """
    if model.kind is ModelKind.THETA:
        return 1.0 + np.cos(theta) + model.z_d * (1.0 - np.cos(theta)) * model.i_b
    if np.ndim(theta):
        return np.full(np.shape(theta), model.omega)
    return model.omega


def eval_Z(model: PhaseModel, theta: ArrayLike) -> ArrayLike:
    """
    Phase response curve Z(θ).

    Args:
        model: Phase model
        theta: Phase(s) in radians

    Returns:
        z_d·sinθ (sinusoidal) or z_d·(1 − cosθ) (SNIPER, theta neuron)
    """
    return model.z_d * model.prc_shape(theta)


@dataclass(frozen=True)
class PhaseMap:
    """
    Monotone bijection φ ↦ θ of [0, 2π] between SNIPER phase φ and theta-neuron phase θ.

    θ(φ) = 2·atan(k·tan((φ − π)/2)) + π with k = √(z_d·I_b); evaluated through atan2
    so the endpoints map exactly onto 0 and 2π.
    """
    k: float

    def to_theta(self, phi: ArrayLike) -> ArrayLike:
        half = 0.5 * (np.asarray(phi, dtype=float) - math.pi)
        out = math.pi + 2.0 * np.arctan2(self.k * np.sin(half), np.cos(half))
        return float(out) if np.ndim(out) == 0 else out

    def to_phi(self, theta: ArrayLike) -> ArrayLike:
        half = 0.5 * (np.asarray(theta, dtype=float) - math.pi)
        out = math.pi + 2.0 * np.arctan2(np.sin(half), self.k * np.cos(half))
        return float(out) if np.ndim(out) == 0 else out

    def dtheta_dphi(self, phi: ArrayLike) -> ArrayLike:
        """Derivative of the forward map."""
        half = 0.5 * (np.asarray(phi, dtype=float) - math.pi)
        return self.k / (np.cos(half) ** 2 + (self.k * np.sin(half)) ** 2)


@dataclass(frozen=True)
class ThetaReduction:
    """Result of reducing a theta neuron: the equivalent SNIPER model and the phase map."""
    model: PhaseModel
    phase_map: PhaseMap


def theta_to_sniper(model: PhaseModel) -> ThetaReduction:
    """
    Reduce a theta neuron to its SNIPER equivalent.

    With u = tan((θ − π)/2) the theta neuron becomes du/dt = u² + z_d(I_b + I); the
    rescaling u = √(z_d·I_b)·tan((φ − π)/2) gives dφ/dt = ω + (2z_d/ω)(1 − cosφ)·I,
    ω = 2√(z_d·I_b).

    Args:
        model: Theta-neuron model

    Returns:
        ThetaReduction with the SNIPER model and the φ ↦ θ phase map

    Raises:
        ModelDomainError: If the model is not a theta neuron
    """
    if model.kind is not ModelKind.THETA:
        raise ModelDomainError(f"theta_to_sniper expects a theta neuron, got {model.kind.value}")
    omega = model.omega
    reduced = PhaseModel.sniper(omega, 2.0 * model.z_d / omega)
    return ThetaReduction(model=reduced, phase_map=PhaseMap(k=math.sqrt(model.z_d * model.i_b)))


def design_model(model: PhaseModel) -> PhaseModel:
    """Constant-drift model the design formulas run on (theta neurons reduce to SNIPER)."""
    if model.kind is ModelKind.THETA:
        return theta_to_sniper(model).model
    return model
