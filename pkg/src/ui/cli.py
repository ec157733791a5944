"""
Command-line front end.

Subcommands:
- design: classify → λ₀ → plan → simulate, JSON report
- bounds: feasible spike-time window under a bound
- sweep: λ₀ or T grid as CSV
- simulate: trajectory of the designed plan as CSV/JSON
- validate: analytic design against the direct-transcription oracle
- check: published reference values (--report writes a timestamped record)

--save-config FILE writes the merged settings before the command runs.

JSON and CSV go to stdout (or --out); logs go to stderr.
"""

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from src.core.config import ConfigManager
from src.core.errors import (
    InfeasibleCostateError,
    InfeasibleTargetError,
    InfeasibleTimeError,
    ModelDomainError,
    OracleConvergenceError,
    SpikeDesignError,
)
from src.models.phase_model import ModelKind, PhaseModel, design_model
from src.services.bounded import BoundedDesigner, PiecewisePlan, SpikeTimeBounds
from src.services.diagnostics import DiagnosticsService
from src.services.oracle import TranscriptionOracle, TranscriptionSpec
from src.services.simulator import PlanSimulator, SimulationConfig, Trajectory, export_trajectory
from src.services.unbounded import energy_sensitivity
from src.utils.logging_utils import setup_logging
from src.utils.serialization import dumps, format_float

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_VALIDATION_FAILED = 4

SWEEP_COLUMNS = ("lambda0", "T", "energy", "dEdT")


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser reporting usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class DesignReport:
    """Outcome of the full design pipeline for one target."""
    model: PhaseModel
    T: float
    bound: Optional[float]
    regime: str
    lambda0: float
    energy: float
    dEdT: float
    plan: PiecewisePlan
    achieved_spike_time: float
    trajectory_energy: float
    bounds: Optional[SpikeTimeBounds] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "design_model": design_model(self.model).to_dict(),
            "T": self.T,
            "max_amp": self.bound,
            "regime": self.regime,
            "lambda0": self.lambda0,
            "energy": self.energy,
            "dEdT": self.dEdT,
            "bounds": self.bounds.to_dict() if self.bounds is not None else None,
            "plan": self.plan.to_dict(),
            "achieved_spike_time": self.achieved_spike_time,
            "trajectory_energy": self.trajectory_energy,
        }


class DesignSession:
    """Services shared by the subcommands of one invocation."""

    def __init__(self, config_manager: ConfigManager):
        self.config = config_manager
        self.designer = BoundedDesigner(config_manager)
        self.simulator = PlanSimulator(config_manager)

    def simulate(self, model: PhaseModel, plan: PiecewisePlan, T: float,
                 step: Optional[float] = None) -> Trajectory:
        settings = SimulationConfig.from_config(self.config, step=step)
        if model.kind is ModelKind.THETA:
            return self.simulator.simulate_in_theta_coordinates(model, plan, settings, target_time=T)
        return self.simulator.simulate_plan(plan, settings, target_time=T)

    def design(self, model: PhaseModel, T: float, M: Optional[float]) -> DesignReport:
        plan = self.designer.build_plan(model, M, T)
        traj = self.simulate(model, plan, T)
        return DesignReport(
            model=model,
            T=T,
            bound=M,
            regime=plan.regime.value,
            lambda0=plan.lambda0,
            energy=plan.energy(self.designer.quad_spec),
            dEdT=energy_sensitivity(model, plan.lambda0),
            plan=plan,
            achieved_spike_time=traj.spike_time,
            trajectory_energy=traj.energy,
            bounds=self.designer.spike_time_bounds(model, M) if M is not None else None,
        )


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=[k.value for k in ModelKind], help="phase model family")
    parser.add_argument("--omega", type=float, help="natural frequency ω (sinusoidal, sniper)")
    parser.add_argument("--zd", type=float, help="PRC scale z_d")
    parser.add_argument("--ib", type=float, help="baseline current I_b (theta neuron)")


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON or YAML settings file")
    parser.add_argument("--out", type=Path, help="write output to this file instead of stdout")
    parser.add_argument("--save-config", dest="save_config", type=Path,
                        help="write the merged settings to this JSON file")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser() -> CliArgumentParser:
    """Argument parser with all subcommands."""
    parser = CliArgumentParser(prog="spike-design", description="Minimum-power stimuli for a target spike time")
    sub = parser.add_subparsers(dest="command", required=True)

    design = sub.add_parser("design", help="design the minimum-power stimulus for a target time")
    _add_model_arguments(design)
    design.add_argument("--T", dest="T", type=float, help="target spike time")
    design.add_argument("--max-amp", dest="max_amp", type=float, help="amplitude bound M")
    _add_common_arguments(design)

    bounds = sub.add_parser("bounds", help="feasible spike-time window under a bound")
    _add_model_arguments(bounds)
    bounds.add_argument("--max-amp", dest="max_amp", type=float, help="amplitude bound M")
    _add_common_arguments(bounds)

    sweep = sub.add_parser("sweep", help="λ₀ or T grid as CSV")
    _add_model_arguments(sweep)
    sweep.add_argument("--sweep", dest="sweep", choices=["lambda0", "T"], required=True)
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--points", type=int, required=True)
    sweep.add_argument("--max-amp", dest="max_amp", type=float, help="amplitude bound M")
    _add_common_arguments(sweep)

    simulate = sub.add_parser("simulate", help="trajectory of the designed plan")
    _add_model_arguments(simulate)
    simulate.add_argument("--T", dest="T", type=float, help="target spike time")
    simulate.add_argument("--max-amp", dest="max_amp", type=float, help="amplitude bound M")
    simulate.add_argument("--step", type=float, help="integrator step (default T/steps_per_period)")
    simulate.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    _add_common_arguments(simulate)

    validate = sub.add_parser("validate", help="compare with the direct-transcription oracle")
    _add_model_arguments(validate)
    validate.add_argument("--T", dest="T", type=float, help="target spike time")
    validate.add_argument("--max-amp", dest="max_amp", type=float, help="amplitude bound M")
    validate.add_argument("--steps", type=int, help="transcription intervals N")
    validate.add_argument("--tol", type=float, help="relative energy tolerance")
    _add_common_arguments(validate)

    check = sub.add_parser("check", help="recompute published reference values")
    check.add_argument("--report", type=Path, help="also write a timestamped record of the checks")
    _add_common_arguments(check)

    return parser


def _design_section(args: argparse.Namespace, config: ConfigManager) -> Dict[str, Any]:
    section = config.section("design")
    model = dict(section.get("model") or {})
    for flag, key in (("model", "kind"), ("omega", "omega"), ("zd", "zd"), ("ib", "ib")):
        value = getattr(args, flag, None)
        if value is not None:
            model[key] = value
    return {
        "model": model,
        "T": getattr(args, "T", None) if getattr(args, "T", None) is not None else section.get("T"),
        "max_amp": (getattr(args, "max_amp", None) if getattr(args, "max_amp", None) is not None
                    else section.get("max_amp")),
    }


def _model_from(section: Dict[str, Any]) -> PhaseModel:
    if not section["model"]:
        raise ModelDomainError("A model is required (--model with --omega/--zd, or --ib for theta)")
    return PhaseModel.from_dict(section["model"])


def _target_from(section: Dict[str, Any]) -> float:
    if section["T"] is None:
        raise ModelDomainError("A target spike time is required (--T)")
    return float(section["T"])


def _bound_from(section: Dict[str, Any]) -> Optional[float]:
    return None if section["max_amp"] is None else float(section["max_amp"])


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    logger.info(f"Wrote {out}")


def cmd_design(args: argparse.Namespace, session: DesignSession) -> int:
    """Full design pipeline; exit 2 with the window when T is infeasible."""
    section = _design_section(args, session.config)
    model, T, M = _model_from(section), _target_from(section), _bound_from(section)
    try:
        report = session.design(model, T, M)
    except (InfeasibleTargetError, InfeasibleTimeError) as e:
        payload: Dict[str, Any] = {
            "model": model.to_dict(),
            "design_model": design_model(model).to_dict(),
            "T": T,
            "max_amp": M,
            "regime": "Infeasible",
            "error": str(e),
        }
        if isinstance(e, InfeasibleTargetError):
            payload["bounds"] = e.bounds
        else:
            payload["attainable"] = list(e.attainable)
        _emit(dumps(payload), args.out)
        logger.error(str(e))
        return EXIT_INFEASIBLE
    _emit(dumps(report), args.out)
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace, session: DesignSession) -> int:
    """Four window values with the case label."""
    section = _design_section(args, session.config)
    model, M = _model_from(section), _bound_from(section)
    if M is None:
        raise ModelDomainError("bounds needs --max-amp")
    bounds = session.designer.spike_time_bounds(model, M)
    payload = dict(bounds.to_dict(), model=model.to_dict(), design_model=design_model(model).to_dict())
    _emit(dumps(payload), args.out)
    return EXIT_OK


def _sweep_row(session: DesignSession, model: PhaseModel, M: Optional[float],
               kind: str, value: float) -> Tuple[str, str, str, str]:
    omega = design_model(model).omega
    if kind == "lambda0":
        try:
            T, E, _ = session.designer.spike_time_for_lambda0(model, M, value)
        except SpikeDesignError as e:
            logger.debug(f"lambda0={value!r}: {e}")
            return format_float(value), "", "", format_float(omega * value)
        return format_float(value), format_float(T), format_float(E), format_float(omega * value)
    try:
        plan = session.designer.build_plan(model, M, value)
    except (InfeasibleTargetError, InfeasibleTimeError) as e:
        logger.debug(f"T={value!r}: {e}")
        return "", format_float(value), "", ""
    lambda0 = plan.lambda0
    return (format_float(lambda0) if math.isfinite(lambda0) else "", format_float(value),
            format_float(plan.energy(session.designer.quad_spec)),
            format_float(omega * lambda0) if math.isfinite(lambda0) else "")


def cmd_sweep(args: argparse.Namespace, session: DesignSession) -> int:
    """CSV grid in grid order; infeasible points carry empty fields."""
    section = _design_section(args, session.config)
    model, M = _model_from(section), _bound_from(section)
    if M is not None and not M > 0:
        raise ModelDomainError(f"Amplitude bound M must be positive, got {M!r}")
    if args.points < 1:
        raise ModelDomainError(f"Sweep needs at least one point, got {args.points}")
    grid = np.linspace(args.start, args.stop, args.points).tolist()
    if args.sweep == "T" and any(not t > 0 for t in grid):
        raise ModelDomainError("T sweep values must be positive")

    workers = max(1, int(session.config.get("batch.concurrency", 1)))
    logger.info(f"Sweeping {args.sweep} over {len(grid)} point(s) with {workers} worker(s)")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda v: _sweep_row(session, model, M, args.sweep, v), grid))

    lines = [",".join(SWEEP_COLUMNS)] + [",".join(row) for row in rows]
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, session: DesignSession) -> int:
    """Trajectory of the designed plan (theta neurons in their own phase)."""
    section = _design_section(args, session.config)
    model, T, M = _model_from(section), _target_from(section), _bound_from(section)
    try:
        plan = session.designer.build_plan(model, M, T)
    except (InfeasibleTargetError, InfeasibleTimeError) as e:
        logger.error(str(e))
        return EXIT_INFEASIBLE
    traj = session.simulate(model, plan, T, step=args.step)
    _emit(export_trajectory(traj, args.fmt).decode("utf-8"), args.out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, session: DesignSession) -> int:
    """Oracle report; exit 0 on PASS, 4 on FAIL."""
    section = _design_section(args, session.config)
    model, T, M = _model_from(section), _target_from(section), _bound_from(section)
    spec = TranscriptionSpec.from_config(session.config, steps=args.steps)
    try:
        report = TranscriptionOracle(session.config).compare_with_analytic(model, T, M, spec, tol=args.tol)
    except (InfeasibleTargetError, InfeasibleTimeError) as e:
        logger.error(str(e))
        return EXIT_INFEASIBLE
    _emit(dumps(report), args.out)
    if not report.passed:
        logger.error(f"Validation failed: {'; '.join(report.issues)}")
        return EXIT_VALIDATION_FAILED
    return EXIT_OK


def cmd_check(args: argparse.Namespace, session: DesignSession) -> int:
    """Reference values; exit 4 when any value is off reference."""
    service = DiagnosticsService(session.config)
    service.run_all_checks()
    _emit(dumps(service.export_to_dict()), args.out)
    if args.report is not None:
        service.export_to_file(args.report)
    for line in service.get_status_summary().splitlines():
        if line:
            logger.info(line)
    status = service.results["overall_status"]
    if status == "error":
        return EXIT_USAGE
    return EXIT_OK if status == "ok" else EXIT_VALIDATION_FAILED


COMMANDS = {
    "design": cmd_design,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "check": cmd_check,
}


def main(argv: Optional[Sequence[str]] = None, default_config: Optional[Path] = None) -> int:
    """
    Parse arguments, configure logging and run one subcommand.

    Args:
        argv: Command-line arguments (sys.argv[1:] when None)
        default_config: Settings file used when --config is not given

    Returns:
        Process exit code
    """
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)

    try:
        config_file = args.config or default_config
        config = ConfigManager(config_file)
    except (OSError, ValueError) as e:
        setup_logging(console_level=logging.WARNING)
        logging.getLogger(__name__).error(f"Could not load configuration: {e}")
        return EXIT_USAGE

    verbose = args.verbose or bool(config.get("diagnostics.verbose_logging", False))
    log_dir = Path(config.get("diagnostics.logs_dir", "logs")) if config.get("diagnostics.log_to_file") else None
    setup_logging(log_dir, level=logging.DEBUG if verbose else logging.INFO,
                  console_level=logging.DEBUG if verbose else logging.WARNING)

    if args.save_config is not None:
        try:
            config.save(args.save_config)
        except OSError as e:
            logger.error(f"Could not save configuration: {e}")
            return EXIT_USAGE

    session = DesignSession(config)
    try:
        return COMMANDS[args.command](args, session)
    except (InfeasibleTargetError, InfeasibleTimeError, InfeasibleCostateError) as e:
        logger.error(str(e))
        return EXIT_INFEASIBLE
    except OracleConvergenceError as e:
        logger.error(str(e))
        return EXIT_NO_CONVERGENCE
    except ModelDomainError as e:
        logger.error(str(e))
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SpikeDesignError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_USAGE