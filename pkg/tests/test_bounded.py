import math
import unittest

import numpy as np

from src.core.errors import (
    InfeasibleCostateError,
    InfeasibleTargetError,
    ModelDomainError,
    NoSaturationError,
    RegimeMismatchError,
)
from src.models.phase_model import PhaseModel
from src.services.bounded import (
    BoundedDesigner,
    ControlKind,
    Direction,
    PiecewisePlan,
    PlanSegment,
    Regime,
    SpikeTimeBounds,
    lambda0_saturation_limits,
    switching_angles,
)
from src.services.unbounded import analytic_control


class TestSaturationGeometry(unittest.TestCase):
    """Test saturation limits and switching angles."""

    def setUp(self):
        """Set up the unit sinusoidal and SNIPER models."""
        self.sinusoidal = PhaseModel.sinusoidal(1.0, 1.0)
        self.sniper = PhaseModel.sniper(1.0, 1.0)

    def test_saturation_limits(self):
        fast, slow = lambda0_saturation_limits(self.sinusoidal, 2.5)
        self.assertAlmostEqual(fast, -11.25, places=12)
        self.assertIsNone(slow)

        fast, slow = lambda0_saturation_limits(self.sniper, 0.3)
        self.assertAlmostEqual(fast, -0.39, places=12)
        self.assertAlmostEqual(slow, 0.21, places=12)

        _, slow = lambda0_saturation_limits(self.sinusoidal, 0.55)
        self.assertAlmostEqual(slow, 0.7975, places=12)

    def test_invalid_bound(self):
        for bad in (0.0, -1.0, math.inf, math.nan):
            with self.assertRaises(ModelDomainError):
                lambda0_saturation_limits(self.sinusoidal, bad)

    def test_sinusoidal_fast_angles(self):
        """λ₀ = −13, M = 2.5: sinθ₁ = 2Mω/(z_d(−ωλ₀ − M²)) and I*(θ₁) = M."""
        angles = switching_angles(self.sinusoidal, 2.5, -13.0, Direction.FAST)
        a = angles[0]
        self.assertAlmostEqual(math.sin(a), 5.0 / 6.75, places=12)
        self.assertAlmostEqual(a, 0.8345, delta=2e-3)
        self.assertAlmostEqual(angles[1], math.pi - a, places=12)
        self.assertAlmostEqual(angles[2], math.pi + a, places=12)
        self.assertAlmostEqual(angles[3], 2 * math.pi - a, places=12)
        self.assertAlmostEqual(float(analytic_control(self.sinusoidal, -13.0, a)), 2.5, places=10)

    def test_sniper_slow_angles(self):
        """λ₀ = 0.25, M = 0.3: cosθ_s = −0.7647."""
        a, b = switching_angles(self.sniper, 0.3, 0.25, Direction.SLOW)
        self.assertAlmostEqual(math.cos(a), 1.0 - 0.6 / 0.34, places=12)
        self.assertAlmostEqual(math.cos(a), -0.7647, delta=1e-4)
        self.assertAlmostEqual(b, 2 * math.pi - a, places=12)
        self.assertAlmostEqual(float(analytic_control(self.sniper, 0.25, a)), -0.3, places=10)

    def test_tangency_at_limit(self):
        angles = switching_angles(self.sinusoidal, 2.5, -11.25, Direction.FAST)
        self.assertAlmostEqual(angles[0], math.pi / 2, places=6)
        self.assertAlmostEqual(angles[1], math.pi / 2, places=6)

    def test_no_saturation(self):
        with self.assertRaises(NoSaturationError):
            switching_angles(self.sinusoidal, 2.5, -1.0, Direction.FAST)
        with self.assertRaises(NoSaturationError):
            switching_angles(self.sinusoidal, 2.5, 0.5, Direction.SLOW)
        with self.assertRaises(NoSaturationError):
            switching_angles(self.sniper, 0.3, 0.1, Direction.SLOW)


class TestSpikeTimeBounds(unittest.TestCase):
    """Test feasible windows against reference values."""

    def setUp(self):
        """Set up designer and models."""
        self.designer = BoundedDesigner()
        self.sinusoidal = PhaseModel.sinusoidal(1.0, 1.0)
        self.sniper = PhaseModel.sniper(1.0, 1.0)

    def test_sinusoidal_large_bound(self):
        b = self.designer.spike_time_bounds(self.sinusoidal, 2.5)
        self.assertAlmostEqual(b.t_bang_min, 2.735, delta=0.005)
        self.assertAlmostEqual(b.t_analytic_min, 3.056, delta=0.005)
        self.assertEqual(b.t_analytic_max, math.inf)
        self.assertEqual(b.t_bang_max, math.inf)
        self.assertFalse(b.bounded_above)
        self.assertEqual(b.case, "M >= omega/zd")

    def test_sinusoidal_small_bound(self):
        b = self.designer.spike_time_bounds(self.sinusoidal, 0.55)
        self.assertAlmostEqual(b.t_analytic_max, 9.006, delta=0.005)
        self.assertAlmostEqual(b.t_bang_max, 10.312, delta=0.005)
        self.assertEqual(b.case, "M < omega/zd")

    def test_sniper_windows(self):
        fast = self.designer.spike_time_bounds(self.sniper, 2.0)
        self.assertAlmostEqual(fast.t_analytic_min, 3.18, delta=0.01)
        self.assertAlmostEqual(fast.t_bang_min, 2 * math.pi / math.sqrt(5.0), places=8)

        slow = self.designer.spike_time_bounds(self.sniper, 0.3)
        self.assertAlmostEqual(slow.t_bang_max, 2 * math.pi / math.sqrt(0.4), places=8)
        self.assertAlmostEqual(slow.t_bang_max, 9.934, delta=0.005)
        self.assertAlmostEqual(slow.t_analytic_max, 8.596, delta=0.01)
        self.assertEqual(slow.case, "M < omega/(2zd)")

    def test_closed_forms_match_quadrature(self):
        for model in (self.sinusoidal, self.sniper, PhaseModel.sinusoidal(1.3, 0.8)):
            for M in (0.2, 0.55, 1.0, 2.5):
                quad = self.designer.bang_bang_extremes(model, M)
                closed = self.designer.bang_bang_closed_form(model, M)
                for q, c in zip(quad, closed):
                    if math.isinf(c):
                        self.assertTrue(math.isinf(q))
                    else:
                        self.assertAlmostEqual(q, c, delta=1e-8 * c)

    def test_window_ordering(self):
        for model in (self.sinusoidal, self.sniper):
            for M in np.logspace(-1.0, 1.0, 5):
                b = self.designer.spike_time_bounds(model, float(M))
                self.assertLess(b.t_bang_min, b.t_analytic_min)
                self.assertLessEqual(b.t_analytic_min, 2 * math.pi)
                self.assertLessEqual(2 * math.pi, b.t_analytic_max)
                self.assertLessEqual(b.t_analytic_max, b.t_bang_max)

    def test_classify_target(self):
        self.assertIs(self.designer.classify_target(self.sinusoidal, 2.5, 2.8), Regime.FAST_SWITCHED)
        self.assertIs(self.designer.classify_target(self.sinusoidal, 2.5, 2 * math.pi), Regime.ANALYTIC_ONLY)
        self.assertIs(self.designer.classify_target(self.sinusoidal, 2.5, 2.0), Regime.INFEASIBLE)
        self.assertIs(self.designer.classify_target(self.sinusoidal, 0.55, 10.0), Regime.SLOW_SWITCHED)
        self.assertIs(self.designer.classify_target(self.sinusoidal, 0.55, 11.0), Regime.INFEASIBLE)
        b = self.designer.spike_time_bounds(self.sinusoidal, 2.5)
        self.assertIs(self.designer.classify_target(self.sinusoidal, 2.5, b.t_bang_min), Regime.FAST_SWITCHED)
        self.assertIs(self.designer.classify_target(self.sinusoidal, 2.5, b.t_analytic_min), Regime.ANALYTIC_ONLY)

    def test_to_dict(self):
        data = self.designer.spike_time_bounds(self.sniper, 0.3).to_dict()
        self.assertEqual(set(data), {"M", "case", "t_bang_min", "t_analytic_min", "t_analytic_max", "t_bang_max"})
        self.assertEqual(data["M"], 0.3)


class TestBoundedDesign(unittest.TestCase):
    """Test switched period map, its inversion and plan construction."""

    def setUp(self):
        """Set up designer and models."""
        self.designer = BoundedDesigner()
        self.sinusoidal = PhaseModel.sinusoidal(1.0, 1.0)
        self.sniper = PhaseModel.sniper(1.0, 1.0)

    def test_switched_time_is_continuous_at_limit(self):
        b = self.designer.spike_time_bounds(self.sinusoidal, 2.5)
        T = self.designer.bounded_spike_time_of(self.sinusoidal, 2.5, -11.25, Direction.FAST)
        self.assertAlmostEqual(T, b.t_analytic_min, places=8)

    def test_switched_time_is_monotone(self):
        times = [self.designer.bounded_spike_time_of(self.sinusoidal, 2.5, lam, Direction.FAST)
                 for lam in (-12.0, -20.0, -50.0, -500.0)]
        self.assertTrue(all(a > b for a, b in zip(times, times[1:])))
        self.assertGreater(times[-1], self.designer.spike_time_bounds(self.sinusoidal, 2.5).t_bang_min)

    def test_switched_time_approaches_bang_bang(self):
        T = self.designer.bounded_spike_time_of(self.sniper, 2.0, -1e6, Direction.FAST)
        self.assertAlmostEqual(T, 2 * math.pi / math.sqrt(5.0), delta=1e-3)

    def test_inversion_round_trip(self):
        cases = ((self.sinusoidal, 2.5, 2.8, Direction.FAST), (self.sinusoidal, 0.55, 10.0, Direction.SLOW),
                 (self.sniper, 2.0, 3.0, Direction.FAST), (self.sniper, 0.3, 9.5, Direction.SLOW))
        for model, M, T, direction in cases:
            lambda0 = self.designer.bounded_lambda0_for_spike_time(model, M, T, direction)
            fast, slow = lambda0_saturation_limits(model, M)
            if direction is Direction.FAST:
                self.assertLess(lambda0, fast)
            else:
                self.assertGreater(lambda0, slow)
            self.assertAlmostEqual(self.designer.bounded_spike_time_of(model, M, lambda0, direction), T, places=8)

    def test_inversion_at_edges(self):
        b = self.designer.spike_time_bounds(self.sinusoidal, 2.5)
        self.assertEqual(self.designer.bounded_lambda0_for_spike_time(
            self.sinusoidal, 2.5, b.t_analytic_min, Direction.FAST), -11.25)
        self.assertEqual(self.designer.bounded_lambda0_for_spike_time(
            self.sinusoidal, 2.5, b.t_bang_min, Direction.FAST), -math.inf)

    def test_regime_mismatch(self):
        with self.assertRaises(RegimeMismatchError) as ctx:
            self.designer.bounded_lambda0_for_spike_time(self.sinusoidal, 2.5, 5.0, Direction.FAST)
        self.assertEqual(ctx.exception.actual, "AnalyticOnly")

    def test_fast_plan(self):
        plan = self.designer.build_plan(self.sinusoidal, 2.5, 2.8)
        self.assertIs(plan.regime, Regime.FAST_SWITCHED)
        self.assertEqual([s.kind for s in plan.segments], [
            ControlKind.ANALYTIC, ControlKind.SAT_PLUS, ControlKind.ANALYTIC,
            ControlKind.SAT_MINUS, ControlKind.ANALYTIC,
        ])
        a1, a2, a3, a4 = plan.switching_angles
        self.assertAlmostEqual(a2, math.pi - a1, places=12)
        self.assertAlmostEqual(a4, 2 * math.pi - a1, places=12)
        self.assertAlmostEqual(plan.traversal_time(), 2.8, places=8)
        self.assertAlmostEqual(plan.energy(), 13.876, delta=0.002)

    def test_slow_plan(self):
        plan = self.designer.build_plan(self.sinusoidal, 0.55, 10.0)
        self.assertIs(plan.regime, Regime.SLOW_SWITCHED)
        self.assertEqual(plan.segments[1].kind, ControlKind.SAT_MINUS)
        self.assertEqual(plan.segments[3].kind, ControlKind.SAT_PLUS)
        self.assertAlmostEqual(plan.energy(), 2.340, delta=0.002)

    def test_sniper_slow_plan(self):
        plan = self.designer.build_plan(self.sniper, 0.3, 9.5)
        self.assertEqual([s.kind for s in plan.segments],
                         [ControlKind.ANALYTIC, ControlKind.SAT_MINUS, ControlKind.ANALYTIC])
        self.assertAlmostEqual(plan.traversal_time(), 9.5, places=8)

    def test_bound_costs_energy(self):
        unbounded = self.designer.build_plan(self.sinusoidal, None, 2.8)
        bounded = self.designer.build_plan(self.sinusoidal, 2.5, 2.8)
        self.assertAlmostEqual(unbounded.energy(), 13.325, delta=0.001)
        self.assertGreater(bounded.energy(), unbounded.energy())

    def test_plan_respects_bound(self):
        plan = self.designer.build_plan(self.sinusoidal, 2.5, 2.8)
        thetas = np.linspace(0.0, 2 * math.pi, 1001)
        self.assertLessEqual(float(np.max(np.abs(plan.control_at(thetas)))), 2.5 + 1e-9)
        for a in plan.switching_angles:
            left, right = plan.control_at(a - 1e-9), plan.control_at(a + 1e-9)
            self.assertAlmostEqual(left, right, delta=1e-6)

    def test_hamiltonian_constant_on_plan(self):
        plan = self.designer.build_plan(self.sinusoidal, 2.5, 2.8)
        thetas = np.linspace(0.0, 2 * math.pi, 501)
        np.testing.assert_allclose(plan.hamiltonian_at(thetas), plan.lambda0, atol=1e-8)

    def test_natural_period_plan(self):
        plan = self.designer.build_plan(self.sniper, 0.3, 2 * math.pi)
        self.assertIs(plan.regime, Regime.ANALYTIC_ONLY)
        self.assertEqual(plan.lambda0, 0.0)
        self.assertEqual(plan.energy(), 0.0)

    def test_bang_bang_edge_plan(self):
        b = self.designer.spike_time_bounds(self.sinusoidal, 2.5)
        plan = self.designer.build_plan(self.sinusoidal, 2.5, b.t_bang_min)
        self.assertEqual(plan.lambda0, -math.inf)
        self.assertEqual([s.kind for s in plan.segments], [ControlKind.SAT_PLUS, ControlKind.SAT_MINUS])
        self.assertAlmostEqual(plan.energy(), 2.5 ** 2 * b.t_bang_min, places=8)
        self.assertTrue(math.isnan(plan.costate_at(1.0)))

    def test_infeasible_target(self):
        with self.assertRaises(InfeasibleTargetError) as ctx:
            self.designer.build_plan(self.sinusoidal, 2.5, 2.0)
        self.assertIsInstance(ctx.exception.bounds, SpikeTimeBounds)
        with self.assertRaises(ModelDomainError):
            self.designer.build_plan(self.sinusoidal, 2.5, -1.0)
        with self.assertRaises(ModelDomainError):
            self.designer.build_plan(self.sinusoidal, 0.0, 3.0)

    def test_theta_neuron_plan(self):
        plan = self.designer.build_plan(PhaseModel.theta_neuron(0.25), 1.0, 5.0)
        self.assertEqual(plan.model, PhaseModel.sniper(1.0, 2.0))
        self.assertAlmostEqual(plan.traversal_time(), 5.0, places=8)

    def test_spike_time_for_lambda0(self):
        T, E, direction = self.designer.spike_time_for_lambda0(self.sinusoidal, 2.5, -13.0)
        self.assertIs(direction, Direction.FAST)
        self.assertEqual(T, self.designer.bounded_spike_time_of(self.sinusoidal, 2.5, -13.0, Direction.FAST))
        self.assertGreater(E, 0.0)

        T, E, direction = self.designer.spike_time_for_lambda0(self.sinusoidal, 2.5, -5.0)
        self.assertIsNone(direction)
        self.assertEqual(T, self.designer.unbounded.spike_time_of(self.sinusoidal, -5.0))

        with self.assertRaises(InfeasibleCostateError):
            self.designer.spike_time_for_lambda0(self.sinusoidal, 2.5, 2.0)


class TestPiecewisePlan(unittest.TestCase):
    """Test plan validation."""

    def test_segments_must_cover_cycle(self):
        model = PhaseModel.sinusoidal(1.0, 1.0)
        with self.assertRaises(ModelDomainError):
            PiecewisePlan(model, 0.0, (PlanSegment(0.0, math.pi, ControlKind.ANALYTIC),))
        with self.assertRaises(ModelDomainError):
            PiecewisePlan(model, 0.0, (PlanSegment(0.0, 1.0, ControlKind.ANALYTIC),
                                       PlanSegment(1.5, 2 * math.pi, ControlKind.ANALYTIC)))

    def test_saturation_needs_bound(self):
        with self.assertRaises(ModelDomainError):
            PiecewisePlan(PhaseModel.sniper(1.0, 1.0), -math.inf,
                          (PlanSegment(0.0, 2 * math.pi, ControlKind.SAT_PLUS),))


if __name__ == "__main__":
    unittest.main()
