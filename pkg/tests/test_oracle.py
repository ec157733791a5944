import math
import unittest
from unittest.mock import patch

import numpy as np

from src.core.config import ConfigManager
from src.core.errors import ModelDomainError, OracleConvergenceError
from src.models.phase_model import PhaseModel
from src.services.bounded import BoundedDesigner
from src.services.oracle import TranscriptionOracle, TranscriptionSpec
from src.services.simulator import PlanSimulator


class TestTranscriptionSpec(unittest.TestCase):
    """Test oracle settings validation."""

    def test_defaults(self):
        spec = TranscriptionSpec()
        self.assertEqual(spec.steps, 2000)
        self.assertEqual(spec.penalty_weights, (10.0, 100.0, 1000.0, 10000.0))

    def test_invalid_settings(self):
        with self.assertRaises(ModelDomainError):
            TranscriptionSpec(steps=5)
        with self.assertRaises(ModelDomainError):
            TranscriptionSpec(penalty_weights=(100.0, 10.0))
        with self.assertRaises(ModelDomainError):
            TranscriptionSpec(max_outer=2)

    def test_from_config(self):
        config = ConfigManager()
        config.set("oracle.steps", 400)
        config.set("oracle.penalty_weights", [1.0, 5.0])
        self.assertEqual(TranscriptionSpec.from_config(config).steps, 400)
        self.assertEqual(TranscriptionSpec.from_config(config, steps=50).steps, 50)
        self.assertEqual(TranscriptionSpec.from_config(config).penalty_weights, (1.0, 5.0))


class TestTranscriptionOracle(unittest.TestCase):
    """Test the brute-force solver against the analytic designs."""

    def setUp(self):
        """Set up oracle, designer and a coarse transcription."""
        self.oracle = TranscriptionOracle()
        self.designer = BoundedDesigner()
        self.model = PhaseModel.sinusoidal(1.0, 1.0)
        self.spec = TranscriptionSpec(steps=300, max_iters=500)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        for model in (self.model, PhaseModel.sniper(1.0, 0.5), PhaseModel.theta_neuron(0.3)):
            controls = rng.uniform(-1.0, 1.0, size=50)
            _, grad = self.oracle.objective_and_gradient(model, 3.0, controls, 0.3, 10.0)
            h = 1e-6
            for k in range(0, 50, 7):
                up, down = controls.copy(), controls.copy()
                up[k] += h
                down[k] -= h
                f_up, _ = self.oracle.objective_and_gradient(model, 3.0, up, 0.3, 10.0)
                f_down, _ = self.oracle.objective_and_gradient(model, 3.0, down, 0.3, 10.0)
                self.assertAlmostEqual(grad[k], (f_up - f_down) / (2 * h), delta=1e-6 * max(1.0, abs(grad[k])))

    def test_natural_period_needs_no_current(self):
        result = self.oracle.brute_force_design(self.model, 2 * math.pi, spec=TranscriptionSpec(steps=50))
        self.assertLess(result.energy, 1e-12)
        self.assertLess(abs(result.residual), 1e-6)

    def test_unbounded_energy_matches_analytic(self):
        result = self.oracle.brute_force_design(self.model, 3.0, spec=self.spec)
        analytic = self.designer.build_plan(self.model, None, 3.0).energy()
        self.assertLess(abs(result.residual), 1e-6)
        self.assertAlmostEqual(result.energy, analytic, delta=0.02 * analytic)

    def test_bounded_energy_matches_analytic(self):
        result = self.oracle.brute_force_design(self.model, 2.8, 2.5, spec=self.spec)
        self.assertLessEqual(float(np.max(np.abs(result.controls))), 2.5)
        self.assertAlmostEqual(result.energy, 13.876, delta=0.02 * 13.876)
        bands = self.oracle._saturation_bands(result, 2.5, self.model)
        self.assertEqual(len(bands), 2)
        plan = self.designer.build_plan(self.model, 2.5, 2.8)
        self.assertTrue(self.oracle._bands_match(bands, plan, result.thetas))

    def test_gradient_on_saturated_plan(self):
        """Adjoint gradient at a control sampled from a switched plan, saturated cells included."""
        plan = self.designer.build_plan(self.model, 2.5, 2.8)
        traj = PlanSimulator().simulate_plan(plan, target_time=2.8)
        n = 60
        controls = np.interp((np.arange(n) + 0.5) * 2.8 / n, traj.times, traj.currents)
        self.assertGreater(int(np.sum(np.abs(controls) >= 2.5 - 1e-12)), 5)
        _, grad = self.oracle.objective_and_gradient(self.model, 2.8, controls, -0.7, 100.0)
        h = 1e-6
        for k in range(0, n, 5):
            up, down = controls.copy(), controls.copy()
            up[k] += h
            down[k] -= h
            f_up, _ = self.oracle.objective_and_gradient(self.model, 2.8, up, -0.7, 100.0)
            f_down, _ = self.oracle.objective_and_gradient(self.model, 2.8, down, -0.7, 100.0)
            self.assertAlmostEqual(grad[k], (f_up - f_down) / (2 * h), delta=1e-6 * max(1.0, abs(grad[k])))

    def test_gap_shrinks_with_resolution(self):
        analytic = self.designer.build_plan(self.model, None, 3.0).energy()
        gaps = [abs(self.oracle.brute_force_design(self.model, 3.0, spec=TranscriptionSpec(steps=n)).energy - analytic)
                for n in (40, 80, 160)]
        self.assertGreater(gaps[0], gaps[1])
        self.assertGreater(gaps[1], gaps[2])

    def test_unreachable_target(self):
        spec = TranscriptionSpec(steps=50, penalty_weights=(10.0, 100.0), max_outer=2, max_iters=50)
        with self.assertRaises(OracleConvergenceError) as ctx:
            self.oracle.brute_force_design(self.model, 2.0, 2.5, spec=spec)
        self.assertGreater(abs(ctx.exception.residual), 1e-6)

    def test_invalid_inputs(self):
        with self.assertRaises(ModelDomainError):
            self.oracle.brute_force_design(self.model, -1.0, spec=self.spec)
        with self.assertRaises(ModelDomainError):
            self.oracle.brute_force_design(self.model, 3.0, 0.0, spec=self.spec)


class TestCompareWithAnalytic(unittest.TestCase):
    """Test validation reports."""

    def setUp(self):
        """Set up oracle and model."""
        self.oracle = TranscriptionOracle()
        self.model = PhaseModel.sinusoidal(1.0, 1.0)

    def test_natural_period_passes(self):
        report = self.oracle.compare_with_analytic(self.model, 2 * math.pi, spec=TranscriptionSpec(steps=50))
        self.assertTrue(report.passed)
        self.assertEqual(report.rel_gap, 0.0)
        self.assertEqual(report.max_dev, 0.0)
        self.assertEqual(report.to_dict()["status"], "PASS")

    def test_unbounded_design_passes(self):
        report = self.oracle.compare_with_analytic(self.model, 3.0, spec=TranscriptionSpec(steps=300, max_iters=500))
        self.assertTrue(report.passed, report.issues)
        self.assertLessEqual(abs(report.rel_gap), 0.02)
        self.assertEqual(report.n, 300)

    def test_tight_tolerance_fails(self):
        report = self.oracle.compare_with_analytic(self.model, 3.0, spec=TranscriptionSpec(steps=20, max_iters=500),
                                                   tol=1e-12)
        self.assertFalse(report.passed)
        self.assertEqual(report.status, "FAIL")

    def test_band_mismatch_fails(self):
        spec = TranscriptionSpec(steps=300, max_iters=500)
        with patch.object(TranscriptionOracle, "_saturation_bands", return_value=[(0.5, 1.0)]):
            report = self.oracle.compare_with_analytic(self.model, 2.8, 2.5, spec=spec)
        self.assertFalse(report.bands_match)
        self.assertEqual(report.status, "FAIL")
        self.assertTrue(any("saturation bands" in issue for issue in report.issues))

    def test_bands_match_within_one_cell(self):
        plan = BoundedDesigner().build_plan(self.model, 2.5, 2.8)
        phases = np.linspace(0.0, 2 * math.pi, 101)
        cell = phases[1]
        a1, a2, a3, a4 = plan.switching_angles
        self.assertTrue(TranscriptionOracle._bands_match([(a1 + 0.9 * cell, a2 - 0.9 * cell), (a3, a4)], plan, phases))
        self.assertFalse(TranscriptionOracle._bands_match([(a1 + 1.5 * cell, a2), (a3, a4)], plan, phases))
        self.assertFalse(TranscriptionOracle._bands_match([(a1, a2)], plan, phases))


class TestReferenceCases(unittest.TestCase):
    """Test the bounded reference designs against the oracle."""

    def setUp(self):
        """Set up oracle and transcription size."""
        self.oracle = TranscriptionOracle()
        self.spec = TranscriptionSpec(steps=400)

    def check(self, model, T, M):
        report = self.oracle.compare_with_analytic(model, T, M, spec=self.spec)
        self.assertTrue(report.passed, report.issues)
        self.assertTrue(report.bands_match, report.saturation_bands)
        self.assertLessEqual(abs(report.rel_gap), 0.02)
        return report

    def test_sinusoidal_fast(self):
        report = self.check(PhaseModel.sinusoidal(1.0, 1.0), 2.8, 2.5)
        self.assertEqual(len(report.saturation_bands), 2)

    def test_sinusoidal_slow(self):
        report = self.check(PhaseModel.sinusoidal(1.0, 1.0), 10.0, 0.55)
        self.assertEqual(len(report.saturation_bands), 2)

    def test_sniper_fast(self):
        report = self.check(PhaseModel.sniper(1.0, 1.0), 3.0, 2.0)
        self.assertEqual(len(report.saturation_bands), 1)

    def test_sniper_slow(self):
        report = self.check(PhaseModel.sniper(1.0, 1.0), 9.8, 0.3)
        self.assertEqual(len(report.saturation_bands), 1)


if __name__ == "__main__":
    unittest.main()
