import math
import unittest

import numpy as np

from src.core.errors import ModelDomainError
from src.models.phase_model import (
    ModelKind,
    PhaseModel,
    design_model,
    eval_f,
    eval_Z,
    theta_to_sniper,
)


class TestPhaseModel(unittest.TestCase):
    """Test model construction and PRC evaluation."""

    def test_sinusoidal_prc(self):
        model = PhaseModel.sinusoidal(1.0, 1.0)
        self.assertEqual(eval_f(model, 0.3), 1.0)
        self.assertAlmostEqual(eval_Z(model, math.pi / 2), 1.0, places=15)
        self.assertAlmostEqual(eval_Z(model, 0.0), 0.0, places=15)
        self.assertEqual(model.shape_max, 1.0)

    def test_sniper_prc(self):
        model = PhaseModel.sniper(2.0, 0.5)
        self.assertAlmostEqual(eval_Z(model, math.pi), 1.0, places=15)
        self.assertEqual(model.shape_max, 2.0)
        self.assertAlmostEqual(model.natural_period, math.pi, places=15)

    def test_vectorized_evaluation(self):
        model = PhaseModel.sniper(1.0, 1.0)
        thetas = np.linspace(0.0, 2 * math.pi, 7)
        self.assertEqual(np.shape(eval_f(model, thetas)), (7,))
        np.testing.assert_allclose(eval_Z(model, thetas), 1.0 - np.cos(thetas))

    def test_invalid_parameters(self):
        """Non-positive ω, z_d or I_b are rejected."""
        with self.assertRaises(ModelDomainError):
            PhaseModel.sinusoidal(0.0, 1.0)
        with self.assertRaises(ModelDomainError):
            PhaseModel.sniper(1.0, -1.0)
        with self.assertRaises(ModelDomainError):
            PhaseModel.theta_neuron(0.0)
        with self.assertRaises(ModelDomainError):
            PhaseModel(ModelKind.SNIPER, 1.0, 1.0, i_b=0.25)

    def test_from_dict(self):
        model = PhaseModel.from_dict({"kind": "Sniper", "omega": 1, "zd": "2"})
        self.assertEqual(model, PhaseModel.sniper(1.0, 2.0))

        theta = PhaseModel.from_dict({"kind": "theta", "ib": 0.25})
        self.assertAlmostEqual(theta.omega, 1.0, places=15)
        self.assertEqual(PhaseModel.from_dict(theta.to_dict()), theta)

    def test_from_dict_errors(self):
        with self.assertRaises(ModelDomainError):
            PhaseModel.from_dict({"kind": "hodgkin-huxley", "omega": 1, "zd": 1})
        with self.assertRaises(ModelDomainError):
            PhaseModel.from_dict({"omega": 1, "zd": 1})
        with self.assertRaises(ModelDomainError):
            PhaseModel.from_dict({"kind": "sinusoidal", "omega": "fast", "zd": 1})

    def test_theta_drift_derivative(self):
        model = PhaseModel.theta_neuron(0.3, 1.5)
        h = 1e-6
        for theta in (0.2, 1.7, 3.0, 5.5):
            fd = (eval_f(model, theta + h) - eval_f(model, theta - h)) / (2 * h)
            self.assertAlmostEqual(float(model.drift_derivative(theta)), fd, places=7)


class TestThetaReduction(unittest.TestCase):
    """Test the theta-neuron to SNIPER reduction."""

    def setUp(self):
        """Set up a theta neuron with unit natural frequency."""
        self.theta = PhaseModel.theta_neuron(0.25)
        self.reduction = theta_to_sniper(self.theta)

    def test_reduced_parameters(self):
        """I_b = 0.25, z_d = 1 gives SNIPER with ω = 1 and z_d' = 2z_d/ω = 2."""
        self.assertEqual(self.reduction.model.kind, ModelKind.SNIPER)
        self.assertAlmostEqual(self.reduction.model.omega, 1.0, places=15)
        self.assertAlmostEqual(self.reduction.model.z_d, 2.0, places=15)
        self.assertEqual(design_model(self.theta), self.reduction.model)

    def test_non_theta_rejected(self):
        with self.assertRaises(ModelDomainError):
            theta_to_sniper(PhaseModel.sniper(1.0, 1.0))

    def test_phase_map_endpoints_and_inverse(self):
        phase_map = self.reduction.phase_map
        self.assertAlmostEqual(phase_map.to_theta(0.0), 0.0, places=12)
        self.assertAlmostEqual(phase_map.to_theta(math.pi), math.pi, places=12)
        self.assertAlmostEqual(phase_map.to_theta(2 * math.pi), 2 * math.pi, places=12)

        phis = np.linspace(0.0, 2 * math.pi, 41)
        np.testing.assert_allclose(phase_map.to_phi(phase_map.to_theta(phis)), phis, atol=1e-12)
        self.assertTrue(np.all(np.diff(phase_map.to_theta(phis)) > 0))

    def test_dynamics_agree_under_the_map(self):
        """dθ/dt of the theta neuron equals dθ/dφ · dφ/dt of the reduction."""
        model = PhaseModel.theta_neuron(0.4, 0.7)
        reduction = theta_to_sniper(model)
        sniper, phase_map = reduction.model, reduction.phase_map
        for phi in (0.3, 1.1, 2.9, 4.0, 6.0):
            theta = phase_map.to_theta(phi)
            for current in (-0.2, 0.0, 0.5):
                lhs = eval_f(model, theta) + eval_Z(model, theta) * current
                rhs = phase_map.dtheta_dphi(phi) * (eval_f(sniper, phi) + eval_Z(sniper, phi) * current)
                self.assertAlmostEqual(float(lhs), float(rhs), places=10)


if __name__ == "__main__":
    unittest.main()
