import unittest

import numpy as np

from src.core import Generator, Nonlinearity, Trajectory
from src.errors import ResidualError
from src.nonlinear import cutoff, jacobian, shift_to_solution, smoothstep_cutoff


def quadratic(t, u):
    out = np.zeros_like(u)
    out[..., 1] = u[..., 0] ** 2
    return out


class CutoffTests(unittest.TestCase):
    def setUp(self):
        self.f = Nonlinearity(func=quadratic, lipschitz=0.4, name="quadratic")

    def test_ramp_profile(self):
        values = smoothstep_cutoff(np.array([0.0, 1.0, 1.25, 1.5, 2.0]), 1.0, 0.5)

        np.testing.assert_allclose(values, [1.0, 1.0, 0.5, 0.0, 0.0])

    def test_cutoff_matches_inside_and_vanishes_outside(self):
        g = cutoff(self.f, 0.15, 0.05, 2)
        inside = np.array([[0.1, 0.0], [0.0, 0.1]])
        outside = np.array([[0.3, 0.0]])

        np.testing.assert_allclose(g(0.0, inside), quadratic(0.0, inside))
        np.testing.assert_allclose(g(0.0, outside), 0.0)
        self.assertTrue(g.vanishes_at_zero)

    def test_effective_lipschitz_inflates_ball_estimate(self):
        g = cutoff(self.f, 0.15, 0.05, 2)

        # sup |f'| on the ball is 2R = 0.3, reached on the axis samples
        self.assertAlmostEqual(g.lipschitz, 1.1 * 0.3, places=6)
        self.assertGreater(g.ramp_ell, 0.0)

    def test_ramp_constant_is_kept_apart_from_ball_estimate(self):
        with self.assertLogs("src.nonlinear", level="WARNING"):
            g = cutoff(self.f, 0.15, 0.01, 2)

        self.assertAlmostEqual(g.lipschitz, 1.1 * 0.3, places=6)
        self.assertGreater(g.ramp_ell, g.lipschitz)
        self.assertEqual(g.as_nonlinearity().lipschitz, g.lipschitz)

    def test_zero_nonlinearity_has_zero_constant(self):
        g = cutoff(Nonlinearity.zero(), 1.0, 0.5, 3)

        self.assertEqual(g.lipschitz, 0.0)
        self.assertTrue(g.is_zero)

    def test_rejects_non_positive_radius(self):
        with self.assertRaises(ValueError):
            cutoff(self.f, 0.0, 0.05, 2)


class JacobianTests(unittest.TestCase):
    def test_central_differences_of_quadratic(self):
        jac = jacobian(quadratic, 0.0, np.array([[0.5, 2.0], [-1.0, 0.0]]))

        np.testing.assert_allclose(jac[0], [[0.0, 0.0], [1.0, 0.0]], atol=1e-8)
        np.testing.assert_allclose(jac[1], [[0.0, 0.0], [-2.0, 0.0]], atol=1e-8)


class ShiftToSolutionTests(unittest.TestCase):
    def test_equilibrium_moves_to_origin(self):
        cubic = Nonlinearity(func=lambda t, u: -(u**3), lipschitz=3.0, name="cubic")
        gen = Generator.constant(np.eye(1), nonlinearity=cubic)
        shifted = shift_to_solution(gen, Trajectory.constant([1.0], 0.0, 4.0))

        self.assertTrue(shifted.autonomous)
        np.testing.assert_allclose(shifted.eval(0.0), [[-2.0]], atol=1e-8)
        np.testing.assert_allclose(shifted.nonlinearity(0.0, np.zeros(1)), 0.0, atol=1e-12)

    def test_zero_solution_keeps_generator(self):
        gen = Generator.constant(np.eye(2), nonlinearity=Nonlinearity(func=quadratic, lipschitz=1.0))

        self.assertIs(shift_to_solution(gen, Trajectory.constant([0.0, 0.0], 0.0, 1.0)), gen)

    def test_rejects_non_solution(self):
        cubic = Nonlinearity(func=lambda t, u: -(u**3), lipschitz=3.0, name="cubic")
        gen = Generator.constant(np.eye(1), nonlinearity=cubic)

        with self.assertRaises(ResidualError):
            shift_to_solution(gen, Trajectory.constant([0.5], 0.0, 1.0))


if __name__ == "__main__":
    unittest.main()
