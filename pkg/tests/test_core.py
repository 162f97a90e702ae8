import math
import unittest

import numpy as np

from src.checks import CheckList
from src.core import (
    Generator,
    Nonlinearity,
    StateVector,
    TimeGrid,
    Trajectory,
    integrate,
    lawson_rk4,
    propagate_linear,
    propagate_semilinear,
    propagator,
)
from src.errors import BlowUpError, OutOfGridError


class TimeGridTests(unittest.TestCase):
    def test_nodes_and_spacing(self):
        grid = TimeGrid(0.0, 2.0, 4)

        self.assertAlmostEqual(grid.h, 0.5)
        np.testing.assert_allclose(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])
        self.assertEqual(TimeGrid.from_dict(grid.to_dict()), grid)

    def test_rejects_empty_or_reversed_interval(self):
        for args in ((1.0, 1.0, 4), (2.0, 0.0, 4), (0.0, 1.0, 0)):
            with self.subTest(args=args):
                with self.assertRaises(ValueError):
                    TimeGrid(*args)

    def test_check_raises_outside_grid(self):
        grid = TimeGrid(0.0, 1.0, 2)
        grid.check(0.0, 1.0)

        with self.assertRaises(OutOfGridError):
            grid.check(1.5)


class IntegrationTests(unittest.TestCase):
    def test_integrate_exponential_both_directions(self):
        rhs = lambda t, u: u
        forward = integrate(rhs, 0.0, 1.0, [1.0], 0.01)
        backward = integrate(rhs, 1.0, 0.0, [math.e], 0.01)

        self.assertAlmostEqual(float(forward[0]), math.e, places=8)
        self.assertAlmostEqual(float(backward[0]), 1.0, places=8)

    def test_integrate_records_both_ends(self):
        times, states = integrate(lambda t, u: -u, 0.0, 0.35, [1.0], 0.1, record=True)

        self.assertEqual(times[0], 0.0)
        self.assertEqual(times[-1], 0.35)
        self.assertEqual(states.shape, (times.size, 1))

    def test_ceiling_raises_blow_up(self):
        with self.assertRaises(BlowUpError):
            integrate(lambda t, u: u * u, 0.0, 2.0, [1.0], 0.01, ceiling=1e3)

    def test_propagator_of_diagonal_generator(self):
        gen = Generator.constant(np.diag([2.0, -1.0]))
        matrix = propagator(gen, 1.0, 0.0, 0.01)

        np.testing.assert_allclose(matrix, np.diag([math.exp(2.0), math.exp(-1.0)]), rtol=1e-7, atol=1e-10)

    def test_backward_linear_propagation_needs_invertible_flag(self):
        gen = Generator.constant(np.diag([1.0, -1.0]))
        grid = TimeGrid(0.0, 2.0, 4)

        with self.assertRaises(ValueError):
            propagate_linear(gen, 1.0, 0.5, [1.0, 0.0], grid)
        back = propagate_linear(gen, 1.0, 0.0, [math.e, 0.0], grid, invertible=True, h=0.01)
        self.assertAlmostEqual(back[0], 1.0, places=7)

    def test_backward_propagation_on_an_invariant_subspace(self):
        gen = Generator.constant(np.diag([1.0, -1.0]))
        grid = TimeGrid(0.0, 2.0, 4)
        q = np.diag([1.0, 0.0])
        back = propagate_linear(gen, 1.0, 0.0, [math.e, 0.0], grid, subspace=q, h=0.01)

        self.assertAlmostEqual(back[0], 1.0, places=7)
        self.assertEqual(back[1], 0.0)
        with self.assertRaisesRegex(ValueError, "image"):
            propagate_linear(gen, 1.0, 0.0, [1.0, 1.0], grid, subspace=q)

    def test_linear_closed_forms(self):
        grid = TimeGrid(0.0, 2.0, 4)
        diagonal = Generator.constant(np.diag([1.0, -1.0]))
        rotation = Generator.constant([[0.0, 1.0], [-1.0, 0.0]])

        u = propagate_linear(diagonal, 0.0, 1.0, [1.0, 1.0], grid, h=1e-3)
        np.testing.assert_allclose(u.coords, [math.e, math.exp(-1.0)], rtol=1e-10)
        same = propagate_linear(diagonal, 0.5, 0.5, [0.3, 0.7], grid)
        np.testing.assert_array_equal(same.coords, [0.3, 0.7])
        turned = propagate_linear(rotation, 0.0, math.pi / 2.0, [1.0, 0.0], grid, h=1e-3)
        np.testing.assert_allclose(turned.coords, [0.0, -1.0], atol=1e-8)

    def test_cocycle_identity(self):
        gen = Generator(matrix=lambda t: np.array([[0.1, 1.0 + 0.5 * math.sin(t)], [-1.0, -0.2]]), dim=2)
        grid = TimeGrid(0.0, 2.0, 4)
        rng = np.random.default_rng(3)
        for _ in range(5):
            tau, s, t = np.sort(rng.uniform(0.0, 2.0, 3))
            u = rng.standard_normal(2)
            with self.subTest(tau=tau, s=s, t=t):
                mid = propagate_linear(gen, tau, s, u, grid, h=0.01)
                composed = propagate_linear(gen, s, t, mid, grid, h=0.01)
                direct = propagate_linear(gen, tau, t, u, grid, h=0.01)
                self.assertLess(np.linalg.norm(composed.coords - direct.coords), 1e-7 * np.linalg.norm(u))

    def test_semilinear_with_zero_nonlinearity_is_linear(self):
        zero = Nonlinearity(func=lambda t, u: np.zeros_like(u), lipschitz=0.0)
        gen = Generator.constant([[0.5, 1.0], [0.0, -1.0]], nonlinearity=zero)
        grid = TimeGrid(0.0, 2.0, 4)
        semi = propagate_semilinear(gen, 0.0, 2.0, [1.0, -0.5], grid, h=0.01)
        lin = propagate_linear(gen, 0.0, 2.0, [1.0, -0.5], grid, h=0.01)

        np.testing.assert_allclose(semi.coords, lin.coords, rtol=1e-12)

    def test_cubic_decays_to_attracting_equilibrium(self):
        cubic = Nonlinearity(func=lambda t, u: -(u**3), lipschitz=12.0, name="cubic")
        gen = Generator.constant([[1.0]], nonlinearity=cubic)
        u = propagate_semilinear(gen, 0.0, 10.0, [2.0], TimeGrid(0.0, 10.0, 10), h=0.01)

        self.assertAlmostEqual(u[0], 1.0, delta=1e-6)

    def test_fourth_order_convergence(self):
        cubic = Nonlinearity(func=lambda t, u: -(u**3), lipschitz=3.0, name="cubic")
        gen = Generator.constant([[1.0]], nonlinearity=cubic)
        grid = TimeGrid(0.0, 2.0, 4)
        reference = propagate_semilinear(gen, 0.0, 2.0, [0.5], grid, h=1e-3)[0]
        coarse = abs(propagate_semilinear(gen, 0.0, 2.0, [0.5], grid, h=0.2)[0] - reference)
        fine = abs(propagate_semilinear(gen, 0.0, 2.0, [0.5], grid, h=0.1)[0] - reference)

        self.assertGreaterEqual(coarse / fine, 8.0)

    def test_semilinear_propagation_is_forward_only(self):
        f = Nonlinearity(func=lambda t, u: np.zeros_like(u), lipschitz=0.0)
        gen = Generator.constant(np.diag([1.0, -1.0]), nonlinearity=f)
        grid = TimeGrid(0.0, 1.0, 2)

        self.assertIsInstance(propagate_semilinear(gen, 0.0, 1.0, [0.0, 1.0], grid), StateVector)
        with self.assertRaises(ValueError):
            propagate_semilinear(gen, 1.0, 0.0, [0.0, 1.0], grid)
        with self.assertRaises(OutOfGridError):
            propagate_semilinear(gen, 0.0, 3.0, [0.0, 1.0], grid)

    def test_lawson_applies_stiff_decay_exactly(self):
        rates = np.array([1.0, 50.0])
        u = lawson_rk4(rates, lambda t, v: np.zeros_like(v), 0.0, 1.0, [1.0, 1.0], 0.25)

        np.testing.assert_allclose(u, np.exp(-rates), rtol=1e-12)


class GeneratorTests(unittest.TestCase):
    def test_constant_generator_rejects_non_square(self):
        with self.assertRaisesRegex(ValueError, "square"):
            Generator.constant(np.ones((2, 3)))

    def test_shift_and_perturbation(self):
        gen = Generator.constant(np.diag([1.0, -1.0]))
        shifted = gen.shifted(0.5)
        perturbed = gen.perturbed(lambda t: np.array([[0.0, 1.0], [1.0, 0.0]]))

        np.testing.assert_allclose(shifted.eval(3.0), np.diag([1.5, -0.5]))
        np.testing.assert_allclose(perturbed.eval(0.0), [[1.0, 1.0], [1.0, -1.0]])
        self.assertTrue(perturbed.autonomous)

    def test_linear_nonlinearity_uses_operator_norm(self):
        b = Nonlinearity.linear(lambda t: np.array([[0.0, 2.0], [0.0, 0.0]]))

        self.assertAlmostEqual(b.lipschitz, 2.0)
        np.testing.assert_allclose(b(0.0, np.array([1.0, 1.0])), [2.0, 0.0])

    def test_zero_flag_is_checked(self):
        f = Nonlinearity(func=lambda t, u: np.ones_like(u), lipschitz=0.0, name="offset")

        with self.assertRaisesRegex(ValueError, "offset"):
            f.check_zero(2)


class TrajectoryTests(unittest.TestCase):
    def test_rejects_unordered_times(self):
        with self.assertRaises(ValueError):
            Trajectory([0.0, 1.0, 0.5], np.zeros((3, 2)))

    def test_constant_trajectory_evaluates_everywhere(self):
        traj = Trajectory.constant([1.0, -1.0], 0.0, 5.0)

        self.assertTrue(traj.is_constant)
        np.testing.assert_allclose(traj(np.array([0.3, 4.0])), [[1.0, -1.0], [1.0, -1.0]])
        np.testing.assert_allclose(traj.derivative(2.0), [0.0, 0.0])


class CheckListTests(unittest.TestCase):
    def test_margins_and_failures(self):
        checks = CheckList()
        checks.add("small", 0.5, 1.0)
        checks.add("large", 2.0, 1.0, sense="ge")
        checks.add("missed", 1.2, 1.0, tol=0.1)

        self.assertFalse(checks.passed)
        self.assertEqual([c.name for c in checks.failed()], ["missed"])
        self.assertAlmostEqual(checks.checks[1].margin, 1.0)

    def test_nan_never_passes(self):
        checks = CheckList()
        checks.add("nan", math.nan, 1.0)

        self.assertFalse(checks.passed)


if __name__ == "__main__":
    unittest.main()
