import math
import unittest

import numpy as np

from src.core import TimeGrid
from src.dichotomy import estimate_splitting, to_dichotomy
from src.errors import GapConditionError
from src.graph_field import GraphField, eval_graph, symmetric_axis
from src.graph_transform import (
    GridSpec,
    asymptotic_phase,
    extend_sigma,
    project_sigma,
    project_theta,
    saddle_point,
    solve_sigma,
    solve_theta,
    _fit_slope,
    _worst,
    verify_rates,
)
from src.ledger import constants_ledger
from src.models import build_model
from src.nonlinear import cutoff
from src.pipelines import _oracle_residual

GRID = TimeGrid(0.0, 2.0, 4)
SPEC = GridSpec(GRID, (0.2,), (21,), h=0.02)


def prepare(model_id):
    model = build_model(model_id, {})
    cert = estimate_splitting(model.generator.linear_part(), model.rank, 3.0, GRID, h=0.02)
    f = cutoff(model.nonlinearity, model.params["radius"], model.params["width"], model.dim, times=cert.times)
    ledger = constants_ledger(cert.M, cert.gamma, cert.rho, f.lipschitz)
    return model, cert, f, ledger


class QuadraticSigmaTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model, cls.cert, cls.f, cls.ledger = prepare("quadratic")
        cls.solution = solve_sigma(cls.model.generator, cls.cert, cls.f, cls.ledger, SPEC)
        cls.graph = cls.solution.field

    def test_solver_checks_pass(self):
        report = self.solution.report

        self.assertTrue(report.passed, [c.name for c in report.checks.failed()])
        self.assertEqual(self.graph.orientation, "sigma")

    def test_matches_parabola_near_origin(self):
        residual = _oracle_residual(self.model, self.graph)

        self.assertLessEqual(residual, 5e-3)
        value = eval_graph(self.graph, 1.0, [0.05])
        self.assertAlmostEqual(float(value[0]), 0.05**2 / 3.0, delta=5e-3)

    def test_zero_section_is_exact(self):
        np.testing.assert_array_equal(eval_graph(self.graph, 0.5, [0.0]), [0.0])
        self.assertEqual(float(np.max(np.abs(self.graph.zero_section()))), 0.0)

    def test_projection_lands_on_graph(self):
        point = project_sigma(self.graph, 1.0, [0.03, 0.7])

        self.assertAlmostEqual(point[0], 0.03, places=6)
        self.assertAlmostEqual(point[1], float(eval_graph(self.graph, 1.0, [0.03])[0]), places=6)

    def test_extension_agrees_with_stored_field(self):
        extended = extend_sigma(self.graph, self.model.generator, self.f, 1.0, [[0.05], [0.0]])

        self.assertAlmostEqual(float(extended[0, 0]), float(eval_graph(self.graph, 1.0, [0.05])[0]), delta=2e-4)
        self.assertEqual(float(extended[1, 0]), 0.0)

    def test_rates_against_ledger(self):
        rates = verify_rates(self.graph, self.model.generator, self.f, self.ledger, samples=4)

        self.assertTrue(rates.passed, rates.rates)
        self.assertIn("off_manifold_decay", rates.rates)

    def test_asymptotic_phase_decays(self):
        phase = asymptotic_phase(
            self.graph,
            self.model.generator,
            self.f,
            [1e-4, 1e-3],
            0.0,
            5.0 / self.ledger.delta,
            ledger=self.ledger,
        )

        self.assertTrue(phase.passed, [c.name for c in phase.checks.failed()])
        self.assertLess(phase.distances[-1], phase.distances[0])

    def test_text_form_keeps_values(self):
        loaded = GraphField.from_text(self.graph.to_text())

        np.testing.assert_array_equal(loaded.values, self.graph.values)
        self.assertEqual(loaded.orientation, "sigma")

    def test_rejects_ledger_with_smaller_constant(self):
        tight = constants_ledger(self.cert.M, self.cert.gamma, self.cert.rho, 0.5 * self.f.lipschitz)

        with self.assertRaises(GapConditionError):
            solve_sigma(self.model.generator, self.cert, self.f, tight, SPEC)


class StableGraphTests(unittest.TestCase):
    def test_quadratic_stable_graph_vanishes(self):
        model, cert, f, ledger = prepare("quadratic")
        solution = solve_theta(model.generator, cert, f, ledger, SPEC)

        self.assertTrue(solution.report.passed)
        self.assertLessEqual(float(np.max(np.abs(solution.field.values))), 1e-6)

    def test_mirrored_stable_graph_matches_parabola(self):
        model, cert, f, ledger = prepare("mirrored")
        solution = solve_theta(model.generator, cert, f, ledger, SPEC)

        self.assertTrue(solution.report.passed, [c.name for c in solution.report.checks.failed()])
        self.assertLessEqual(_oracle_residual(model, solution.field), 5e-3)

        point = project_theta(solution.field, 1.0, [0.7, 0.03])
        self.assertAlmostEqual(point[1], 0.03, places=6)
        self.assertAlmostEqual(point[0], float(eval_graph(solution.field, 1.0, [0.03])[0]), places=6)
        with self.assertRaisesRegex(ValueError, "sigma"):
            project_sigma(solution.field, 1.0, [0.7, 0.03])


class SaddlePointTests(unittest.TestCase):
    def test_both_manifolds_of_a_dichotomy(self):
        model, cert, f, _ = prepare("quadratic")
        gen, dichotomy = to_dichotomy(model.generator, cert)
        ledger = constants_ledger(dichotomy.M, dichotomy.gamma, dichotomy.rho, f.lipschitz)
        saddle = saddle_point(gen, dichotomy, f, ledger, SPEC, rate_samples=4)

        self.assertTrue(saddle.unstable.report.passed)
        self.assertTrue(saddle.stable.report.passed)

    def test_rejects_plain_splitting(self):
        model, cert, f, ledger = prepare("quadratic")
        shifted = cert.with_constants(cert.M, cert.gamma + 1.0, cert.rho)

        with self.assertRaisesRegex(ValueError, "dichotomy"):
            saddle_point(model.generator, shifted, f, ledger, SPEC)


class GridSpecTests(unittest.TestCase):
    def test_axes_repeat_single_extent(self):
        axes = GridSpec(GRID, (1.0,), (5,)).axes(2)

        self.assertEqual(len(axes), 2)
        np.testing.assert_allclose(axes[0], [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_symmetric_axis_needs_odd_count(self):
        with self.assertRaises(ValueError):
            symmetric_axis(1.0, 4)

    def test_round_trip_through_dict(self):
        spec = GridSpec.from_dict(SPEC.to_dict())

        self.assertEqual(spec.counts, (21,))
        self.assertEqual(spec.time_grid, GRID)


class GraphFieldTests(unittest.TestCase):
    def test_linear_interpolation_between_nodes(self):
        values = np.array([[[0.0], [0.0033]], [[0.0], [0.0033]]])
        graph = GraphField(TimeGrid(0.0, 1.0, 1), (np.array([0.0, 0.1]),), values, kappa=0.033)

        self.assertAlmostEqual(float(eval_graph(graph, 0.5, [0.05])[0]), 0.00165, places=15)
        self.assertEqual(float(eval_graph(graph, 1.0, [0.1])[0]), 0.0033)
        self.assertEqual(float(eval_graph(graph, 0.25, [0.0])[0]), 0.0)


class RateFitTests(unittest.TestCase):
    def test_slope_of_exponential_decay(self):
        times = np.linspace(0.0, 2.0, 9)

        self.assertAlmostEqual(_fit_slope(times, np.exp(-2.0 * times)), -2.0, places=10)

    def test_too_few_samples_give_nan(self):
        times = np.linspace(0.0, 2.0, 5)
        values = np.array([1.0, 1e-3, 0.0, 0.0, 0.0])

        self.assertTrue(math.isnan(_fit_slope(times, values)))

    def test_worst_rate_propagates_failed_fits(self):
        self.assertEqual(_worst([1.0, 3.0], np.min), 1.0)
        self.assertTrue(math.isnan(_worst([1.0, math.nan], np.min)))
        self.assertTrue(math.isnan(_worst([], np.max)))


if __name__ == "__main__":
    unittest.main()
