import math
import unittest

import numpy as np

from src.core import TimeGrid
from src.dichotomy import estimate_splitting
from src.errors import NestednessError
from src.fine_structure import build_nested, delta_bar, project_fast, project_slow, tangency_ratio
from src.graph_field import eval_graph
from src.graph_transform import GridSpec
from src.ledger import constants_ledger
from src.models import build_model
from src.nonlinear import cutoff

GRID = TimeGrid(0.0, 2.0, 4)


class DeltaBarTests(unittest.TestCase):
    def test_linear_limit_is_full_gap(self):
        self.assertEqual(delta_bar(1.0, 1.0, -1.0, 0.0, 0.0), 2.0)

    def test_decreases_with_lipschitz_constant(self):
        self.assertLess(delta_bar(1.0, 1.0, -1.0, 0.1, 0.05), delta_bar(1.0, 1.0, -1.0, 0.05, 0.05))


class NestedManifoldTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = build_model("fine", {})
        p = cls.model.params
        cls.gen = cls.model.generator
        linear = cls.gen.linear_part()
        cls.coarse = estimate_splitting(linear, 2, 3.0, GRID, h=0.02)
        cls.fine = estimate_splitting(linear, 1, 3.0, GRID, h=0.02)
        cls.f = cutoff(cls.model.nonlinearity, p["radius"], p["width"], 3, times=cls.coarse.times)
        cls.coarse_ledger = constants_ledger(cls.coarse.M, cls.coarse.gamma, cls.coarse.rho, cls.f.lipschitz)
        cls.fine_ledger = constants_ledger(cls.fine.M, cls.fine.gamma, cls.fine.rho, cls.f.lipschitz)
        spec = GridSpec(GRID, (p["radius"] + p["width"],), (21,), h=0.02)
        cls.nested = build_nested(
            cls.gen, cls.coarse, cls.fine, cls.f, cls.coarse_ledger, cls.fine_ledger, spec
        )

    def test_all_three_graphs_converge(self):
        self.assertTrue(self.nested.passed, [c.name for c in self.nested.checks.failed()])
        self.assertGreater(self.nested.delta_bar, 0.0)
        self.assertLessEqual(self.nested.containment, 1e-4)

    def test_fast_manifold_carries_cubic_coefficient(self):
        graph = self.nested.W_fast
        taus, q = graph.node_points()
        states = graph.frame.from_split(taus, q, graph.values.reshape(taus.size, -1))
        inside = np.abs(q[:, 0]) <= 1.0
        cubes = states[inside, 0] ** 3
        coefficient = float(cubes @ states[inside, 2] / (cubes @ cubes))

        self.assertAlmostEqual(coefficient / (0.01 / 7.0), 1.0, delta=0.1)

    def test_projections_are_idempotent(self):
        u = eval_graph(self.nested.W_coarse, 1.0, [0.4, 0.3])
        point = self.nested.W_coarse.frame.from_split(1.0, np.array([0.4, 0.3]), u)
        fast = project_fast(self.nested, 1.0, point)

        np.testing.assert_allclose(project_fast(self.nested, 1.0, fast), fast, atol=1e-8)
        self.assertEqual(project_slow(self.nested, 1.0, point).shape, (3,))

    def test_tangency_ratio_decays_at_nested_rate(self):
        xi = np.array([0.5, 0.5])
        frame = self.nested.W_coarse.frame
        u0 = frame.from_split(2.0, xi, eval_graph(self.nested.W_coarse, 2.0, xi, clamp=True))
        taus = np.linspace(2.0, 0.0, 9)[1:]
        result = tangency_ratio(self.nested, self.gen, self.f, u0, 2.0, taus, fine_cert=self.fine, tol=0.1)

        self.assertTrue(result.passed, [c.name for c in result.checks.failed()])
        self.assertGreaterEqual(result.rate, 0.9 * self.nested.delta_bar)
        self.assertEqual(result.angles.size, result.taus.size)

    def test_single_ratio_sample_fails_the_rate_checks(self):
        xi = np.array([0.5, 0.5])
        frame = self.nested.W_coarse.frame
        u0 = frame.from_split(2.0, xi, eval_graph(self.nested.W_coarse, 2.0, xi, clamp=True))
        result = tangency_ratio(self.nested, self.gen, self.f, u0, 2.0, [1.0], tol=0.1)

        self.assertFalse(result.passed)
        self.assertTrue(math.isnan(result.rate))
        failed = [c.name for c in result.checks.failed()]
        self.assertIn("ratio_samples", failed)
        self.assertIn("ratio_rate", failed)

    def test_tangency_rejects_point_off_coarse_manifold(self):
        with self.assertRaisesRegex(ValueError, "coarse manifold"):
            tangency_ratio(self.nested, self.gen, self.f, [0.5, 0.5, 1.0], 2.0, [1.0])

    def test_swapped_splittings_are_rejected(self):
        spec = GridSpec(GRID, (1.5,), (5,))

        with self.assertRaises(NestednessError):
            build_nested(self.gen, self.fine, self.coarse, self.f, self.fine_ledger, self.coarse_ledger, spec)


if __name__ == "__main__":
    unittest.main()
