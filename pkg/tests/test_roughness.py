import unittest

import numpy as np

from src.core import TimeGrid
from src.dichotomy import estimate_splitting
from src.errors import GapConditionError
from src.graph_transform import linearity_residual
from src.models import build_model
from src.roughness import (
    certify_perturbed,
    linear_graphs,
    perturbation_bound,
    perturbed_constants,
    perturbed_projection,
    perturbed_projection_matrix,
)


class PerturbationBoundTests(unittest.TestCase):
    def test_bound_value_and_margin(self):
        report = perturbation_bound(1.0, 1.0, 0.05)

        self.assertAlmostEqual(report.bound, 1.0 / 3.0)
        self.assertTrue(report.passed)
        self.assertFalse(report.thin_margin)

    def test_thin_margin_flag(self):
        report = perturbation_bound(1.0, 1.0, 0.32)

        self.assertTrue(report.passed)
        self.assertTrue(report.thin_margin)
        self.assertFalse(perturbation_bound(1.0, 1.0, 0.4).passed)

    def test_reference_constants(self):
        constants = perturbed_constants(1.0, 1.0, 0.05, 0.027067)

        self.assertAlmostEqual(constants["M_ell"], 1.08586, delta=1e-4)
        self.assertAlmostEqual(constants["gamma_ell"], 0.94865, delta=1e-4)
        self.assertAlmostEqual(constants["distance_bound"], 0.0573, delta=1e-4)

    def test_rejects_large_kappa(self):
        with self.assertRaises(GapConditionError):
            perturbed_constants(1.0, 1.0, 0.05, 0.5)


class SwapPerturbationTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = build_model("swap", {})
        cls.gen = cls.model.generator.linear_part()
        cls.cert = estimate_splitting(cls.gen, 1, 3.0, TimeGrid(0.0, 2.0, 4), h=0.02)
        cls.graphs = linear_graphs(cls.gen, cls.cert, cls.model.perturbation, extent=1.0, count=5, h=0.02)
        cls.sigma = cls.graphs.sigma.field
        cls.theta = cls.graphs.theta.field
        cls.projections = np.stack(
            [perturbed_projection_matrix(cls.sigma, cls.theta, float(t)) for t in cls.cert.times]
        )

    def test_graphs_are_linear(self):
        self.assertLessEqual(self.graphs.linearity, 1e-8)
        self.assertLessEqual(linearity_residual(self.sigma), 1e-8)
        self.assertAlmostEqual(self.graphs.ledger.ell, 0.05)

    def test_projection_matches_eigenprojection(self):
        exact = self.model.spectral_projection(self.gen.eval(0.0) + self.model.perturbation(0.0))

        for q in self.projections:
            np.testing.assert_allclose(q, exact, atol=1e-6)

    def test_projection_of_vector_matches_matrix(self):
        u = np.array([0.3, -0.2])
        point = perturbed_projection(self.sigma, self.theta, 1.0, u)

        np.testing.assert_allclose(np.asarray(point), self.projections[2] @ u, atol=1e-7)

    def test_certified_perturbed_dichotomy(self):
        perturbed = self.gen.perturbed(self.model.perturbation)
        dichotomy = certify_perturbed(perturbed, self.cert, self.projections, self.graphs.ledger)

        self.assertTrue(dichotomy.passed, [c.name for c in dichotomy.checks.failed()])
        self.assertLessEqual(dichotomy.distance, 0.0573)
        self.assertAlmostEqual(dichotomy.distance, 0.025, delta=2e-3)
        self.assertAlmostEqual(dichotomy.constants()["M_ell"], 1.08586, delta=1e-3)
        self.assertIn("distance_bound", dichotomy.to_text())

    def test_rejects_perturbation_above_declared_constant(self):
        with self.assertRaisesRegex(ValueError, "exceeds"):
            linear_graphs(self.gen, self.cert, self.model.perturbation, ell=0.01)


if __name__ == "__main__":
    unittest.main()
