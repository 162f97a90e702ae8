import unittest

from src.pipelines import run_pipeline
from src.scenario import GridSection, Scenario, resolve_config


def load(name: str) -> Scenario:
    return Scenario.from_file(resolve_config(name))


class BundledPipelineTests(unittest.TestCase):
    def test_diagonal_splitting(self):
        result = run_pipeline(load("dichotomy_diag"))

        self.assertTrue(result.passed, [c.name for c in result.checks.failed()])
        self.assertAlmostEqual(result.ledger["gamma"], 1.0, delta=1e-6)
        self.assertAlmostEqual(result.ledger["rho"], -1.0, delta=1e-6)
        self.assertIn("fine_certificate.txt", result.texts)
        self.assertEqual(result.values["fine"]["rank"], 1)

    def test_swap_roughness(self):
        result = run_pipeline(load("roughness_swap"))

        self.assertTrue(result.passed, [c.name for c in result.checks.failed()])
        self.assertIn("oracle.projection", [c.name for c in result.checks])
        self.assertFalse(result.values["thin_margin"])
        self.assertEqual(result.tables["projections"].columns[0], "t")

    def test_bundled_graph_scenarios_pass(self):
        for name, oracle in (("quadratic_manifold", "oracle.sigma"), ("mirrored_stable", "oracle.theta")):
            with self.subTest(name=name):
                scn = load(name)
                result = run_pipeline(scn)

                self.assertEqual(scn.grid.window, 3.0)
                self.assertTrue(result.passed, [c.name for c in result.checks.failed()])
                self.assertIn(oracle, [c.name for c in result.checks])

    def test_fine_structure_counts_its_ratio_samples(self):
        result = run_pipeline(load("fine_structure"))

        self.assertTrue(result.passed, [c.name for c in result.checks.failed()])
        self.assertIn("tangency.ratio_samples", [c.name for c in result.checks])

    def test_pde_reductions(self):
        result = run_pipeline(load("pde_hyperbolic"))
        names = [c.name for c in result.checks]

        self.assertTrue(result.passed, [c.name for c in result.checks.failed()])
        for name in ("inertial.fixed_point", "inertial.gap_ratio", "galerkin.refinement", "sweep.lambda2_trend"):
            self.assertIn(name, names)
        self.assertEqual(result.values["galerkin_refinement"]["fine"], 8)
        self.assertGreater(result.ledger["inertial_gamma"] - result.ledger["inertial_rho"], 0.0)
        self.assertAlmostEqual(result.ledger["lambda2_limit"], 1.0 / 1.2, places=12)
        self.assertIn("a1 + a2", result.notes[0])


class GridDefaultsTests(unittest.TestCase):
    def test_default_window_resolves_unit_gaps(self):
        self.assertEqual(GridSection().window, 3.0)


if __name__ == "__main__":
    unittest.main()
