import math
import unittest

import numpy as np

from src.core import TimeGrid
from src.errors import PullbackError
from src.graph_transform import GridSpec
from src.parabolic import (
    BetaProfile,
    Coupling,
    CubicReaction,
    build_diffusion,
    eigensolve,
    find_hyperbolic_solutions,
    galerkin_project,
    inertial_reduction,
    limiting_lambda2,
    limiting_systems,
    nu_sweep,
    refinement_gap,
    verify_hyperbolicity,
)
from src.parabolic.hyperbolic import line_rate
from src.parabolic.limiting import line_drift, sign_flip, symmetry_residual
from src.parabolic.spectrum import trend_violations


class DiffusionProfileTests(unittest.TestCase):
    def test_band_profile_honours_its_inequalities(self):
        profile = build_diffusion(1e-3)

        self.assertEqual(profile.cells, math.ceil(32 / (2 * 1e-3 * 2.4)))
        self.assertGreaterEqual(profile.valley_points(), 32)
        self.assertEqual(max(profile.band_violations().values()), 0.0)
        self.assertAlmostEqual(profile.beta_nu, 1.25 * 2.4)

    def test_bands_may_not_reach_the_boundary(self):
        with self.assertRaisesRegex(ValueError, "boundary"):
            build_diffusion(0.5)

    def test_rejects_unknown_shape_and_coarse_mesh(self):
        with self.assertRaises(ValueError):
            build_diffusion(1e-2, shape="steps")
        with self.assertRaisesRegex(ValueError, "too coarse"):
            eigensolve(build_diffusion(1e-3, cells=512))


class SpectrumTests(unittest.TestCase):
    def test_constant_diffusion_has_cosine_spectrum(self):
        for value in (1.0, 2.0):
            with self.subTest(value=value):
                spectrum = eigensolve(build_diffusion(1e-2, shape="constant", value=value), 3)

                self.assertEqual(spectrum.lambdas[0], 0.0)
                self.assertAlmostEqual(spectrum.lambdas[1] / (value * math.pi**2), 1.0, delta=5e-3)
                self.assertLess(spectrum.orthonormality_residual(), 1e-8)
                self.assertLess(spectrum.phis[1][0], 0.0)

    def test_small_valley_isolates_second_eigenvalue(self):
        spectrum = eigensolve(build_diffusion(1e-3), 4)
        limit = limiting_lambda2(0.5, 1.0, 2.4)
        phi2 = spectrum.phis[1]
        x = spectrum.mesh
        left, right = x < 0.5 - 3e-3, x > 0.5 + 3e-3

        self.assertAlmostEqual(limit, 1.0 / 1.2, places=12)
        self.assertAlmostEqual(spectrum.lambdas[1] / limit, 1.0, delta=0.1)
        self.assertGreaterEqual(spectrum.lambdas[2] / spectrum.lambdas[1], 10.0)
        self.assertLess(float(np.max(phi2[left])), 0.0)
        self.assertGreater(float(np.min(phi2[right])), 0.0)
        self.assertAlmostEqual(float(np.mean(phi2[left])), -1.0, delta=0.1)
        np.testing.assert_array_equal(spectrum.phis[0], 1.0)

    def test_sweep_keeps_input_order(self):
        nus = [4e-2, 3e-2, 2e-2]
        spectra = nu_sweep(nus, n_modes=3, threads=2)

        self.assertEqual([s.profile.nu for s in spectra], nus)
        for s in spectra:
            self.assertGreater(s.lambdas[1], 0.0)

    def test_sweep_trend_counts_growing_distances(self):
        spectra = nu_sweep([4e-2, 3e-2, 2e-2], n_modes=3)
        limit = limiting_lambda2(0.5, 1.0, 2.4)

        self.assertEqual(trend_violations(spectra, limit), 0)
        self.assertEqual(trend_violations(spectra[::-1], limit), 2)


class ReactionTests(unittest.TestCase):
    def test_beta_profile_must_stay_positive(self):
        with self.assertRaises(ValueError):
            BetaProfile(mean=0.4, amplitude=0.5)

    def test_comparison_band(self):
        low, high = CubicReaction(BetaProfile()).comparison_band()

        self.assertAlmostEqual(low, 1.0 / math.sqrt(2.0))
        self.assertAlmostEqual(high, 1.0)

    def test_round_trip_through_dict(self):
        beta = BetaProfile.from_dict({"mean": 1.2, "amplitude": 0.1, "frequency": 2.0})

        self.assertEqual(BetaProfile.from_dict(beta.to_dict()), beta)
        self.assertTrue(BetaProfile.constant(1.0).is_constant)


class GalerkinTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spectrum = eigensolve(build_diffusion(5e-2), 3)
        cls.reaction = CubicReaction(BetaProfile.constant(1.0))

    def test_first_mode_carries_the_reaction(self):
        system = galerkin_project(self.spectrum, 3, self.reaction)
        value = system.nonlinear(0.0, np.array([0.7, 0.0, 0.0]))

        self.assertAlmostEqual(value[0], 0.7 - 0.7**3, places=10)
        np.testing.assert_allclose(value[1:], 0.0, atol=1e-10)
        self.assertTrue(system.is_diagonal)

    def test_two_modes_agree_with_eight(self):
        spectrum = eigensolve(build_diffusion(2e-2), 8)
        gap = refinement_gap(spectrum, self.reaction, [0.5, 0.3], 0.0, 2.0, coarse=2, fine=8)

        self.assertLess(gap, 1e-2)
        with self.assertRaises(ValueError):
            refinement_gap(spectrum, self.reaction, [0.5, 0.3], 0.0, 2.0, coarse=8, fine=2)
        with self.assertRaises(ValueError):
            refinement_gap(self.spectrum, self.reaction, [0.5, 0.3], 0.0, 2.0, coarse=2, fine=8)

    def test_truncation_bounds(self):
        with self.assertRaises(ValueError):
            galerkin_project(self.spectrum, 1, self.reaction)
        with self.assertRaises(ValueError):
            galerkin_project(self.spectrum, 4, self.reaction)

    def test_inertial_reduction_over_two_modes(self):
        spec = GridSpec(TimeGrid(0.0, 1.0, 2), (0.15,), (7,), h=0.02)
        reduction = inertial_reduction(self.spectrum, 3, self.reaction, spec)
        ledger = reduction.ledger

        self.assertEqual(reduction.system.dim, 2)
        self.assertEqual(reduction.certificate.rank, 2)
        self.assertAlmostEqual(ledger.gap, self.spectrum.gap(2), places=10)
        self.assertGreater(ledger.ratio, ledger.gap_threshold)
        self.assertLess(ledger.parabolic.contraction_lhs, 1.0)
        self.assertTrue(reduction.solution.report.passed)
        np.testing.assert_allclose(reduction.system.rhs(0.0, np.zeros(2)), 0.0, atol=1e-12)


class LimitingSystemTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.reaction = CubicReaction(BetaProfile())
        cls.coupling = Coupling.of(0.5, 1.0, 2.4)
        cls.systems = limiting_systems(0.5, 1.0, 2.4, cls.reaction)

    def test_coupling_constants(self):
        self.assertAlmostEqual(self.coupling.a1, 0.41667, places=5)
        self.assertAlmostEqual(self.coupling.a2, self.coupling.a1)
        self.assertAlmostEqual(self.coupling.lambda2, limiting_lambda2(0.5, 1.0, 2.4))
        self.assertLessEqual(self.coupling.round_trip_residual(), 1e-14)

    def test_uv_and_z_forms_agree(self):
        z = np.random.default_rng(0).uniform(-1.5, 1.5, (16, 2))
        pushed = self.coupling.z_to_u(self.systems["z"].rhs(0.7, z))
        direct = self.systems["uv"].rhs(0.7, self.coupling.z_to_u(z))

        np.testing.assert_allclose(pushed, direct, atol=1e-12)

    def test_lines_are_invariant(self):
        z = self.systems["z"]

        self.assertLessEqual(line_drift(z, [0.5, 0.5], "E1", 0.0, 3.0), 1e-12)
        self.assertLessEqual(line_drift(z, [0.3, -0.3], "E2", 0.0, 3.0), 1e-12)

    def test_sign_flip_conjugates_orbits(self):
        np.testing.assert_array_equal(sign_flip([1.0, -2.0]), [-1.0, 2.0])
        self.assertLessEqual(symmetry_residual(self.systems["z"], [0.4, -0.9], 0.0, 3.0), 1e-12)

    def test_line_rates(self):
        z = self.systems["z"]

        self.assertEqual(line_rate(z, "E1"), 1.0)
        self.assertAlmostEqual(line_rate(z, "E2"), 1.0 - 2.0 / 2.4)


class HyperbolicSolutionTests(unittest.TestCase):
    def test_constant_beta_gives_equilibria(self):
        z = limiting_systems(0.5, 1.0, 2.4, CubicReaction(BetaProfile.constant(1.0)))["z"]
        candidates = find_hyperbolic_solutions(z)
        starts = {c.label: c.trajectory.states[0] for c in candidates}
        e2 = math.sqrt(1.0 - 2.0 / 2.4)

        self.assertEqual(sorted(starts), ["E1+", "E1-", "E2+", "E2-"])
        np.testing.assert_allclose(starts["E1+"], [1.0, 1.0], atol=1e-8)
        np.testing.assert_allclose(starts["E1-"], [-1.0, -1.0], atol=1e-8)
        np.testing.assert_allclose(starts["E2+"], [e2, -e2], atol=1e-8)
        self.assertAlmostEqual(e2, 0.40825, places=5)

        expected = {"E1": 2.0, "E2": 1.0 / 3.0}
        for candidate in candidates:
            with self.subTest(label=candidate.label):
                report = verify_hyperbolicity(candidate, z)
                self.assertTrue(report.passed, [c.name for c in report.checks.failed()])
                self.assertEqual(report.rank, candidate.unstable_dim)
                self.assertAlmostEqual(report.dichotomy_rate / expected[candidate.line], 1.0, delta=0.05)

    def test_periodic_beta_keeps_four_separated_solutions(self):
        z = limiting_systems(0.5, 1.0, 2.4, CubicReaction(BetaProfile()))["z"]
        candidates = find_hyperbolic_solutions(z)

        self.assertEqual(len(candidates), 4)
        for candidate in candidates:
            with self.subTest(label=candidate.label):
                self.assertGreaterEqual(candidate.margin, 0.05)
                if candidate.line == "E1":
                    values = candidate.trajectory.states[:, 0] * candidate.sign
                    self.assertGreaterEqual(values.min(), 1.0 / math.sqrt(2.0) - 1e-6)
                    self.assertLessEqual(values.max(), 1.0 + 1e-6)

    def test_pullback_depth_must_leave_room_to_double(self):
        z = limiting_systems(0.5, 1.0, 2.4, CubicReaction(BetaProfile()))["z"]

        for depth in (600.0, 1024.0):
            with self.subTest(depth=depth):
                with self.assertRaisesRegex(PullbackError, "double"):
                    find_hyperbolic_solutions(z, pullback_depth=depth)
        with self.assertRaises(ValueError):
            find_hyperbolic_solutions(z, pullback_depth=0.0)

    def test_search_needs_the_z_system(self):
        uv = limiting_systems(0.5, 1.0, 2.4, CubicReaction(BetaProfile()))["uv"]

        with self.assertRaisesRegex(ValueError, "z-system"):
            find_hyperbolic_solutions(uv)


if __name__ == "__main__":
    unittest.main()
