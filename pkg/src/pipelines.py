"""One runner per pipeline; each turns a resolved Scenario into a PipelineResult."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from .checks import CheckList
from .core import Generator, TimeGrid
from .dichotomy import SplittingCertificate, estimate_splitting, nestedness_check, to_dichotomy, verify_splitting
from .fine_structure import build_nested, tangency_ratio
from .graph_field import GraphField, eval_graph
from .graph_transform import GridSpec, asymptotic_phase, solve_sigma, solve_theta, verify_rates
from .ledger import constants_ledger
from .models import Model, build_model
from .nonlinear import cutoff
from .parabolic import (
    BetaProfile,
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
from .parabolic.hyperbolic import line_rate
from .parabolic.limiting import Coupling
from .parabolic.spectrum import Spectrum, trend_violations
from .roughness import certify_perturbed, linear_graphs, perturbation_bound, perturbed_projection_matrix
from .scenario import Scenario

log = logging.getLogger(__name__)

RELATIVE_ORACLE_TOL = 0.1
JACOBIAN_RATE_TOL = 0.05
CUTOFF_SAMPLES = 256
ROUND_TRIP_TOL = 1e-14
REFINEMENT_TOL = 1e-2
INERTIAL_NODES = 7


@dataclass
class Table:
    columns: List[str]
    rows: np.ndarray


@dataclass
class PipelineResult:
    pipeline: str
    ledger: Dict[str, float] = field(default_factory=dict)
    checks: CheckList = field(default_factory=CheckList)
    tables: Dict[str, Table] = field(default_factory=dict)
    texts: Dict[str, str] = field(default_factory=dict)
    values: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checks.passed


def _time_grid(scn: Scenario) -> TimeGrid:
    return TimeGrid(scn.grid.t_min, scn.grid.t_max, scn.grid.n_steps)


def _grid_spec(scn: Scenario) -> GridSpec:
    g = scn.grid
    return GridSpec(_time_grid(scn), tuple(g.extents or [1.0]), tuple(g.counts), h=g.h, grid_slack=g.grid_slack)


def _estimate(scn: Scenario, gen: Generator, rank: int) -> SplittingCertificate:
    return estimate_splitting(gen.linear_part(), rank, scn.grid.window, _time_grid(scn), h=scn.grid.h)


def _projection_table(cert: SplittingCertificate, projections: Optional[np.ndarray] = None) -> Table:
    q = cert.projections if projections is None else projections
    d = cert.dim
    columns = ["t"] + [f"q{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    return Table(columns, np.column_stack([cert.times, q.reshape(q.shape[0], -1)]))


def _graph_states(graph: GraphField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Node times, domain coordinates and the state-space points they map to."""
    taus, q = graph.node_points()
    values = graph.values.reshape(taus.size, -1)
    if graph.orientation == "sigma":
        states = graph.frame.from_split(taus, q, values)
    else:
        states = graph.frame.from_split(taus, values, q)
    return taus, q, states


def _graph_table(graph: GraphField) -> Table:
    taus, q, _ = _graph_states(graph)
    values = graph.values.reshape(taus.size, -1)
    columns = ["t"] + [f"x{i + 1}" for i in range(q.shape[1])] + [f"y{i + 1}" for i in range(values.shape[1])]
    return Table(columns, np.column_stack([taus, q, values]))


def _oracle_residual(model: Model, graph: GraphField) -> Optional[float]:
    oracle = model.oracles.get(graph.orientation)
    if oracle is None:
        return None
    _, q, states = _graph_states(graph)
    inside = np.all(np.abs(q) <= model.params["oracle_radius"] + 1e-12, axis=1)
    return float(np.max(np.abs(oracle(states[inside]))))


def run_splitting(scn: Scenario, model: Model, threads: Optional[int] = None) -> PipelineResult:
    result = PipelineResult("splitting")
    tol = scn.tolerances
    gen = model.generator.linear_part()
    cert = _estimate(scn, gen, model.rank)
    report = verify_splitting(
        gen, cert, samples=64, h=scn.grid.h, tol=tol.splitting, commutation_tol=tol.commutation, seed=scn.scenario.seed
    )
    result.checks.extend(report.checks, prefix="splitting.")
    for key, expected in model.expected.items():
        result.checks.add(f"oracle.{key}", abs(getattr(cert, key) - expected), tol.oracle)

    shifted, dichotomy = to_dichotomy(gen, cert)
    shifted_report = verify_splitting(
        shifted, dichotomy, samples=64, h=scn.grid.h, tol=tol.splitting, commutation_tol=tol.commutation
    )
    result.checks.extend(shifted_report.checks, prefix="dichotomy.")

    fine_rank = int(model.params.get("fine_rank", 0))
    if 0 < fine_rank < model.rank:
        fine = _estimate(scn, gen, fine_rank)
        nesting = nestedness_check(cert, fine, tol=tol.nesting)
        result.checks.extend(nesting.checks, prefix="nesting.")
        result.texts["fine_certificate.txt"] = fine.to_text()
        result.values["fine"] = {"M": fine.M, "gamma": fine.gamma, "rho": fine.rho, "rank": fine.rank}

    result.ledger = {"M": cert.M, "gamma": cert.gamma, "rho": cert.rho, "rank": float(cert.rank)}
    result.ledger.update({f"residual_{k}": v for k, v in cert.residuals.items()})
    result.tables["projections"] = _projection_table(cert)
    result.tables["exponents"] = Table(
        ["index", "exponent"], np.column_stack([np.arange(1, len(cert.exponents) + 1), cert.exponents])
    )
    result.texts["certificate.txt"] = cert.to_text()
    return result


def _run_graph(scn: Scenario, model: Model, orientation: str) -> PipelineResult:
    result = PipelineResult(orientation)
    tol = scn.tolerances
    gen = model.generator
    cert = _estimate(scn, gen, model.rank)
    f = cutoff(
        model.nonlinearity,
        model.params["radius"],
        model.params["width"],
        model.dim,
        times=cert.times,
        samples=CUTOFF_SAMPLES,
        seed=scn.scenario.seed,
    )
    ledger = constants_ledger(cert.M, cert.gamma, cert.rho, f.lipschitz)
    solve = solve_sigma if orientation == "sigma" else solve_theta
    solution = solve(gen, cert, f, ledger, _grid_spec(scn), tol_fp=tol.fixed_point, tol_inv=tol.invariance)
    graph = solution.field
    result.checks.extend(solution.report.checks, prefix=f"{orientation}.")

    rates = verify_rates(
        graph, gen, f, ledger, samples=scn.grid.samples, h=scn.grid.h, rate_tol=tol.rate, seed=scn.scenario.seed
    )
    result.checks.extend(rates.checks, prefix="rates.")
    residual = _oracle_residual(model, graph)
    if residual is not None:
        result.checks.add(f"oracle.{orientation}", residual, tol.oracle)

    start = model.params.get("phase_start")
    if orientation == "sigma" and start is not None and ledger.delta > 0:
        phase = asymptotic_phase(graph, gen, f, start, scn.grid.t_min, 5.0 / ledger.delta, h=scn.grid.h, ledger=ledger)
        result.checks.extend(phase.checks, prefix="phase.")
        result.tables["phase"] = Table(["t", "distance"], np.column_stack([phase.times, phase.distances]))
        result.values["phase_rate"] = phase.rate

    result.ledger = ledger.to_dict()
    result.ledger["cutoff_ramp_ell"] = f.ramp_ell
    result.values["solve"] = solution.report.to_dict()
    result.values["rates"] = rates.rates
    result.tables["graph"] = _graph_table(graph)
    result.texts["graph.txt"] = graph.to_text()
    return result


def run_sigma(scn: Scenario, model: Model, threads: Optional[int] = None) -> PipelineResult:
    return _run_graph(scn, model, "sigma")


def run_theta(scn: Scenario, model: Model, threads: Optional[int] = None) -> PipelineResult:
    return _run_graph(scn, model, "theta")


def run_roughness(scn: Scenario, model: Model, threads: Optional[int] = None) -> PipelineResult:
    if model.perturbation is None:
        raise ValueError(f"model {model.name!r} carries no perturbation B(t)")
    result = PipelineResult("roughness")
    tol = scn.tolerances
    gen = model.generator.linear_part()
    b = model.perturbation
    cert = _estimate(scn, gen, model.rank)
    graphs = linear_graphs(gen, cert, b, extent=model.params["extent"], count=model.params["count"], h=scn.grid.h)
    bound = perturbation_bound(cert.gamma, cert.M, graphs.ledger.ell)
    result.checks.add("roughness_bound", graphs.ledger.ell, bound.bound)

    sigma, theta = graphs.sigma.field, graphs.theta.field
    projections = np.stack([perturbed_projection_matrix(sigma, theta, float(t)) for t in cert.times])
    perturbed = gen.perturbed(b)
    dichotomy = certify_perturbed(perturbed, cert, projections, graphs.ledger, tol=tol.splitting)
    result.checks.extend(dichotomy.checks, prefix="perturbed.")
    if gen.autonomous:
        exact = model.spectral_projection(gen.eval(0.0) + np.asarray(b(0.0), dtype=float))
        oracle = float(max(np.linalg.norm(q - exact, 2) for q in projections))
        result.checks.add("oracle.projection", oracle, tol.projection)

    result.ledger = graphs.ledger.to_dict()
    result.ledger.update(dichotomy.constants())
    result.values["thin_margin"] = dichotomy.thin_margin
    result.values["linearity_residual"] = graphs.linearity
    result.tables["projections"] = _projection_table(cert, projections)
    result.texts["perturbed_dichotomy.txt"] = dichotomy.to_text()
    return result


def run_fine_structure(scn: Scenario, model: Model, threads: Optional[int] = None) -> PipelineResult:
    result = PipelineResult("fine-structure")
    tol = scn.tolerances
    p = model.params
    gen = model.generator
    coarse = _estimate(scn, gen, model.rank)
    fine = _estimate(scn, gen, int(p["fine_rank"]))
    f = cutoff(
        model.nonlinearity,
        p["radius"],
        p["width"],
        model.dim,
        times=coarse.times,
        samples=CUTOFF_SAMPLES,
        seed=scn.scenario.seed,
    )
    coarse_ledger = constants_ledger(coarse.M, coarse.gamma, coarse.rho, f.lipschitz)
    fine_ledger = constants_ledger(fine.M, fine.gamma, fine.rho, f.lipschitz)
    nested = build_nested(
        gen,
        coarse,
        fine,
        f,
        coarse_ledger,
        fine_ledger,
        _grid_spec(scn),
        tol_fp=tol.fixed_point,
        tol_inv=tol.invariance,
        nest_tol=tol.nesting,
    )
    result.checks.extend(nested.checks, prefix="nested.")
    for name, solution in (("coarse", nested.coarse), ("fast", nested.fast), ("slow", nested.slow)):
        result.checks.extend(solution.report.checks, prefix=f"{name}.")

    expected = model.expected.get("fast_coefficient")
    if expected:
        _, q, states = _graph_states(nested.W_fast)
        inside = np.abs(q[:, 0]) <= p["radius"]
        cubes = states[inside, 0] ** 3
        coefficient = float(cubes @ states[inside, 2] / (cubes @ cubes))
        result.checks.add("oracle.fast_coefficient", abs(coefficient / expected - 1.0), RELATIVE_ORACLE_TOL)
        result.values["fast_coefficient"] = coefficient

    t = scn.grid.t_max
    xi = np.asarray(p["start"], dtype=float)
    frame = nested.W_coarse.frame
    u0 = frame.from_split(t, xi, eval_graph(nested.W_coarse, t, xi, clamp=True))
    taus = np.linspace(t, scn.grid.t_min, int(p["lags"]) + 1)[1:]
    tangency = tangency_ratio(nested, gen, f, u0, t, taus, fine_cert=fine, h=scn.grid.h, tol=tol.rate)
    result.checks.extend(tangency.checks, prefix="tangency.")

    result.ledger = {f"coarse_{k}": v for k, v in coarse_ledger.to_dict().items()}
    result.ledger.update({f"fine_{k}": v for k, v in fine_ledger.to_dict().items()})
    result.ledger["delta_bar"] = nested.delta_bar
    result.values["tangency_rate"] = tangency.rate
    result.values["truncated"] = tangency.truncated
    result.tables["tangency"] = Table(["tau", "ratio"], np.column_stack([tangency.taus, tangency.ratios]))
    if tangency.angles.size:
        result.tables["angles"] = Table(["tau", "angle_deg"], np.column_stack([tangency.taus, tangency.angles]))
    result.tables["fast_graph"] = _graph_table(nested.W_fast)
    result.tables["slow_graph"] = _graph_table(nested.W_slow)
    return result


def _mode_checks(result: PipelineResult, spectrum: Spectrum, x_star: float, nu: float, beta_nu: float) -> None:
    """phi_2 is -k1 left of the valley and 1/k1 right of it."""
    k1 = math.sqrt((1.0 - x_star) / x_star)
    x = spectrum.mesh
    phi2 = spectrum.phis[1]
    left = x < x_star - nu * beta_nu
    right = x > x_star + nu * beta_nu
    result.checks.add("phi2.left_negative", float(np.max(phi2[left])), 0.0)
    result.checks.add("phi2.right_positive", float(np.min(phi2[right])), 0.0, sense="ge")
    plateau = max(float(np.max(np.abs(phi2[left] + k1))), float(np.max(np.abs(phi2[right] - 1.0 / k1))))
    result.checks.add("phi2.plateau", plateau, RELATIVE_ORACLE_TOL * max(k1, 1.0 / k1))


def run_pde(scn: Scenario, model: Model, threads: Optional[int] = None) -> PipelineResult:
    result = PipelineResult("pde")
    tol = scn.tolerances
    p = model.params
    h = scn.grid.h
    x_star, alpha0, beta0 = float(p["x_star"]), float(p["alpha0"]), float(p["beta0"])
    reaction = CubicReaction(BetaProfile.from_dict(p["beta"]))

    profile = build_diffusion(float(p["nu"]), x_star, alpha0, beta0, shape=p["shape"])
    spectrum = eigensolve(profile, int(p["n_modes"]))
    lam = spectrum.lambdas
    limit = limiting_lambda2(x_star, alpha0, beta0)
    result.checks.add("spectrum.orthonormality", spectrum.orthonormality_residual(), 1e-8)
    if profile.shape == "bands":
        result.checks.add("spectrum.lambda2_limit", abs(lam[1] / limit - 1.0), RELATIVE_ORACLE_TOL)
        if spectrum.n_modes > 2:
            result.checks.add("spectrum.gap_ratio", lam[2] / lam[1], 10.0, sense="ge")
        _mode_checks(result, spectrum, x_star, profile.nu, profile.beta_nu)

    galerkin = galerkin_project(spectrum, int(p["galerkin_modes"]), reaction)
    sample = np.zeros(galerkin.dim)
    sample[0] = 0.7
    constant_mode = abs(galerkin.nonlinear(0.0, sample)[0] - float(reaction(0.0, np.array([0.7]))[0]))
    result.checks.add("galerkin.constant_mode", constant_mode, 1e-10)

    refine = int(p["refine_modes"])
    fine_spectrum = spectrum if spectrum.n_modes >= refine else eigensolve(profile, refine)
    start = np.array([0.5, 0.3])
    gap = refinement_gap(fine_spectrum, reaction, start, scn.grid.t_min, scn.grid.t_max, coarse=2, fine=refine, h=h)
    result.checks.add("galerkin.refinement", gap, REFINEMENT_TOL)
    result.values["galerkin_refinement"] = {"coarse": 2, "fine": refine, "relative_gap": gap}

    radius, width = float(p["inertial_radius"]), float(p["inertial_width"])
    inertial_spec = GridSpec(_time_grid(scn), (radius + width,), (INERTIAL_NODES,), h=h)
    reduction = inertial_reduction(
        spectrum, int(p["galerkin_modes"]), reaction, inertial_spec, radius=radius, width=width, tol_fp=tol.fixed_point
    )
    inertial_ledger = reduction.ledger
    result.checks.extend(reduction.solution.report.checks, prefix="inertial.")
    result.checks.add("inertial.gap_ratio", inertial_ledger.ratio, inertial_ledger.gap_threshold, sense="ge")
    if inertial_ledger.parabolic is not None:
        result.checks.add("inertial.parabolic_contraction", inertial_ledger.parabolic.contraction_lhs, 1.0)
    result.values["inertial"] = {"graph_size": reduction.graph_size(), **reduction.solution.report.to_dict()}
    result.tables["inertial_graph"] = _graph_table(reduction.graph)

    coupling = Coupling.of(x_star, alpha0, beta0)
    systems = limiting_systems(x_star, alpha0, beta0, reaction)
    result.checks.add("limiting.round_trip", coupling.round_trip_residual(), ROUND_TRIP_TOL)
    z_points = np.random.default_rng(scn.scenario.seed).uniform(-1.5, 1.5, (16, 2))
    pushed = coupling.z_to_u(systems["z"].rhs(0.0, z_points))
    direct = systems["uv"].rhs(0.0, coupling.z_to_u(z_points))
    result.checks.add("limiting.uv_z_consistency", float(np.max(np.abs(pushed - direct))), 1e-12)

    z = systems["z"]
    candidates = find_hyperbolic_solutions(
        z,
        horizon=float(p["horizon"]),
        pullback_depth=float(p["pullback_depth"]),
        h=h,
        tol=tol.pullback,
        margin=tol.margin,
    )

    def verify(candidate):
        return verify_hyperbolicity(candidate, z, window=float(p["window"]), h=h, margin=tol.margin)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        reports = list(pool.map(verify, candidates))

    beta = reaction.beta
    low, high = reaction.comparison_band()
    hyperbolic: Dict[str, Any] = {}
    for candidate, report in zip(candidates, reports):
        label = candidate.label
        result.checks.extend(report.checks, prefix=f"hyperbolic.{label}.")
        values = candidate.trajectory.states[:, 0] * candidate.sign
        if candidate.line == "E1":
            result.checks.add(f"band.{label}.low", float(np.min(values)), low, sense="ge", tol=1e-6)
            result.checks.add(f"band.{label}.high", float(np.max(values)), high, tol=1e-6)
        if beta.is_constant:
            c = line_rate(z, candidate.line)
            equilibrium = math.sqrt(c / beta.mean)
            result.checks.add(f"equilibrium.{label}", float(np.max(np.abs(values - equilibrium))), tol.pullback)
            eigenvalues = np.linalg.eigvals(z.jacobian(0.0, candidate.trajectory.states[0]))
            expected = float(np.min(np.abs(eigenvalues.real)))
            if report.certificate is not None:
                result.checks.add(
                    f"jacobian_rate.{label}", abs(report.dichotomy_rate / expected - 1.0), JACOBIAN_RATE_TOL
                )
        hyperbolic[label] = report.to_dict()
        result.tables[f"solution_{label}"] = Table(
            ["t", "z1", "z2"], np.column_stack([candidate.trajectory.times, candidate.trajectory.states])
        )

    sweep = [float(nu) for nu in p["sweep"]]
    if sweep:
        spectra = nu_sweep(sweep, x_star, alpha0, beta0, n_modes=3, threads=threads)
        result.checks.add("sweep.lambda2_trend", float(trend_violations(spectra, limit)), 0.0)
        result.tables["sweep"] = Table(
            ["nu", "lambda2", "lambda3"], np.array([[s.profile.nu, s.lambdas[1], s.lambdas[2]] for s in spectra])
        )

    result.ledger = {f"lambda{k + 1}": float(v) for k, v in enumerate(lam)}
    result.ledger["lambda2_limit"] = limit
    result.ledger.update({k: float(v) for k, v in coupling.to_dict().items() if k != "lambda2"})
    result.ledger.update({f"inertial_{k}": float(v) for k, v in inertial_ledger.to_dict().items()})
    result.notes.append(
        f"lambda2_limit = a1 + a2 = alpha0 / (2 beta0 x* (1 - x*)) = {limit:.6g}; "
        f"the coupling constants a1 = {coupling.a1:.6g} and a2 = {coupling.a2:.6g} are its two shares, not the limit"
    )
    result.values["hyperbolic"] = hyperbolic
    result.values["mesh_cells"] = profile.cells
    result.tables["eigenvalues"] = Table(["k", "lambda"], np.column_stack([np.arange(1, lam.size + 1), lam]))
    result.tables["modes"] = Table(
        ["x"] + [f"phi{k + 1}" for k in range(spectrum.n_modes)], np.column_stack([spectrum.mesh, spectrum.phis.T])
    )
    return result


RUNNERS: Dict[str, Callable[[Scenario, Model, Optional[int]], PipelineResult]] = {
    "splitting": run_splitting,
    "sigma": run_sigma,
    "theta": run_theta,
    "roughness": run_roughness,
    "fine-structure": run_fine_structure,
    "pde": run_pde,
}


def run_pipeline(scn: Scenario, threads: Optional[int] = None) -> PipelineResult:
    model = build_model(scn.model.id, scn.model.params)
    log.info("running %s pipeline on %s", scn.pipeline, model.name)
    return RUNNERS[scn.pipeline](scn, model, threads)
