"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Named verification suites. Each suite returns residuals paired with their tolerances, plus
flags for anything skipped.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Callable

import numpy as np
from tqdm import tqdm

from twisted_eigen.ball_eigen import ball_lambda, scaling_check
from twisted_eigen.common import Residual, residual
from twisted_eigen.config import RunConfig
from twisted_eigen.params import NonAdmissibleError, ProblemParams
from twisted_eigen.rearrange import (
    MOMENT_SLACK,
    RADIAL_SLACK,
    ROUNDING_SLACK,
    SampledFunction,
    check_equimeasurable,
    polya_szego_check_1d,
    two_ball_reduction_demo,
)
from twisted_eigen.shape_verify import (
    IdentityInapplicableError,
    check_divergence_identity,
    check_flux_equality,
    default_volume,
    divergence_balance,
    equal_radius,
    find_optimal_split,
    hadamard_derivative,
    partner_radius,
    pohozaev_residual,
)
from twisted_eigen.shooting import SourceSpec, check_comparison
from twisted_eigen.twisted import OutsideAnsatzError, TwistedConfig, TwistedResult, twisted_structured

logger = logging.getLogger(__name__)

COMPARISON_CASES = 50
REARRANGE_CASES = 1000
RADIAL_REARRANGE_CASES = 20
OPTIMUM_TOL = 1e-5
# off-critical splits as fractions of the equal radius
HADAMARD_FRACTIONS = (0.85, 0.92, 0.97)
SuiteOutput = tuple[dict[str, Residual], dict[str, str]]


def scaling_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    params = config.params
    residuals = {f"scaling_t{t:g}": residual(scaling_check(params, config.radius, t, config.ode_tol), 1e-8) for t in (0.5, 1.0, 2.0)}
    return residuals, {}


def monotonic_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    """Largest relative increase of λ(B_R) as R grows (zero when monotone)."""
    radii = config.radius * np.array([0.5, 0.75, 1.0, 1.5, 2.0])
    values = [ball_lambda(config.params, float(r), config.ode_tol).lam for r in radii]
    increase = max(max(b - a, 0.0) / a for a, b in zip(values, values[1:]))
    return {"monotonic": residual(increase, 0.0)}, {}


def random_comparison_params(rng: np.random.Generator) -> tuple[ProblemParams, float, float]:
    """Admissible (p, q ≤ p, N) with c1 < c2; for q > p the ordering only holds up to a crossing."""
    p = float(rng.uniform(1.5, 4.0))
    q = float(rng.uniform(1.2, p))
    dim = int(rng.integers(1, 4))
    c1 = float(rng.uniform(0.3, 1.5))
    c2 = c1 * float(rng.uniform(1.05, 2.0))
    return ProblemParams(p, q, dim), c1, c2


def comparison_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    worst = -np.inf
    for _ in tqdm(range(COMPARISON_CASES), desc="Comparison cases", disable=not logger.isEnabledFor(logging.INFO)):
        params, c1, c2 = random_comparison_params(rng)
        report = check_comparison(params, c1, c2, tol=config.ode_tol)
        worst = max(worst, report.max_gap)
    return {"comparison": residual(worst, 1e-9)}, {}


def pohozaev_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    ball = ball_lambda(config.params, config.radius, config.ode_tol, config.samples)
    value = pohozaev_residual(ball.profile, config.params, SourceSpec(ball.euler_k), ball.flux)
    return {"pohozaev": residual(value, 1e-6)}, {}


@lru_cache(maxsize=8)
def _refined_optimum(
    params: ProblemParams, total_volume: float, newton_tol: float, ode_tol: float, zero_tol: float, samples: int
) -> TwistedResult:
    best = find_optimal_split(params, total_volume, tol=OPTIMUM_TOL, solver_tol=newton_tol)
    logger.info("refined optimum at R1=%.8f R2=%.8f", best.r1, best.r2)
    return twisted_structured(TwistedConfig(params, best.r1, best.r2, newton_tol, ode_tol, zero_tol, samples))


def _optimum(config: RunConfig) -> TwistedResult:
    params = config.params
    volume = config.total_volume or default_volume(params)
    return _refined_optimum(params, volume, config.newton_tol, config.ode_tol, config.zero_tol, config.samples)


def flux_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    """f1 = f2 at the refined minimizer of the volume sweep."""
    if config.dim < 2:
        return {}, {"flux": "skipped: needs dim >= 2"}
    return {"flux": residual(check_flux_equality(_optimum(config)), 1e-4)}, {}


def divergence_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    if config.dim < 2:
        return {}, {"divergence": "skipped: needs dim >= 2"}
    result = _optimum(config)
    residuals = {"divergence_balance": residual(divergence_balance(result), 1e-5)}
    try:
        residuals["divergence"] = residual(check_divergence_identity(result), 1e-6)
    except IdentityInapplicableError as error:
        return residuals, {"divergence": f"skipped: {error}"}
    return residuals, {}


def hadamard_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    params = config.params
    if params.dim < 2:
        return {}, {"hadamard": "skipped: needs dim >= 2"}
    volume = config.total_volume or default_volume(params)
    r_eq = equal_radius(params, volume)
    at_equal = hadamard_derivative(params, r_eq, r_eq, tol=config.newton_tol)
    residuals = {"hadamard_equal_split": residual(abs(at_equal.predicted), 1e-6)}
    flags = {}
    for fraction in HADAMARD_FRACTIONS:
        r1 = fraction * r_eq
        name = f"hadamard_gap_{fraction:g}"
        try:
            report = hadamard_derivative(params, r1, partner_radius(params, volume, r1), tol=config.newton_tol)
        except OutsideAnsatzError as error:
            flags[name] = f"skipped: {error}"
            continue
        residuals[name] = residual(report.gap, 1e-3)
    return residuals, flags


def random_pl_function(rng: np.random.Generator, nodes: int = 12) -> SampledFunction:
    """Nonnegative piecewise-linear function on [0, 1] vanishing at both ends."""
    x = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 1.0, nodes - 2)), [1.0]])
    values = np.concatenate([[0.0], rng.uniform(0.0, 1.0, nodes - 2), [0.0]])
    return SampledFunction.from_nodes(x, values)


def random_two_interval_function(rng: np.random.Generator, nodes: int = 12) -> SampledFunction:
    """Positive on [0, 1] and negative on [2, 3], with random interior values."""
    inner = np.linspace(0.0, 1.0, nodes)
    x = np.concatenate([inner, 2.0 + inner])
    first = np.concatenate([[0.0], rng.uniform(0.1, 1.0, nodes - 2), [0.0]])
    second = -np.concatenate([[0.0], rng.uniform(0.1, 1.0, nodes - 2), [0.0]])
    return SampledFunction.from_nodes(x, np.concatenate([first, second]), domain="two-balls", pieces=(0, nodes))


def random_radial_two_ball_function(rng: np.random.Generator, dim: int, nodes: int = 8) -> SampledFunction:
    """Radial profiles: positive on a ball of radius R1, negative on one of radius R2, zero on both spheres."""
    radii = rng.uniform(0.5, 1.5, 2)
    x = np.concatenate([np.linspace(0.0, radius, nodes) for radius in radii])
    first = np.concatenate([rng.uniform(0.1, 1.0, nodes - 1), [0.0]])
    second = -np.concatenate([rng.uniform(0.1, 1.0, nodes - 1), [0.0]])
    return SampledFunction.from_nodes(x, np.concatenate([first, second]), domain="two-balls", pieces=(0, nodes), dim=dim)


def _radial_reductions(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    dim = max(config.dim, 2)
    try:
        params = ProblemParams(config.p, config.q, dim)
    except NonAdmissibleError as error:
        return {}, {"reduction_radial": f"skipped: {error.reason}"}
    worst_quotient, worst_moment = 0.0, 0.0
    for _ in range(RADIAL_REARRANGE_CASES):
        demo = two_ball_reduction_demo(random_radial_two_ball_function(rng, dim), params)
        worst_quotient = max(worst_quotient, demo.quotient_after / demo.quotient_before - 1.0)
        worst_moment = max(worst_moment, demo.moment_gap)
    return {
        "reduction_radial": residual(worst_quotient, RADIAL_SLACK),
        "reduction_radial_moment": residual(worst_moment, RADIAL_SLACK),
    }, {}


def rearrange_suite(config: RunConfig, rng: np.random.Generator) -> SuiteOutput:
    worst_energy, worst_measure, worst_quotient, worst_moment = 0.0, 0.0, 0.0, 0.0
    interval_params = ProblemParams(config.p, config.q, 1)
    for _ in range(REARRANGE_CASES):
        f = random_pl_function(rng)
        for power in (1.0, config.q - 1.0, config.q):
            worst_measure = max(worst_measure, check_equimeasurable(f, power))
        for p in (1.5, 2.0, 3.0):
            report = polya_szego_check_1d(f, p)
            worst_energy = max(worst_energy, report.rearranged / report.original - 1.0)
        demo = two_ball_reduction_demo(random_two_interval_function(rng), interval_params)
        worst_quotient = max(worst_quotient, demo.quotient_after / demo.quotient_before - 1.0)
        worst_moment = max(worst_moment, demo.moment_gap)
    residuals, flags = _radial_reductions(config, rng)
    residuals.update(
        {
            "equimeasurable": residual(worst_measure, 0.0),
            "polya_szego": residual(worst_energy, ROUNDING_SLACK),
            "reduction": residual(worst_quotient, ROUNDING_SLACK),
            "reduction_moment": residual(worst_moment, MOMENT_SLACK),
        }
    )
    return residuals, flags


SUITES: dict[str, Callable[[RunConfig, np.random.Generator], SuiteOutput]] = {
    "scaling": scaling_suite,
    "monotonic": monotonic_suite,
    "comparison": comparison_suite,
    "pohozaev": pohozaev_suite,
    "flux": flux_suite,
    "divergence": divergence_suite,
    "hadamard": hadamard_suite,
    "rearrange": rearrange_suite,
}


def run_suites(config: RunConfig) -> SuiteOutput:
    names = list(SUITES) if config.suite == "all" else [config.suite]
    rng = np.random.default_rng(config.seed)
    residuals: dict[str, Residual] = {}
    flags: dict[str, str] = {}
    for name in names:
        logger.info("running suite %s", name)
        suite_residuals, suite_flags = SUITES[name](config, rng)
        residuals.update(suite_residuals)
        flags.update(suite_flags)
    return residuals, flags
