"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

First twisted eigenvalue of B_R1 ∪ B_R2: minimize ||∇v||_p / ||v||_q over v vanishing on the
boundary with ∫|v|^(q-2) v = 0. The one-sign-per-ball pair is u1 on B1 and -u2 on B2 with
u1, u2 > 0 radial, solving

    -Δ_p u = K |u|^(q-2) u + m (q-1) |u|^(q-2),

so u1 carries the source (K, +m) and u2 the source (K, -m).

Structured solver. Each ball is a rescaled member of the unit family φ_μ (c = 1, k = 1,
m = μ): u_i = A_i φ_(μ_i)(B_i r) with B_i = ρ(μ_i)/R_i. Writing β = log(B2/B1),
L = log(A1/A2) and J_i = ∫ φ_(μ_i)^(q-1) r^(N-1), the pair conditions are

    common K:          (p-q) L = p β
    opposite m:        μ2 + e^L μ1 = 0
    moment balance:    (q-1) L = log(J2/J1) - N β

The last one defines L, which leaves two equations in (μ1, μ2). Newton runs in
ν_i = sqrt(μ_i - μ_fold), where μ_fold is the smallest μ whose shot still reaches zero, so
every iterate can be shot and the first zero stays smooth in ν up to tangency. A common
amplitude then normalizes ||u||_q = 1, which gives K = λ^p.

Existence. The branch starts at R1 = R2 with μ1 = μ2 = 0 and ends when the shot of one ball
becomes tangent to zero. For p = q = 2 that is k R_small < j_(0,1) < k R_large <= j_(1,1),
roughly R_large/R_small < 1.7 in the plane. Past that ratio no pair with one sign per ball
exists and the solver raises OutsideAnsatzError with the ratio where the branch ended.

When p(q-1) + N(p-q) = 0 the zero-multiplier pair balances the moments at every ratio, so
m = 0 exactly. Otherwise m is measured, not assumed. For q < 2 a nonzero multiplier makes the
source singular at the boundary, and unequal radii fall back to the direct minimizer.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from twisted_eigen import discrete
from twisted_eigen.common import TwistedEigenError, relative_gap
from twisted_eigen.params import ProblemParams
from twisted_eigen.radial_quadrature import RadialGrid, RadialProfile, integrate_radial, unit_ball_measure
from twisted_eigen.shooting import DEFAULT_SAMPLES, ShotResult, SourceSpec, momentum_residual, multiplier_fold, unit_shot

logger = logging.getLogger(__name__)

HOMOTOPY_STEPS = 10
MAX_NEWTON_ITERATIONS = 50
MAX_HALVINGS = 12
STALL_FACTOR = 100.0
MAX_LOG_AMPLITUDE = 700.0


class NewtonDivergenceError(TwistedEigenError):
    """Damped Newton failed to reduce the shooting residual."""

    def __init__(self, message: str, iterate: np.ndarray, residual_norm: float):
        super().__init__(message)
        self.iterate = iterate
        self.residual_norm = residual_norm


class MultiplierUnsupportedError(TwistedEigenError):
    """For q < 2 only the zero-multiplier pair can be shot, and it misses the moment constraint."""


class OutsideAnsatzError(TwistedEigenError):
    """No pair with one sign per ball exists at this radius ratio.

    limit is log(R1/R2) where the branch ends, on the same side of zero as the request.
    """

    def __init__(self, message: str, limit: float):
        super().__init__(message)
        self.limit = limit


@dataclass(frozen=True)
class TwistedConfig:
    params: ProblemParams
    r1: float
    r2: float
    tol: float = 1e-10
    ode_tol: float = 1e-10
    zero_tol: float = 1e-12
    samples: int = DEFAULT_SAMPLES
    grid: int = 512

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0):
            raise ValueError(f"radii must be positive (R1={self.r1}, R2={self.r2})")
        if not (self.tol > 0 and self.ode_tol > 0 and self.zero_tol > 0):
            raise ValueError("tolerances must be positive")

    @property
    def swapped(self) -> TwistedConfig:
        return TwistedConfig(self.params, self.r2, self.r1, self.tol, self.ode_tol, self.zero_tol, self.samples, self.grid)

    @property
    def log_ratio(self) -> float:
        return math.log(self.r1 / self.r2)


@dataclass(frozen=True)
class TwistedResult:
    params: ProblemParams
    r1: float
    r2: float
    lam: float
    c1: float
    c2: float
    m: float
    euler_k: float
    profiles: tuple[RadialProfile, RadialProfile]
    f1: float
    f2: float
    moment_residual: float
    euler_residual: float
    energy_residual: float
    method: str = "structured"
    seed: Optional[tuple[float, float]] = None
    iterations: int = 0
    shots: Optional[tuple[ShotResult, ShotResult]] = field(default=None, repr=False, compare=False)

    @property
    def sources(self) -> tuple[SourceSpec, SourceSpec]:
        return SourceSpec(self.euler_k, self.m), SourceSpec(self.euler_k, -self.m)

    @property
    def moments(self) -> tuple[float, float]:
        """∫ u_i^(q-1) dx over each ball"""
        return tuple(_ball_integral(profile, profile.values ** (self.params.q - 1.0)) for profile in self.profiles)


def _ball_integral(profile: RadialProfile, samples: np.ndarray) -> float:
    return integrate_radial(RadialProfile(profile.grid, samples))


def multiplier_free(params: ProblemParams) -> bool:
    """p(q-1) + N(p-q) = 0, where the zero-multiplier pair balances the moments at every split."""
    p, q, dim = params.p, params.q, params.dim
    return math.isclose(p * (q - 1.0), dim * (q - p), rel_tol=1e-12, abs_tol=1e-12)


def _unit_pair(config: TwistedConfig, mu: np.ndarray) -> tuple[ShotResult, ShotResult]:
    first = unit_shot(config.params, float(mu[0]), config.ode_tol, config.zero_tol)
    second = unit_shot(config.params, float(mu[1]), config.ode_tol, config.zero_tol)
    return first, second


def _balance(params: ProblemParams, first: ShotResult, second: ShotResult, log_ratio: float) -> tuple[float, float]:
    """(β, L): log(B2/B1) of the dilations and log(A1/A2) from the moment balance."""
    beta = math.log(second.first_zero / first.first_zero) + log_ratio
    log_amplitude = (math.log(second.i_q1 / first.i_q1) - params.dim * beta) / (params.q - 1.0)
    return beta, log_amplitude


def _reduced_residual(config: TwistedConfig, fold: float, log_ratio: float) -> Callable[[np.ndarray], Optional[np.ndarray]]:
    params = config.params
    p, q = params.p, params.q

    def residual(x: np.ndarray) -> Optional[np.ndarray]:
        mu = fold + x * x
        try:
            first, second = _unit_pair(config, mu)
        except TwistedEigenError:
            return None
        beta, log_amplitude = _balance(params, first, second, log_ratio)
        if abs(log_amplitude) > MAX_LOG_AMPLITUDE:
            return None
        return np.array([(p - q) * log_amplitude - p * beta, mu[1] + math.exp(log_amplitude) * mu[0]])

    return residual


def _newton(residual: Callable[[np.ndarray], Optional[np.ndarray]], x0: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    """Damped Newton with forward-difference Jacobians; a backward difference only if the forward shot fails."""
    x = np.asarray(x0, dtype=float)
    value = residual(x)
    if value is None:
        raise NewtonDivergenceError("shooting failed at the starting point", x, math.inf)
    norm = float(np.max(np.abs(value)))

    for iteration in range(MAX_NEWTON_ITERATIONS):
        if norm <= tol:
            return x, iteration
        jacobian = np.empty((value.size, x.size))
        for j in range(x.size):
            h = 1e-6 * max(abs(x[j]), 1.0)
            shifted = x.copy()
            shifted[j] += h
            column = residual(shifted)
            if column is None:
                shifted[j] = x[j] - h
                column = residual(shifted)
                if column is None:
                    raise NewtonDivergenceError("shooting failed while differencing", x, norm)
                h = -h
            jacobian[:, j] = (column - value) / h
        try:
            delta = np.linalg.solve(jacobian, -value)
        except np.linalg.LinAlgError as e:
            raise NewtonDivergenceError(f"singular Jacobian: {e}", x, norm) from e

        step = 1.0
        for _ in range(MAX_HALVINGS):
            trial = x + step * delta
            trial_value = residual(trial)
            if trial_value is not None and np.max(np.abs(trial_value)) < norm:
                break
            step /= 2
        else:
            if norm <= STALL_FACTOR * tol:
                warnings.warn(f"Newton stalled at residual {norm:.3g} (tolerance {tol:.3g})", stacklevel=3)
                logger.warning("Newton stalled at residual %.3g; accepting the iterate", norm)
                return x, iteration
            raise NewtonDivergenceError(f"no damped step reduced the residual {norm:.3g}", x, norm)

        x, value = trial, trial_value
        norm = float(np.max(np.abs(value)))
        logger.debug("Newton iteration %d: x=%s residual=%.3g (step %g)", iteration + 1, x, norm, step)

    if norm <= tol:
        return x, MAX_NEWTON_ITERATIONS
    raise NewtonDivergenceError(f"no convergence in {MAX_NEWTON_ITERATIONS} iterations", x, norm)


def _fold_limit(config: TwistedConfig, fold: float, guess: np.ndarray, log_ratio: float) -> Optional[float]:
    """log(R1/R2) at which the ball nearest tangency reaches it, or None if that cannot be solved."""
    # ties go to the larger ball, whose shot carries the negative multiplier near the equal split
    pinned = int(np.lexsort((np.array([-config.r1, -config.r2]), guess))[0])
    other = 1 - pinned

    def residual(y: np.ndarray) -> Optional[np.ndarray]:
        x = np.zeros(2)
        x[other] = y[0]
        return _reduced_residual(config, fold, float(y[1]))(x)

    try:
        y, _iterations = _newton(residual, np.array([abs(guess[other]), log_ratio]), config.tol)
    except NewtonDivergenceError as e:
        logger.info("could not locate the end of the branch: %s", e)
        return None
    return float(y[1])


def _raise_past_fold(config: TwistedConfig, fold: float, guess: np.ndarray, error: NewtonDivergenceError) -> None:
    target = config.log_ratio
    limit = _fold_limit(config, fold, guess, target)
    if limit is not None and limit * target > 0 and abs(target) >= abs(limit):
        raise OutsideAnsatzError(
            f"R1/R2={math.exp(target):.6g} lies past the end of the one-sign branch at R1/R2={math.exp(limit):.6g}", limit
        ) from error


def _predict(path: list[tuple[float, np.ndarray]], t: float) -> np.ndarray:
    if len(path) == 1:
        return path[0][1].copy()
    (t0, x0), (t1, x1) = path[-2:]
    return x1 + (x1 - x0) * (t - t1) / (t1 - t0)


def _homotopy(config: TwistedConfig, fold: float) -> tuple[np.ndarray, int]:
    """Continuation in log(R1/R2) from the equal split with a secant predictor."""
    target = config.log_ratio
    path = [(0.0, np.full(2, math.sqrt(-fold)))]
    total = 0
    for t in np.linspace(0.0, target, HOMOTOPY_STEPS + 1)[1:]:
        guess = _predict(path, float(t))
        try:
            x, iterations = _newton(_reduced_residual(config, fold, float(t)), np.abs(guess), config.tol)
        except NewtonDivergenceError as e:
            _raise_past_fold(config, fold, guess, e)
            raise
        total += iterations
        path.append((float(t), np.abs(x)))
        logger.debug("homotopy at log ratio %.6g: μ=%s", t, fold + x * x)
    return path[-1][1], total


def _assemble(config: TwistedConfig, mu: np.ndarray, iterations: int) -> TwistedResult:
    params = config.params
    p, q, dim = params.p, params.q, params.dim
    measure = dim * unit_ball_measure(dim)
    first, second = _unit_pair(config, mu)
    _beta, log_amplitude = _balance(params, first, second, config.log_ratio)

    b1, b2 = first.first_zero / config.r1, second.first_zero / config.r2
    ratio = math.exp(log_amplitude)
    a2 = (measure * (ratio**q * b1**-dim * first.i_q + b2**-dim * second.i_q)) ** (-1.0 / q)
    u1, u2 = first.scaled(ratio * a2, b1), second.scaled(a2, b2)

    gradient = measure * (u1.i_grad + u2.i_grad)
    lam = gradient ** (1.0 / p)
    k, m = u1.source.k, u1.source.m
    moment_balance = measure * (u1.i_q1 - u2.i_q1)
    energy = k * measure * (u1.i_q + u2.i_q) + m * (q - 1.0) * moment_balance
    zero_multiplier = SourceSpec(lam**p)
    euler = max(momentum_residual(u1, zero_multiplier, config.samples), momentum_residual(u2, zero_multiplier, config.samples))

    return TwistedResult(
        params=params,
        r1=config.r1,
        r2=config.r2,
        lam=lam,
        c1=u1.c,
        c2=u2.c,
        m=m,
        euler_k=k,
        profiles=(u1.profile(config.samples), u2.profile(config.samples)),
        f1=abs(u1.boundary_slope),
        f2=abs(u2.boundary_slope),
        moment_residual=abs(moment_balance),
        euler_residual=euler,
        energy_residual=relative_gap(gradient, energy),
        method="structured",
        seed=(float(mu[0]), float(mu[1])),
        iterations=iterations,
        shots=(u1, u2),
    )


def twisted_structured(config: TwistedConfig, seed: Optional[tuple[float, float]] = None, fallback: bool = True) -> TwistedResult:
    """Multi-shooting solve.

    seed is a previous result's (μ1, μ2). With fallback, q < 2 and unequal radii go to the
    direct minimizer; without it they raise MultiplierUnsupportedError.
    """
    params = config.params
    if config.r1 == config.r2 or multiplier_free(params):
        return _assemble(config, np.zeros(2), 0)
    if params.q < 2:
        if not fallback:
            raise MultiplierUnsupportedError(f"q={params.q} < 2 admits no multiplier shots and the zero-multiplier pair misses the moments")
        logger.info("q=%g < 2: solving R1=%g R2=%g with the direct minimizer", params.q, config.r1, config.r2)
        return twisted_direct(config, n=config.grid)

    fold = multiplier_fold(params, config.ode_tol)
    if seed is not None:
        guess = np.sqrt(np.maximum(np.asarray(seed, dtype=float) - fold, 0.0))
        try:
            x, iterations = _newton(_reduced_residual(config, fold, config.log_ratio), guess, config.tol)
            return _assemble(config, fold + x * x, iterations)
        except NewtonDivergenceError as e:
            logger.info("seeded Newton failed (%s); falling back to homotopy", e)
            _raise_past_fold(config, fold, guess, e)

    x, iterations = _homotopy(config, fold)
    logger.info("twisted R1=%g R2=%g solved in %d Newton iterations", config.r1, config.r2, iterations)
    return _assemble(config, fold + x * x, iterations)


def twisted_direct(config: TwistedConfig, n: int = 512, iters: int = 5000) -> TwistedResult:
    params = config.params
    first = discrete.radial_component(config.r1, n, params.dim, +1)
    second = discrete.radial_component(config.r2, n, params.dim, -1)
    initial = [1.0 - (first.nodes / config.r1) ** 2, -(1.0 - (second.nodes / config.r2) ** 2)]
    solution = discrete.minimize_quotient([first, second], params.p, params.q, initial, constrained=True, iters=iters)

    k, m = solution.multiplier_fit()
    v1, v2 = solution.values
    profiles = (RadialProfile(RadialGrid(first.nodes, params.dim), v1), RadialProfile(RadialGrid(second.nodes, params.dim), -v2))
    return TwistedResult(
        params=params,
        r1=config.r1,
        r2=config.r2,
        lam=solution.lam,
        c1=float(v1[0]),
        c2=float(-v2[0]),
        m=m,
        euler_k=k,
        profiles=profiles,
        f1=discrete.boundary_slope(first, v1),
        f2=discrete.boundary_slope(second, v2),
        moment_residual=solution.moment_gap(),
        euler_residual=solution.euler_residual(),
        energy_residual=relative_gap(solution.energy, k),
        method="direct",
        iterations=solution.iterations,
    )


@dataclass(frozen=True)
class MultiplierReport:
    m: float
    euler_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.m) <= self.tolerance and self.euler_residual <= self.tolerance

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FLAG"


def multiplier_report(result: TwistedResult, tolerance: float = 1e-6) -> MultiplierReport:
    """Whether the zero-multiplier Euler equation holds for the computed pair."""
    report = MultiplierReport(m=result.m, euler_residual=result.euler_residual, tolerance=tolerance)
    if not report.passed:
        logger.info("multiplier %.3g with zero-multiplier residual %.3g at R1=%g R2=%g", result.m, result.euler_residual, result.r1, result.r2)
    return report
