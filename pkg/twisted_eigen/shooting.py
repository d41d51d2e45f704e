"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Shooting for the radial Cauchy problem

    -(r^(N-1) |φ'|^(p-2) φ')' = r^(N-1) g(φ),   φ(0) = c,  φ'(0) = 0,
    g(φ) = k φ^(q-1) + m (q-1) φ^(q-2).

The state is (φ, w) with the momentum w = r^(N-1) |φ'|^(p-2) φ', so that

    w' = -r^(N-1) g(φ),   φ' = sign(w) (|w| / r^(N-1))^(1/(p-1)),

plus three running integrals I_q, I_(q-1), I_grad carried as extra states so they are as
accurate as the trajectory itself. Integration starts at r = ε from the series

    φ(r) ≈ c - (g(c)/N)^(1/(p-1)) (p-1)/p r^(p/(p-1)),   w(r) ≈ -g(c) r^N / N,

and stops at the first zero of φ.

Scaling family. If ψ solves the problem with (k, m) then u(r) = A ψ(B r) solves it with

    k' = A^(p-q) B^p k,   m' = A^(p-q+1) B^p m,

first zero ρ/B, boundary slope A B ψ'(ρ), momentum A^(p-1) B^(p-N) w, and integrals
I_q · A^q B^-N, I_(q-1) · A^(q-1) B^-N, I_grad · A^p B^(p-N). With k = 1, m = 0 fixed the
amplitude alone moves the zero: φ_c(r) = c φ_1(c^((q-p)/p) r), so ρ(c) = ρ(1) c^((p-q)/p).

Normalization chain. The eigen-equation -Δ_p u = [λ]^p ||u||_q^(p-q) u^(q-1) is the k = λ^p
case for ||u||_q = 1; the unit-coefficient Cauchy problem is the k = 1 case, and the two are
related by the (A, B) family above with A^(p-q) B^p = λ^p.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import OdeSolution, cumulative_simpson, solve_ivp
from scipy.optimize import brentq

from twisted_eigen.common import TwistedEigenError
from twisted_eigen.params import ProblemParams
from twisted_eigen.radial_quadrature import RadialGrid, RadialProfile, signed_power

logger = logging.getLogger(__name__)

STARTUP_FRACTION = 1e-6
DEFAULT_SAMPLES = 2049
DEFAULT_METHOD = "DOP853"
FOLD_BISECTIONS = 30


class NoZeroFoundError(TwistedEigenError):
    """The trajectory stayed positive up to r_max or turned back before reaching zero."""


class NonPositiveInitialError(TwistedEigenError):
    """The initial value φ(0) = c must be positive."""


class SingularSourceError(TwistedEigenError):
    """A multiplier term (q-1) φ^(q-2) is not integrable at the boundary for q < 2."""


class InvalidSourceError(TwistedEigenError):
    """The eigen coefficient k of a source must be positive."""


class RescaleWithMultiplierError(TwistedEigenError):
    """rescale_shot only transforms shots of the pure eigen source (m = 0)."""


@dataclass(frozen=True)
class SourceSpec:
    k: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidSourceError(f"k must be positive (k={self.k})")

    def g(self, phi, q: float):
        out = self.k * signed_power(phi, q - 1.0)
        if self.m != 0:
            out = out + self.m * (q - 1.0) * np.abs(phi) ** (q - 2.0)
        return out

    def primitive(self, phi, q: float):
        """G(φ) = ∫_0^φ g, i.e. k |φ|^q / q + m |φ|^(q-2) φ"""
        out = self.k * np.abs(phi) ** q / q
        if self.m != 0:
            out = out + self.m * signed_power(phi, q - 1.0)
        return out

    def transformed(self, params: ProblemParams, amplitude: float, dilation: float) -> SourceSpec:
        p, q = params.p, params.q
        factor = amplitude ** (p - q) * dilation**p
        return SourceSpec(self.k * factor, self.m * factor * amplitude)


@dataclass(frozen=True)
class _Integrated:
    """Dense trajectory in the coordinates it was integrated in."""

    dense: OdeSolution
    startup: float
    c: float
    g0: float
    p: float
    dim: int

    def state(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        phi = np.empty_like(s)
        w = np.empty_like(s)
        inner = s < self.startup
        phi[inner], w[inner] = _series(s[inner], self.c, self.g0, self.p, self.dim)
        if np.any(~inner):
            y = self.dense(s[~inner])
            phi[~inner] = y[0]
            w[~inner] = y[1]
        return phi, w


@dataclass(frozen=True)
class ShotResult:
    params: ProblemParams
    source: SourceSpec
    c: float
    first_zero: float
    boundary_slope: float
    i_q: float
    i_q1: float
    i_grad: float
    amplitude: float = 1.0
    dilation: float = 1.0
    integrated: Optional[_Integrated] = field(default=None, repr=False, compare=False)

    def evaluate(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(φ, w, φ') at radii r"""
        p, dim = self.params.p, self.params.dim
        a, b = self.amplitude, self.dilation
        s = b * np.atleast_1d(np.asarray(r, dtype=float))
        phi_b, w_b = self.integrated.state(s)
        slope_b = np.zeros_like(s)
        positive = s > 0 if dim > 1 else np.ones_like(s, dtype=bool)
        slope_b[positive] = signed_power(w_b[positive] / s[positive] ** (dim - 1), 1.0 / (p - 1.0))
        return a * phi_b, a ** (p - 1) * b ** (p - dim) * w_b, a * b * slope_b

    def trajectory(self, samples: int = DEFAULT_SAMPLES) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.linspace(0.0, self.first_zero, samples)
        phi, w, _slope = self.evaluate(r)
        phi[-1] = 0.0
        return r, phi, w

    def profile(self, samples: int = DEFAULT_SAMPLES) -> RadialProfile:
        r = np.linspace(0.0, self.first_zero, samples)
        phi, _w, slope = self.evaluate(r)
        phi[-1] = 0.0
        return RadialProfile(RadialGrid(r, self.params.dim), phi, slope)

    def scaled(self, amplitude: float, dilation: float) -> ShotResult:
        """u(r) = A φ(B r), valid for any multiplier."""
        p, q, dim = self.params.p, self.params.q, self.params.dim
        a, b = amplitude, dilation
        return ShotResult(
            params=self.params,
            source=self.source.transformed(self.params, a, b),
            c=a * self.c,
            first_zero=self.first_zero / b,
            boundary_slope=a * b * self.boundary_slope,
            i_q=self.i_q * a**q * b**-dim,
            i_q1=self.i_q1 * a ** (q - 1) * b**-dim,
            i_grad=self.i_grad * a**p * b ** (p - dim),
            amplitude=self.amplitude * a,
            dilation=self.dilation * b,
            integrated=self.integrated,
        )


def _series(s, c: float, g0: float, p: float, dim: int):
    drop = np.sign(g0) * (abs(g0) / dim) ** (1.0 / (p - 1.0)) * (p - 1.0) / p
    return c - drop * s ** (p / (p - 1.0)), -g0 * s**dim / dim


def _crossing(r, y):
    return y[0]


_crossing.terminal = True
_crossing.direction = -1


def _turning(r, y):
    return y[1]


# a local minimum above zero: negative multipliers can stop the descent
_turning.terminal = True
_turning.direction = 1


def shoot(
    params: ProblemParams,
    source: SourceSpec,
    c: float,
    r_max: Optional[float] = None,
    tol: float = 1e-10,
    zero_tol: float = 1e-12,
    method: str = DEFAULT_METHOD,
) -> ShotResult:
    if not c > 0:
        raise NonPositiveInitialError(f"initial value must be positive (c={c})")
    if source.m != 0 and params.q < 2:
        raise SingularSourceError(f"multiplier sources need q >= 2 (q={params.q}, m={source.m})")

    p, q, dim = params.p, params.q, params.dim
    g0 = float(source.g(c, q))
    r_scale = (c ** (p - 1.0) / abs(g0)) ** (1.0 / p) if g0 != 0 else 1.0
    eps = STARTUP_FRACTION * r_scale
    if r_max is None:
        r_max = 100.0 * dim * r_scale

    phi0, w0 = _series(eps, c, g0, p, dim)
    p_conj = p / (p - 1.0)
    y0 = [
        phi0,
        w0,
        c**q * eps**dim / dim,
        c ** (q - 1.0) * eps**dim / dim,
        (abs(g0) / dim) ** p_conj * eps ** (p_conj + dim) / (p_conj + dim),
    ]

    k, m = source.k, source.m
    inverse = 1.0 / (p - 1.0)

    # plain floats: the right side runs a few thousand times per shot
    def rhs(r, y):
        phi, w = float(y[0]), float(y[1])
        weight = r ** (dim - 1)
        slope = math.copysign((abs(w) / weight) ** inverse, w)
        size = abs(phi)
        g = k * math.copysign(size ** (q - 1.0), phi)
        if m:
            g += m * (q - 1.0) * size ** (q - 2.0)
        return [slope, -weight * g, weight * size**q, weight * size ** (q - 1.0), weight * abs(slope) ** p]

    sol = solve_ivp(
        rhs, (eps, r_max), y0, method=method, rtol=tol, atol=1e-2 * tol, events=(_crossing, _turning), dense_output=True
    )
    if sol.status != 1 or sol.t_events[0].size == 0:
        where = f"turns back at r={sol.t_events[1][0]:.6g}" if sol.t_events[1].size else f"stays positive up to r_max={r_max:.6g}"
        raise NoZeroFoundError(f"φ {where} (c={c}, k={k}, m={m})")

    rho = float(sol.t_events[0][0])
    lo = float(sol.t[-2]) if sol.t.size >= 2 else eps
    if lo < rho and sol.sol(lo)[0] > 0 > sol.sol(rho)[0]:
        rho = brentq(lambda r: sol.sol(r)[0], lo, rho, xtol=zero_tol)
    state = sol.sol(rho)
    slope = float(signed_power(state[1] / rho ** (dim - 1), 1.0 / (p - 1.0)))
    logger.debug("shot c=%g k=%g m=%g: first zero %.15g after %d steps", c, source.k, source.m, rho, sol.t.size)

    return ShotResult(
        params=params,
        source=source,
        c=float(c),
        first_zero=rho,
        boundary_slope=slope,
        i_q=float(state[2]),
        i_q1=float(state[3]),
        i_grad=float(state[4]),
        integrated=_Integrated(sol.sol, eps, float(c), g0, p, dim),
    )


@lru_cache(maxsize=256)
def base_shot(params: ProblemParams, tol: float = 1e-10) -> ShotResult:
    """The unit shot c = 1, k = 1, m = 0 every single-ball quantity is scaled from."""
    return shoot(params, SourceSpec(), 1.0, tol=tol)


@lru_cache(maxsize=512)
def unit_shot(params: ProblemParams, mu: float, tol: float = 1e-10, zero_tol: float = 1e-12) -> ShotResult:
    """φ_μ: the shot c = 1, k = 1, m = μ.

    Every shot with k > 0 is a rescaling of one of these: the shot from c with source (1, m)
    is c φ_(m/c)(c^((q-p)/p) r). Two-ball pairs are therefore built from two members of the
    family, and repeated members are served from the cache.
    """
    return shoot(params, SourceSpec(1.0, mu), 1.0, tol=tol, zero_tol=zero_tol)


@lru_cache(maxsize=64)
def multiplier_fold(params: ProblemParams, tol: float = 1e-10, steps: int = FOLD_BISECTIONS) -> float:
    """Smallest μ for which φ_μ still reaches zero, from above.

    At μ = -1/(q-1) the source vanishes at φ = 1 and the shot stays constant. As μ rises
    the trajectory first touches zero tangentially, which is the fold where the first zero
    stops existing; from there on it crosses. The returned end of the bracket crosses.
    """
    if params.q < 2:
        raise SingularSourceError(f"multiplier shots need q >= 2 (q={params.q})")
    lo, hi = -1.0 / (params.q - 1.0), 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        try:
            shoot(params, SourceSpec(1.0, mid), 1.0, tol=tol)
        except NoZeroFoundError:
            lo = mid
        else:
            hi = mid
    logger.debug("multiplier fold for %s at μ=%.12g", params, hi)
    return hi


def rescale_shot(shot: ShotResult, params: ProblemParams, A: float, B: float) -> ShotResult:
    if shot.source.m != 0:
        raise RescaleWithMultiplierError(f"shot carries a multiplier m={shot.source.m}")
    if params != shot.params:
        raise ValueError("shot was integrated for different parameters")
    return shot.scaled(A, B)


def first_zero_for_amplitude(params: ProblemParams, c: float, unit_zero: float) -> float:
    """ρ(c) = ρ(1) c^((p-q)/p) for the k = 1, m = 0 family."""
    return unit_zero * c ** ((params.p - params.q) / params.p)


def energy_residual(shot: ShotResult) -> float:
    """Relative gap in ∫|φ'|^p r^(N-1) = ∫ φ g(φ) r^(N-1) (the equation tested against φ)."""
    q = shot.params.q
    rhs = shot.source.k * shot.i_q + shot.source.m * (q - 1.0) * shot.i_q1
    return abs(shot.i_grad - rhs) / abs(shot.i_grad)


def momentum_residual(shot: ShotResult, source: Optional[SourceSpec] = None, samples: int = DEFAULT_SAMPLES) -> float:
    """max |w(r) + ∫_0^r s^(N-1) g(φ) ds| / max |w| over the stored trajectory."""
    source = source or shot.source
    dim, q = shot.params.dim, shot.params.q
    r, phi, w = shot.trajectory(samples)
    forcing = cumulative_simpson(r ** (dim - 1) * source.g(phi, q), x=r, initial=0.0)
    return float(np.max(np.abs(w + forcing)) / np.max(np.abs(w)))


@dataclass(frozen=True)
class ComparisonReport:
    c1: float
    c2: float
    radius: float
    max_gap: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tolerance


def check_comparison(
    params: ProblemParams,
    c1: float,
    c2: float,
    R: Optional[float] = None,
    tol: float = 1e-10,
    tolerance: float = 1e-9,
    samples: int = DEFAULT_SAMPLES,
) -> ComparisonReport:
    """Largest value of φ_1 - φ_2 over [0, min(R, ρ_1, ρ_2)] for c1 < c2."""
    if not c1 < c2:
        raise ValueError(f"comparison needs c1 < c2 (c1={c1}, c2={c2})")
    first = shoot(params, SourceSpec(), c1, tol=tol)
    second = shoot(params, SourceSpec(), c2, tol=tol)
    radius = min(first.first_zero, second.first_zero, np.inf if R is None else R)
    r = np.linspace(0.0, radius, samples)
    gap = float(np.max(first.evaluate(r)[0] - second.evaluate(r)[0]))
    return ComparisonReport(c1=c1, c2=c2, radius=float(radius), max_gap=gap, tolerance=tolerance)
