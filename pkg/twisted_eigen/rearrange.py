"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Decreasing and symmetric decreasing rearrangements of sampled functions.

For a continuous piecewise-linear f ≥ 0 on an interval, the distribution function
μ(t) = |{f > t}| is itself piecewise linear in t with breaks at the node values, so the
symmetric decreasing rearrangement f* is piecewise linear with nodes at ±μ(t_k)/2 and both
p-energies are finite sums:

    E(f) = Σ |Δf|^p / |Δx|^(p-1),   E(f*) = 2 Σ_k (t_(k+1) - t_k)^p / Δs_k^(p-1),

with Δs_k = (μ_>(t_k) - μ_≥(t_(k+1))) / 2. Plateaus of f show up as the jump μ_≥ - μ_> and
carry no energy.

Radial profiles on balls in dim >= 2 are no longer closed-form on the rearranged side. There
the energy of w* comes from the coarea formula over the level sets of w, and its integrals from
the layer-cake formula, both with scipy quadrature between consecutive node values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional

import numpy as np
from scipy.integrate import quad

from twisted_eigen.common import TwistedEigenError
from twisted_eigen.params import ProblemParams
from twisted_eigen.radial_quadrature import unit_ball_measure

logger = logging.getLogger(__name__)

DOMAINS = ("interval", "ball", "two-balls")
ROUNDING_SLACK = 64 * np.finfo(float).eps
MOMENT_SLACK = 1e-12
# level-set quadrature on the rearranged side
RADIAL_SLACK = 1e-8
QUADRATURE_RTOL = 1e-10


class NegativeValuesError(TwistedEigenError):
    """Rearrangements are defined for nonnegative functions."""


class BoundaryNonzeroError(TwistedEigenError):
    """The function does not vanish at the ends of its interval."""


class NoSignChangeError(TwistedEigenError):
    """The reduction needs both a positive and a negative part."""


@dataclass(frozen=True)
class SampledFunction:
    values: np.ndarray
    weights: np.ndarray
    domain: str = "interval"
    nodes: Optional[np.ndarray] = None
    pieces: tuple[int, ...] = (0,)
    dim: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if values.shape != weights.shape or values.ndim != 1:
            raise ValueError("values and weights must be aligned one-dimensional arrays")
        if np.any(weights <= 0):
            raise ValueError("cell weights must be positive")
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        if self.nodes is not None:
            object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))

    @property
    def measure(self) -> float:
        return math.fsum(self.weights)

    @classmethod
    def from_nodes(cls, nodes, values, domain: str = "interval", pieces: tuple[int, ...] = (0,), dim: int = 1) -> SampledFunction:
        """Lumped cell measures of a nodal function (half of each adjacent cell)."""
        nodes = np.asarray(nodes, dtype=float)
        weights = np.zeros(nodes.size)
        bounds = list(pieces) + [nodes.size]
        for start, stop in zip(bounds[:-1], bounds[1:]):
            r = nodes[start:stop]
            cells = np.diff(r) if dim == 1 else unit_ball_measure(dim) * np.diff(r**dim)
            weights[start : stop - 1] += cells / 2
            weights[start + 1 : stop] += cells / 2
        return cls(np.asarray(values, dtype=float), weights, domain, nodes, tuple(pieces), dim)

    def split(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(nodes, values) of each component"""
        bounds = list(self.pieces) + [self.values.size]
        return [(self.nodes[a:b], self.values[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]


def decreasing_rearrangement(f: SampledFunction) -> SampledFunction:
    """Values sorted non-increasing, carrying their cell weights along."""
    if np.any(f.values < 0):
        raise NegativeValuesError("decreasing rearrangement of a function with negative values")
    order = np.argsort(-f.values, kind="stable")
    weights = f.weights[order]
    nodes = None
    if f.domain == "ball":
        # outer radius of the annulus holding each cell
        nodes = (np.cumsum(weights) / unit_ball_measure(f.dim)) ** (1.0 / f.dim)
    elif f.nodes is not None:
        nodes = f.nodes[0] + np.cumsum(weights)
    return SampledFunction(f.values[order], weights, f.domain, nodes, (0,), f.dim)


def check_equimeasurable(f: SampledFunction, power: float) -> float:
    """|∫ f^power - ∫ (f*)^power| with exactly rounded sums."""
    rearranged = decreasing_rearrangement(f)
    before = math.fsum(f.weights * f.values**power)
    after = math.fsum(rearranged.weights * rearranged.values**power)
    return abs(before - after)


def pl_energy(nodes: np.ndarray, values: np.ndarray, p: float) -> float:
    """Σ |Δf|^p / |Δx|^(p-1), the exact p-energy of a piecewise-linear function"""
    return math.fsum(np.abs(np.diff(values)) ** p / np.diff(nodes) ** (p - 1.0))


def _segment_power(a: np.ndarray, b: np.ndarray, h: np.ndarray, exponent: float) -> np.ndarray:
    """∫ |v|^exponent over segments where v runs linearly from a to b without changing sign."""
    a, b = np.abs(a), np.abs(b)
    out = h * a**exponent
    moving = a != b
    out[moving] = h[moving] * (b[moving] ** (exponent + 1) - a[moving] ** (exponent + 1)) / ((exponent + 1) * (b[moving] - a[moving]))
    return out


def pl_integral(nodes: np.ndarray, values: np.ndarray, exponent: float) -> float:
    """∫ |f|^exponent for a piecewise-linear f whose sign is constant on every segment"""
    return math.fsum(_segment_power(values[:-1], values[1:], np.diff(nodes), exponent))


def _level_measure(nodes: np.ndarray, values: np.ndarray, level: float, strict: bool) -> float:
    a, b, h = values[:-1], values[1:], np.diff(nodes)
    above = (a > level) & (b > level) if strict else (a >= level) & (b >= level)
    below = (a <= level) & (b <= level) if strict else (a < level) & (b < level)
    straddle = ~above & ~below
    fraction = np.zeros_like(h)
    fraction[straddle] = (np.maximum(a, b)[straddle] - level) / np.abs(b - a)[straddle]
    return math.fsum(h[above]) + math.fsum(h[straddle] * fraction[straddle])


def symmetric_rearrangement(nodes: np.ndarray, values: np.ndarray, fill: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and values of f* on [-L/2, L/2]; with fill=False the support shrinks to |{f > 0}|."""
    levels = np.unique(values)
    right_s, right_v = [0.0], [levels[-1]]
    for k in range(levels.size - 1, -1, -1):
        # entering a level from above gives |{f > t}|, leaving its plateau gives |{f >= t}|
        for strict in (False,) if k == levels.size - 1 else (True, False):
            if k == 0 and not strict and not fill:
                continue
            right_s.append(_level_measure(nodes, values, levels[k], strict) / 2)
            right_v.append(levels[k])
    s, v = np.asarray(right_s), np.asarray(right_v)
    keep = np.concatenate([[True], np.diff(s) > 0])
    s, v = s[keep], v[keep]
    return np.concatenate([-s[:0:-1], s]), np.concatenate([v[:0:-1], v])


def _validate_interval_function(nodes: np.ndarray, values: np.ndarray) -> None:
    if np.any(values < 0):
        raise NegativeValuesError("Pólya-Szegő check needs a nonnegative function")
    if values[0] != 0 or values[-1] != 0:
        raise BoundaryNonzeroError(f"function must vanish at both ends (f={values[0]}, {values[-1]})")


@dataclass(frozen=True)
class PolyaSzegoReport:
    original: float
    rearranged: float
    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.rearranged <= self.original * (1 + ROUNDING_SLACK)

    @property
    def strict(self) -> bool:
        return self.rearranged < self.original * (1 - ROUNDING_SLACK)


def polya_szego_check_1d(f: SampledFunction, p: float) -> PolyaSzegoReport:
    nodes, values = f.nodes, f.values
    _validate_interval_function(nodes, values)
    s, v = symmetric_rearrangement(nodes, values)
    return PolyaSzegoReport(pl_energy(nodes, values, p), pl_energy(s, v, p), s, v)




@dataclass(frozen=True)
class ReductionReport:
    quotient_before: float
    quotient_after: float
    moment_before: float
    moment_after: float
    moment_scale: float = 1.0
    slack: float = ROUNDING_SLACK

    @property
    def moment_gap(self) -> float:
        """Change of the signed (q-1)-moment relative to the unsigned one"""
        return abs(self.moment_after - self.moment_before) / self.moment_scale

    @property
    def passed(self) -> bool:
        return self.quotient_after <= self.quotient_before * (1 + self.slack) and self.moment_gap <= max(self.slack, MOMENT_SLACK)


def _with_crossings(nodes: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Insert the zeros of a piecewise-linear function as nodes so no segment changes sign."""
    out_x, out_v = [nodes[0]], [values[0]]
    for x0, x1, v0, v1 in zip(nodes[:-1], nodes[1:], values[:-1], values[1:]):
        if v0 * v1 < 0:
            out_x.append(x0 + (x1 - x0) * v0 / (v0 - v1))
            out_v.append(0.0)
        out_x.append(x1)
        out_v.append(v1)
    return np.asarray(out_x), np.asarray(out_v)


def _quotient(parts: list[tuple[np.ndarray, np.ndarray]], p: float, q: float) -> float:
    energy = math.fsum(pl_energy(x, v, p) for x, v in parts)
    mass = math.fsum(pl_integral(x, v, q) for x, v in parts)
    return energy ** (1.0 / p) / mass ** (1.0 / q)


def _signed_moment(parts: list[tuple[np.ndarray, np.ndarray]], q: float) -> float:
    total = []
    for x, v in parts:
        magnitude = _segment_power(v[:-1], v[1:], np.diff(x), q - 1.0)
        sign = np.sign(v[:-1] + v[1:])
        total.extend(magnitude * sign)
    return math.fsum(total)


def _gathered(parts: list[tuple[np.ndarray, np.ndarray]], sign: float) -> tuple[np.ndarray, np.ndarray]:
    """One sign of the function laid out on consecutive intervals (the level sets are what matter)."""
    xs, vs, offset = [], [], 0.0
    for x, v in parts:
        xs.append(x - x[0] + offset)
        vs.append(np.clip(sign * v, 0.0, None))
        offset = xs[-1][-1]
    x = np.concatenate(xs)
    v = np.concatenate(vs)
    keep = np.concatenate([[True], np.diff(x) > 0])
    return x[keep], v[keep]


def _unsigned_moment(parts: list[tuple[np.ndarray, np.ndarray]], q: float) -> float:
    return math.fsum(math.fsum(_segment_power(v[:-1], v[1:], np.diff(x), q - 1.0)) for x, v in parts)


def _split_parts(u: SampledFunction, radial: bool) -> list[tuple[np.ndarray, np.ndarray]]:
    if not (np.any(u.values > 0) and np.any(u.values < 0)):
        raise NoSignChangeError("u must take both signs")
    parts = []
    for x, v in u.split():
        if radial and x[0] != 0:
            raise ValueError(f"radial components start at the center (r={x[0]})")
        if v[-1] != 0 or (not radial and v[0] != 0):
            raise BoundaryNonzeroError("u must vanish on the boundary of every component")
        parts.append(_with_crossings(x, v))
    return parts


def two_ball_reduction_demo(u: SampledFunction, params: ProblemParams) -> ReductionReport:
    """Split u into u+ and u-, rearrange each onto its own interval or ball, compare quotients.

    In one dimension everything is an exact finite sum. For dim >= 2 the components are
    radial profiles on [0, R_i] and the rearranged side is integrated over level sets.
    """
    if u.dim != params.dim:
        raise ValueError(f"u lives in dim={u.dim}, the parameters in dim={params.dim}")
    if params.dim > 1:
        return _radial_reduction(_split_parts(u, radial=True), params)
    parts = _split_parts(u, radial=False)

    p, q = params.p, params.q
    rearranged = []
    for sign in (1.0, -1.0):
        x, v = _gathered(parts, sign)
        s, w = symmetric_rearrangement(x, v, fill=False)
        rearranged.append((s, sign * w))

    report = ReductionReport(
        quotient_before=_quotient(parts, p, q),
        quotient_after=_quotient(rearranged, p, q),
        moment_before=_signed_moment(parts, q),
        moment_after=_signed_moment(rearranged, q),
        moment_scale=_unsigned_moment(parts, q),
    )
    logger.debug("reduction: quotient %.15g -> %.15g", report.quotient_before, report.quotient_after)
    return report


@dataclass(frozen=True)
class _Shells:
    """One sign of a radial piecewise-linear function: w runs linearly from start to end on inner < r < outer."""

    inner: np.ndarray
    outer: np.ndarray
    start: np.ndarray
    end: np.ndarray
    dim: int

    @classmethod
    def of(cls, parts: list[tuple[np.ndarray, np.ndarray]], sign: float, dim: int) -> _Shells:
        pieces = [(x[:-1], x[1:], np.clip(sign * v[:-1], 0.0, None), np.clip(sign * v[1:], 0.0, None)) for x, v in parts]
        inner, outer, start, end = (np.concatenate(column) for column in zip(*pieces))
        keep = outer > inner
        return cls(inner[keep], outer[keep], start[keep], end[keep], dim)

    @property
    def volumes(self) -> np.ndarray:
        return unit_ball_measure(self.dim) * (self.outer**self.dim - self.inner**self.dim)

    @property
    def slopes(self) -> np.ndarray:
        return np.abs(self.end - self.start) / (self.outer - self.inner)

    @property
    def levels(self) -> np.ndarray:
        return np.unique(np.concatenate([self.start, self.end]))

    def _crossing(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        low, high = np.minimum(self.start, self.end), np.maximum(self.start, self.end)
        crossing = (low < t) & (high > t)
        inner, outer = self.inner[crossing], self.outer[crossing]
        start, end = self.start[crossing], self.end[crossing]
        return crossing, inner + (t - start) * (outer - inner) / (end - start)

    def above(self, t: float) -> float:
        """|{w > t}|"""
        crossing, r = self._crossing(t)
        falling = self.start[crossing] > self.end[crossing]
        dim = self.dim
        cut = np.where(falling, r**dim - self.inner[crossing] ** dim, self.outer[crossing] ** dim - r**dim)
        full = np.minimum(self.start, self.end) > t
        return math.fsum(self.volumes[full]) + unit_ball_measure(dim) * math.fsum(cut)

    def flow(self, t: float) -> float:
        """-d|{w > t}|/dt, the area of the level set weighted by 1/|∇w|"""
        crossing, r = self._crossing(t)
        return self.dim * unit_ball_measure(self.dim) * math.fsum(r ** (self.dim - 1) / self.slopes[crossing])

    def energy(self, p: float) -> float:
        return math.fsum(self.slopes**p * self.volumes)

    def integral(self, exponent: float) -> float:
        """∫ w^exponent dx along the shells"""
        sphere = self.dim * unit_ball_measure(self.dim)
        total = []
        for inner, outer, start, end in zip(self.inner, self.outer, self.start, self.end):
            if start == end == 0:
                continue
            density = partial(_shell_density, self.dim, exponent, inner, start, (end - start) / (outer - inner))
            total.append(sphere * _quad(density, inner, outer))
        return math.fsum(total)

    def rearranged_energy(self, p: float) -> float:
        """∫ |∇w*|^p dx = ∫ (N ω_N s^(N-1))^p / flow(t)^(p-1) dt with ω_N s^N = |{w > t}|"""
        dim, omega = self.dim, unit_ball_measure(self.dim)

        def density(t: float) -> float:
            s = (self.above(t) / omega) ** (1.0 / dim)
            return (dim * omega * s ** (dim - 1)) ** p / self.flow(t) ** (p - 1.0)

        levels = self.levels
        return math.fsum(_quad(density, a, b) for a, b in zip(levels[:-1], levels[1:]))

    def rearranged_integral(self, exponent: float) -> float:
        """∫ (w*)^exponent dx = ∫ |{w > τ^(1/exponent)}| dτ"""
        powers = self.levels**exponent

        def measure(tau: float) -> float:
            return self.above(tau ** (1.0 / exponent))

        return math.fsum(_quad(measure, a, b) for a, b in zip(powers[:-1], powers[1:]))


def _shell_density(dim: int, exponent: float, inner: float, start: float, slope: float, r: float) -> float:
    return r ** (dim - 1) * max(start + slope * (r - inner), 0.0) ** exponent


def _quad(f, a: float, b: float) -> float:
    value, _error = quad(f, a, b, epsabs=0.0, epsrel=QUADRATURE_RTOL, limit=200)
    return value


def _radial_reduction(parts: list[tuple[np.ndarray, np.ndarray]], params: ProblemParams) -> ReductionReport:
    p, q, dim = params.p, params.q, params.dim
    positive, negative = _Shells.of(parts, 1.0, dim), _Shells.of(parts, -1.0, dim)
    before = (positive.energy(p) + negative.energy(p)) ** (1.0 / p) / (positive.integral(q) + negative.integral(q)) ** (1.0 / q)
    after = (positive.rearranged_energy(p) + negative.rearranged_energy(p)) ** (1.0 / p) / (
        positive.rearranged_integral(q) + negative.rearranged_integral(q)
    ) ** (1.0 / q)
    moments = positive.integral(q - 1.0), negative.integral(q - 1.0)
    report = ReductionReport(
        quotient_before=before,
        quotient_after=after,
        moment_before=moments[0] - moments[1],
        moment_after=positive.rearranged_integral(q - 1.0) - negative.rearranged_integral(q - 1.0),
        moment_scale=moments[0] + moments[1],
        slack=RADIAL_SLACK,
    )
    logger.debug("radial reduction in dim %d: quotient %.12g -> %.12g", dim, before, after)
    return report
