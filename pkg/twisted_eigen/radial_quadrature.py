"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Radial grids, sampled radial profiles and the integrals over balls

    ∫_B f dx = N ω_N ∫_0^R f(r) r^(N-1) dr

that every solver in the package is assembled from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import gamma

from twisted_eigen.common import TwistedEigenError

MIN_NODES = 16


class InvalidGridError(TwistedEigenError):
    """Grid nodes are not strictly increasing from 0 to R, or there are too few of them."""


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    dim: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise InvalidGridError(f"a radial grid needs at least {MIN_NODES} nodes")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise InvalidGridError("grid nodes must start at 0 and increase strictly")
        object.__setattr__(self, "nodes", nodes)

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])

    @classmethod
    def uniform(cls, radius: float, n: int, dim: int) -> RadialGrid:
        return cls(np.linspace(0.0, radius, n), dim)


@dataclass(frozen=True)
class RadialProfile:
    """Samples u(r_i) of a radial function on B_R.

    Profiles produced by shooting carry the slopes u'(r_i) from the ODE state so that gradient
    norms skip finite differencing.
    """

    grid: RadialGrid
    values: np.ndarray
    slopes: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise InvalidGridError("profile values must align with the grid nodes")
        if not np.all(np.isfinite(values)):
            raise InvalidGridError("profile values must be finite")
        object.__setattr__(self, "values", values)
        if self.slopes is not None:
            object.__setattr__(self, "slopes", np.asarray(self.slopes, dtype=float))

    @property
    def has_analytic_slopes(self) -> bool:
        return self.slopes is not None

    def derivative(self) -> np.ndarray:
        if self.slopes is not None:
            return self.slopes
        return np.gradient(self.values, self.grid.nodes, edge_order=2)

    def scaled(self, factor: float) -> RadialProfile:
        slopes = None if self.slopes is None else factor * self.slopes
        return RadialProfile(self.grid, factor * self.values, slopes)


def unit_ball_measure(dim: int) -> float:
    return math.pi ** (dim / 2) / gamma(dim / 2 + 1)


def sphere_measure(dim: int, radius: float) -> float:
    """|∂B_R| = N ω_N R^(N-1)"""
    return dim * unit_ball_measure(dim) * radius ** (dim - 1)


def integrate_radial(profile: RadialProfile, weight_power: Optional[int] = None) -> float:
    """Composite Simpson rule for N ω_N ∫ f(r) r^weight_power dr (weight_power defaults to N - 1)."""
    dim = profile.grid.dim
    if weight_power is None:
        weight_power = dim - 1
    r = profile.grid.nodes
    return dim * unit_ball_measure(dim) * float(simpson(profile.values * r**weight_power, x=r))


def _integrate_samples(profile: RadialProfile, samples: np.ndarray) -> float:
    return integrate_radial(RadialProfile(profile.grid, samples))


def lq_norm(profile: RadialProfile, q: float) -> float:
    return _integrate_samples(profile, np.abs(profile.values) ** q) ** (1.0 / q)


def grad_lp_seminorm(profile: RadialProfile, p: float) -> float:
    return _integrate_samples(profile, np.abs(profile.derivative()) ** p) ** (1.0 / p)


def signed_power(values: np.ndarray, exponent: float) -> np.ndarray:
    """|v|^(exponent - 1) v without dividing by |v|"""
    return np.sign(values) * np.abs(values) ** exponent


def signed_q_moment(profile: RadialProfile, q: float) -> float:
    return _integrate_samples(profile, signed_power(profile.values, q - 1.0))
