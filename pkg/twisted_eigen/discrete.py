"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Direct minimization of the discretized quotient ||∇v||_p / ||v||_q over piecewise-linear grid
functions, optionally under the signed moment constraint Σ w_i |v_i|^(q-2) v_i = 0.

A problem is a list of GridComponent pieces (a radial grid on a ball, or a plain interval).
Each piece contributes

    E = Σ_edges scale · e_j |Δv_j / h_j|^p,   M = Σ_nodes scale · μ_i |v_i|^q,

with edge measures e_j = (r_(j+1)^N - r_j^N)/N and lumped node measures μ_i (half of each
adjacent edge). The iteration is a preconditioned projected descent on F = log(E)/p - log(M)/q:
the preconditioner is the tridiagonal stiffness matrix of the current gradient, which makes a
unit step an inverse iteration for p = q = 2. After every step signs are projected onto each
piece, the negative part is rescaled so the constraint holds exactly, and the iterate is
normalized to M = 1 (so E = λ^p at the end).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from twisted_eigen.common import TwistedEigenError
from twisted_eigen.radial_quadrature import signed_power, unit_ball_measure

logger = logging.getLogger(__name__)

MIN_GRID = 64
ARMIJO = 1e-4
MAX_HALVINGS = 40


class NonConvergenceError(TwistedEigenError):
    """Projected descent stalled or ran out of iterations before the quotient settled."""


@dataclass(frozen=True)
class GridComponent:
    nodes: np.ndarray
    dim: int
    sign: int
    scale: float
    dirichlet: np.ndarray

    @property
    def edge_measure(self) -> np.ndarray:
        r = self.nodes
        return (r[1:] ** self.dim - r[:-1] ** self.dim) / self.dim

    @property
    def node_measure(self) -> np.ndarray:
        em = self.edge_measure
        mu = np.zeros(self.nodes.size)
        mu[:-1] += em / 2
        mu[1:] += em / 2
        return mu


def radial_component(radius: float, n: int, dim: int, sign: int) -> GridComponent:
    """n nodes on [0, R], Dirichlet at R, carrying the angular factor N ω_N."""
    if n < MIN_GRID:
        raise ValueError(f"direct minimization needs at least {MIN_GRID} nodes (n={n})")
    nodes = np.linspace(0.0, radius, n)
    pinned = np.zeros(n, dtype=bool)
    pinned[-1] = True
    return GridComponent(nodes, dim, sign, dim * unit_ball_measure(dim), pinned)


def interval_component(left: float, right: float, n: int) -> GridComponent:
    """n nodes on [left, right], Dirichlet at both ends, free sign."""
    if n < MIN_GRID:
        raise ValueError(f"direct minimization needs at least {MIN_GRID} nodes (n={n})")
    pinned = np.zeros(n, dtype=bool)
    pinned[[0, -1]] = True
    return GridComponent(np.linspace(left, right, n), 1, 0, 1.0, pinned)


class _Assembly:
    """All pieces laid end to end; pieces never share an edge."""

    def __init__(self, components: Sequence[GridComponent]):
        self.components = list(components)
        sizes = [comp.nodes.size for comp in self.components]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.size = int(self.offsets[-1])

        left, weights, edge_weights, steps, pinned, signs = [], [], [], [], [], []
        for start, comp in zip(self.offsets[:-1], self.components):
            left.append(start + np.arange(comp.nodes.size - 1))
            edge_weights.append(comp.scale * comp.edge_measure)
            steps.append(np.diff(comp.nodes))
            weights.append(comp.scale * comp.node_measure)
            pinned.append(comp.dirichlet)
            signs.append(np.full(comp.nodes.size, comp.sign))
        self.left = np.concatenate(left)
        self.right = self.left + 1
        self.edge_weights = np.concatenate(edge_weights)
        self.steps = np.concatenate(steps)
        self.weights = np.concatenate(weights)
        self.pinned = np.concatenate(pinned)
        self.signs = np.concatenate(signs)

    def split(self, u: np.ndarray) -> list[np.ndarray]:
        return [u[a:b].copy() for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def slopes(self, u: np.ndarray) -> np.ndarray:
        return (u[self.right] - u[self.left]) / self.steps

    def energy(self, u: np.ndarray, p: float) -> float:
        return float(np.sum(self.edge_weights * np.abs(self.slopes(u)) ** p))

    def energy_gradient(self, u: np.ndarray, p: float) -> np.ndarray:
        coef = self.edge_weights * p * signed_power(self.slopes(u), p - 1.0) / self.steps
        return np.bincount(self.right, coef, self.size) - np.bincount(self.left, coef, self.size)

    def mass(self, u: np.ndarray, q: float) -> float:
        return float(np.sum(self.weights * np.abs(u) ** q))

    def moments(self, u: np.ndarray, q: float) -> tuple[float, float]:
        """(Σ w (u+)^(q-1), Σ w (u-)^(q-1))"""
        pos = float(np.sum(self.weights * np.clip(u, 0.0, None) ** (q - 1.0)))
        neg = float(np.sum(self.weights * np.clip(-u, 0.0, None) ** (q - 1.0)))
        return pos, neg

    def constraint_normal(self, u: np.ndarray, q: float) -> np.ndarray:
        mag = np.abs(u)
        normal = np.zeros_like(u)
        active = (mag > 0) | (q == 2)
        normal[active] = (q - 1.0) * self.weights[active] * mag[active] ** (q - 2.0)
        normal[self.pinned] = 0.0
        return normal

    def preconditioner(self, u: np.ndarray, p: float) -> np.ndarray:
        """Banded (1, 1) stiffness matrix with identity rows on pinned nodes."""
        d = np.abs(self.slopes(u))
        floor = 1e-6 * max(float(np.max(d)), 1e-300)
        a = self.edge_weights * np.maximum(d, floor) ** (p - 2.0) / self.steps**2
        diag = np.bincount(self.left, a, self.size) + np.bincount(self.right, a, self.size)
        off = -a.copy()
        off[self.pinned[self.left] | self.pinned[self.right]] = 0.0
        diag[self.pinned] = 1.0
        banded = np.zeros((3, self.size))
        banded[0, self.right] = off
        banded[1] = diag
        banded[2, self.left] = off
        return banded


@dataclass(frozen=True)
class DiscreteSolution:
    components: tuple[GridComponent, ...]
    values: tuple[np.ndarray, ...]
    p: float
    q: float
    energy: float
    iterations: int
    constrained: bool

    @property
    def lam(self) -> float:
        return self.energy ** (1.0 / self.p)

    def _stacked(self) -> tuple[_Assembly, np.ndarray]:
        return _Assembly(self.components), np.concatenate(self.values)

    def moment_gap(self) -> float:
        assembly, u = self._stacked()
        pos, neg = assembly.moments(u, self.q)
        return abs(pos - neg)

    def piece_moments(self) -> list[float]:
        """Σ w |v|^(q-1) per piece"""
        assembly, u = self._stacked()
        return [float(np.sum(w * np.abs(v) ** (self.q - 1.0))) for w, v in zip(assembly.split(assembly.weights), assembly.split(u))]

    def _operator(self) -> tuple[np.ndarray, np.ndarray]:
        """(-Δ_p u)_i ≈ ∇E_i / (p w_i) on interior nodes away from the boundary layer."""
        assembly, u = self._stacked()
        lhs = assembly.energy_gradient(u, self.p) / (self.p * assembly.weights)
        keep = ~assembly.pinned & (np.abs(u) >= 1e-2 * np.max(np.abs(u)))
        return lhs[keep], u[keep]

    def multiplier_fit(self) -> tuple[float, float]:
        """Least squares fit of -Δ_p u = k |u|^(q-2) u + m (q-1) |u|^(q-2); returns (k, m)."""
        lhs, u = self._operator()
        features = np.column_stack([signed_power(u, self.q - 1.0), (self.q - 1.0) * np.abs(u) ** (self.q - 2.0)])
        (k, m), *_ = np.linalg.lstsq(features, lhs, rcond=None)
        return float(k), float(m)

    def euler_residual(self) -> float:
        """max |-Δ_p u - λ^p |u|^(q-2) u| / max |-Δ_p u| with the zero-multiplier equation."""
        lhs, u = self._operator()
        return float(np.max(np.abs(lhs - self.energy * signed_power(u, self.q - 1.0))) / np.max(np.abs(lhs)))


def minimize_quotient(
    components: Sequence[GridComponent],
    p: float,
    q: float,
    initial: Sequence[np.ndarray],
    constrained: bool,
    iters: int = 5000,
    ftol: float = 1e-12,
) -> DiscreteSolution:
    assembly = _Assembly(components)
    weights, pinned, signs = assembly.weights, assembly.pinned, assembly.signs

    def retract(u: np.ndarray) -> Optional[np.ndarray]:
        u = np.where(pinned, 0.0, u)
        u = np.where(signs > 0, np.clip(u, 0.0, None), u)
        u = np.where(signs < 0, np.clip(u, None, 0.0), u)
        if constrained:
            pos, neg = assembly.moments(u, q)
            if pos <= 0 or neg <= 0:
                return None
            u = np.where(u < 0, u * (pos / neg) ** (1.0 / (q - 1.0)), u)
        mass = assembly.mass(u, q)
        if not mass > 0:
            return None
        return u / mass ** (1.0 / q)

    u = retract(np.concatenate([np.asarray(v, dtype=float) for v in initial]))
    if u is None:
        raise NonConvergenceError("initial guess does not change sign on the constrained pieces")
    energy = assembly.energy(u, p)

    for iteration in range(1, iters + 1):
        grad = assembly.energy_gradient(u, p) / (p * energy) - weights * signed_power(u, q - 1.0)
        grad[pinned] = 0.0
        banded = assembly.preconditioner(u, p)
        z = solve_banded((1, 1), banded, grad)
        if constrained:
            normal = assembly.constraint_normal(u, q)
            y = solve_banded((1, 1), banded, normal)
            z = z - (normal @ z) / (normal @ y) * y
        direction = -energy * z
        direction[pinned] = 0.0
        slope = float(grad @ direction)
        step_size = float(np.max(np.abs(direction)) / np.max(np.abs(u)))

        step = 1.0
        for _ in range(MAX_HALVINGS):
            trial = retract(u + step * direction)
            if trial is not None:
                trial_energy = assembly.energy(trial, p)
                if np.log(trial_energy) / p <= np.log(energy) / p + ARMIJO * step * slope:
                    break
            step /= 2
        else:
            if step_size <= 1e-6:
                logger.debug("descent reached the rounding floor after %d iterations", iteration)
                break
            raise NonConvergenceError(f"line search failed at iteration {iteration} (relative step {step_size:.3g})")

        decrease = energy ** (1.0 / p) - trial_energy ** (1.0 / p)
        u, energy = trial, trial_energy
        if iteration % 100 == 0:
            logger.debug("iteration %d: quotient %.15g", iteration, energy ** (1.0 / p))
        if decrease <= ftol * energy ** (1.0 / p):
            break
    else:
        raise NonConvergenceError(f"quotient still decreasing after {iters} iterations")

    logger.info("direct minimization converged in %d iterations: quotient %.12g", iteration, energy ** (1.0 / p))
    return DiscreteSolution(
        components=tuple(components),
        values=tuple(assembly.split(u)),
        p=p,
        q=q,
        energy=energy,
        iterations=iteration,
        constrained=constrained,
    )


def boundary_slope(component: GridComponent, values: np.ndarray) -> float:
    """|v'(R)| by the second order one-sided difference at the last node."""
    h = component.nodes[-1] - component.nodes[-2]
    return float(abs(3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * h))
