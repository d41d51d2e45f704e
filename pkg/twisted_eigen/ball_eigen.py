"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

First Dirichlet eigenvalue Λ(B_R) of the quotient ||∇u||_p / ||u||_q on a single ball.

One base shot (c = 1, k = 1, m = 0) gives ρ*, I_q and I_grad. The eigenfunction on B_R is
u(r) = A φ(B r) with B = ρ*/R, so

    λ = (B^(p-N) N ω_N I_grad)^(1/p) / (B^(-N) N ω_N I_q)^(1/q),

independent of A. Choosing A = (B^(-N) N ω_N I_q)^(-1/q) normalizes ||u||_q = 1, and the Euler
constant of the normalized profile is A^(p-q) B^p = λ^p.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jn_zeros, jv

from twisted_eigen import discrete
from twisted_eigen.params import ProblemParams, scaling_exponent
from twisted_eigen.radial_quadrature import RadialProfile, unit_ball_measure
from twisted_eigen.shooting import DEFAULT_SAMPLES, ShotResult, SourceSpec, base_shot, momentum_residual, shoot

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BallEigenResult:
    params: ProblemParams
    radius: float
    lam: float
    profile: RadialProfile
    flux: float
    euler_k: float
    energy_residual: float
    shot: ShotResult = field(repr=False, compare=False)

    @property
    def euler_residual(self) -> float:
        return momentum_residual(self.shot, SourceSpec(self.lam**self.params.p))


def _quotient(shot: ShotResult, params: ProblemParams) -> float:
    measure = params.dim * unit_ball_measure(params.dim)
    return (measure * shot.i_grad) ** (1.0 / params.p) / (measure * shot.i_q) ** (1.0 / params.q)


def ball_lambda(params: ProblemParams, R: float, tol: float = 1e-10, samples: int = DEFAULT_SAMPLES) -> BallEigenResult:
    if not R > 0:
        raise ValueError(f"radius must be positive (R={R})")
    p, q, dim = params.p, params.q, params.dim
    base = base_shot(params, tol)
    measure = dim * unit_ball_measure(dim)

    dilation = base.first_zero / R
    mass = dilation**-dim * measure * base.i_q
    lam = (dilation ** (p - dim) * measure * base.i_grad) ** (1.0 / p) / mass ** (1.0 / q)
    shot = base.scaled(mass ** (-1.0 / q), dilation)
    return BallEigenResult(
        params=params,
        radius=R,
        lam=lam,
        profile=shot.profile(samples),
        flux=abs(shot.boundary_slope),
        euler_k=shot.source.k,
        energy_residual=abs(base.i_grad - base.i_q) / base.i_q,
        shot=shot,
    )


def ball_lambda_direct(params: ProblemParams, R: float, n: int = 512, iters: int = 5000) -> float:
    """Discretized quotient minimized over nonnegative grid functions vanishing at R."""
    component = discrete.radial_component(R, n, params.dim, +1)
    initial = 1.0 - (component.nodes / R) ** 2
    return discrete.minimize_quotient([component], params.p, params.q, [initial], constrained=False, iters=iters).lam


def scaling_check(params: ProblemParams, R: float, t: float, tol: float = 1e-10) -> float:
    """|λ(B_tR) - t^σ λ(B_R)| / λ(B_tR), with λ(B_tR) from its own shot rather than from scaling."""
    reference = ball_lambda(params, R, tol).lam
    k = (base_shot(params, tol).first_zero / (t * R)) ** params.p
    direct = _quotient(shoot(params, SourceSpec(k), 1.0, tol=tol), params)
    return abs(direct - t ** scaling_exponent(params) * reference) / direct


def bessel_oracle(dim: int) -> float:
    """Λ(B_1) for p = q = 2: the first positive zero of J_(N/2 - 1)."""
    order = dim / 2 - 1
    if order == int(order):
        return float(jn_zeros(int(order), 1)[0])
    x = np.arange(0.1, order + 10.0, 0.1)
    values = jv(order, x)
    first = int(np.argmax(values[:-1] * values[1:] < 0))
    return float(brentq(lambda s: jv(order, s), x[first], x[first + 1], xtol=1e-15))


def monotone_in_radius(params: ProblemParams, radii: list[float], tol: float = 1e-10) -> bool:
    """Larger balls have smaller eigenvalues."""
    values = [ball_lambda(params, r, tol).lam for r in sorted(radii)]
    ok = all(a >= b for a, b in zip(values, values[1:]))
    if not ok:
        logger.warning("eigenvalue not monotone over radii %s: %s", sorted(radii), values)
    return ok


def equal_pair_lambda(params: ProblemParams, total_volume: float, tol: float = 1e-10) -> float:
    """Twisted eigenvalue of two equal balls of total volume V, 2^(1/p - 1/q) Λ(B_R)."""
    radius = (total_volume / (2 * unit_ball_measure(params.dim))) ** (1.0 / params.dim)
    return 2.0 ** (1.0 / params.p - 1.0 / params.q) * ball_lambda(params, radius, tol).lam

