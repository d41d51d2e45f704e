"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Problem parameters (p, q, N) and the exponents derived from them.

Dilation law: for v_t(x) = v(x / t) on tΩ,

    ||grad v_t||_p = t^(N/p - 1) ||grad v||_p,   ||v_t||_q = t^(N/q) ||v||_q,

and the mean constraint is dilation invariant, so the quotient obeys
λ(tΩ) = t^σ λ(Ω) with σ = N/p - 1 - N/q. The same number is the Pohozaev
coefficient (N - p)/p - N/q; it vanishes exactly at q = p* and is negative on the
admissible region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from twisted_eigen.common import TwistedEigenError


class NonAdmissibleError(TwistedEigenError):
    """The exponents (p, q, N) are outside the admissible region 1 < q < p*."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class ProblemParams:
    p: float
    q: float
    dim: int

    def __post_init__(self):
        reason = _violation(self.p, self.q, self.dim)
        if reason:
            raise NonAdmissibleError(reason)

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self.p, self.dim)


def _violation(p: float, q: float, dim: int) -> Optional[str]:
    if not (math.isfinite(p) and math.isfinite(q)):
        return f"p and q must be finite (p={p}, q={q})"
    if p <= 1:
        return f"p must be greater than 1 (p={p})"
    if q <= 1:
        return f"q must be greater than 1 (q={q})"
    if int(dim) != dim or dim < 1:
        return f"dim must be an integer >= 1 (dim={dim})"
    p_star = critical_exponent(p, int(dim))
    if q >= p_star:
        return f"q must be below the critical exponent p* = {p_star:.12g} (q={q})"
    return None


def critical_exponent(p: float, dim: int) -> float:
    """Sobolev exponent N p / (N - p), infinite when p >= N"""
    if p >= dim:
        return math.inf
    return dim * p / (dim - p)


def validate(p: float, q: float, dim: int) -> ProblemParams:
    return ProblemParams(float(p), float(q), int(dim))


def scaling_exponent(params: ProblemParams) -> float:
    return params.dim / params.p - 1.0 - params.dim / params.q


def pohozaev_coefficient(params: ProblemParams) -> float:
    """(N - p)/p - N/q; the right side of the Pohozaev identity if the boundary flux vanished."""
    return (params.dim - params.p) / params.p - params.dim / params.q


def conjugate_exponent(p: float) -> float:
    if p <= 1:
        raise NonAdmissibleError(f"conjugate exponent needs p > 1 (p={p})")
    return p / (p - 1.0)
