"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Volume-constrained sweeps over two-ball splits and the optimality identities at the critical
split.

Along the path ω_N (R1^N + R2^N) = V the radii move with normal speeds s1 = 1 and
s2 = -|∂B1| / |∂B2| (so the volume is preserved), and for the q-normalized eigenfunction

    dλ/dR1 = -((p-1)/p) λ^(1-p) [f1^p |∂B1| + f2^p |∂B2| s2].

It vanishes exactly when f1^p |∂B1| = f2^p |∂B2|, which together with the divergence theorem
(f_i^(p-1) |∂B_i| = ∫_(B_i) g(u_i)) and the Pohozaev identity forces R1 = R2. A general
perturbation field V enters only through its mean normal speed on each sphere.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from tqdm import tqdm

from twisted_eigen.common import SweepRow, TwistedEigenError, relative_gap
from twisted_eigen.params import ProblemParams, pohozaev_coefficient
from twisted_eigen.radial_quadrature import RadialProfile, integrate_radial, sphere_measure, unit_ball_measure
from twisted_eigen.shooting import SourceSpec
from twisted_eigen.twisted import OutsideAnsatzError, TwistedConfig, TwistedResult, twisted_structured

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["R1", "R2", "lambda", "f1", "f2", "m", "status"]
MIN_STEPS = 8
OUTSIDE_ANSATZ = "outside-ansatz"
VALUED_STATUSES = ("ok", "direct")


class IdentityInapplicableError(TwistedEigenError):
    """The divergence identity presumes the zero-multiplier Euler equation."""


@dataclass(frozen=True)
class SweepRecord:
    r1: float
    r2: float
    lam: float
    f1: float
    f2: float
    m: float
    status: str

    @classmethod
    def empty(cls, r1: float, r2: float, status: str) -> SweepRecord:
        return cls(r1, r2, math.nan, math.nan, math.nan, math.nan, status)

    @property
    def ok(self) -> bool:
        return self.status in VALUED_STATUSES

    def as_row(self) -> SweepRow:
        """Missing values become None, which JSON writes as null and CSV as an empty cell."""

        def value(x: float) -> Optional[float]:
            return x if math.isfinite(x) else None

        return {
            "R1": self.r1,
            "R2": self.r2,
            "lambda": value(self.lam),
            "f1": value(self.f1),
            "f2": value(self.f2),
            "m": value(self.m),
            "status": self.status,
        }


@dataclass(frozen=True)
class OptimalSplit:
    r1: float
    r2: float
    lam: float
    refined: bool


@dataclass(frozen=True)
class HadamardReport:
    predicted: float
    finite_difference: float
    gap: float


def _require_shape_dim(params: ProblemParams) -> None:
    if params.dim < 2:
        raise ValueError(f"shape sweeps need dim >= 2 (dim={params.dim})")


def default_volume(params: ProblemParams) -> float:
    return unit_ball_measure(params.dim)


def equal_radius(params: ProblemParams, total_volume: float) -> float:
    return (total_volume / (2 * unit_ball_measure(params.dim))) ** (1.0 / params.dim)


def partner_radius(params: ProblemParams, total_volume: float, r1: float) -> float:
    """R2 with ω_N (R1^N + R2^N) = V"""
    rest = total_volume / unit_ball_measure(params.dim) - r1**params.dim
    if not rest > 0:
        raise ValueError(f"R1={r1} leaves no volume for the second ball")
    return rest ** (1.0 / params.dim)


class _SplitSolver:
    """Solves along the volume path.

    Seeds come from the two stored solutions nearest in log(R1/R2), extrapolated linearly;
    each solution is also stored mirrored, since swapping the radii swaps (μ1, μ2). Once a
    split lies past the end of the one-sign branch, splits further out are refused without
    solving.
    """

    def __init__(self, params: ProblemParams, total_volume: float, tol: float, ode_tol: float, zero_tol: float):
        self.params = params
        self.total_volume = total_volume
        self.tol = tol
        self.ode_tol = ode_tol
        self.zero_tol = zero_tol
        self.limit: Optional[float] = None
        self._seeds: dict[float, tuple[float, float]] = {}

    def config(self, r1: float) -> TwistedConfig:
        r2 = partner_radius(self.params, self.total_volume, r1)
        return TwistedConfig(self.params, r1, r2, self.tol, self.ode_tol, self.zero_tol)

    def _predict(self, ratio: float) -> Optional[tuple[float, float]]:
        nearest = sorted(self._seeds, key=lambda key: abs(key - ratio))[:2]
        if not nearest:
            return None
        if len(nearest) == 1:
            return self._seeds[nearest[0]]
        t0, t1 = nearest
        s0, s1 = np.array(self._seeds[t0]), np.array(self._seeds[t1])
        guess = s1 + (s1 - s0) * (ratio - t1) / (t1 - t0)
        return float(guess[0]), float(guess[1])

    def _past_limit(self, ratio: float) -> bool:
        return self.limit is not None and ratio * self.limit > 0 and abs(ratio) >= abs(self.limit)

    def solve(self, r1: float) -> TwistedResult:
        config = self.config(r1)
        ratio = config.log_ratio
        if self._past_limit(ratio):
            raise OutsideAnsatzError(
                f"R1/R2={math.exp(ratio):.6g} lies past the end of the one-sign branch at R1/R2={math.exp(self.limit):.6g}",
                self.limit,
            )
        try:
            result = twisted_structured(config, seed=self._predict(ratio))
        except OutsideAnsatzError as e:
            self.limit = e.limit
            raise
        if result.method == "structured" and result.seed is not None:
            self._seeds[ratio] = result.seed
            self._seeds[-ratio] = (result.seed[1], result.seed[0])
        return result

    def lam(self, r1: float) -> float:
        return self.solve(r1).lam


def sweep_volume(
    params: ProblemParams,
    total_volume: Optional[float] = None,
    steps: int = 33,
    tol: float = 1e-10,
    ode_tol: float = 1e-10,
    zero_tol: float = 1e-12,
    progress: bool = False,
) -> list[SweepRecord]:
    """λ along R1 ∈ (0, R_eq], solved from the equal split downward; returned in grid order.

    Each record's status is "ok" for a shooting solve, "direct" for the discrete fallback
    (q < 2), "outside-ansatz" past the end of the one-sign branch and "failed: <error>"
    otherwise. Only the first two carry values.
    """
    _require_shape_dim(params)
    if steps < MIN_STEPS:
        raise ValueError(f"a sweep needs at least {MIN_STEPS} steps (steps={steps})")
    total_volume = default_volume(params) if total_volume is None else total_volume
    r_eq = equal_radius(params, total_volume)
    grid = np.linspace(r_eq / steps, r_eq, steps)
    solver = _SplitSolver(params, total_volume, tol, ode_tol, zero_tol)

    records: list[SweepRecord] = []
    for r1 in tqdm(grid[::-1], desc="Sweeping splits", disable=not progress):
        r1 = float(r1)
        r2 = partner_radius(params, total_volume, r1)
        try:
            result = solver.solve(r1)
        except OutsideAnsatzError as e:
            logger.info("split R1=%g R2=%g: %s", r1, r2, e)
            records.append(SweepRecord.empty(r1, r2, OUTSIDE_ANSATZ))
            continue
        except TwistedEigenError as e:
            logger.warning("split R1=%g R2=%g failed: %s", r1, r2, e)
            records.append(SweepRecord.empty(r1, r2, f"failed: {type(e).__name__}"))
            continue
        status = "ok" if result.method == "structured" else result.method
        records.append(SweepRecord(r1, r2, result.lam, result.f1, result.f2, result.m, status))
    flagged = sum(not record.ok for record in records)
    if flagged:
        logger.info("%d of %d splits carry no value", flagged, len(records))
    return records[::-1]


def _unimodal(values: list[float], index: int) -> bool:
    falling = all(a >= b for a, b in zip(values[: index + 1], values[1 : index + 1]))
    rising = all(a <= b for a, b in zip(values[index:], values[index + 1 :]))
    return falling and rising


def find_optimal_split(
    params: ProblemParams,
    total_volume: Optional[float] = None,
    tol: float = 1e-4,
    steps: int = 33,
    records: Optional[list[SweepRecord]] = None,
    solver_tol: float = 1e-10,
    progress: bool = False,
) -> OptimalSplit:
    """Coarse minimum of the valued sweep records refined by golden-section search on R1.

    Records without a value (outside the one-sign branch or failed) are skipped; the
    refinement starts from the equal-split solution and seeds every evaluation from the
    nearest solved split.
    """
    total_volume = default_volume(params) if total_volume is None else total_volume
    if records is None:
        records = sweep_volume(params, total_volume, steps, tol=solver_tol, progress=progress)
    good = [record for record in records if record.ok]
    if not good:
        raise TwistedEigenError("no split of the sweep carries a value")

    values = [record.lam for record in good]
    index = int(np.argmin(values))
    coarse = good[index]
    if not _unimodal(values, index):
        warnings.warn("sweep is not unimodal; returning the coarse minimum", stacklevel=2)
        return OptimalSplit(coarse.r1, coarse.r2, coarse.lam, refined=False)

    r_eq = equal_radius(params, total_volume)
    spacing = r_eq / steps
    if index == len(good) - 1:
        # beyond R_eq the path continues with the radii exchanged
        bracket = (coarse.r1 - spacing, coarse.r1, coarse.r1 + spacing)
    else:
        bracket = (good[index - 1].r1 if index else coarse.r1 / 2, coarse.r1, good[index + 1].r1)

    solver = _SplitSolver(params, total_volume, solver_tol, solver_tol, 1e-12)
    try:
        solver.solve(r_eq)
        found = minimize_scalar(solver.lam, bracket=bracket, method="golden", tol=tol / (4 * coarse.r1))
    except (TwistedEigenError, ValueError) as e:
        warnings.warn(f"golden-section refinement failed ({e}); returning the coarse minimum", stacklevel=2)
        return OptimalSplit(coarse.r1, coarse.r2, coarse.lam, refined=False)
    r1 = float(found.x)
    r2 = partner_radius(params, total_volume, r1)
    logger.info("optimal split R1=%.8g R2=%.8g after %d evaluations", r1, r2, found.nfev)
    return OptimalSplit(r1, r2, float(found.fun), refined=True)


def equal_split_is_minimal(records: list[SweepRecord], slack: float = 1e-10) -> bool:
    """Every converged record lies above the equal-split record (the last grid point)."""
    good = [record for record in records if record.ok]
    equal = records[-1]
    return equal.ok and all(record.lam >= equal.lam * (1 - slack) for record in good)


def records_to_frame(records: list[SweepRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.as_row() for record in records], columns=SWEEP_COLUMNS)


def check_flux_equality(result: TwistedResult) -> float:
    return relative_gap(result.f1, result.f2)


def check_divergence_identity(result: TwistedResult, params: Optional[ProblemParams] = None, tol: float = 1e-8) -> float:
    """Relative gap in f1^(p-1) |∂B1| = f2^(p-1) |∂B2|."""
    params = params or result.params
    if abs(result.m) > tol:
        raise IdentityInapplicableError(f"multiplier m={result.m:.3g} exceeds {tol:.3g}")
    p, dim = params.p, params.dim
    first = result.f1 ** (p - 1) * sphere_measure(dim, result.r1)
    second = result.f2 ** (p - 1) * sphere_measure(dim, result.r2)
    return relative_gap(first, second)


def divergence_balance(result: TwistedResult) -> float:
    """Worst relative gap in f_i^(p-1) |∂B_i| = ∫_(B_i) g(u_i) dx, with or without multiplier."""
    p, q, dim = result.params.p, result.params.q, result.params.dim
    gaps = []
    for profile, source, flux in zip(result.profiles, result.sources, (result.f1, result.f2)):
        boundary = flux ** (p - 1) * sphere_measure(dim, profile.grid.radius)
        interior = integrate_radial(RadialProfile(profile.grid, source.g(profile.values, q)))
        gaps.append(relative_gap(boundary, interior))
    return max(gaps)


def pohozaev_residual(profile: RadialProfile, params: ProblemParams, source: SourceSpec, flux: Optional[float] = None) -> float:
    """Relative gap between -((p-1)/p) R |∂B| f^p and ∫ [((N-p)/p) |∇u|^p - N G(u)] dx."""
    p, q, dim = params.p, params.q, params.dim
    radius = profile.grid.radius
    flux = abs(profile.derivative()[-1]) if flux is None else flux
    boundary = -((p - 1) / p) * radius * sphere_measure(dim, radius) * flux**p
    density = ((dim - p) / p) * np.abs(profile.derivative()) ** p - dim * source.primitive(profile.values, q)
    interior = integrate_radial(RadialProfile(profile.grid, density))
    return relative_gap(boundary, interior)


def pohozaev_without_flux(params: ProblemParams, euler_k: float) -> float:
    """Right side of the Pohozaev identity for a q-normalized eigenfunction if the flux vanished."""
    return euler_k * pohozaev_coefficient(params)


def hadamard_derivative(
    params: ProblemParams,
    R1: float,
    R2: float,
    h: Optional[float] = None,
    tol: float = 1e-10,
) -> HadamardReport:
    """Boundary-formula dλ/dR1 against a Richardson-extrapolated central difference on the volume path."""
    _require_shape_dim(params)
    p, dim = params.p, params.dim
    total_volume = unit_ball_measure(dim) * (R1**dim + R2**dim)
    solver = _SplitSolver(params, total_volume, tol, tol, 1e-12)
    center = solver.solve(R1)

    s2 = -sphere_measure(dim, R1) / sphere_measure(dim, R2)
    bracket = center.f1**p * sphere_measure(dim, R1) + center.f2**p * sphere_measure(dim, R2) * s2
    predicted = -((p - 1) / p) * center.lam ** (1 - p) * bracket

    h = 1e-3 * R1 if h is None else h

    def central(step: float) -> float:
        return (solver.lam(R1 + step) - solver.lam(R1 - step)) / (2 * step)

    difference = (4 * central(h / 2) - central(h)) / 3
    gap = relative_gap(predicted, difference, floor=1e-6 * center.lam)
    logger.debug("Hadamard at R1=%g R2=%g: predicted %.10g, difference %.10g", R1, R2, predicted, difference)
    return HadamardReport(predicted=predicted, finite_difference=difference, gap=gap)
