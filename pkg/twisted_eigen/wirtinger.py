"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

The one-dimensional twisted problem on (-1, 1) and the curve inequality it yields.

The minimizer on (-1, 1) is odd, so it is two Dirichlet bumps on intervals of length 1 glued with
opposite signs, and λ^(p,q)((-1,1)) = 2^(1/p - 1/q) Λ^(p,q)((0,1)) with Λ from the N = 1 ball
solver at radius 1/2.

A closed curve through the origin, t -> (x(t), y(t)) with x(±1) = y(±1) = 0, has ℓ^p length
L = ∫ (|x'|^p + |y'|^p)^(1/p) dt and signed area M = ½ ∫ (y' x - y x') dt, and applying the
q = p' problem to x and y gives L² - 4 λ^(p,p') M ≥ 0. Equality holds on the unit ℓ^(p') ball,
whose ℓ^p perimeter is twice its area, so λ^(p,p') equals that area.

The ℓ^(p') ball is traced as (sgn(cos θ) |cos θ|^(2/p'), sgn(sin θ) |sin θ|^(2/p')) with the
angle reparametrized as θ = τ - sin(4τ)/4. The reparametrization stalls on the axes, where
|cos θ|^(2/p') is not differentiable for p' > 2, so the sampled derivatives stay bounded. The
curve starts at the bottom point and is translated by (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.special import gamma

from twisted_eigen import discrete
from twisted_eigen.ball_eigen import ball_lambda
from twisted_eigen.common import TwistedEigenError
from twisted_eigen.params import conjugate_exponent, validate

MIN_SAMPLES = 64
DEFAULT_CURVE_SAMPLES = 4097
ENDPOINT_TOL = 1e-12


class InvalidCurveError(TwistedEigenError):
    """Curve samples do not span t in [-1, 1] with both coordinates vanishing at the ends."""


@dataclass(frozen=True)
class ParametricCurve:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dx: Optional[np.ndarray] = None
    dy: Optional[np.ndarray] = None
    closed: bool = True
    label: str = ""

    def __post_init__(self):
        t, x, y = (np.asarray(a, dtype=float) for a in (self.t, self.x, self.y))
        if t.size < MIN_SAMPLES or x.shape != t.shape or y.shape != t.shape:
            raise InvalidCurveError(f"a curve needs at least {MIN_SAMPLES} aligned samples")
        if t[0] != -1.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise InvalidCurveError("parameter must increase from -1 to 1")
        scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(y))))
        if max(abs(x[0]), abs(x[-1]), abs(y[0]), abs(y[-1])) > ENDPOINT_TOL * scale:
            raise InvalidCurveError("x and y must vanish at t = -1 and t = 1")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dx is not None and self.dy is not None:
            return np.asarray(self.dx, dtype=float), np.asarray(self.dy, dtype=float)
        return np.gradient(self.x, self.t, edge_order=2), np.gradient(self.y, self.t, edge_order=2)

    def scaled(self, factor: float) -> ParametricCurve:
        dx = None if self.dx is None else factor * np.asarray(self.dx)
        dy = None if self.dy is None else factor * np.asarray(self.dy)
        return ParametricCurve(self.t, factor * self.x, factor * self.y, dx, dy, self.closed, self.label)

    def reversed(self) -> ParametricCurve:
        """Same trace with the opposite orientation."""
        dx = None if self.dx is None else -np.asarray(self.dx)[::-1]
        dy = None if self.dy is None else -np.asarray(self.dy)[::-1]
        return ParametricCurve(-self.t[::-1], self.x[::-1], self.y[::-1], dx, dy, self.closed, self.label)


@lru_cache(maxsize=64)
def wirtinger_lambda(p: float, q: float, tol: float = 1e-10) -> float:
    """λ^(p,q)((-1, 1)) from the odd minimizer."""
    params = validate(p, q, 1)
    return 2.0 ** (1.0 / p - 1.0 / q) * ball_lambda(params, 0.5, tol).lam


def wirtinger_lambda_direct(p: float, q: float, n: int = 1024, iters: int = 5000) -> float:
    """Constrained minimization on a grid over (-1, 1); no symmetry is imposed."""
    validate(p, q, 1)
    component = discrete.interval_component(-1.0, 1.0, n)
    x = component.nodes
    initial = (1.0 - x**2) * (x + 0.3)
    return discrete.minimize_quotient([component], p, q, [initial], constrained=True, iters=iters).lam


def pball_area(r: float) -> float:
    """|{|x|^r + |y|^r <= 1}|"""
    return 4.0 * gamma(1.0 + 1.0 / r) ** 2 / gamma(1.0 + 2.0 / r)


def curve_length_p(curve: ParametricCurve, p: float) -> float:
    dx, dy = curve.derivatives()
    return float(simpson((np.abs(dx) ** p + np.abs(dy) ** p) ** (1.0 / p), x=curve.t))


def curve_area(curve: ParametricCurve) -> float:
    dx, dy = curve.derivatives()
    return 0.5 * float(simpson(dy * curve.x - curve.y * dx, x=curve.t))


def isoperimetric_defect(curve: ParametricCurve, p: float) -> float:
    """L² - 4 λ^(p,p') M"""
    lam = wirtinger_lambda(p, conjugate_exponent(p))
    return curve_length_p(curve, p) ** 2 - 4.0 * lam * curve_area(curve)


def _parameter(n: int) -> np.ndarray:
    if n < MIN_SAMPLES:
        raise InvalidCurveError(f"a curve needs at least {MIN_SAMPLES} samples (n={n})")
    t = np.linspace(-1.0, 1.0, n)
    t[0], t[-1] = -1.0, 1.0
    return t


def _pinned(values: np.ndarray) -> np.ndarray:
    values = values.copy()
    values[0] = values[-1] = 0.0
    return values


def polar_curve(
    radius: Callable[[np.ndarray], np.ndarray],
    radius_slope: Callable[[np.ndarray], np.ndarray],
    n: int = DEFAULT_CURVE_SAMPLES,
    start: float = -math.pi / 2,
    label: str = "polar",
) -> ParametricCurve:
    """One counterclockwise turn of r(θ) from the angle start, translated so it starts at 0."""
    t = _parameter(n)
    theta = start + math.pi * (t + 1.0)
    r, dr = radius(theta), radius_slope(theta)
    anchor = radius(np.array([start]))[0]
    x = r * np.cos(theta) - anchor * math.cos(start)
    y = r * np.sin(theta) - anchor * math.sin(start)
    dx = math.pi * (dr * np.cos(theta) - r * np.sin(theta))
    dy = math.pi * (dr * np.sin(theta) + r * np.cos(theta))
    return ParametricCurve(t, _pinned(x), _pinned(y), dx, dy, label=label)


def circle_curve(radius: float = 1.0, n: int = DEFAULT_CURVE_SAMPLES, start: float = -math.pi / 2) -> ParametricCurve:
    return polar_curve(lambda th: np.full_like(th, radius), np.zeros_like, n, start, label="circle")


def ellipse_curve(a: float, b: float, n: int = DEFAULT_CURVE_SAMPLES) -> ParametricCurve:
    """Semi-axes a (horizontal) and b (vertical), starting at the bottom point."""
    t = _parameter(n)
    theta = math.pi * (t + 1.0)
    x, y = a * np.sin(theta), b * (1.0 - np.cos(theta))
    dx, dy = math.pi * a * np.cos(theta), math.pi * b * np.sin(theta)
    return ParametricCurve(t, _pinned(x), _pinned(y), dx, dy, label="ellipse")


def _signed_root(values: np.ndarray, exponent: float) -> np.ndarray:
    return np.sign(values) * np.abs(values) ** exponent


def _root_slope(values: np.ndarray, exponent: float) -> np.ndarray:
    """d/dv of sgn(v) |v|^exponent, set to 0 where v = 0"""
    out = np.zeros_like(values)
    nonzero = values != 0
    out[nonzero] = exponent * np.abs(values[nonzero]) ** (exponent - 1.0)
    return out


def pball_curve(r: float, n: int = DEFAULT_CURVE_SAMPLES) -> ParametricCurve:
    """Boundary of the unit ℓ^r ball, |x|^r + |y|^r = 1."""
    t = _parameter(n)
    tau = math.pi * t + math.pi / 2
    theta = tau - np.sin(4 * tau) / 4
    dtheta = math.pi * (1.0 - np.cos(4 * tau))
    cos, sin = np.cos(theta), np.sin(theta)
    a = 2.0 / r
    x = _signed_root(cos, a)
    y = _signed_root(sin, a) + 1.0
    dx = -_root_slope(cos, a) * sin * dtheta
    dy = _root_slope(sin, a) * cos * dtheta
    return ParametricCurve(t, _pinned(x), _pinned(y), dx, dy, label=f"pball-{r:g}")


def random_fourier_curve(
    rng: np.random.Generator,
    amplitude: float = 0.05,
    modes: tuple[int, ...] = (2, 3, 4, 5, 6),
    n: int = DEFAULT_CURVE_SAMPLES,
) -> ParametricCurve:
    """Star-shaped perturbation r(θ) = 1 + Σ a_k cos kθ + b_k sin kθ of the unit circle."""
    ks = np.asarray(modes, dtype=float)
    a = rng.uniform(-amplitude, amplitude, ks.size)
    b = rng.uniform(-amplitude, amplitude, ks.size)

    def radius(theta):
        return 1.0 + np.cos(np.outer(theta, ks)) @ a + np.sin(np.outer(theta, ks)) @ b

    def radius_slope(theta):
        return np.cos(np.outer(theta, ks)) @ (ks * b) - np.sin(np.outer(theta, ks)) @ (ks * a)

    return polar_curve(radius, radius_slope, n, label="fourier")


def make_curve(shape: str, p: float, a: float = 1.0, b: float = 2.0, n: int = DEFAULT_CURVE_SAMPLES) -> ParametricCurve:
    """Named curves for the command line: circle, ellipse, pball (the ℓ^(p') ball for this p)."""
    if shape == "circle":
        return circle_curve(1.0, n)
    if shape == "ellipse":
        return ellipse_curve(a, b, n)
    if shape == "pball":
        return pball_curve(conjugate_exponent(p), n)
    raise InvalidCurveError(f"unknown curve shape {shape!r}")
