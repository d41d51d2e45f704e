"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

from __future__ import annotations

import math
from typing import Optional, TypedDict


class TwistedEigenError(Exception):
    """Base class for every error raised by the toolkit."""


# "pass" is a keyword, so the functional syntax is required here
Residual = TypedDict("Residual", {"value": float, "tolerance": float, "pass": bool})


SweepRow = TypedDict(
    "SweepRow",
    {"R1": float, "R2": float, "lambda": Optional[float], "f1": Optional[float], "f2": Optional[float], "m": Optional[float], "status": str},
)


def residual(value: float, tolerance: float) -> Residual:
    """Pair a residual with the tolerance it is judged against"""
    value = float(value)
    return {"value": value, "tolerance": float(tolerance), "pass": bool(math.isfinite(value) and value <= tolerance)}


def relative_gap(a: float, b: float, floor: float = 0.0) -> float:
    """|a - b| / max(|a|, |b|, floor); 0 when both vanish."""
    scale = max(abs(a), abs(b), floor)
    if scale == 0:
        return 0.0
    return abs(a - b) / scale
