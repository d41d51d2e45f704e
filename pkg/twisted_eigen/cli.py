"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md

Command line front end. Single runs print a JSON report, sweeps print CSV unless --out json.

Exit codes: 0 the command completed (residual verdicts are in flags.all_pass), 2 invalid
parameters or configuration, 3 solver failure, 4 a verify suite failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from collections import Counter
from typing import Any, Callable, Optional

from dotenv import load_dotenv

from twisted_eigen import __version__
from twisted_eigen.ball_eigen import ball_lambda, bessel_oracle
from twisted_eigen.common import Residual, TwistedEigenError, relative_gap, residual
from twisted_eigen.config import METHODS, OUTPUTS, SHAPES, SUITES, ConfigError, RunConfig, resolve_config
from twisted_eigen.params import NonAdmissibleError, conjugate_exponent, validate
from twisted_eigen.shape_verify import (
    check_flux_equality,
    default_volume,
    equal_radius,
    find_optimal_split,
    pohozaev_residual,
    records_to_frame,
    sweep_volume,
)
from twisted_eigen.shooting import SourceSpec
from twisted_eigen.suites import run_suites
from twisted_eigen.twisted import TwistedConfig, TwistedResult, multiplier_report, twisted_direct, twisted_structured
from twisted_eigen.wirtinger import (
    curve_area,
    curve_length_p,
    isoperimetric_defect,
    make_curve,
    pball_area,
    wirtinger_lambda,
    wirtinger_lambda_direct,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


class NonFiniteReportError(TwistedEigenError):
    """A report contained NaN or infinity."""


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, help="gradient exponent p > 1")
    common.add_argument("--q", type=float, help="norm exponent 1 < q < p*")
    common.add_argument("--dim", type=int, help="spatial dimension N")
    common.add_argument("--config", help="JSON config file (default: $TWISTED_EIG_CONFIG)")
    common.add_argument("--out", choices=OUTPUTS)
    common.add_argument("--seed", type=int, help="seed for randomized suites")
    common.add_argument("--ode-tol", type=float, dest="ode_tol")
    common.add_argument("--newton-tol", type=float, dest="newton_tol")
    common.add_argument("--zero-tol", type=float, dest="zero_tol")
    common.add_argument("--grid", type=int, help="nodes per piece for the direct minimizer")
    common.add_argument("--samples", type=int, help="samples per stored trajectory")
    common.add_argument("--timing", action="store_true", default=None, help="report wall time (output is no longer byte-stable)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twisted-eigen", description="Twisted Dirichlet eigenvalues of the p-Laplacian")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_arguments()

    ball = sub.add_parser("ball", parents=[common], help="first eigenvalue of a single ball")
    ball.add_argument("--radius", type=float)

    twisted = sub.add_parser("twisted", parents=[common], help="twisted eigenvalue of two balls")
    twisted.add_argument("--r1", type=float)
    twisted.add_argument("--r2", type=float)
    twisted.add_argument("--method", choices=METHODS)

    sweep = sub.add_parser("sweep", parents=[common], help="volume-constrained sweep over splits")
    sweep.add_argument("--steps", type=int)
    sweep.add_argument("--total-volume", type=float, dest="total_volume")

    verify = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument("--suite", choices=SUITES)

    wirtinger = sub.add_parser("wirtinger", parents=[common], help="twisted eigenvalue of (-1, 1)")
    wirtinger.add_argument("--method", choices=METHODS)

    curve = sub.add_parser("curve", parents=[common], help="isoperimetric defect of a closed curve")
    curve.add_argument("--shape", choices=SHAPES)
    curve.add_argument("--a", type=float)
    curve.add_argument("--b", type=float)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    skip = {"command", "config", "verbose"}
    return {key: value for key, value in vars(args).items() if key not in skip}


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _report(
    config: RunConfig,
    result: dict[str, Any],
    residuals: dict[str, Residual],
    flags: dict[str, Any],
    started: float,
) -> dict[str, Any]:
    return {
        "inputs": config.as_dict(),
        "result": result,
        "residuals": residuals,
        "flags": {**flags, "all_pass": all(r["pass"] for r in residuals.values())},
        "timing_ms": round(1000 * (time.perf_counter() - started), 3) if config.timing else None,
    }


def _dumps(report: dict[str, Any]) -> str:
    try:
        return json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    except ValueError as e:
        raise NonFiniteReportError(str(e)) from e


def _twisted_payload(result: TwistedResult) -> dict[str, Any]:
    return {
        "lambda": result.lam,
        "c1": result.c1,
        "c2": result.c2,
        "m": result.m,
        "f1": result.f1,
        "f2": result.f2,
        "euler_k": result.euler_k,
        "method": result.method,
    }


def cmd_ball(config: RunConfig, started: float) -> tuple[str, int]:
    params = config.params
    ball = ball_lambda(params, config.radius, config.ode_tol, config.samples)
    residuals = {
        "energy": residual(ball.energy_residual, 1e-8),
        "euler": residual(ball.euler_residual, 1e-6),
        "pohozaev": residual(pohozaev_residual(ball.profile, params, SourceSpec(ball.euler_k), ball.flux), 1e-6),
    }
    if params.p == params.q == 2:
        residuals["bessel"] = residual(relative_gap(ball.lam, bessel_oracle(params.dim) / config.radius), 1e-6)
    result = {"lambda": ball.lam, "flux": ball.flux, "euler_k": ball.euler_k, "radius": config.radius}
    return _dumps(_report(config, result, residuals, {}, started)), EXIT_OK


def _radii(config: RunConfig) -> tuple[float, float]:
    if config.r1 is not None and config.r2 is not None:
        return config.r1, config.r2
    params = config.params
    volume = config.total_volume or default_volume(params)
    r = equal_radius(params, volume)
    return config.r1 or r, config.r2 or r


def cmd_twisted(config: RunConfig, started: float) -> tuple[str, int]:
    r1, r2 = _radii(config)
    twisted_config = TwistedConfig(
        config.params, r1, r2, config.newton_tol, config.ode_tol, config.zero_tol, config.samples, config.grid
    )
    results: dict[str, TwistedResult] = {}
    if config.method in ("structured", "both"):
        results["structured"] = twisted_structured(twisted_config)
    if config.method in ("direct", "both"):
        results["direct"] = twisted_direct(twisted_config, n=config.grid)

    residuals: dict[str, Residual] = {}
    flags: dict[str, Any] = {}
    for name, result in results.items():
        shot = result.method == "structured"
        moment = result.moment_residual / max(result.moments[0], 1e-300)
        residuals[f"{name}_moment"] = residual(moment, 1e-8 if shot else 1e-6)
        if r1 == r2:
            residuals[f"{name}_flux"] = residual(check_flux_equality(result), 1e-8 if shot else 1e-3)
        # unequal radii carry a nonzero multiplier; that is reported, not failed
        report = multiplier_report(result)
        flags[f"{name}_multiplier"] = report.status
        flags[f"{name}_zero_multiplier_residual"] = report.euler_residual
        residuals[f"{name}_energy"] = residual(result.energy_residual, 1e-6 if shot else 1e-3)
    if len(results) == 2 and results["structured"].method == "structured":
        residuals["structured_vs_direct"] = residual(relative_gap(results["structured"].lam, results["direct"].lam), 1e-3)

    primary = results.get("structured") or results["direct"]
    result = _twisted_payload(primary)
    result["r1"], result["r2"] = r1, r2
    if len(results) == 2:
        result["direct"] = _twisted_payload(results["direct"])
    return _dumps(_report(config, result, residuals, flags, started)), EXIT_OK


def cmd_sweep(config: RunConfig, started: float) -> tuple[str, int]:
    """Sweep records as CSV (default) or JSON; splits without a value are flagged rows, not failures."""
    params = config.params
    volume = config.total_volume or default_volume(params)
    progress = logger.isEnabledFor(logging.INFO)
    records = sweep_volume(params, volume, config.steps, config.newton_tol, config.ode_tol, config.zero_tol, progress=progress)
    best = find_optimal_split(params, volume, steps=config.steps, records=records, solver_tol=config.newton_tol)
    statuses = Counter(record.status for record in records if not record.ok)
    flagged = sum(statuses.values())

    if (config.out or "csv") == "json":
        result = {
            "records": [record.as_row() for record in records],
            "optimal": {"R1": best.r1, "R2": best.r2, "lambda": best.lam, "refined": best.refined},
        }
        residuals = {"split_asymmetry": residual(abs(best.r1 - best.r2), 1e-4)}
        flags = {"flagged_records": flagged, "flagged_statuses": dict(sorted(statuses.items()))}
        return _dumps(_report(config, result, residuals, flags, started)), EXIT_OK

    frame = records_to_frame(records)
    lines = [frame.to_csv(index=False, float_format="%.12g", na_rep="", lineterminator="\n").rstrip("\n")]
    lines.append(f"# optimal R1={best.r1:.12g} R2={best.r2:.12g} lambda={best.lam:.12g} refined={best.refined}")
    lines.append(f"# flagged records: {flagged}")
    if config.timing:
        lines.append(f"# timing_ms: {1000 * (time.perf_counter() - started):.3f}")
    return "\n".join(lines), EXIT_OK


def cmd_verify(config: RunConfig, started: float) -> tuple[str, int]:
    residuals, flags = run_suites(config)
    report = _report(config, {"suite": config.suite}, residuals, flags, started)
    return _dumps(report), EXIT_OK if report["flags"]["all_pass"] else EXIT_VERIFY


def cmd_wirtinger(config: RunConfig, started: float) -> tuple[str, int]:
    p, q = config.p, config.q
    lam = wirtinger_lambda(p, q, config.ode_tol)
    result: dict[str, Any] = {"lambda": lam}
    residuals: dict[str, Residual] = {}
    if p == q == 2:
        residuals["pi"] = residual(relative_gap(lam, math.pi), 1e-6)
    if math.isclose(q, conjugate_exponent(p), rel_tol=1e-15):
        residuals["pball_area"] = residual(relative_gap(lam, pball_area(q)), 1e-6)
    if config.method in ("direct", "both"):
        direct = wirtinger_lambda_direct(p, q, n=max(config.grid, 1024))
        result["direct"] = direct
        residuals["structured_vs_direct"] = residual(relative_gap(lam, direct), 1e-3)
    return _dumps(_report(config, result, residuals, {}, started)), EXIT_OK


def cmd_curve(config: RunConfig, started: float) -> tuple[str, int]:
    p = config.p
    curve = make_curve(config.shape, p, config.a, config.b, n=max(config.samples, 64))
    defect = isoperimetric_defect(curve, p)
    result = {
        "shape": config.shape,
        "length": curve_length_p(curve, p),
        "area": curve_area(curve),
        "lambda": wirtinger_lambda(p, conjugate_exponent(p), config.ode_tol),
        "defect": defect,
    }
    if config.shape == "pball" or (config.shape == "circle" and p == 2):
        residuals = {"equality_case": residual(abs(defect), 1e-5 if config.shape == "circle" else 1e-4)}
    else:
        residuals = {"nonnegative": residual(max(-defect, 0.0), 1e-8)}
    return _dumps(_report(config, result, residuals, {"strictly_positive": defect > 1e-8}, started)), EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, float], tuple[str, int]]] = {
    "ball": cmd_ball,
    "twisted": cmd_twisted,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "wirtinger": cmd_wirtinger,
    "curve": cmd_curve,
}


PARAMETRIZED = ("ball", "twisted", "sweep", "verify")


def _check_inputs(command: str, config: RunConfig) -> None:
    """Reject caller mistakes before any solver runs, so later ValueErrors mean solver trouble."""
    if command in PARAMETRIZED:
        validate(config.p, config.q, config.dim)
    if command == "sweep" and config.dim < 2:
        raise ConfigError(f"sweep needs dim >= 2 (dim={config.dim})")


def main(argv: Optional[list[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    started = time.perf_counter()
    try:
        config = resolve_config(_overrides(args), args.config)
        _check_inputs(args.command, config)
    except (ConfigError, NonAdmissibleError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        output, code = COMMANDS[args.command](config, started)
    except (ConfigError, NonAdmissibleError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TwistedEigenError, ValueError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    print(output)
    return code
