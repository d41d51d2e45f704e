"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

from unittest.mock import patch

import numpy as np
import pytest

from twisted_eigen.config import RunConfig
from twisted_eigen.params import ProblemParams
from twisted_eigen.shape_verify import OptimalSplit, find_optimal_split
from twisted_eigen.suites import (
    OPTIMUM_TOL,
    _refined_optimum,
    random_comparison_params,
    random_pl_function,
    random_radial_two_ball_function,
    random_two_interval_function,
    run_suites,
)
from twisted_eigen.twisted import TwistedConfig, twisted_structured


class TestRandomCases:
    """Generators behind the randomized suites"""

    def test_comparison_cases_are_ordered(self):
        """c1 < c2 and q <= p"""
        rng = np.random.default_rng(0)
        for _ in range(100):
            params, c1, c2 = random_comparison_params(rng)
            assert c1 < c2
            assert params.q <= params.p

    def test_random_functions_vanish_at_the_ends(self):
        """Piecewise-linear test functions satisfy the boundary condition"""
        rng = np.random.default_rng(1)
        f = random_pl_function(rng)
        assert f.values[0] == 0.0
        assert f.values[-1] == 0.0
        assert np.all(f.values >= 0)
        u = random_two_interval_function(rng)
        assert u.pieces == (0, 12)
        assert np.any(u.values > 0)
        assert np.any(u.values < 0)

    def test_radial_functions_vanish_on_the_spheres(self):
        """Radial pairs start at the center and end at zero"""
        u = random_radial_two_ball_function(np.random.default_rng(2), 3)
        assert u.dim == 3
        for nodes, values in u.split():
            assert nodes[0] == 0.0
            assert values[-1] == 0.0
            assert values[0] != 0.0


class TestRunSuites:
    """Named suites"""

    def test_scaling_suite(self):
        """Three dilation factors, all within 1e-8"""
        residuals, flags = run_suites(RunConfig(p=3.0, q=2.0, dim=2, suite="scaling"))
        assert set(residuals) == {"scaling_t0.5", "scaling_t1", "scaling_t2"}
        assert all(r["pass"] for r in residuals.values())
        assert flags == {}

    def test_pohozaev_suite(self):
        """Pohozaev residual for (2, 3, 3)"""
        residuals, _flags = run_suites(RunConfig(p=2.0, q=3.0, dim=3, suite="pohozaev"))
        assert residuals["pohozaev"]["pass"]
        assert residuals["pohozaev"]["tolerance"] == 1e-6

    def test_hadamard_suite_skips_intervals(self):
        """One dimension has no shape sweep"""
        residuals, flags = run_suites(RunConfig(dim=1, suite="hadamard"))
        assert residuals == {}
        assert "hadamard" in flags

    @patch("twisted_eigen.suites.COMPARISON_CASES", 5)
    def test_comparison_suite(self):
        """Randomized comparison cases stay ordered"""
        residuals, _flags = run_suites(RunConfig(suite="comparison", seed=3))
        assert residuals["comparison"]["pass"]

    @patch("twisted_eigen.suites.RADIAL_REARRANGE_CASES", 3)
    @patch("twisted_eigen.suites.REARRANGE_CASES", 50)
    def test_rearrange_suite_is_deterministic(self):
        """Same seed, same residuals"""
        config = RunConfig(suite="rearrange", seed=7)
        first, _ = run_suites(config)
        second, _ = run_suites(config)
        assert first == second
        assert all(r["pass"] for r in first.values())
        assert {"reduction_moment", "reduction_radial", "reduction_radial_moment"} <= set(first)

    def test_hadamard_suite_checks_three_splits(self):
        """One residual at the equal split, one gap per off-critical split"""
        residuals, flags = run_suites(RunConfig(p=2.0, q=2.0, dim=2, suite="hadamard"))
        assert set(residuals) == {"hadamard_equal_split", "hadamard_gap_0.85", "hadamard_gap_0.92", "hadamard_gap_0.97"}
        assert all(r["pass"] for r in residuals.values())
        assert flags == {}


class TestOptimumSuites:
    """Flux and divergence at the refined minimizer"""

    def setup_method(self):
        _refined_optimum.cache_clear()

    def teardown_method(self):
        _refined_optimum.cache_clear()

    @patch("twisted_eigen.suites.find_optimal_split")
    def test_flux_suite_uses_refined_optimum(self, mock_find):
        """The flux check runs where the golden-section search stopped"""
        radius = 2.0**-0.5
        mock_find.return_value = OptimalSplit(radius + 2e-6, radius - 2e-6, 3.40092, True)
        residuals, flags = run_suites(RunConfig(p=2.0, q=2.0, dim=2, suite="flux"))
        assert mock_find.call_args.kwargs["tol"] == OPTIMUM_TOL
        assert residuals["flux"]["tolerance"] == 1e-4
        assert residuals["flux"]["pass"]
        assert flags == {}

    @patch("twisted_eigen.suites._optimum")
    def test_divergence_suite_flags_a_multiplier(self, mock_optimum):
        """A nonzero multiplier skips the identity and keeps the balance"""
        mock_optimum.return_value = twisted_structured(TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.8, 0.6))
        residuals, flags = run_suites(RunConfig(p=2.0, q=2.0, dim=2, suite="divergence"))
        assert set(residuals) == {"divergence_balance"}
        assert residuals["divergence_balance"]["pass"]
        assert flags["divergence"].startswith("skipped")

    def test_divergence_suite_without_multiplier(self):
        """Multiplier-free exponents give an exact m = 0 pair at the optimum"""
        residuals, flags = run_suites(RunConfig(p=1.5, q=2.0, dim=3, suite="divergence"))
        assert residuals["divergence"]["pass"]
        assert residuals["divergence_balance"]["pass"]
        assert flags == {}

    @pytest.mark.parametrize("suite", ["flux", "divergence"])
    def test_intervals_are_skipped(self, suite):
        """No volume path in one dimension"""
        residuals, flags = run_suites(RunConfig(dim=1, suite=suite))
        assert residuals == {}
        assert flags[suite] == "skipped: needs dim >= 2"

    def test_optimum_is_cached(self):
        """Flux and divergence share one refinement"""
        with patch("twisted_eigen.suites.find_optimal_split", wraps=find_optimal_split) as spy:
            run_suites(RunConfig(p=2.0, q=2.0, dim=2, suite="flux"))
            run_suites(RunConfig(p=2.0, q=2.0, dim=2, suite="divergence"))
        assert spy.call_count == 1
        assert _refined_optimum.cache_info().hits >= 1
