"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from twisted_eigen.ball_eigen import equal_pair_lambda
from twisted_eigen.params import ProblemParams
from twisted_eigen.radial_quadrature import lq_norm, unit_ball_measure
from twisted_eigen.shooting import NoZeroFoundError, SingularSourceError, SourceSpec, multiplier_fold, shoot
from twisted_eigen.twisted import (
    MultiplierUnsupportedError,
    NewtonDivergenceError,
    OutsideAnsatzError,
    TwistedConfig,
    _newton,
    multiplier_free,
    multiplier_report,
    twisted_direct,
    twisted_structured,
)

J0_FIRST_ZERO = 2.404825557695773
PLANAR_EQUAL_RADIUS = 2.0**-0.5


class TestTwistedConfig:
    def test_radii_must_be_positive(self):
        """Non-positive radii are caller errors"""
        with pytest.raises(ValueError, match="radii"):
            TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.0, 1.0)

    def test_swapped(self):
        """Swapping exchanges the radii only"""
        config = TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.8, 0.6, tol=1e-9)
        swapped = config.swapped
        assert (swapped.r1, swapped.r2, swapped.tol) == (0.6, 0.8, 1e-9)


class TestEqualRadii:
    """Two equal balls: symmetric pair, no multiplier"""

    def test_planar_equal_pair(self):
        """λ = 2^(1/2) j_(0,1) for total volume ω_2"""
        result = twisted_structured(TwistedConfig(ProblemParams(2.0, 2.0, 2), PLANAR_EQUAL_RADIUS, PLANAR_EQUAL_RADIUS))
        assert result.lam == pytest.approx(2.0**0.5 * J0_FIRST_ZERO, rel=1e-8)
        assert result.lam == pytest.approx(3.40092, abs=1e-4)
        assert result.m == 0.0
        assert result.c1 == pytest.approx(result.c2)
        assert result.f1 == pytest.approx(result.f2, rel=1e-12)
        assert result.method == "structured"

    def test_spatial_equal_pair(self):
        """λ = 2^(1/3) π for total volume ω_3"""
        radius = 2.0 ** (-1.0 / 3.0)
        result = twisted_structured(TwistedConfig(ProblemParams(2.0, 2.0, 3), radius, radius))
        assert result.lam == pytest.approx(2.0 ** (1.0 / 3.0) * math.pi, rel=1e-8)

    @pytest.mark.parametrize("params", [ProblemParams(3.0, 2.0, 2), ProblemParams(2.0, 3.0, 2), ProblemParams(1.5, 2.0, 3)])
    def test_equal_pair_identity(self, params):
        """The pair is two normalized ball eigenfunctions glued with opposite signs"""
        volume = unit_ball_measure(params.dim)
        radius = (0.5) ** (1.0 / params.dim)
        result = twisted_structured(TwistedConfig(params, radius, radius))
        assert result.lam == pytest.approx(equal_pair_lambda(params, volume), rel=1e-8)

    def test_pair_is_normalized(self):
        """||u||_q = 1 over both balls"""
        params = ProblemParams(3.0, 2.5, 2)
        result = twisted_structured(TwistedConfig(params, 0.7, 0.7))
        total = sum(lq_norm(profile, params.q) ** params.q for profile in result.profiles)
        assert total == pytest.approx(1.0, rel=1e-6)

    def test_equal_radii_pass_the_multiplier_check(self):
        """Symmetry forces m = 0"""
        result = twisted_structured(TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.7, 0.7))
        report = multiplier_report(result)
        assert report.status == "PASS"
        assert result.euler_residual <= 1e-6

    def test_equal_radii_below_q_two(self):
        """q < 2 still solves the symmetric pair"""
        result = twisted_structured(TwistedConfig(ProblemParams(3.0, 1.5, 2), 0.7, 0.7))
        assert result.m == 0.0
        assert result.f1 == pytest.approx(result.f2, rel=1e-12)


class TestUnequalRadii:
    """Multi-shooting on unequal balls"""

    def setup_method(self):
        self.config = TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.8, 0.6)

    def test_constraint_and_identities(self):
        """Moments balance and the energy identity holds"""
        result = twisted_structured(self.config)
        first, second = result.moments
        assert result.moment_residual / first <= 1e-8
        assert first == pytest.approx(second, rel=1e-8)
        assert result.energy_residual <= 1e-6
        assert result.profiles[0].grid.radius == pytest.approx(0.8, rel=1e-9)
        assert result.profiles[1].grid.radius == pytest.approx(0.6, rel=1e-9)

    def test_multiplier_is_measured(self):
        """Unequal balls carry a nonzero multiplier in the linear case"""
        result = twisted_structured(self.config)
        assert result.m != pytest.approx(0.0, abs=1e-6)
        assert multiplier_report(result).status == "FLAG"

    def test_swapping_radii_swaps_the_pair(self):
        """The eigenvalue does not depend on the labelling"""
        result = twisted_structured(self.config)
        swapped = twisted_structured(self.config.swapped)
        assert swapped.lam == pytest.approx(result.lam, rel=1e-8)
        assert swapped.f1 == pytest.approx(result.f2, rel=1e-6)

    def test_seeded_solve_agrees(self):
        """A Newton seed from a previous solve reaches the same pair"""
        result = twisted_structured(self.config)
        seeded = twisted_structured(self.config, seed=result.seed)
        assert seeded.lam == pytest.approx(result.lam, rel=1e-9)
        assert seeded.iterations <= result.iterations

    def test_structured_and_direct_agree(self):
        """Shooting and projected descent agree within 1e-3"""
        structured = twisted_structured(self.config)
        direct = twisted_direct(self.config, n=512)
        assert direct.method == "direct"
        assert direct.lam == pytest.approx(structured.lam, rel=1e-3)
        assert direct.moment_residual <= 1e-8

    def test_seed_below_the_fold(self):
        """A seed that cannot be shot is clipped and still converges"""
        result = twisted_structured(self.config)
        clipped = twisted_structured(self.config, seed=(-5.0, -5.0))
        assert clipped.lam == pytest.approx(result.lam, rel=1e-9)

    def test_grid_reaches_the_direct_fallback(self):
        """TwistedConfig carries the direct grid"""
        assert self.config.swapped.grid == self.config.grid == 512
        assert self.config.log_ratio == pytest.approx(math.log(0.8 / 0.6))


class TestBranchLimit:
    """One-sign pairs only exist up to a moderate radius ratio"""

    def test_far_split_is_outside(self):
        """R2/R1 ≈ 3 in the plane is past the end of the branch"""
        config = TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.3, 0.95)
        with pytest.raises(OutsideAnsatzError) as info:
            twisted_structured(config)
        assert info.value.limit < 0
        assert abs(info.value.limit) < abs(config.log_ratio)
        assert 1.3 < math.exp(-info.value.limit) < 2.2

    def test_split_inside_the_branch(self):
        """R1/R2 = 1.25 still has a pair with one sign per ball"""
        result = twisted_structured(TwistedConfig(ProblemParams(2.0, 2.0, 2), 0.5, 0.4))
        assert result.method == "structured"
        assert result.moment_residual <= 1e-8


class TestMultiplierFold:
    """Smallest multiplier whose unit shot still reaches zero"""

    def test_planar_linear_fold(self):
        """For p = q = 2, N = 2 the fold is J0_min / (1 - J0_min)"""
        j0_min = -0.402759395702553
        fold = multiplier_fold(ProblemParams(2.0, 2.0, 2))
        assert fold == pytest.approx(j0_min / (1.0 - j0_min), abs=1e-6)

    def test_fold_separates_shootable_multipliers(self):
        """The shot crosses at the fold and turns back just below it"""
        params = ProblemParams(3.0, 2.5, 2)
        fold = multiplier_fold(params)
        assert -1.0 / (params.q - 1.0) < fold < 0.0
        assert shoot(params, SourceSpec(1.0, fold), 1.0).first_zero > 0
        with pytest.raises(NoZeroFoundError):
            shoot(params, SourceSpec(1.0, fold - 1e-6), 1.0)

    def test_needs_q_two(self):
        """q < 2 has no multiplier shots"""
        with pytest.raises(SingularSourceError):
            multiplier_fold(ProblemParams(3.0, 1.5, 2))


class TestFallbacks:
    """Exponents outside the shooting formulation"""

    @patch("twisted_eigen.twisted.twisted_direct")
    def test_q_below_two_uses_direct(self, mock_direct):
        """q < 2 with unequal radii goes to the direct minimizer on the configured grid"""
        config = TwistedConfig(ProblemParams(3.0, 1.5, 2), 0.8, 0.6, grid=256)
        result = twisted_structured(config)
        mock_direct.assert_called_once_with(config, n=256)
        assert result is mock_direct.return_value

    def test_q_below_two_without_fallback(self):
        """The structured-only path refuses q < 2 with unequal radii"""
        with pytest.raises(MultiplierUnsupportedError):
            twisted_structured(TwistedConfig(ProblemParams(3.0, 1.5, 2), 0.8, 0.6), fallback=False)

    @pytest.mark.parametrize("params", [ProblemParams(1.2, 1.5, 2), ProblemParams(1.5, 2.0, 3)])
    def test_multiplier_free_exponents(self, params):
        """p(q-1) + N(p-q) = 0 balances the zero-multiplier pair at every ratio"""
        assert multiplier_free(params)
        result = twisted_structured(TwistedConfig(params, 0.8, 0.6))
        assert result.method == "structured"
        assert result.m == 0.0
        first, _second = result.moments
        assert result.moment_residual / first <= 1e-8

    def test_generic_exponents_carry_a_multiplier(self):
        """The balance fails away from the multiplier-free curve"""
        assert not multiplier_free(ProblemParams(2.0, 2.0, 2))
        assert not multiplier_free(ProblemParams(3.0, 1.5, 2))


class TestNewton:
    """Damped Newton on the shooting residual"""

    def test_failed_start(self):
        """A residual that cannot be evaluated at the start is reported"""
        with pytest.raises(NewtonDivergenceError) as info:
            _newton(lambda x: None, np.array([1.0, 0.0]), 1e-10)
        assert info.value.residual_norm == math.inf

    def test_solves_a_smooth_system(self):
        """Quadratic convergence to a simple root"""
        x, iterations = _newton(lambda x: np.array([x[0] ** 2 - 2.0, x[1] - x[0]]), np.array([1.0, 0.0]), 1e-12)
        assert x[0] == pytest.approx(math.sqrt(2.0), rel=1e-10)
        assert x[1] == pytest.approx(math.sqrt(2.0), rel=1e-10)
        assert iterations < 20

    def test_stall_near_tolerance_warns(self):
        """A residual floor just above the tolerance is accepted with a warning"""
        with pytest.warns(UserWarning, match="stalled"):
            x, _iterations = _newton(lambda x: np.array([x[0] ** 2 + 5e-10, x[1]]), np.array([0.0, 0.0]), 1e-11)
        assert x[0] == pytest.approx(0.0, abs=1e-3)
