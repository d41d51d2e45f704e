"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

import io
import json
import math
from unittest.mock import patch

import pandas as pd
import pytest

from twisted_eigen.cli import EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VERIFY, NonFiniteReportError, _dumps, main
from twisted_eigen.common import residual
from twisted_eigen.shooting import NoZeroFoundError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestBallCommand:
    """twisted-eigen ball"""

    def test_planar_ball(self, capsys):
        """λ(B_1) = j_(0,1) with every residual passing"""
        code, out = run(capsys, "ball", "--p", "2", "--q", "2", "--dim", "2", "--radius", "1")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["result"]["lambda"] == pytest.approx(2.40482556, abs=1e-6)
        assert report["residuals"]["bessel"]["pass"]
        assert report["flags"]["all_pass"]
        assert report["timing_ms"] is None
        assert report["inputs"]["dim"] == 2

    def test_spatial_ball(self, capsys):
        """λ(B_1) = π in three dimensions"""
        code, out = run(capsys, "ball", "--p", "2", "--q", "2", "--dim", "3", "--radius", "1")
        assert code == EXIT_OK
        assert json.loads(out)["result"]["lambda"] == pytest.approx(math.pi, abs=1e-6)

    def test_supercritical_q(self, capsys):
        """q >= p* is a usage error"""
        code, out = run(capsys, "ball", "--p", "2", "--q", "7", "--dim", "3")
        assert code == EXIT_USAGE
        assert out == ""

    def test_invalid_tolerance(self, capsys):
        """Non-positive tolerances are rejected"""
        code, _out = run(capsys, "ball", "--ode-tol", "0")
        assert code == EXIT_USAGE

    @patch("twisted_eigen.cli.ball_lambda")
    def test_solver_failure(self, mock_ball, capsys):
        """Solver errors exit with 3"""
        mock_ball.side_effect = NoZeroFoundError("no zero of φ")
        code, out = run(capsys, "ball")
        assert code == EXIT_SOLVER
        assert out == ""

    def test_timing_is_opt_in(self, capsys):
        """--timing adds wall time"""
        _code, out = run(capsys, "ball", "--timing")
        assert json.loads(out)["timing_ms"] >= 0

    def test_repeated_runs_are_identical(self, capsys):
        """Identical configs print identical bytes"""
        _code, first = run(capsys, "ball", "--p", "3", "--q", "2.5")
        _code, second = run(capsys, "ball", "--p", "3", "--q", "2.5")
        assert first == second

    def test_config_file(self, capsys, tmp_path):
        """--config supplies the parameters"""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"p": 2.0, "q": 2.0, "dim": 3, "radius": 2.0}))
        code, out = run(capsys, "ball", "--config", str(path))
        assert code == EXIT_OK
        assert json.loads(out)["result"]["lambda"] == pytest.approx(math.pi / 2, abs=1e-6)


class TestTwistedCommand:
    """twisted-eigen twisted"""

    def test_equal_radii(self, capsys):
        """Two equal disks of total area π"""
        code, out = run(capsys, "twisted", "--p", "2", "--q", "2", "--dim", "2", "--r1", "0.70710678", "--r2", "0.70710678")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["result"]["lambda"] == pytest.approx(3.40092, abs=1e-4)
        assert report["result"]["m"] == pytest.approx(0.0, abs=1e-12)
        assert report["residuals"]["structured_flux"]["value"] <= 1e-8
        assert report["flags"]["structured_multiplier"] == "PASS"

    def test_default_radii_split_the_unit_volume(self, capsys):
        """Without radii the equal split of ω_N is used"""
        _code, out = run(capsys, "twisted", "--dim", "2")
        report = json.loads(out)
        assert report["result"]["r1"] == pytest.approx(2.0**-0.5)
        assert report["result"]["r2"] == pytest.approx(2.0**-0.5)

    def test_both_methods(self, capsys):
        """--method both reports the structured-vs-direct gap"""
        code, out = run(capsys, "twisted", "--r1", "0.8", "--r2", "0.6", "--method", "both")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["residuals"]["structured_vs_direct"]["pass"]
        assert report["result"]["direct"]["method"] == "direct"
        assert report["flags"]["structured_multiplier"] == "FLAG"


class TestSweepCommand:
    """twisted-eigen sweep"""

    def test_csv_output(self, capsys):
        """Header, one row per split, then summary lines"""
        code, out = run(capsys, "sweep", "--p", "2", "--q", "2", "--dim", "2", "--steps", "8", "--out", "csv")
        lines = out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "R1,R2,lambda,f1,f2,m,status"
        frame = pd.read_csv(io.StringIO(out), comment="#")
        assert len(frame) == 8
        assert frame["lambda"].idxmin() == 7
        summary = [line for line in lines if line.startswith("# optimal")]
        assert len(summary) == 1
        assert "refined=True" in summary[0]

    def test_csv_is_the_default(self, capsys):
        """Without --out a sweep streams CSV and flags what has no value"""
        code, out = run(capsys, "sweep", "--p", "2", "--q", "2", "--dim", "2", "--steps", "8")
        lines = out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "R1,R2,lambda,f1,f2,m,status"
        frame = pd.read_csv(io.StringIO(out), comment="#")
        outside = frame[frame["status"] == "outside-ansatz"]
        assert len(outside) >= 1
        assert outside["lambda"].isna().all()
        assert outside["R1"].max() < frame.loc[frame["status"] == "ok", "R1"].min()
        flagged = [line for line in lines if line.startswith("# flagged records:")]
        assert flagged == [f"# flagged records: {len(frame) - (frame['status'] == 'ok').sum()}"]

    def test_json_output(self, capsys):
        """JSON sweeps write missing values as null and count flagged statuses"""
        code, out = run(capsys, "sweep", "--steps", "8", "--out", "json")
        report = json.loads(out)
        records = report["result"]["records"]
        assert code == EXIT_OK
        assert len(records) == 8
        assert report["residuals"]["split_asymmetry"]["pass"]
        outside = [record for record in records if record["status"] == "outside-ansatz"]
        assert outside
        assert all(record["lambda"] is None and record["m"] is None for record in outside)
        assert report["flags"]["flagged_statuses"]["outside-ansatz"] == len(outside)
        assert report["flags"]["flagged_records"] == len(outside)

    def test_sweep_needs_dimension_two(self, capsys):
        """dim = 1 has no volume path"""
        code, out = run(capsys, "sweep", "--dim", "1")
        assert code == EXIT_USAGE
        assert out == ""

    @patch("twisted_eigen.cli.sweep_volume")
    def test_numeric_failure_is_a_solver_failure(self, mock_sweep, capsys):
        """ValueErrors raised while solving exit with 3, not 2"""
        mock_sweep.side_effect = ValueError("The function values at the bracket must differ in sign")
        code, out = run(capsys, "sweep", "--steps", "8")
        assert code == EXIT_SOLVER
        assert out == ""


class TestVerifyCommand:
    """twisted-eigen verify"""

    def test_pohozaev_suite(self, capsys):
        """Passing suites exit with 0"""
        code, out = run(capsys, "verify", "--suite", "pohozaev", "--p", "2", "--q", "3", "--dim", "3")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["residuals"]["pohozaev"]["value"] <= 1e-6

    @patch("twisted_eigen.cli.run_suites")
    def test_failing_suite(self, mock_suites, capsys):
        """A failed residual exits with 4"""
        mock_suites.return_value = ({"flux": residual(1.0, 1e-8)}, {})
        code, out = run(capsys, "verify", "--suite", "flux")
        assert code == EXIT_VERIFY
        assert json.loads(out)["flags"]["all_pass"] is False


class TestOneDimensionalCommands:
    """twisted-eigen wirtinger and curve"""

    def test_wirtinger(self, capsys):
        """λ((-1, 1)) = π for p = q = 2"""
        code, out = run(capsys, "wirtinger", "--p", "2", "--q", "2")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["result"]["lambda"] == pytest.approx(math.pi, abs=1e-6)
        assert report["residuals"]["pi"]["pass"]
        assert report["residuals"]["pball_area"]["pass"]

    def test_circle(self, capsys):
        """The circle is an equality case for p = 2"""
        code, out = run(capsys, "curve", "--p", "2", "--shape", "circle")
        report = json.loads(out)
        assert code == EXIT_OK
        assert abs(report["result"]["defect"]) <= 1e-5

    def test_ellipse(self, capsys):
        """An ellipse has positive defect"""
        code, out = run(capsys, "curve", "--p", "2", "--shape", "ellipse", "--a", "1", "--b", "2")
        report = json.loads(out)
        assert code == EXIT_OK
        assert report["result"]["defect"] > 0
        assert report["flags"]["strictly_positive"]


class TestReports:
    def test_non_finite_values_are_refused(self):
        """NaN never reaches the output"""
        with pytest.raises(NonFiniteReportError):
            _dumps({"result": {"lambda": float("nan")}})

    def test_keys_are_sorted(self):
        """Output is stable"""
        assert _dumps({"b": 1, "a": 2}).index('"a"') < _dumps({"b": 1, "a": 2}).index('"b"')
