"""
Twisted Eigen, Copyright (c) contributors.
See also LICENSE.md
"""

import json
import os
from unittest.mock import patch

import pytest

from twisted_eigen.config import CONFIG_ENV, ConfigError, RunConfig, config_path, load_config_file, resolve_config
from twisted_eigen.params import NonAdmissibleError


class TestRunConfig:
    """Defaults and validation"""

    def test_defaults(self):
        """Documented tolerances and grid sizes"""
        config = RunConfig()
        assert (config.ode_tol, config.newton_tol, config.zero_tol) == (1e-10, 1e-10, 1e-12)
        assert config.grid == 512
        assert config.steps == 33
        assert config.out is None
        assert config.timing is False

    @pytest.mark.parametrize(("field", "value"), [("ode_tol", 0.0), ("newton_tol", -1e-3), ("radius", 0.0), ("r1", -1.0), ("total_volume", 0.0)])
    def test_positive_fields(self, field, value):
        """Tolerances and lengths must be positive"""
        with pytest.raises(ConfigError, match=field):
            RunConfig(**{field: value})

    def test_choices(self):
        """Enumerated fields reject unknown values"""
        with pytest.raises(ConfigError, match="method"):
            RunConfig(method="fastest")
        with pytest.raises(ConfigError, match="suite"):
            RunConfig(suite="everything")

    def test_grid_and_steps(self):
        """Grids and sweeps have minimum sizes"""
        with pytest.raises(ConfigError, match="grid"):
            RunConfig(grid=10)
        with pytest.raises(ConfigError, match="steps"):
            RunConfig(steps=2)

    def test_params_are_validated_on_access(self):
        """Non-admissible exponents surface as NonAdmissibleError"""
        config = RunConfig(p=2.0, q=7.0, dim=3)
        with pytest.raises(NonAdmissibleError):
            config.params

    def test_as_dict(self):
        """Every field is echoed"""
        values = RunConfig(p=3.0).as_dict()
        assert values["p"] == 3.0
        assert "timing" in values


class TestConfigFile:
    """Defaults, then file, then flags"""

    def setup_method(self):
        self.values = {"p": 3.0, "q": 2.5, "steps": 9}

    def write(self, tmp_path, values):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(values))
        return path

    @patch("twisted_eigen.config.load_dotenv")
    def test_file_values(self, mock_dotenv, tmp_path):
        """A config file replaces defaults"""
        path = self.write(tmp_path, self.values)
        config = resolve_config({}, str(path))
        assert (config.p, config.q, config.steps) == (3.0, 2.5, 9)

    @patch("twisted_eigen.config.load_dotenv")
    def test_flags_override_file(self, mock_dotenv, tmp_path):
        """Explicit values win, None values are ignored"""
        path = self.write(tmp_path, self.values)
        config = resolve_config({"p": 4.0, "q": None}, str(path))
        assert config.p == 4.0
        assert config.q == 2.5

    @patch("twisted_eigen.config.load_dotenv")
    def test_environment_variable(self, mock_dotenv, tmp_path):
        """TWISTED_EIG_CONFIG names the file when --config is absent"""
        path = self.write(tmp_path, self.values)
        with patch.dict(os.environ, {CONFIG_ENV: str(path)}):
            assert config_path() == path
            assert resolve_config().steps == 9
        mock_dotenv.assert_called()

    @patch("twisted_eigen.config.load_dotenv")
    def test_no_file(self, mock_dotenv, monkeypatch):
        """Without a file the defaults apply"""
        monkeypatch.delenv(CONFIG_ENV, raising=False)
        assert config_path() is None
        assert resolve_config({"dim": 3}) == RunConfig(dim=3)

    def test_unknown_keys(self, tmp_path):
        """Typos in a config file are errors"""
        path = self.write(tmp_path, {"pp": 2.0})
        with pytest.raises(ConfigError, match="unknown config keys"):
            load_config_file(path)

    def test_invalid_json(self, tmp_path):
        """Malformed files are errors"""
        path = tmp_path / "run.json"
        path.write_text("{p: 2")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        """A named file must exist"""
        with pytest.raises(ConfigError, match="does not exist"):
            load_config_file(tmp_path / "absent.json")

    def test_file_must_hold_an_object(self, tmp_path):
        """Top-level arrays are refused"""
        path = self.write(tmp_path, [1, 2])
        with pytest.raises(ConfigError, match="JSON object"):
            load_config_file(path)
