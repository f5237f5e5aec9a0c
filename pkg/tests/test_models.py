"""
Tests for configuration parsing and the run manifest.
"""

from datetime import datetime, timezone

import pytest

from nls_lab.core.error_handling import ConfigError
from nls_lab.models import (
    EXPERIMENTS,
    CriterionResult,
    RunManifest,
    default_config,
    load_config,
    parse_config,
    serialize_config,
)


class TestParseConfig:
    """Test cases for parse_config."""

    def test_toml(self):
        """Test a TOML document merged over the experiment defaults."""
        cfg = parse_config(
            'experiment = "linear-decay"\n'
            "[grid]\n"
            "half_width = 50.0\n"
            "n_points = 1024\n"
        )
        assert cfg.experiment == "linear-decay"
        assert cfg.grid.half_width == 50.0
        assert cfg.grid.n_points == 1024
        assert cfg.evolution.nonlinearity_sign == 0
        assert cfg.z0 == 0

    def test_json(self):
        """Test a JSON document."""
        cfg = parse_config('{"experiment": "boundstate-branch", "seed": 7}')
        assert cfg.seed == 7
        assert cfg.grid.n_points == 1024

    def test_epsilon_too_large(self):
        """Test that the constraint violation names its key path."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config('experiment = "soliton-stability"\n[initial_data]\nepsilon = 0.5\n')
        assert excinfo.value.path == ("initial_data", "epsilon")
        assert str(excinfo.value).startswith("initial_data.epsilon:")

    def test_unknown_key(self):
        """Test that unknown keys are rejected."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config('experiment = "linear-decay"\n[grid]\nbogus = 1\n')
        assert excinfo.value.path == ("grid", "bogus")

    def test_odd_grid(self):
        """Test the even node count constraint."""
        with pytest.raises(ConfigError, match="even"):
            parse_config('experiment = "linear-decay"\n[grid]\nn_points = 1025\n')

    def test_soliton_too_large(self):
        """Test that |z0| above 0.2 is rejected."""
        with pytest.raises(ConfigError, match="0.2"):
            parse_config('experiment = "soliton-stability"\n[initial_data]\nsoliton_z0_re = 0.15\nsoliton_z0_im = 0.15\n')

    def test_missing_experiment(self):
        """Test that the experiment key is required."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config("seed = 1\n")
        assert excinfo.value.path == ("experiment",)

    def test_unknown_experiment(self):
        """Test an experiment name that does not exist."""
        with pytest.raises(ConfigError, match="unknown experiment"):
            parse_config('experiment = "nonsense"\n')

    def test_malformed(self):
        """Test a document that is neither TOML nor JSON."""
        with pytest.raises(ConfigError, match="malformed"):
            parse_config("{not json")


class TestConfigHelpers:
    """Test cases for defaults, serialization and loading."""

    @pytest.mark.parametrize("experiment", EXPERIMENTS)
    def test_default_config(self, experiment):
        """Test that every experiment has a valid default config."""
        cfg = default_config(experiment)
        assert cfg.experiment == experiment
        assert cfg.grid.n_points % 2 == 0

    def test_default_overrides(self):
        """Test nested overrides on top of the defaults."""
        cfg = default_config("scattering-audit", grid={"n_points": 512})
        assert cfg.grid.n_points == 512
        assert cfg.grid.half_width == 40.0

    def test_default_unknown(self):
        """Test an unknown experiment name."""
        with pytest.raises(ConfigError):
            default_config("nonsense")

    def test_serialize_round_trip(self):
        """Test that the canonical form parses back to an equal config."""
        cfg = default_config("modified-scattering", seed=3)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_load_config(self, temp_dir):
        """Test loading from a file."""
        path = f"{temp_dir}/run.toml"
        with open(path, "w") as f:
            f.write('experiment = "model-problem"\n')
        assert load_config(path).potential.family == "bump"

    def test_load_missing(self, temp_dir):
        """Test a missing config file."""
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(f"{temp_dir}/missing.toml")


class TestRunManifest:
    """Test cases for RunManifest."""

    def _manifest(self, **kwargs):
        return RunManifest(
            experiment="linear-decay",
            config={"seed": 0},
            code_version="0.1.0",
            started_at=datetime(2024, 1, 1, tzinfo=timezone.utc),
            **kwargs,
        )

    def test_success(self):
        """Test success requires every criterion and no error."""
        passing = CriterionResult(name="a", passed=True, value=1.0)
        failing = CriterionResult(name="b", passed=False, value=2.0)
        assert self._manifest(criteria=[passing]).success
        assert not self._manifest(criteria=[passing, failing]).success
        assert not self._manifest(criteria=[passing], error="BlowUpError: nan").success

    def test_deterministic_view(self):
        """Test that wall-clock fields are excluded."""
        first = self._manifest(wall_clock_seconds=1.0)
        second = self._manifest(wall_clock_seconds=5.0)
        second.started_at = datetime(2025, 6, 1, tzinfo=timezone.utc)
        assert first.deterministic_view() == second.deterministic_view()
        assert "started_at" not in first.deterministic_view()
