"""
Tests for the experiment pipelines and their helpers.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from nls_lab.core.async_experiment_runner import AsyncExperimentRunner
from nls_lab.core.file_manager import FAILURE_MARKER
from nls_lab.core.grid import SpatialGrid
from nls_lab.models import default_config
from nls_lab.workflows import experiments
from nls_lab.workflows.experiments import (
    PIPELINE_STEPS,
    START_TIME,
    ExperimentWorkflows,
    _Record,
    _plain,
    dyadic_horizons,
    nonincreasing,
    random_wavepackets,
    run_experiment,
    strictly_decreasing,
    wavepacket,
)

SMALL = {
    "grid": {"half_width": 20.0, "n_points": 512},
    "frequency": {"band_limit": 8.0, "m_points": 256},
    "analysis": {"branch_moduli": [0.1, 0.05, 0.025]},
}


@pytest.fixture
def branch_config():
    return default_config("boundstate-branch", **SMALL)


@pytest.fixture
def trapless_config():
    """A bump has no bound state, so the branch stage cannot run."""
    return default_config("boundstate-branch", potential={"family": "bump"}, **SMALL)


class TestHelpers:
    """Test cases for the pipeline building blocks."""

    def test_wavepacket_norm(self):
        """Test that the packet carries L2 norm epsilon."""
        cfg = default_config("linear-decay", grid={"half_width": 100.0, "n_points": 1024},
                             initial_data={"epsilon": 0.03})
        packet = wavepacket(cfg, SpatialGrid(100.0, 1024))
        assert packet.norm() == pytest.approx(0.03, rel=1e-12)

    def test_random_wavepackets_seeded(self):
        """Test that packets are unit norm and reproducible."""
        grid = SpatialGrid(20.0, 512)
        first = random_wavepackets(5, grid, 2)
        second = random_wavepackets(5, grid, 2)
        for a, b in zip(first, second):
            assert a.norm() == pytest.approx(1.0)
            assert np.array_equal(a.values, b.values)

    def test_dyadic_horizons(self):
        """Test the configured times plus the doubling of the largest."""
        cfg = default_config("modified-scattering")
        assert dyadic_horizons(cfg, 200.0) == [25.0, 50.0, 100.0, 200.0]
        assert dyadic_horizons(cfg, 120.0) == [25.0, 50.0, 100.0]
        assert all(T / 2.0 >= START_TIME for T in dyadic_horizons(cfg, 200.0))

    def test_monotonicity(self):
        """Test strictly_decreasing and nonincreasing with slack."""
        assert strictly_decreasing([3.0, 2.0, 1.0])
        assert not strictly_decreasing([3.0, 3.0, 1.0])
        assert nonincreasing([3.0, 3.1, 1.0])
        assert not nonincreasing([3.0, 4.0, 1.0])
        assert not nonincreasing([3.0, 3.1, 3.2])

    def test_plain(self):
        """Test the JSON-friendly conversion."""
        value = _plain({"a": np.float64(1.5), "b": np.array([1, 2]), "c": 1 + 2j,
                        "d": float("nan"), "e": np.bool_(True)})
        assert value == {"a": 1.5, "b": [1, 2], "c": {"re": 1.0, "im": 2.0}, "d": None, "e": True}
        json.dumps(value)


class TestRunExperiment:
    """Test cases for running whole pipelines."""

    @pytest.mark.slow
    def test_writes_manifest_and_config(self, branch_config, temp_dir):
        """Test that a run leaves its config, manifest and criteria behind."""
        out = Path(temp_dir) / "branch"
        result = run_experiment(branch_config, out)
        assert result.total_steps == 5
        assert (out / "config.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["experiment"] == "boundstate-branch"
        assert manifest["code_version"] == "0.1.0"
        assert json.loads((out / "config.json").read_text()) == manifest["config"]
        assert result.manifest.criteria
        assert result.success == result.manifest.success

    def test_failure_marker(self, trapless_config, temp_dir):
        """Test that an aborted stage is recorded in the manifest and the FAILED marker."""
        out = Path(temp_dir) / "trapless"
        result = run_experiment(trapless_config, out)
        assert not result.success
        assert result.manifest.failed_stage == "branch"
        assert "SpectralAssumptionError" in result.manifest.error
        assert (out / FAILURE_MARKER).exists()
        assert "aborted" in result.message
        assert json.loads((out / "manifest.json").read_text())["error"] == result.manifest.error

    @pytest.mark.asyncio
    async def test_run_many(self, trapless_config, temp_dir):
        """Test concurrent runs come back in input order."""
        workflows = ExperimentWorkflows(AsyncExperimentRunner(2))
        runs = [(trapless_config, Path(temp_dir) / "a"), (trapless_config, Path(temp_dir) / "b")]
        results = await workflows.run_many(runs)
        assert [r.out_dir for r in results] == [Path(temp_dir) / "a", Path(temp_dir) / "b"]
        assert not any(r.success for r in results)

    def test_default_workflows_use_one_worker(self):
        """Test that workflows built without a runner fall back to a single worker."""
        assert ExperimentWorkflows().runner.max_concurrent == 1


class TestStages:
    """Test cases for individual pipeline stages."""

    def test_pipeline_step_counts(self):
        """Test the step totals after the conservation and model-problem far-field stages."""
        assert PIPELINE_STEPS["soliton-stability"] == 7
        assert PIPELINE_STEPS["model-problem"] == 5

    def test_conservation_stage(self, well_decomposition, monkeypatch):
        """Test that the stage records both drift ratios and confirms c4 = 1/2."""
        monkeypatch.setattr(experiments, "CONSERVATION_WINDOW", 1.0)
        cfg = default_config("soliton-stability", evolution={"dt": 0.02}, **SMALL)
        u0 = well_decomposition.grid.field(lambda x: np.exp(-x ** 2 / 4.0 + 0.5j * x))
        record = _Record(PIPELINE_STEPS[cfg.experiment], lambda message: None)
        ExperimentWorkflows()._conservation(cfg, u0, well_decomposition, record)
        assert set(record.measurements["energy_drift_ratios"]) == {"c4=0.25", "c4=0.5"}
        assert set(record.measurements["energy_drifts"]["c4=0.5"]) == {"dt", "dt_half"}
        criteria = {c.name: c for c in record.criteria}
        assert criteria["energy_drift_ratio"].passed
        assert criteria["conserved_energy_prefactor"].passed
        assert criteria["conserved_energy_prefactor"].value == 0.5

    def test_conservation_stage_skips_linear_runs(self, well_decomposition):
        """Test that a linear configuration records no ratios and no criteria."""
        cfg = default_config("soliton-stability", evolution={"nonlinearity_sign": 0}, **SMALL)
        record = _Record(PIPELINE_STEPS[cfg.experiment], lambda message: None)
        ExperimentWorkflows()._conservation(cfg, well_decomposition.phi, well_decomposition, record)
        assert record.measurements["energy_drift_ratios"] is None
        assert not record.criteria
