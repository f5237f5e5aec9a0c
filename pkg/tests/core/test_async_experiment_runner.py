"""
Tests for the async job runner.
"""

import pytest

from nls_lab.core.async_experiment_runner import AsyncExperimentRunner, default_runner, run_sync
from nls_lab.core.boundstate import bound_state_branch
from nls_lab.core.error_handling import OutOfRegimeError


class TestAsyncExperimentRunner:
    """Test cases for AsyncExperimentRunner."""

    def test_init(self):
        """Test runner initialization."""
        assert AsyncExperimentRunner(3).max_concurrent == 3
        with pytest.raises(ValueError):
            AsyncExperimentRunner(0)

    def test_default_runner(self):
        """Test that a missing thread count means one worker."""
        assert default_runner(None).max_concurrent == 1
        assert default_runner(4).max_concurrent == 4

    @pytest.mark.asyncio
    async def test_map_concurrent(self):
        """Test results keyed by job and failures collected separately."""
        def fail():
            raise RuntimeError("bad job")

        runner = AsyncExperimentRunner(2)
        results, failures = await runner.map_concurrent([
            ("a", lambda: 1), ("b", fail), ("c", lambda: 3),
        ])
        assert results == {"a": 1, "c": 3}
        assert set(failures) == {"b"}
        assert isinstance(failures["b"], RuntimeError)

    @pytest.mark.asyncio
    async def test_bound_state_branch_matches_serial(self, well_decomposition):
        """Test that the concurrent branch equals the serial one, in input order."""
        moduli = [0.1, 0.05, 0.025]
        rows = await AsyncExperimentRunner(2).bound_state_branch(moduli, well_decomposition)
        serial = bound_state_branch(moduli, well_decomposition)
        assert [row.modulus for row in rows] == moduli
        for a, b in zip(rows, serial):
            assert a.E == pytest.approx(b.E, abs=1e-14)

    @pytest.mark.asyncio
    async def test_bound_state_branch_failure(self, well_decomposition):
        """Test that the first failing sample is re-raised."""
        with pytest.raises(OutOfRegimeError):
            await AsyncExperimentRunner(2).bound_state_branch([0.1, 0.5], well_decomposition)

    def test_run_sync(self):
        """Test running a coroutine from synchronous code."""
        async def value():
            return "done"

        assert run_sync(value()) == "done"
