"""
Tests for error types, decorators and logging setup.
"""

import logging

import numpy as np
import pytest

from nls_lab.core.error_handling import (
    BlowUpError,
    BoundaryPollutionError,
    ConfigError,
    ErrorHandler,
    ExperimentStageError,
    InvalidArgumentError,
    LabError,
    NumericalInstabilityError,
    OutOfRegimeError,
    PreconditionError,
    convert_linalg_errors,
    experiment_stage,
    setup_logging,
)


class TestErrorTypes:
    """Test cases for the error hierarchy."""

    def test_invalid_argument_is_value_error(self):
        """Test that InvalidArgumentError is also a ValueError."""
        assert issubclass(InvalidArgumentError, ValueError)
        assert issubclass(InvalidArgumentError, LabError)

    def test_config_error_path(self):
        """Test that the failing key path prefixes the message."""
        error = ConfigError("must be <= 0.2", ("initial_data", "epsilon"))
        assert str(error) == "initial_data.epsilon: must be <= 0.2"
        assert error.path == ("initial_data", "epsilon")
        assert str(ConfigError("malformed")) == "malformed"

    def test_payload_attributes(self):
        """Test the extra fields carried by specific errors."""
        assert BlowUpError("nan", last_good_time=3.5).last_good_time == 3.5
        pollution = BoundaryPollutionError("edge", time=10.0, boundary_fraction=2e-6)
        assert pollution.time == 10.0
        assert pollution.boundary_fraction == 2e-6


class TestDecorators:
    """Test cases for convert_linalg_errors and experiment_stage."""

    def test_convert_linalg_errors(self):
        """Test that LinAlgError becomes NumericalInstabilityError."""
        @convert_linalg_errors
        def failing():
            raise np.linalg.LinAlgError("singular")

        with pytest.raises(NumericalInstabilityError, match="failing"):
            failing()

    def test_stage_wraps_lab_errors(self):
        """Test that LabErrors gain experiment/stage context."""
        @experiment_stage("linear-decay", "evolve")
        def step():
            raise PreconditionError("not decayed")

        with pytest.raises(ExperimentStageError) as excinfo:
            step()
        assert excinfo.value.experiment == "linear-decay"
        assert excinfo.value.stage == "evolve"
        assert isinstance(excinfo.value.error, PreconditionError)
        assert "[linear-decay/evolve] PreconditionError" in str(excinfo.value)

    def test_stage_keeps_innermost_context(self):
        """Test that nested stages do not re-wrap."""
        @experiment_stage("outer", "a")
        def outer():
            return inner()

        @experiment_stage("inner", "b")
        def inner():
            raise OutOfRegimeError("too big")

        with pytest.raises(ExperimentStageError) as excinfo:
            outer()
        assert excinfo.value.stage == "b"

    def test_stage_ignores_other_errors(self):
        """Test that non-lab errors pass through unchanged."""
        @experiment_stage("x", "y")
        def step():
            raise KeyError("k")

        with pytest.raises(KeyError):
            step()

    @pytest.mark.asyncio
    async def test_stage_wraps_coroutines(self):
        """Test the coroutine form of experiment_stage."""
        @experiment_stage("boundstate-branch", "sweep")
        async def step():
            raise OutOfRegimeError("|z| too large")

        with pytest.raises(ExperimentStageError) as excinfo:
            await step()
        assert excinfo.value.stage == "sweep"

    @pytest.mark.asyncio
    async def test_stage_coroutine_result(self):
        """Test that a successful coroutine returns its value."""
        @experiment_stage("x", "y")
        async def step():
            return 42

        assert await step() == 42


class TestErrorHandler:
    """Test cases for ErrorHandler."""

    def test_stage_message(self):
        """Test the message for a stage failure."""
        error = ExperimentStageError("soliton-stability", "modulation", OutOfRegimeError("|u| large"))
        message = ErrorHandler().handle_lab_error(error, "running")
        assert "soliton-stability" in message
        assert "modulation" in message

    def test_boundary_message(self):
        """Test the boundary pollution advice."""
        message = ErrorHandler().handle_lab_error(BoundaryPollutionError("edge", 12.5, 1e-5), "evolving")
        assert "t=12.500" in message
        assert "half width" in message

    def test_blow_up_message(self):
        """Test the blow-up advice."""
        message = ErrorHandler().handle_lab_error(BlowUpError("nan", 2.0), "evolving")
        assert "Reduce the time step" in message

    def test_general_error(self):
        """Test unexpected errors."""
        message = ErrorHandler().handle_general_error(RuntimeError("oops"), "sweeping")
        assert message == "Unexpected error during sweeping: oops"

    def test_general_delegates_lab_errors(self):
        """Test that LabErrors get the specific message."""
        message = ErrorHandler().handle_general_error(ConfigError("bad", ("grid",)), "loading")
        assert message.startswith("Invalid configuration during loading")


class TestSetupLogging:
    """Test cases for setup_logging."""

    def test_idempotent(self):
        """Test that repeated setup does not stack handlers."""
        setup_logging("INFO")
        logger = setup_logging("DEBUG")
        ours = [h for h in logger.handlers if getattr(h, "_nls_lab_handler", False)]
        assert len(ours) == 1
        assert logger.level == logging.DEBUG

    def test_log_file(self, temp_dir):
        """Test the optional file handler."""
        path = f"{temp_dir}/lab.log"
        logger = setup_logging("INFO", path)
        logger.info("hello")
        for handler in logger.handlers:
            handler.flush()
        assert "hello" in open(path).read()
        setup_logging("INFO")
