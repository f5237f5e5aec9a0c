"""
Error types, error conversion decorators and logging setup for nls-lab.
"""

import asyncio
import functools
import logging
from typing import Any, Callable, Optional, Tuple, TypeVar

import numpy as np

F = TypeVar("F", bound=Callable[..., Any])


class LabError(Exception):
    """Base class for all errors raised by nls-lab."""
    pass


class InvalidArgumentError(LabError, ValueError):
    """Argument outside the domain of an operation (including grid mismatch)."""
    pass


class PreconditionError(LabError):
    """An operation's precondition does not hold for the given input."""
    pass


class BandLimitError(PreconditionError):
    """Field carries energy above the band limit of the frequency grid."""

    def __init__(self, message: str, tail_fraction: float):
        super().__init__(message)
        self.tail_fraction = tail_fraction


class NumericalInstabilityError(LabError):
    """A numerical procedure diverged."""
    pass


class BlowUpError(NumericalInstabilityError):
    """Time stepping produced non-finite values."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(message)
        self.last_good_time = last_good_time


class InconsistencyError(LabError):
    """Two computations that must agree do not."""
    pass


class SpectralAssumptionError(LabError):
    """The spectrum of H does not have the assumed structure."""
    pass


class NearPoleError(SpectralAssumptionError):
    """Resolvent evaluated too close to the bound-state eigenvalue."""
    pass


class OutOfRegimeError(LabError):
    """Input lies outside the small-solution regime the solvers are valid in."""
    pass


class ConvergenceError(LabError):
    """An iterative solver failed to converge."""
    pass


class DecompositionError(ConvergenceError):
    """Newton iteration for the modulation decomposition failed."""
    pass


class BoundaryPollutionError(LabError):
    """Radiation reached the edge of the computational domain."""

    def __init__(self, message: str, time: float, boundary_fraction: float):
        super().__init__(message)
        self.time = time
        self.boundary_fraction = boundary_fraction


class ArtifactError(LabError):
    """Reading or writing an output artifact failed."""
    pass


class ConfigError(LabError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, path: Tuple[Any, ...] = ()):
        location = ".".join(str(p) for p in path)
        super().__init__(f"{location}: {message}" if location else message)
        self.path = path


class ExperimentStageError(LabError):
    """A LabError raised inside a named stage of an experiment."""

    def __init__(self, experiment: str, stage: str, error: LabError):
        super().__init__(f"[{experiment}/{stage}] {type(error).__name__}: {error}")
        self.experiment = experiment
        self.stage = stage
        self.error = error


def convert_linalg_errors(func: F) -> F:
    """
    Decorator to convert numpy linear-algebra and floating point errors to our error types.
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except np.linalg.LinAlgError as e:
            raise NumericalInstabilityError(f"Linear algebra failure in {func.__name__}: {e}") from e
        except FloatingPointError as e:
            raise NumericalInstabilityError(f"Floating point failure in {func.__name__}: {e}") from e

    return wrapper  # type: ignore[return-value]


def experiment_stage(experiment: str, stage: str) -> Callable[[F], F]:
    """
    Decorator attaching experiment/stage context to LabErrors raised by a pipeline step.
    Works on plain and coroutine functions.

    Args:
        experiment: Experiment name
        stage: Stage label reported on failure
    """
    def decorator(func: F) -> F:
        if asyncio.iscoroutinefunction(func):
            @functools.wraps(func)
            async def async_wrapper(*args: Any, **kwargs: Any) -> Any:
                try:
                    return await func(*args, **kwargs)
                except ExperimentStageError:
                    raise
                except LabError as e:
                    raise ExperimentStageError(experiment, stage, e) from e

            return async_wrapper  # type: ignore[return-value]

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return func(*args, **kwargs)
            except ExperimentStageError:
                raise
            except LabError as e:
                raise ExperimentStageError(experiment, stage, e) from e

        return wrapper  # type: ignore[return-value]

    return decorator


class ErrorHandler:
    """Centralized error reporting for the command line."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger(__name__)

    def handle_lab_error(self, error: Exception, operation: str) -> str:
        """
        Handle errors raised by the numerical modules with appropriate messaging.

        Args:
            error: The caught exception
            operation: Description of the operation that failed

        Returns:
            User-friendly error message
        """
        if isinstance(error, ExperimentStageError):
            message = (
                f"Experiment '{error.experiment}' failed in stage '{error.stage}' "
                f"during {operation}: {error.error}"
            )
        elif isinstance(error, ConfigError):
            message = f"Invalid configuration during {operation}: {error}"
        elif isinstance(error, BoundaryPollutionError):
            message = (
                f"Radiation reached the grid boundary at t={error.time:.3f} during {operation}. "
                "Increase the half width or shorten t_end."
            )
        elif isinstance(error, BlowUpError):
            message = (
                f"Evolution blew up after t={error.last_good_time:.3f} during {operation}. "
                "Reduce the time step or the amplitude."
            )
        elif isinstance(error, OutOfRegimeError):
            message = f"Input outside the small-solution regime during {operation}: {error}"
        else:
            message = f"{type(error).__name__} during {operation}: {error}"

        self.logger.error(f"{operation} failed: {error}", exc_info=True)
        return message

    def handle_general_error(self, error: Exception, operation: str) -> str:
        """
        Handle general errors with appropriate messaging.

        Args:
            error: The caught exception
            operation: Description of the operation that failed

        Returns:
            User-friendly error message
        """
        if isinstance(error, LabError):
            return self.handle_lab_error(error, operation)
        message = f"Unexpected error during {operation}: {str(error)}"
        self.logger.error(f"{operation} failed: {error}", exc_info=True)
        return message


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Setup logging configuration for nls-lab.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file: Optional log file path

    Returns:
        Configured logger
    """
    logger = logging.getLogger("nls_lab")
    logger.setLevel(getattr(logging, level.upper()))

    for handler in list(logger.handlers):
        if getattr(handler, "_nls_lab_handler", False):
            logger.removeHandler(handler)
            handler.close()

    # Console handler
    console_handler = logging.StreamHandler()
    console_format = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    console_handler.setFormatter(console_format)
    console_handler._nls_lab_handler = True  # type: ignore[attr-defined]
    logger.addHandler(console_handler)

    # File handler (optional)
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_format = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
        )
        file_handler.setFormatter(file_format)
        file_handler._nls_lab_handler = True  # type: ignore[attr-defined]
        logger.addHandler(file_handler)

    return logger
