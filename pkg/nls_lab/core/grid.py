"""
Uniform spatial and frequency grids, complex fields, quadrature, derivatives and weighted norms.

Every other module carries its state as a ``ComplexField`` on a ``SpatialGrid``. Quadrature is
the periodic trapezoid rule (node set excludes the right endpoint), which is spectrally
accurate for fields that have decayed to machine zero at the boundary.
"""

from dataclasses import dataclass, field
from typing import Callable, Literal, Union

import numpy as np

from .error_handling import InvalidArgumentError

InnerProductKind = Literal["complex", "reduced"]

# 4th-order one-sided closures; rows are offsets 0..4 (first derivative) and 0..5 (second).
_D1_LEFT = np.array([
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
]) / 12.0
_D2_LEFT = np.array([
    [45.0, -154.0, 214.0, -156.0, 61.0, -10.0],
    [10.0, -15.0, -4.0, 14.0, -6.0, 1.0],
]) / 12.0


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid x_j = -L + j*dx, j = 0..n_points-1, dx = 2L/n_points."""

    half_width: float
    n_points: int

    def __post_init__(self) -> None:
        if self.n_points < 64 or self.n_points % 2:
            raise InvalidArgumentError(f"n_points must be even and >= 64, got {self.n_points}")
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise InvalidArgumentError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n_points)

    @property
    def max_wavenumber(self) -> float:
        """Largest wavenumber resolved by the grid (pi/dx)."""
        return float(np.pi / self.spacing)

    def japanese_bracket(self) -> np.ndarray:
        """<x> = sqrt(1 + x^2) at the nodes."""
        return np.sqrt(1.0 + self.nodes ** 2)

    def outer_mask(self, fraction: float = 0.1) -> np.ndarray:
        """Boolean mask of the nodes in the outer ``fraction`` of the domain on each side."""
        return np.abs(self.nodes) >= (1.0 - fraction) * self.half_width

    def inner_mask(self, fraction: float = 0.8) -> np.ndarray:
        """Boolean mask of the nodes in the central ``fraction`` of the domain."""
        return np.abs(self.nodes) <= fraction * self.half_width

    def field(self, values: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]) -> "ComplexField":
        """Build a ComplexField from an array or from a function of x."""
        if callable(values):
            values = values(self.nodes)
        return ComplexField(self, np.asarray(values, dtype=complex))

    def zeros(self) -> "ComplexField":
        return ComplexField(self, np.zeros(self.n_points, dtype=complex))


@dataclass(frozen=True)
class FrequencyGrid:
    """
    Symmetric wavenumber grid on [-K, K] offset by half a spacing (k = 0 is never a node).
    """

    band_limit: float
    m_points: int

    def __post_init__(self) -> None:
        if self.m_points < 2 or self.m_points % 2:
            raise InvalidArgumentError(f"m_points must be even and >= 2, got {self.m_points}")
        if not np.isfinite(self.band_limit) or self.band_limit <= 0:
            raise InvalidArgumentError(f"band_limit must be positive, got {self.band_limit}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.band_limit / self.m_points

    @property
    def nodes(self) -> np.ndarray:
        return -self.band_limit + self.spacing * (np.arange(self.m_points) + 0.5)

    def check_compatible(self, grid: SpatialGrid) -> None:
        """Raise unless the band limit is resolved by the spatial grid."""
        if self.band_limit > grid.max_wavenumber:
            raise InvalidArgumentError(
                f"band limit K={self.band_limit} exceeds pi/dx={grid.max_wavenumber:.4f}"
            )

    def positive_index(self) -> np.ndarray:
        """Indices of the nodes with k > 0, in increasing k."""
        return np.arange(self.m_points // 2, self.m_points)

    def mirror_index(self) -> np.ndarray:
        """Index map i -> index of -k_i."""
        return np.arange(self.m_points)[::-1]


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples of a function on a SpatialGrid."""

    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise InvalidArgumentError(
                f"field has shape {values.shape}, grid expects ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(values))

    def _check_same_grid(self, other: "ComplexField") -> None:
        if other.grid != self.grid:
            raise InvalidArgumentError("fields live on different grids")

    def __add__(self, other: "ComplexField") -> "ComplexField":
        self._check_same_grid(other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        self._check_same_grid(other)
        return ComplexField(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "ComplexField":
        return ComplexField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "ComplexField":
        return ComplexField(self.grid, -self.values)

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, values)

    def norm(self) -> float:
        """L2 norm by trapezoid quadrature."""
        return float(np.sqrt(self.grid.spacing * np.sum(np.abs(self.values) ** 2)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def inner_product(a: ComplexField, b: ComplexField, kind: InnerProductKind = "complex") -> complex:
    """
    Trapezoidal approximation of (a, b) = int conj(a) b dx.

    Args:
        a: Left (conjugated) field
        b: Right field
        kind: "complex" for the full pairing, "reduced" for its real part

    Returns:
        The pairing; a real value stored as complex for the reduced kind
    """
    if a.grid != b.grid:
        raise InvalidArgumentError("inner_product: fields live on different grids")
    value = complex(a.grid.spacing * np.vdot(a.values, b.values))
    if kind == "complex":
        return value
    if kind == "reduced":
        return complex(value.real, 0.0)
    raise InvalidArgumentError(f"unknown inner product kind {kind!r}")


def reduced_inner(a: ComplexField, b: ComplexField) -> float:
    """<a, b> = Re int conj(a) b dx as a float."""
    return inner_product(a, b, "reduced").real


def weighted_sup_norm(u: ComplexField, sigma: float) -> float:
    """max_j <x_j>^{-sigma} |u(x_j)|."""
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be nonnegative, got {sigma}")
    weight = (1.0 + u.grid.nodes ** 2) ** (-sigma / 2.0)
    return float(np.max(weight * np.abs(u.values)))


def derivative_values(values: np.ndarray, spacing: float, order: int, axis: int = -1) -> np.ndarray:
    """4th-order finite differences along ``axis`` with one-sided closures at both ends."""
    if order not in (1, 2):
        raise InvalidArgumentError(f"derivative order must be 1 or 2, got {order}")
    u = np.moveaxis(np.asarray(values), axis, -1)
    out = np.empty(u.shape, dtype=np.result_type(u, float))
    if order == 1:
        out[..., 2:-2] = (-u[..., 4:] + 8.0 * u[..., 3:-1] - 8.0 * u[..., 1:-3] + u[..., :-4]) / 12.0
        for row in range(2):
            out[..., row] = u[..., :5] @ _D1_LEFT[row]
            out[..., -1 - row] = -(u[..., ::-1][..., :5] @ _D1_LEFT[row])
        out /= spacing
    else:
        out[..., 2:-2] = (
            -u[..., 4:] + 16.0 * u[..., 3:-1] - 30.0 * u[..., 2:-2] + 16.0 * u[..., 1:-3] - u[..., :-4]
        ) / 12.0
        for row in range(2):
            out[..., row] = u[..., :6] @ _D2_LEFT[row]
            out[..., -1 - row] = u[..., ::-1][..., :6] @ _D2_LEFT[row]
        out /= spacing ** 2
    return np.moveaxis(out, -1, axis)


def spatial_derivative(u: ComplexField, order: int) -> ComplexField:
    """First or second derivative of a field (4th order, exact on quartics in the interior)."""
    return ComplexField(u.grid, derivative_values(u.values, u.grid.spacing, order))


def h1_norm(u: ComplexField) -> float:
    """sqrt(||u||^2 + ||u_x||^2)."""
    du = spatial_derivative(u, 1)
    return float(np.sqrt(u.norm() ** 2 + du.norm() ** 2))
