"""
Potential presets for H = -d^2/dx^2 + V.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np

from .error_handling import InvalidArgumentError, PreconditionError
from .grid import SpatialGrid, derivative_values

logger = logging.getLogger(__name__)

PotentialFamily = Literal["gaussian_well", "sech2", "bump", "tabulated", "zero"]

# family -> (depth, width, sign)
PRESET_DEFAULTS: Dict[str, Tuple[float, float, int]] = {
    "gaussian_well": (1.0, 1.0, -1),
    "sech2": (2.0, 1.0, -1),
    "bump": (1.0, 1.0, 1),
    "tabulated": (1.0, 1.0, 1),
    "zero": (0.0, 1.0, 1),
}

DECAY_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class Potential:
    """A real potential sampled on a SpatialGrid."""

    family: str
    depth: float
    width: float
    sign: int
    grid: SpatialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            if np.max(np.abs(values.imag)) > 0:
                raise InvalidArgumentError("potential must be real-valued")
            values = values.real
        values = np.array(values, dtype=float, copy=True)
        if values.shape != (self.grid.n_points,):
            raise InvalidArgumentError("potential samples do not match the grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def derivative(self) -> np.ndarray:
        """dV/dx at the nodes (4th-order differences)."""
        return derivative_values(self.values, self.grid.spacing, 1)

    def boundary_level(self, fraction: float = 0.1) -> float:
        """max |V| over the outer ``fraction`` of the grid."""
        return float(np.max(np.abs(self.values[self.grid.outer_mask(fraction)])))

    def check_decay(self, tolerance: float = DECAY_TOLERANCE) -> None:
        """Raise PreconditionError unless |V| < tolerance on the outer 10% of the grid."""
        level = self.boundary_level()
        if level >= tolerance:
            raise PreconditionError(
                f"potential '{self.family}' has |V|={level:.3e} on the outer 10% of the grid "
                f"(needs < {tolerance:g}); enlarge the half width"
            )

    def on_grid(self, grid: SpatialGrid) -> "Potential":
        """Re-sample the same preset on another grid."""
        if self.family == "tabulated":
            values = np.interp(grid.nodes, self.grid.nodes, self.values, left=0.0, right=0.0)
            return Potential(self.family, self.depth, self.width, self.sign, grid, values)
        return make_potential(self.family, grid, self.depth, self.width, self.sign)


def _shape(family: str, x: np.ndarray, width: float) -> np.ndarray:
    if family in ("gaussian_well", "bump"):
        return np.exp(-(x / width) ** 2)
    if family == "sech2":
        return 1.0 / np.cosh(x / width) ** 2
    if family == "zero":
        return np.zeros_like(x)
    raise InvalidArgumentError(f"unknown potential family {family!r}")


def make_potential(
    family: str,
    grid: SpatialGrid,
    depth: Optional[float] = None,
    width: Optional[float] = None,
    sign: Optional[int] = None,
    table: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
) -> Potential:
    """
    Build a preset potential V = sign * depth * shape(x / width).

    Args:
        family: gaussian_well (exp(-x^2)), sech2, bump (repulsive gaussian), tabulated, zero
        grid: Spatial grid to sample on
        depth: Amplitude V0 > 0 (preset default if None)
        width: Width sigma > 0 (preset default if None)
        sign: +1 or -1 (preset default if None)
        table: (x, V) samples for the tabulated family, linearly interpolated, zero outside

    Returns:
        Sampled Potential
    """
    if family not in PRESET_DEFAULTS:
        raise InvalidArgumentError(
            f"unknown potential family {family!r}; choose from {sorted(PRESET_DEFAULTS)}"
        )
    d_depth, d_width, d_sign = PRESET_DEFAULTS[family]
    depth = d_depth if depth is None else float(depth)
    width = d_width if width is None else float(width)
    sign = d_sign if sign is None else int(sign)
    if sign not in (-1, 1):
        raise InvalidArgumentError(f"sign must be +1 or -1, got {sign}")
    if family != "zero" and (depth <= 0 or width <= 0):
        raise InvalidArgumentError("depth and width must be positive")

    if family == "tabulated":
        if table is None:
            raise InvalidArgumentError("tabulated potential needs (x, V) samples")
        xs, vs = (np.asarray(t, dtype=float) for t in table)
        order = np.argsort(xs)
        values = sign * depth * np.interp(grid.nodes, xs[order], vs[order], left=0.0, right=0.0)
    else:
        values = sign * depth * _shape(family, grid.nodes, width)

    potential = Potential(family, depth, width, sign, grid, values)
    logger.debug(
        f"Potential {family}: depth={depth}, width={width}, sign={sign}, "
        f"boundary level {potential.boundary_level():.2e}"
    )
    return potential
