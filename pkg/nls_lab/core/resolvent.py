"""
Resolvent (H - tau)^{-1} through its Green's function built from Jost solutions.

For x > y the kernel is f_+(x) f_-(y) / W with W = f_+ f_-' - f_+' f_-; for tau >= 0 the
boundary value tau +/- i0 uses k = +/-sqrt(tau), for tau < 0 the decaying choice k = i sqrt(-tau).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Literal, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .error_handling import InconsistencyError, InvalidArgumentError, NearPoleError
from .grid import ComplexField
from .spectral import JostSolution, SpectralDecomposition, march_jost

logger = logging.getLogger(__name__)

Side = Literal["+", "-"]
POLE_GUARD = 1e-3
WRONSKIAN_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class Resolvent:
    """Green's-function representation of (H - tau -/+ i0)^{-1} on a grid."""

    dec: SpectralDecomposition = field(repr=False)
    tau: float
    side: str
    k: complex
    wronskian: complex
    wronskian_variation: float
    m_plus: np.ndarray = field(repr=False)
    m_minus: np.ndarray = field(repr=False)

    def __call__(self, g: ComplexField) -> ComplexField:
        """(R g)(x) = int G(x, y) g(y) dy by trapezoid quadrature."""
        if g.grid != self.dec.grid:
            raise InvalidArgumentError("resolvent: field is not on the decomposition's grid")
        return ComplexField(g.grid, self._apply(g.values))

    def _apply(self, values: np.ndarray) -> np.ndarray:
        h = self.dec.grid.spacing
        a = np.exp(1j * self.k * h)
        left_src = h * self.m_minus * values
        right_src = h * self.m_plus * values
        # A_j = sum_{l<=j} e^{ik(x_j - x_l)} m_-(x_l) g_l h
        lower = lfilter([1.0], [1.0, -a], left_src)
        # B_j = sum_{l>j} e^{ik(x_l - x_j)} m_+(x_l) g_l h
        upper = lfilter([1.0], [1.0, -a], right_src[::-1])[::-1] - right_src
        return (self.m_plus * lower + self.m_minus * upper) / self.wronskian

    def kernel(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """G(x_rows, x_cols) as a dense block."""
        x = self.dec.grid.nodes
        xr, xc = x[rows][:, None], x[cols][None, :]
        upper = xr >= xc
        big = np.where(upper, xr, xc)
        small = np.where(upper, xc, xr)
        mp = np.where(upper, self.m_plus[rows][:, None], self.m_plus[cols][None, :])
        mm = np.where(upper, self.m_minus[cols][None, :], self.m_minus[rows][:, None])
        return np.exp(1j * self.k * (big - small)) * mp * mm / self.wronskian

    def apply_continuous(self, g: ComplexField) -> ComplexField:
        """R P_c g."""
        return self(self.dec.project_continuous(g))

    def identity_defect(self, g: ComplexField) -> float:
        """||(H - tau) R g - g||_2 / ||g||_2 with the discrete H."""
        rg = self(g)
        back = self.dec.apply_hamiltonian(rg) - rg * self.tau
        return (back - g).norm() / max(g.norm(), np.finfo(float).tiny)


def _wavenumber(tau: float, side: str) -> complex:
    if side not in ("+", "-"):
        raise InvalidArgumentError(f"side must be '+' or '-', got {side!r}")
    if tau >= 0:
        root = np.sqrt(tau)
        return complex(root if side == "+" else -root)
    return complex(0.0, np.sqrt(-tau))


def resolvent_kernel(tau: float, side: Side, dec: SpectralDecomposition,
                     jost: Optional[JostSolution] = None) -> Resolvent:
    """
    Build the resolvent at spectral parameter tau.

    Args:
        tau: Spectral parameter
        side: "+" for tau + i0, "-" for tau - i0 (ignored below the continuous spectrum)
        dec: Spectral decomposition (grid, potential, bound state)
        jost: Jost data supplying the potential (defaults to the decomposition's)

    Raises:
        InvalidArgumentError: sqrt(tau) outside the frequency band
        NearPoleError: |tau + rho^2| < 1e-3
        InconsistencyError: Wronskian varies by more than 1e-6 (relative) over the inner grid
    """
    if not np.isfinite(tau):
        raise InvalidArgumentError(f"tau must be finite, got {tau}")
    jost = jost or dec.jost
    if tau >= 0 and np.sqrt(tau) > jost.kgrid.band_limit:
        raise InvalidArgumentError(
            f"sqrt(tau)={np.sqrt(tau):.4f} lies outside the band K={jost.kgrid.band_limit}"
        )
    if dec.has_bound_state and abs(tau + dec.rho2) < POLE_GUARD:
        raise NearPoleError(f"tau={tau} is within {POLE_GUARD:g} of the eigenvalue {-dec.rho2:.8g}")

    k = _wavenumber(tau, side)
    mp, dmp, mm, dmm = (a[:, 0] for a in march_jost(jost.potential, np.array([k])))
    w_profile = -2j * k * mp * mm + mp * dmm - dmp * mm
    inner = dec.grid.inner_mask(0.8)
    wronskian = complex(np.mean(w_profile[inner]))
    if wronskian == 0:
        raise InconsistencyError(f"Wronskian vanishes at tau={tau}")
    variation = float(np.max(np.abs(w_profile[inner] - wronskian)) / abs(wronskian))
    if variation > WRONSKIAN_TOLERANCE:
        raise InconsistencyError(
            f"Wronskian not constant at tau={tau}: relative variation {variation:.3e}"
        )
    logger.debug(f"Resolvent tau={tau}{side}: W={wronskian:.8g}, variation {variation:.2e}")
    return Resolvent(dec, float(tau), side, k, wronskian, variation, mp, mm)


def weighted_resolvent_bound(
    dec: SpectralDecomposition,
    taus: Iterable[float],
    sides: Sequence[Side] = ("+", "-"),
    stride: int = 4,
    window: float = 30.0,
) -> Dict[str, float]:
    """
    sup over tau of the L^inf -> L^inf norm of <x>^{-2} R(tau +/- i0) P_c <x>^{-2}.

    The kernel is sampled on every ``stride``-th node with |x| <= window; the weights make the
    exterior contribution negligible. R P_c = R - phi phi^T / (-rho^2 - tau).

    Returns:
        {"bound": max value, "tau@<tau><side>": value, ...}
    """
    grid = dec.grid
    idx = np.flatnonzero(np.abs(grid.nodes) <= window)[::stride]
    weight = 1.0 / (1.0 + grid.nodes[idx] ** 2)
    step = stride * grid.spacing
    phi = dec.phi.values[idx].real if dec.has_bound_state else None
    out: Dict[str, float] = {}
    for tau in taus:
        for side in (sides if tau >= 0 else ("+",)):
            res = resolvent_kernel(tau, side, dec)
            block = res.kernel(idx, idx)
            if phi is not None:
                block = block - np.outer(phi, phi) / (-dec.rho2 - tau)
            weighted = weight[:, None] * block * weight[None, :]
            out[f"tau@{tau:g}{side}"] = float(np.max(np.sum(np.abs(weighted), axis=1) * step))
    out["bound"] = max(out.values()) if out else 0.0
    return out
