"""
Scattering theory and spectral decomposition of H = -d^2/dx^2 + V.

Jost functions are obtained by a single inward marching pass over the Volterra equation

    m_+(x,k) = 1 + int_x^inf D_k(y - x) V(y) m_+(y,k) dy,   D_k(y) = (e^{2iky} - 1)/(2ik),

with trapezoid weights plus Euler-Maclaurin end corrections at the moving endpoint. The
kernel recursion D_k(a + h) = e^{2ikh} D_k(a) + D_k(h) keeps each step O(1) per k-column and
is uniform in k (including k = 0, where D_0(y) = y, and imaginary k).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.optimize import brentq

from .error_handling import (
    BandLimitError,
    InconsistencyError,
    InvalidArgumentError,
    NumericalInstabilityError,
    SpectralAssumptionError,
    convert_linalg_errors,
)
from .grid import ComplexField, FrequencyGrid, SpatialGrid, derivative_values
from .potentials import Potential, _shape

logger = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2.0 * np.pi)
GENERICITY_THRESHOLD = 1e-6
UNITARITY_LIMIT = 1e-3
DIVERGENCE_LIMIT = 1e6
BAND_TAIL_LIMIT = 0.01
SMALL_K_NODES = 5


def _kernel_step(k: np.ndarray, h: float) -> np.ndarray:
    """D_k(h) = (e^{2ikh} - 1)/(2ik), with the k -> 0 limit h."""
    z = 2j * k * h
    safe = np.where(z == 0, 1.0, z)
    return np.where(z == 0, h, h * np.expm1(safe) / safe)


def _march(v: np.ndarray, dv: np.ndarray, d2v: np.ndarray, h: float, k: np.ndarray
           ) -> Tuple[np.ndarray, np.ndarray]:
    """
    March m(s) = 1 + int_s^inf D_k(y - s) v(y) m(y) dy from the last node to the first.

    Returns m and dm/ds with shape (n, len(k)).
    """
    n = v.shape[0]
    k = np.asarray(k, dtype=complex)
    kappa = 2j * k
    phase = np.exp(kappa * h)
    d_h = _kernel_step(k, h)

    m = np.ones((n, k.size), dtype=complex)
    dm = np.zeros((n, k.size), dtype=complex)
    p_sum = np.zeros(k.size, dtype=complex)  # sum_{l>j} D(x_l - x_j) g_l
    g_sum = np.zeros(k.size, dtype=complex)  # sum_{l>j} g_l
    e_sum = np.zeros(k.size, dtype=complex)  # sum_{l>j} e^{2ik(x_l - x_j)} g_l
    g_next = 0.5 * h * v[-1] * m[-1]
    h2, h4 = h * h / 12.0, h ** 4 / 720.0

    for j in range(n - 2, -1, -1):
        p_sum = phase * p_sum + d_h * (g_sum + g_next)
        g_sum = g_sum + g_next
        e_sum = phase * (e_sum + g_next)

        vj, dvj, d2vj = v[j], dv[j], d2v[j]
        if vj == 0.0 and dvj == 0.0 and d2vj == 0.0:
            m[j] = 1.0 + p_sum
            dm[j] = -e_sum
        else:
            # m'(x_j) ~ a0 + a1 m_j feeds the h^4 correction
            a0 = -e_sum
            a1 = -0.5 * h * vj
            c1 = (kappa ** 2 * vj + 3.0 * kappa * (dvj + vj * a1)
                  + 3.0 * (d2vj + 2.0 * dvj * a1 + vj * (vj - kappa * a1)))
            c0 = 6.0 * dvj * a0
            m[j] = (1.0 + p_sum - h4 * c0) / (1.0 - h2 * vj + h4 * c1)
            dm[j] = -(e_sum + 0.5 * h * vj * m[j] + h2 * (kappa * vj + dvj) * m[j]) / (1.0 + h2 * vj)
        g_next = h * vj * m[j]

    if not np.all(np.isfinite(m)) or np.max(np.abs(m)) > DIVERGENCE_LIMIT:
        raise NumericalInstabilityError(
            f"Jost marching diverged (max |m| = {np.max(np.abs(m)):.3e})"
        )
    return m, dm


def march_jost(V: Potential, k: np.ndarray, max_workers: int = 1
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Jost functions m_+, m_- and their x-derivatives at arbitrary (possibly complex) k.

    Args:
        V: Potential, decayed at the boundary
        k: 1D array of wavenumbers
        max_workers: Threads used to march independent k-column chunks

    Returns:
        (m_plus, dm_plus, m_minus, dm_minus), each of shape (n_points, len(k))
    """
    V.check_decay()
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    h = V.grid.spacing
    v = V.values
    dv = V.derivative()
    d2v = derivative_values(v, h, 2)

    def solve_chunk(ks: np.ndarray) -> Tuple[np.ndarray, ...]:
        mp, dmp = _march(v, dv, d2v, h, ks)
        # m_- is m_+ of the reflected potential, read back in reflected order
        mm_r, dmm_r = _march(v[::-1], -dv[::-1], d2v[::-1], h, ks)
        return mp, dmp, mm_r[::-1], -dmm_r[::-1]

    if max_workers <= 1 or k.size < 2 * max_workers:
        return solve_chunk(k)  # type: ignore[return-value]

    chunks = np.array_split(k, max_workers)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        parts = list(pool.map(solve_chunk, chunks))
    return tuple(np.concatenate([p[i] for p in parts], axis=1) for i in range(4))  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class JostSolution:
    """Normalized Jost functions m_{+/-}(x_j, k_i) and their x-derivatives."""

    potential: Potential
    kgrid: FrequencyGrid
    m_plus: np.ndarray = field(repr=False)
    m_minus: np.ndarray = field(repr=False)
    dm_plus: np.ndarray = field(repr=False)
    dm_minus: np.ndarray = field(repr=False)

    @property
    def k(self) -> np.ndarray:
        return self.kgrid.nodes

    def psi_plus(self) -> np.ndarray:
        x = self.potential.grid.nodes[:, None]
        return np.exp(1j * self.k[None, :] * x) * self.m_plus

    def psi_minus(self) -> np.ndarray:
        x = self.potential.grid.nodes[:, None]
        return np.exp(-1j * self.k[None, :] * x) * self.m_minus

    def boundary_defect(self, fraction: float = 0.1) -> float:
        """max |m_+ - 1| near x = +L and |m_- - 1| near x = -L."""
        x = self.potential.grid.nodes
        right = x >= (1.0 - fraction) * self.potential.grid.half_width
        left = x <= -(1.0 - fraction) * self.potential.grid.half_width
        return float(max(np.max(np.abs(self.m_plus[right] - 1.0)),
                         np.max(np.abs(self.m_minus[left] - 1.0))))

    def ode_residual(self, inner_fraction: float = 0.8) -> float:
        """
        sup over the inner nodes of |-m'' - 2ik m' + V m| (and the mirrored form for m_-),
        with m'' from differencing the marched m'. Equivalent to -psi'' + V psi - k^2 psi.
        """
        grid = self.potential.grid
        inner = grid.inner_mask(inner_fraction)
        v = self.potential.values[:, None]
        k = self.k[None, :]
        res = 0.0
        for m, dm, s in ((self.m_plus, self.dm_plus, 1.0), (self.m_minus, self.dm_minus, -1.0)):
            d2m = derivative_values(dm, grid.spacing, 1, axis=0)
            r = -d2m - s * 2j * k * dm + v * m
            res = max(res, float(np.max(np.abs(r[inner]))))
        return res

    def weight_constants(self) -> Dict[str, float]:
        """
        Fitted constants C in |m_{+/-} - 1| <= C W^1_{+/-}(x) / <k> and |d_x m_{+/-}| <= C W^0_{+/-}(x)
        on +/-x >= -1, where W^s_+(x) = int_x^inf <y>^s |V| dy and W^s_- its mirror.
        """
        grid = self.potential.grid
        x = grid.nodes
        absv = np.abs(self.potential.values)
        bracket = grid.japanese_bracket()
        kb = np.sqrt(1.0 + np.abs(self.k) ** 2)[None, :]
        out: Dict[str, float] = {}
        for s in (0, 1):
            dens = bracket ** s * absv
            left_cum = cumulative_trapezoid(dens, x, initial=0.0)
            w_minus = left_cum
            w_plus = left_cum[-1] - left_cum
            for name, m, dm, w, region in (
                ("plus", self.m_plus, self.dm_plus, w_plus, x >= -1.0),
                ("minus", self.m_minus, self.dm_minus, w_minus, x <= 1.0),
            ):
                usable = region & (w > 1e-10)
                if not np.any(usable):
                    out[f"C_{name}_s{s}"] = 0.0
                    continue
                if s == 1:
                    ratio = np.abs(m[usable] - 1.0) * kb / w[usable, None]
                else:
                    ratio = np.abs(dm[usable]) / w[usable, None]
                out[f"C_{name}_s{s}"] = float(np.max(ratio))
        return out


def solve_jost(V: Potential, kgrid: FrequencyGrid, max_workers: int = 1) -> JostSolution:
    """
    Solve the Volterra equations for m_{+/-} on every node of the frequency grid.

    Args:
        V: Potential with |V| < 1e-12 on the outer 10% of its grid
        kgrid: Frequency grid
        max_workers: Threads for independent k-column chunks

    Returns:
        JostSolution
    """
    kgrid.check_compatible(V.grid)
    mp, dmp, mm, dmm = march_jost(V, kgrid.nodes, max_workers=max_workers)
    jost = JostSolution(V, kgrid, mp, mm, dmp, dmm)
    logger.debug(
        f"Jost solve on n={V.grid.n_points}, m={kgrid.m_points}: "
        f"boundary defect {jost.boundary_defect():.2e}"
    )
    return jost


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """Transmission and reflection coefficients over a FrequencyGrid."""

    kgrid: FrequencyGrid
    T: np.ndarray = field(repr=False)
    R_plus: np.ndarray = field(repr=False)
    R_minus: np.ndarray = field(repr=False)
    genericity_value: complex
    alpha_slope: complex
    alpha_plus: complex
    alpha_minus: complex
    unitarity_defect: float
    cross_defect: float
    transmission_consistency: float

    @property
    def k(self) -> np.ndarray:
        return self.kgrid.nodes

    def matrix_defect(self) -> float:
        """max_k ||S(k) S^{-1}(k) - I|| with S = [[T, R+], [R-, T]], S^{-1} = [[T*, R-*], [R+*, T*]]."""
        T, Rp, Rm = self.T, self.R_plus, self.R_minus
        a = T * np.conj(T) + Rp * np.conj(Rp) - 1.0
        b = T * np.conj(Rm) + Rp * np.conj(T)
        c = Rm * np.conj(T) + T * np.conj(Rp)
        d = Rm * np.conj(Rm) + T * np.conj(T) - 1.0
        return float(np.max(np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2 + np.abs(c) ** 2 + np.abs(d) ** 2)))

    def symmetry_defects(self) -> Dict[str, float]:
        """Defects of the k -> -k relations under both conventions for T(-k)."""
        mirror = self.kgrid.mirror_index()
        return {
            "abs_T": float(np.max(np.abs(np.abs(self.T[mirror]) - np.abs(self.T)))),
            "R_plus_conj": float(np.max(np.abs(self.R_plus[mirror] - np.conj(self.R_plus)))),
            "R_minus_conj": float(np.max(np.abs(self.R_minus[mirror] - np.conj(self.R_minus)))),
            "T_conj": float(np.max(np.abs(self.T[mirror] - np.conj(self.T)))),
            "T_literal": float(np.max(np.abs(self.T[mirror] - self.T))),
        }

    def small_k_ratios(self, count: int = SMALL_K_NODES) -> np.ndarray:
        """|T(k)|/|k| on the ``count`` smallest positive nodes."""
        idx = self.kgrid.positive_index()[:count]
        return np.abs(self.T[idx]) / np.abs(self.k[idx])

    def derivative_bound(self) -> float:
        """max_k <k>(|dT/dk| + |dR+/dk| + |dR-/dk|) by centered differences."""
        dk = self.kgrid.spacing
        total = sum(np.abs(np.gradient(c, dk)) for c in (self.T, self.R_plus, self.R_minus))
        return float(np.max(np.sqrt(1.0 + self.k ** 2) * total))


def _small_k_slope(k: np.ndarray, values: np.ndarray) -> complex:
    """Least-squares slope through the origin: values ~ alpha * k."""
    return complex(np.sum(k * values) / np.sum(k * k))


def compute_scattering(jost: JostSolution, V: Potential) -> ScatteringData:
    """
    Transmission/reflection coefficients from the Jost data.

    1/T = 1 - (1/2ik) int V m_{+/-} dx,   R_{+/-}/T = (1/2ik) int e^{-/+2ikx} V m_{-/+} dx.

    Raises:
        InconsistencyError: unitarity defect above 1e-3 (under-resolved Jost solve)
    """
    if jost.potential.grid != V.grid:
        raise InvalidArgumentError("compute_scattering: Jost data and potential use different grids")
    h = V.grid.spacing
    x = V.grid.nodes[:, None]
    k = jost.k
    v = V.values[:, None]
    ik2 = 2j * k

    int_plus = h * np.sum(v * jost.m_plus, axis=0)
    int_minus = h * np.sum(v * jost.m_minus, axis=0)
    inv_T = 1.0 - int_plus / ik2
    T = 1.0 / inv_T
    T_alt = 1.0 / (1.0 - int_minus / ik2)
    R_plus = T * h * np.sum(np.exp(-ik2[None, :] * x) * v * jost.m_minus, axis=0) / ik2
    R_minus = T * h * np.sum(np.exp(ik2[None, :] * x) * v * jost.m_plus, axis=0) / ik2

    unitarity = float(max(
        np.max(np.abs(np.abs(T) ** 2 + np.abs(R_plus) ** 2 - 1.0)),
        np.max(np.abs(np.abs(T) ** 2 + np.abs(R_minus) ** 2 - 1.0)),
    ))
    cross = float(np.max(np.abs(T * np.conj(R_minus) + np.conj(T) * R_plus)))
    consistency = float(np.max(np.abs(T - T_alt)))

    pos = jost.kgrid.positive_index()[:SMALL_K_NODES]
    value, _ = check_generic(V)

    data = ScatteringData(
        kgrid=jost.kgrid,
        T=T,
        R_plus=R_plus,
        R_minus=R_minus,
        genericity_value=value,
        alpha_slope=_small_k_slope(k[pos], T[pos]),
        alpha_plus=_small_k_slope(k[pos], 1.0 + R_plus[pos]),
        alpha_minus=_small_k_slope(k[pos], 1.0 + R_minus[pos]),
        unitarity_defect=unitarity,
        cross_defect=cross,
        transmission_consistency=consistency,
    )
    logger.debug(
        f"Scattering: unitarity {unitarity:.2e}, cross {cross:.2e}, T consistency {consistency:.2e}"
    )
    if unitarity > UNITARITY_LIMIT:
        raise InconsistencyError(
            f"scattering unitarity defect {unitarity:.3e} exceeds {UNITARITY_LIMIT:g}; "
            "the Jost solve is under-resolved"
        )
    return data


def check_generic(V: Potential, threshold: float = GENERICITY_THRESHOLD) -> Tuple[complex, bool]:
    """
    Genericity scalar int V m_{+/-}(x, 0) dx from both Jost functions.

    Returns:
        (value, is_generic) with is_generic = |value| > threshold

    Raises:
        InconsistencyError: the two signs disagree by more than 1e-6
    """
    mp, _, mm, _ = march_jost(V, np.array([0.0]))
    h = V.grid.spacing
    value_plus = complex(h * np.sum(V.values * mp[:, 0]))
    value_minus = complex(h * np.sum(V.values * mm[:, 0]))
    if abs(value_plus - value_minus) > 1e-6 * max(1.0, abs(value_plus)):
        raise InconsistencyError(
            f"genericity integrals disagree: {value_plus:.10g} vs {value_minus:.10g}"
        )
    return value_plus, bool(abs(value_plus) > threshold)


def hamiltonian_matrix(V: Potential) -> np.ndarray:
    """Dense symmetric -D2 + V with the 5-point 4th-order stencil and zero exterior values."""
    n, h = V.grid.n_points, V.grid.spacing
    c = 1.0 / (12.0 * h * h)
    lap = sparse.diags(
        [-c, 16.0 * c, -30.0 * c, 16.0 * c, -c],
        [-2, -1, 0, 1, 2],
        shape=(n, n),
    )
    return (-lap + sparse.diags(V.values)).toarray()


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """
    Dense eigendecomposition of the discrete H plus the distorted Fourier kernel.

    ``eigenvectors`` are l2-orthonormal columns; ``phi`` is L2-normalized on the grid.
    """

    potential: Potential
    kgrid: FrequencyGrid
    hamiltonian: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)
    jost: JostSolution = field(repr=False)
    scattering: ScatteringData = field(repr=False)
    n_bound: int = 1

    @property
    def grid(self) -> SpatialGrid:
        return self.potential.grid

    @property
    def has_bound_state(self) -> bool:
        return self.n_bound == 1

    @property
    def rho2(self) -> float:
        """rho^2 > 0 with -rho^2 the negative eigenvalue."""
        if not self.has_bound_state:
            raise SpectralAssumptionError("H has no negative eigenvalue")
        return float(-self.eigenvalues[0])

    @property
    def rho(self) -> float:
        return float(np.sqrt(self.rho2))

    @property
    def phi(self) -> ComplexField:
        if not self.has_bound_state:
            raise SpectralAssumptionError("H has no negative eigenvalue")
        return ComplexField(self.grid, self.eigenvectors[:, 0] / np.sqrt(self.grid.spacing))

    @property
    def continuous_slice(self) -> slice:
        return slice(self.n_bound, None)

    def project_discrete(self, h: ComplexField) -> ComplexField:
        """P_d h = (phi, h) phi (zero without a bound state)."""
        if not self.has_bound_state:
            return self.grid.zeros()
        phi = self.phi
        return phi * complex(self.grid.spacing * np.vdot(phi.values, h.values))

    def project_continuous(self, h: ComplexField) -> ComplexField:
        """P_c h = h - P_d h."""
        return h - self.project_discrete(h)

    def apply_hamiltonian(self, h: ComplexField) -> ComplexField:
        return ComplexField(self.grid, self.hamiltonian @ h.values)

    def spectral_function(self, h: ComplexField, multiplier: np.ndarray) -> ComplexField:
        """U diag(multiplier) U^T h for a multiplier sampled at the eigenvalues."""
        U = self.eigenvectors
        return ComplexField(self.grid, U @ (multiplier * (U.T @ h.values)))

    def eigenvector_residual(self) -> float:
        """||H phi + rho^2 phi||_2."""
        phi = self.phi
        return ComplexField(self.grid, self.hamiltonian @ phi.values - self.eigenvalues[0] * phi.values).norm()


def distorted_kernel(jost: JostSolution, scattering: ScatteringData) -> np.ndarray:
    """
    K(x, k) = T(k) psi_+(x, k)/sqrt(2 pi) for k >= 0 and T(-k) psi_-(x, -k)/sqrt(2 pi) for k < 0.
    """
    x = jost.potential.grid.nodes[:, None]
    k = jost.k
    mirror = jost.kgrid.mirror_index()
    pos = k > 0
    # for k < 0, use data at |k| (the mirrored node)
    T_abs = np.where(pos, scattering.T, scattering.T[mirror])
    m = np.where(pos[None, :], jost.m_plus, jost.m_minus[:, mirror])
    return T_abs[None, :] * np.exp(1j * k[None, :] * x) * m / SQRT_2PI


@convert_linalg_errors
def discrete_spectrum(
    V: Potential,
    kgrid: Optional[FrequencyGrid] = None,
    expected_bound_states: int = 1,
    max_workers: int = 1,
    jost: Optional[JostSolution] = None,
) -> SpectralDecomposition:
    """
    Dense eigensolve of the finite-difference Hamiltonian and assembly of the distorted kernel.

    Args:
        V: Potential
        kgrid: Frequency grid for the distorted transform (K = 8, m = 512 by default)
        expected_bound_states: 1 for trapping experiments, 0 for the no-eigenvalue regime
        max_workers: Threads for the Jost solve
        jost: Precomputed Jost data on ``kgrid``

    Returns:
        SpectralDecomposition

    Raises:
        SpectralAssumptionError: number of negative eigenvalues differs from the expected one
    """
    if expected_bound_states not in (0, 1):
        raise InvalidArgumentError("only 0 or 1 bound states are supported")
    kgrid = kgrid or FrequencyGrid(8.0, 512)
    H = hamiltonian_matrix(V)
    eigenvalues, eigenvectors = linalg.eigh(H)
    n_negative = int(np.sum(eigenvalues < 0.0))
    if n_negative != expected_bound_states:
        raise SpectralAssumptionError(
            f"expected {expected_bound_states} negative eigenvalue(s), found {n_negative}"
        )
    if n_negative == 1:
        v0 = eigenvectors[:, 0]
        if v0[np.argmax(np.abs(v0))] < 0:
            eigenvectors[:, 0] = -v0

    if jost is None:
        jost = solve_jost(V, kgrid, max_workers=max_workers)
    scattering = compute_scattering(jost, V)
    kernel = distorted_kernel(jost, scattering)

    dec = SpectralDecomposition(
        potential=V,
        kgrid=kgrid,
        hamiltonian=H,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        kernel=kernel,
        jost=jost,
        scattering=scattering,
        n_bound=n_negative,
    )
    if n_negative:
        logger.info(f"Bound state: -rho^2 = {eigenvalues[0]:.12g}")
    return dec


@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Distorted Fourier coefficients on a FrequencyGrid."""

    kgrid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def norm(self) -> float:
        return float(np.sqrt(self.kgrid.spacing * np.sum(np.abs(self.values) ** 2)))

    def scaled(self, multiplier: np.ndarray) -> "SpectralCoefficients":
        return SpectralCoefficients(self.kgrid, self.values * multiplier)


def band_tail_fraction(u: ComplexField, band_limit: float) -> float:
    """Fraction of the flat-FFT energy of u above |k| = band_limit."""
    spectrum = np.abs(np.fft.fft(u.values)) ** 2
    total = float(np.sum(spectrum))
    if total == 0.0:
        return 0.0
    freqs = 2.0 * np.pi * np.fft.fftfreq(u.grid.n_points, u.grid.spacing)
    return float(np.sum(spectrum[np.abs(freqs) > band_limit]) / total)


def distorted_transform(u: ComplexField, dec: SpectralDecomposition, check_band: bool = True
                        ) -> SpectralCoefficients:
    """
    u~(k) = int conj(K(x, k)) u(x) dx by trapezoid quadrature.

    Raises:
        BandLimitError: more than 1% of the flat-FFT energy lies above the band limit
    """
    if u.grid != dec.grid:
        raise InvalidArgumentError("distorted_transform: field is not on the decomposition's grid")
    if check_band:
        tail = band_tail_fraction(u, dec.kgrid.band_limit)
        if tail > BAND_TAIL_LIMIT:
            raise BandLimitError(
                f"{100 * tail:.2f}% of the field energy lies above K={dec.kgrid.band_limit}", tail
            )
    return SpectralCoefficients(dec.kgrid, dec.grid.spacing * (dec.kernel.conj().T @ u.values))


def distorted_inverse(coeffs: SpectralCoefficients, dec: SpectralDecomposition) -> ComplexField:
    """F~^{-1}[c](x) = int K(x, k) c(k) dk by midpoint quadrature on the frequency grid."""
    if coeffs.kgrid != dec.kgrid:
        raise InvalidArgumentError("distorted_inverse: coefficients use a different frequency grid")
    return ComplexField(dec.grid, dec.kgrid.spacing * (dec.kernel @ coeffs.values))


PropagatorMethod = Literal["dense", "distorted"]


def linear_propagator(h: ComplexField, t: float, dec: SpectralDecomposition,
                      method: PropagatorMethod = "dense") -> ComplexField:
    """
    e^{iHt} h.

    Args:
        h: Field
        t: Time
        dec: Spectral decomposition
        method: "dense" (eigendecomposition of the discrete H) or "distorted"
            (F~^{-1} e^{ik^2 t} F~ P_c h + e^{-i rho^2 t} P_d h)
    """
    if not np.isfinite(t):
        raise InvalidArgumentError(f"time must be finite, got {t}")
    if method == "dense":
        return dec.spectral_function(h, np.exp(1j * dec.eigenvalues * t))
    if method == "distorted":
        coeffs = distorted_transform(dec.project_continuous(h), dec)
        radiation = distorted_inverse(coeffs.scaled(np.exp(1j * dec.kgrid.nodes ** 2 * t)), dec)
        if not dec.has_bound_state:
            return radiation
        return radiation + dec.project_discrete(h) * np.exp(-1j * dec.rho2 * t)
    raise InvalidArgumentError(f"unknown propagator method {method!r}")


def propagator_defect(h: ComplexField, t: float, dec: SpectralDecomposition) -> float:
    """Relative L2 difference between the dense and distorted propagators."""
    a = linear_propagator(h, t, dec, "dense")
    b = linear_propagator(h, t, dec, "distorted")
    scale = max(h.norm(), np.finfo(float).tiny)
    return (a - b).norm() / scale


def shooting_eigenvalue(V: Potential, n_scan: int = 120) -> float:
    """
    Ground-state eigenvalue -rho^2 of the continuous H by shooting.

    Decaying solutions e^{-kappa|x|} are integrated inwards from both ends and matched at
    x = 0; the largest kappa where the Wronskian changes sign is refined with brentq.
    """
    grid = V.grid
    if V.family == "tabulated":
        def potential(x: float) -> float:
            return float(np.interp(x, grid.nodes, V.values))
    else:
        def potential(x: float) -> float:
            return float(V.sign * V.depth * _shape(V.family, np.array([x]), V.width)[0])

    x_edge = 0.9 * grid.half_width

    def rhs(x: float, y: np.ndarray, kappa: float) -> np.ndarray:
        return np.array([y[1], (potential(x) + kappa ** 2) * y[0]])

    def wronskian(kappa: float) -> float:
        right = solve_ivp(rhs, (x_edge, 0.0), [1.0, -kappa], args=(kappa,),
                          method="DOP853", rtol=1e-12, atol=1e-14)
        left = solve_ivp(rhs, (-x_edge, 0.0), [1.0, kappa], args=(kappa,),
                         method="DOP853", rtol=1e-12, atol=1e-14)
        yr, yl = right.y[:, -1], left.y[:, -1]
        scale = np.hypot(*yr) * np.hypot(*yl)
        return float((yl[0] * yr[1] - yl[1] * yr[0]) / scale)

    depth = float(np.max(-V.values))
    if depth <= 0:
        raise SpectralAssumptionError("potential has no well; no bound state to shoot for")
    kappas = np.linspace(np.sqrt(depth) * 0.999, 1e-3, n_scan)
    values = [wronskian(kappas[0])]
    for i in range(1, n_scan):
        values.append(wronskian(kappas[i]))
        if np.sign(values[-1]) != np.sign(values[-2]):
            kappa = brentq(wronskian, kappas[i], kappas[i - 1], xtol=1e-14, rtol=1e-13)
            return -float(kappa) ** 2
    raise SpectralAssumptionError("shooting found no bound state")
