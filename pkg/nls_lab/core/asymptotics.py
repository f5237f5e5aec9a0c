"""
Long-time diagnostics of the radiation eta(t): distorted profiles and their logarithmic phase
correction, power-law fits, local decay and smoothing functionals, the cubic resonance
approximation, far-field comparison and the low/high time-frequency split.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.signal.windows import tukey
from scipy.stats import linregress

from .error_handling import BandLimitError, InvalidArgumentError, PreconditionError
from .evolution import Trajectory
from .grid import ComplexField, FrequencyGrid, derivative_values
from .modulation import ModulationPath
from .spectral import (
    BAND_TAIL_LIMIT,
    SpectralCoefficients,
    SpectralDecomposition,
    band_tail_fraction,
    distorted_inverse,
    distorted_transform,
)

logger = logging.getLogger(__name__)

BOOTSTRAP_ALPHA = 0.1
TAPER_FRACTION = 0.1
MIN_FIT_SAMPLES = 8
FAR_FIELD_MIN_TIME = 20.0


# --------------------------------------------------------------------------------------------
# Profiles
# --------------------------------------------------------------------------------------------

def compute_profile(eta: ComplexField, t: float, dec: SpectralDecomposition,
                    check_band: bool = True) -> SpectralCoefficients:
    """f~(t, k) = e^{-itk^2} F~[P_c eta](k)."""
    coeffs = distorted_transform(dec.project_continuous(eta), dec, check_band=check_band)
    return coeffs.scaled(np.exp(-1j * t * dec.kgrid.nodes ** 2))


def _project_rows(fields: np.ndarray, dec: SpectralDecomposition) -> np.ndarray:
    if not dec.has_bound_state:
        return fields
    phi = dec.phi.values
    weights = dec.grid.spacing * (fields @ np.conj(phi))
    return fields - np.outer(weights, phi)


@dataclass(frozen=True, eq=False)
class ProfileSeries:
    """
    Profiles f~(t_i, k_j), the accumulated phase Phi and the modified profile w = e^{i s Phi/2} f~,
    with s the sign of the nonlinearity.
    """

    times: np.ndarray = field(repr=False)
    kgrid: FrequencyGrid
    profiles: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)
    modified: np.ndarray = field(repr=False)
    eta_fields: np.ndarray = field(repr=False)
    nonlinearity_sign: int = 1

    def __len__(self) -> int:
        return len(self.times)

    def row(self, index: int) -> SpectralCoefficients:
        return SpectralCoefficients(self.kgrid, self.profiles[index])

    def constancy_defect(self) -> float:
        """max_t sup_k |f~(t, k) - f~(t_0, k)|."""
        return float(np.max(np.abs(self.profiles - self.profiles[0])))

    def modulus_defect(self) -> float:
        """sup | |w| - |f~||, zero up to roundoff."""
        return float(np.max(np.abs(np.abs(self.modified) - np.abs(self.profiles))))

    def tables(self) -> Dict[str, np.ndarray]:
        """t x k matrices for export; first column is t."""
        t = self.times[:, None]
        return {
            "profile_abs": np.hstack([t, np.abs(self.profiles)]),
            "profile_arg": np.hstack([t, np.angle(self.profiles)]),
            "modified_abs": np.hstack([t, np.abs(self.modified)]),
            "modified_arg": np.hstack([t, np.angle(self.modified)]),
        }


def accumulate_phase(times: np.ndarray, profiles: np.ndarray) -> np.ndarray:
    """
    Phi(t_i, k) = int |f~(s, k)|^2 ds/(1+s) by trapezoid from the first stored time, plus the
    head |f~(t_0, k)|^2 log(1 + t_0) for [0, t_0].
    """
    density = np.abs(profiles) ** 2
    head = density[0] * np.log1p(times[0])
    body = cumulative_trapezoid(density / (1.0 + times[:, None]), times, axis=0, initial=0.0)
    return head[None, :] + body


def profile_series(times: Sequence[float], eta_fields: np.ndarray, dec: SpectralDecomposition,
                   nonlinearity_sign: int = 1, check_band: bool = True) -> ProfileSeries:
    """
    Assemble the profile series of the radiation fields eta(t_i) (rows of ``eta_fields``).

    Raises:
        BandLimitError: a snapshot carries more than 1% of its energy above K
    """
    times = np.asarray(times, dtype=float)
    fields = np.asarray(eta_fields, dtype=complex)
    if fields.shape != (len(times), dec.grid.n_points):
        raise InvalidArgumentError("eta_fields must have one grid row per time")
    if len(times) > 1 and np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("profile times must be strictly increasing")
    projected = _project_rows(fields, dec)
    if check_band:
        for i, row in enumerate(projected):
            tail = band_tail_fraction(ComplexField(dec.grid, row), dec.kgrid.band_limit)
            if tail > BAND_TAIL_LIMIT:
                raise BandLimitError(
                    f"snapshot t={times[i]:.4g}: {100 * tail:.2f}% of the energy lies above K", tail
                )
    k = dec.kgrid.nodes
    transformed = dec.grid.spacing * (projected @ np.conj(dec.kernel))
    profiles = transformed * np.exp(-1j * times[:, None] * k[None, :] ** 2)
    phase = accumulate_phase(times, profiles)
    modified = np.exp(0.5j * nonlinearity_sign * phase) * profiles
    logger.debug(f"Profile series: {len(times)} times, m={dec.kgrid.m_points}")
    return ProfileSeries(times, dec.kgrid, profiles, phase, modified, fields, nonlinearity_sign)


def profile_series_from_path(path: ModulationPath, dec: SpectralDecomposition,
                             nonlinearity_sign: int = 1) -> ProfileSeries:
    fields = np.array([state.eta.values for state in path.states])
    return profile_series(path.times, fields, dec, nonlinearity_sign)


def profile_series_from_trajectory(traj: Trajectory, dec: SpectralDecomposition) -> ProfileSeries:
    """Profiles of P_c u(t) (the radiation when there is no soliton to remove)."""
    sign = traj.config.nonlinearity_sign if traj.config.variant == "full_nls" else 1
    return profile_series(traj.times, traj.fields, dec, sign)


# --------------------------------------------------------------------------------------------
# Modified scattering
# --------------------------------------------------------------------------------------------

def resolved_band(k: np.ndarray, t: float, alpha: float = BOOTSTRAP_ALPHA) -> np.ndarray:
    """Mask |k| >= t^{-3 alpha}."""
    return np.abs(k) >= t ** (-3.0 * alpha)


class PhaseSlopeFit(NamedTuple):
    k0: float
    slope: float
    predicted: float
    relative_error: float
    modulus_variation: float


@dataclass(frozen=True, eq=False)
class ModifiedScattering:
    """W_inf estimate and the Cauchy behaviour of the modified profile."""

    series: ProfileSeries = field(repr=False)
    W_inf: SpectralCoefficients = field(repr=False)
    cauchy_gaps: np.ndarray = field(repr=False)
    alpha: float = BOOTSTRAP_ALPHA

    def dyadic_gaps(self, horizons: Sequence[float]) -> Dict[float, float]:
        """sup_k |w(2T, k) - w(T, k)| over |k| >= T^{-3 alpha}."""
        times = self.series.times
        k = self.series.kgrid.nodes
        out: Dict[float, float] = {}
        for T in horizons:
            if T < times[0] or 2 * T > times[-1] + 1e-12:
                raise InvalidArgumentError(f"dyadic pair ({T}, {2 * T}) outside the stored times")
            i_t = int(np.argmin(np.abs(times - T)))
            i_2t = int(np.argmin(np.abs(times - 2 * T)))
            band = resolved_band(k, T, self.alpha)
            diff = np.abs(self.series.modified[i_2t] - self.series.modified[i_t])[band]
            out[float(T)] = float(np.max(diff)) if diff.size else 0.0
        return out

    def phase_slope(self, k0: float, window: Optional[Tuple[float, float]] = None) -> PhaseSlopeFit:
        """
        Slope of the unwrapped arg f~(t, k0) against log t, compared with -(s/2)|W_inf(k0)|^2.
        """
        series = self.series
        j = int(np.argmin(np.abs(series.kgrid.nodes - k0)))
        times = series.times
        mask = times > 0
        if window is not None:
            mask &= (times >= window[0]) & (times <= window[1])
        if np.count_nonzero(mask) < 3:
            raise InvalidArgumentError("phase slope needs at least 3 stored times in the window")
        values = series.profiles[mask, j]
        fit = linregress(np.log(times[mask]), np.unwrap(np.angle(values)))
        predicted = -0.5 * series.nonlinearity_sign * abs(self.W_inf.values[j]) ** 2
        rel = abs(fit.slope - predicted) / abs(predicted) if predicted else float("inf")
        moduli = np.abs(values)
        variation = float((moduli.max() - moduli.min()) / moduli.mean()) if moduli.mean() > 0 else 0.0
        return PhaseSlopeFit(float(series.kgrid.nodes[j]), float(fit.slope), float(predicted),
                             float(rel), variation)


def modified_profile(series: ProfileSeries, alpha: float = BOOTSTRAP_ALPHA) -> ModifiedScattering:
    """
    W_inf = w(t_final) and consecutive Cauchy gaps sup_{|k| >= t^{-3 alpha}} |w(t_i) - w(t_{i-1})|.

    Raises:
        InvalidArgumentError: fewer than 3 stored times
    """
    if len(series) < 3:
        raise InvalidArgumentError("modified_profile needs at least 3 stored times")
    k = series.kgrid.nodes
    gaps = np.zeros(len(series))
    for i in range(1, len(series)):
        band = resolved_band(k, max(series.times[i], 1e-12), alpha)
        diff = np.abs(series.modified[i] - series.modified[i - 1])[band]
        gaps[i] = float(np.max(diff)) if diff.size else 0.0
    W_inf = SpectralCoefficients(series.kgrid, series.modified[-1].copy())
    return ModifiedScattering(series, W_inf, gaps, alpha)


# --------------------------------------------------------------------------------------------
# Fits and decay diagnostics
# --------------------------------------------------------------------------------------------

class PowerLawFit(NamedTuple):
    exponent: float
    r_squared: float
    prefactor: float
    samples: int


def fit_power_law(times: Sequence[float], values: Sequence[float],
                  window: Optional[Tuple[float, float]] = None) -> PowerLawFit:
    """
    Least-squares fit of log(values) = p log(times) + c inside [t_a, t_b].

    Raises:
        InvalidArgumentError: nonpositive values/times in the window or fewer than 8 samples
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = np.ones(t.shape, dtype=bool)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
    t, v = t[mask], v[mask]
    if t.size < MIN_FIT_SAMPLES:
        raise InvalidArgumentError(f"power-law fit needs >= {MIN_FIT_SAMPLES} samples, got {t.size}")
    if np.any(v <= 0) or np.any(t <= 0):
        raise InvalidArgumentError("power-law fit needs positive times and values")
    fit = linregress(np.log(t), np.log(v))
    return PowerLawFit(float(fit.slope), float(fit.rvalue ** 2), float(np.exp(fit.intercept)), int(t.size))


def smooth_cutoff(lam: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Smooth phi_1 with phi_1 = 1 on |lam| <= scale and 0 on |lam| >= 2 scale."""
    s = np.clip(np.abs(np.asarray(lam, dtype=float)) / scale - 1.0, 0.0, 1.0)

    def bump(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        positive = x > 0
        out[positive] = np.exp(-1.0 / x[positive])
        return out

    rising, falling = bump(1.0 - s), bump(s)
    return rising / (rising + falling)


def _weighted_time_norm(times: np.ndarray, values: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """sup_x weight(x) (int_{t_0}^{T} |values|^2 dt)^{1/2} for every stored T."""
    cumulative = cumulative_trapezoid(np.abs(values) ** 2, times, axis=0, initial=0.0)
    return np.max(weight[None, :] * np.sqrt(cumulative), axis=1)


def smoothing_functionals(h: ComplexField, times: Sequence[float], dec: SpectralDecomposition
                          ) -> Dict[str, np.ndarray]:
    """
    t-weighted smoothing functionals of the homogeneous flow e^{itH} P_c h, cumulative in T:

        low_j  = sup_x <x>^{-2} || t d_t^j e^{itH} phi_1(H) P_c h ||_{L^2_t[t_0, T]},  j = 1, 2
        high_j = sup_x <x>^{-2} || t d_x^j e^{itH} phi_2(H) P_c h ||_{L^2_t[t_0, T]},  j = 0, 1

    with phi_1(k^2) applied as a distorted multiplier.
    """
    times = np.asarray(times, dtype=float)
    k2 = dec.kgrid.nodes ** 2
    coeffs = distorted_transform(dec.project_continuous(h), dec, check_band=False)
    low = smooth_cutoff(k2)
    high = 1.0 - low
    weight = 1.0 / (1.0 + dec.grid.nodes ** 2)
    spacing = dec.grid.spacing
    rows: Dict[str, List[np.ndarray]] = {"low_1": [], "low_2": [], "high_0": [], "high_1": []}
    for t in times:
        flow = coeffs.values * np.exp(1j * k2 * t)
        for j in (1, 2):
            field_t = distorted_inverse(SpectralCoefficients(dec.kgrid, flow * low * (1j * k2) ** j), dec)
            rows[f"low_{j}"].append(t * field_t.values)
        high_field = distorted_inverse(SpectralCoefficients(dec.kgrid, flow * high), dec).values
        rows["high_0"].append(t * high_field)
        rows["high_1"].append(t * derivative_values(high_field, spacing, 1))
    return {name: _weighted_time_norm(times, np.array(values), weight) for name, values in rows.items()}


@dataclass(frozen=True, eq=False)
class DecayDiagnostics:
    """Per-time norms of eta and cumulative smoothing functionals."""

    times: np.ndarray = field(repr=False)
    sup_norm: np.ndarray = field(repr=False)
    weighted_sup: np.ndarray = field(repr=False)
    weighted_derivative: np.ndarray = field(repr=False)
    smoothing: np.ndarray = field(repr=False)
    linear_functionals: Dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def exponents(self, window: Optional[Tuple[float, float]] = None) -> Dict[str, PowerLawFit]:
        return {
            name: fit_power_law(self.times, getattr(self, name), window)
            for name in ("sup_norm", "weighted_sup", "weighted_derivative")
        }

    def smoothing_ratio(self, t_short: float, t_long: float) -> float:
        """smoothing(T_long) / smoothing(T_short) at the nearest stored times."""
        a = self.smoothing[int(np.argmin(np.abs(self.times - t_short)))]
        b = self.smoothing[int(np.argmin(np.abs(self.times - t_long)))]
        return float(b / a) if a > 0 else float("inf")

    def table(self) -> Tuple[List[str], np.ndarray]:
        header = ["t", "sup", "weighted_sup", "weighted_derivative", "smoothing"]
        columns = [self.times, self.sup_norm, self.weighted_sup, self.weighted_derivative, self.smoothing]
        for name in sorted(self.linear_functionals):
            header.append(name)
            columns.append(self.linear_functionals[name])
        return header, np.column_stack(columns)


def decay_diagnostics(traj: Trajectory, path: Optional[ModulationPath], dec: SpectralDecomposition,
                      linear_reference: bool = False) -> DecayDiagnostics:
    """
    Decay and smoothing diagnostics of the radiation.

    Args:
        traj: Trajectory
        path: Modulation path supplying eta per snapshot; None uses P_c u (no soliton)
        dec: Spectral decomposition
        linear_reference: Also evaluate the t-weighted low/high-frequency functionals of the
            homogeneous flow started from the first radiation field
    """
    if path is not None:
        if len(path) != len(traj) or not np.allclose(path.times, traj.times):
            raise InvalidArgumentError("modulation path and trajectory have different snapshot times")
        etas = np.array([state.eta.values for state in path.states])
    else:
        etas = _project_rows(traj.fields, dec)
    grid = dec.grid
    bracket = grid.japanese_bracket()
    derivative = derivative_values(etas, grid.spacing, 1, axis=1)

    sup_norm = np.max(np.abs(etas), axis=1)
    weighted_sup = np.max(np.abs(etas) / bracket[None, :] ** 2, axis=1)
    weighted_derivative = np.sqrt(grid.spacing * np.sum(np.abs(derivative / bracket[None, :]) ** 2, axis=1))
    smoothing = _weighted_time_norm(traj.times, etas, 1.0 / bracket)

    linear: Dict[str, np.ndarray] = {}
    if linear_reference:
        # e^{itH} h matches eta(t_0) at t = t_0
        start = dec.spectral_function(ComplexField(grid, etas[0]), np.exp(-1j * dec.eigenvalues * traj.times[0]))
        linear = smoothing_functionals(start, traj.times, dec)

    return DecayDiagnostics(traj.times.copy(), sup_norm, weighted_sup, weighted_derivative, smoothing, linear)


# --------------------------------------------------------------------------------------------
# Cubic resonance and far field
# --------------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CubicResonance:
    times: np.ndarray = field(repr=False)
    deviation: np.ndarray = field(repr=False)
    main_term: np.ndarray = field(repr=False)
    band: Tuple[float, float]

    def fit(self, window: Optional[Tuple[float, float]] = None) -> PowerLawFit:
        return fit_power_law(self.times, self.deviation, window)


def cubic_resonance_check(traj: Trajectory, series: ProfileSeries, dec: SpectralDecomposition,
                          band: Tuple[float, float] = (0.5, 2.0),
                          alpha: float = BOOTSTRAP_ALPHA) -> CubicResonance:
    """
    Compare e^{-itk^2} F~[P_c(|eta|^2 eta)] with (1/2t)|f~|^2 f~ in sup norm over the band.

    Raises:
        PreconditionError: not a full-NLS trajectory, or the band reaches below t_max^{-3 alpha}
    """
    if traj.config.variant != "full_nls":
        raise PreconditionError("cubic resonance check needs a full_nls trajectory")
    lo, hi = band
    if not 0 < lo < hi <= series.kgrid.band_limit:
        raise InvalidArgumentError(f"band {band} must satisfy 0 < lo < hi <= K")
    t_max = float(series.times[-1])
    if lo < t_max ** (-3.0 * alpha):
        raise PreconditionError(
            f"band lower edge {lo} is inside the excluded zone |k| < {t_max ** (-3.0 * alpha):.4f}"
        )
    times = series.times
    if np.any(times <= 0):
        raise PreconditionError("cubic resonance check needs positive times")
    k = series.kgrid.nodes
    mask = (np.abs(k) >= lo) & (np.abs(k) <= hi)
    etas = series.eta_fields
    cubic = _project_rows(np.abs(etas) ** 2 * etas, dec)
    transformed = dec.grid.spacing * (cubic @ np.conj(dec.kernel))
    lhs = transformed * np.exp(-1j * times[:, None] * k[None, :] ** 2)
    f = series.profiles
    main = np.abs(f) ** 2 * f / (2.0 * times[:, None])
    deviation = np.max(np.abs(lhs - main)[:, mask], axis=1)
    main_size = np.max(np.abs(main)[:, mask], axis=1)
    return CubicResonance(times.copy(), deviation, main_size, (lo, hi))


class FarFieldConvention(NamedTuple):
    """k* = k_sign x / 2t and the quadratic phase e^{phase_sign i x^2/4t}."""

    k_sign: int
    phase_sign: int


# Stationary phase of e^{itk^2} gives k* = -x/2t and e^{-ix^2/4t}.
STATIONARY_PHASE = FarFieldConvention(-1, -1)


@dataclass(frozen=True, eq=False)
class FarFieldCheck:
    t: float
    x: np.ndarray = field(repr=False)
    error: np.ndarray = field(repr=False)
    sup_error: float
    eta_sup: float
    reference: float
    convention: FarFieldConvention

    @property
    def relative_error(self) -> float:
        return self.sup_error / self.eta_sup if self.eta_sup > 0 else float("inf")


def _interp_complex(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    return np.interp(x, xp, fp.real, left=0.0, right=0.0) + 1j * np.interp(x, xp, fp.imag, left=0.0, right=0.0)


def far_field_prediction(W: SpectralCoefficients, t: float, x: np.ndarray,
                         convention: FarFieldConvention = STATIONARY_PHASE,
                         nonlinearity_sign: int = 0) -> np.ndarray:
    """
    e^{+/- ix^2/4t} / sqrt(-2it) exp(-(i s/2)|W(k*)|^2 log t) W(k*) with k* = +/- x/2t.
    s = 0 gives the linear far field.
    """
    k_star = convention.k_sign * x / (2.0 * t)
    w = _interp_complex(k_star, W.kgrid.nodes, W.values)
    modulation = np.exp(-0.5j * nonlinearity_sign * np.abs(w) ** 2 * np.log(t))
    return np.exp(convention.phase_sign * 1j * x ** 2 / (4.0 * t)) / np.sqrt(-2j * t) * modulation * w


def _far_field_region(t: float, dec: SpectralDecomposition, alpha: float) -> np.ndarray:
    x = dec.grid.nodes
    k_min = t ** (-3.0 * alpha)
    lo = 0.2 * t * k_min
    hi = min(2.0 * dec.grid.half_width / 3.0, 2.0 * t * dec.kgrid.band_limit)
    return (np.abs(x) >= lo) & (np.abs(x) <= hi)


def far_field_check(traj: Trajectory, W_inf: SpectralCoefficients, t: float, dec: SpectralDecomposition,
                    path: Optional[ModulationPath] = None,
                    convention: FarFieldConvention = STATIONARY_PHASE,
                    alpha: float = BOOTSTRAP_ALPHA) -> FarFieldCheck:
    """
    Pointwise comparison of eta(t, x) with the modified far-field formula.

    Raises:
        PreconditionError: t < 20, or an empty comparison region
    """
    sign = traj.config.nonlinearity_sign if traj.config.variant == "full_nls" else 1
    if t < FAR_FIELD_MIN_TIME:
        raise PreconditionError(f"far-field comparison needs t >= {FAR_FIELD_MIN_TIME:g}, got t={t:g}")
    region = _far_field_region(t, dec, alpha)
    if not np.any(region):
        raise PreconditionError(f"empty far-field comparison region at t={t}")
    index = traj.index_of(t)
    t_actual = float(traj.times[index])
    if path is not None:
        eta = path.states[index].eta.values
    else:
        eta = _project_rows(traj.fields[index][None, :], dec)[0]
    x = dec.grid.nodes[region]
    predicted = far_field_prediction(W_inf, t_actual, x, convention, sign)
    error = np.abs(eta[region] - predicted)
    return FarFieldCheck(
        t=t_actual,
        x=x,
        error=error,
        sup_error=float(np.max(error)),
        eta_sup=float(np.max(np.abs(eta[region]))),
        reference=float(t_actual ** -0.5),
        convention=convention,
    )


def resolve_far_field_convention(linear_traj: Trajectory, dec: SpectralDecomposition, t: float,
                                 alpha: float = BOOTSTRAP_ALPHA
                                 ) -> Tuple[FarFieldConvention, Dict[FarFieldConvention, float]]:
    """
    Pick the (k-map, phase) convention that best matches a linear run at time t.

    The profile of a linear run is constant, so W is the profile of the first snapshot.
    """
    if linear_traj.config.nonlinearity_sign != 0:
        raise PreconditionError("the far-field convention is resolved on a linear run")
    first = ComplexField(dec.grid, linear_traj.fields[0])
    W = compute_profile(first, float(linear_traj.times[0]), dec)
    errors: Dict[FarFieldConvention, float] = {}
    for k_sign in (-1, 1):
        for phase_sign in (-1, 1):
            convention = FarFieldConvention(k_sign, phase_sign)
            errors[convention] = far_field_check(linear_traj, W, t, dec, None, convention, alpha).relative_error
    best = min(errors, key=errors.__getitem__)
    logger.info(f"Far-field convention k*={'+' if best.k_sign > 0 else '-'}x/2t, "
                f"phase e^{{{'+' if best.phase_sign > 0 else '-'}ix^2/4t}}: relative error {errors[best]:.3e}")
    return best, errors


# --------------------------------------------------------------------------------------------
# Time-frequency split
# --------------------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TimeFrequencySplit:
    """
    u = u_L + u_H at interior (untapered) times. The time mean belongs to u_L.
    """

    times: np.ndarray = field(repr=False)
    low: np.ndarray = field(repr=False)
    high: np.ndarray = field(repr=False)
    window: np.ndarray = field(repr=False)
    cutoff: float
    taper: float
    boot_low: float
    boot_high: Tuple[float, float]

    def interior(self) -> np.ndarray:
        """Mask of times where the taper equals 1."""
        return self.window >= 1.0 - 1e-15


def time_frequency_split(traj: Trajectory, cutoff: float, taper: float = TAPER_FRACTION,
                         phase_rate: Optional[np.ndarray] = None) -> TimeFrequencySplit:
    """
    Split a uniformly sampled trajectory into low/high temporal frequencies with phi_1(tau/cutoff).

    The time mean is removed, the fluctuation is tapered with a Tukey window and transformed per
    node; tau is angular frequency. Also returns

        boot_low  = sup_x <x>^{-2} || t (-2iE d_t + d_t^2) u_L ||_{L^2_t}
        boot_high = sup_x <x>^{-2} || t d_x^j u_H ||_{L^2_t},  j = 0, 1

    Args:
        traj: Trajectory with uniform snapshot spacing
        cutoff: Temporal frequency scale of phi_1 (> 0)
        taper: Tukey taper fraction
        phase_rate: E[z(t_i)] per snapshot (zero if omitted)

    Raises:
        InvalidArgumentError: non-uniform sampling, cutoff <= 0, fewer than 4 snapshots
    """
    times = traj.times
    if cutoff <= 0:
        raise InvalidArgumentError(f"cutoff must be positive, got {cutoff}")
    if len(times) < 4:
        raise InvalidArgumentError("time-frequency split needs at least 4 snapshots")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise InvalidArgumentError("time-frequency split needs uniformly sampled snapshots")
    dt = float(steps[0])
    data = traj.fields
    mean = data.mean(axis=0)
    window = tukey(len(times), taper)
    spectrum = np.fft.fft(window[:, None] * (data - mean[None, :]), axis=0)
    tau = 2.0 * np.pi * np.fft.fftfreq(len(times), dt)
    phi1 = smooth_cutoff(tau, cutoff)[:, None]
    low_hat = phi1 * spectrum
    low = mean[None, :] + np.fft.ifft(low_hat, axis=0)
    high = np.fft.ifft((1.0 - phi1) * spectrum, axis=0)

    E = np.zeros(len(times)) if phase_rate is None else np.asarray(phase_rate, dtype=float)
    d_t = np.fft.ifft(1j * tau[:, None] * low_hat, axis=0)
    d_tt = np.fft.ifft(-(tau[:, None] ** 2) * low_hat, axis=0)
    weight = 1.0 / (1.0 + traj.grid.nodes ** 2)
    t_col = times[:, None]

    def boot(values: np.ndarray) -> float:
        integral = trapezoid(np.abs(t_col * values) ** 2, times, axis=0)
        return float(np.max(weight * np.sqrt(integral)))

    boot_low = boot(-2j * E[:, None] * d_t + d_tt)
    boot_high = (boot(high), boot(derivative_values(high, traj.grid.spacing, 1, axis=1)))
    return TimeFrequencySplit(times.copy(), low, high, window, cutoff, taper, boot_low, boot_high)
