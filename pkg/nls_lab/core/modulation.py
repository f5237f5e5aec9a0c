"""
Soliton + radiation decomposition u = Q[z] + eta with <i eta, D_j Q[z]> = 0, tracking of z(t)
along a trajectory, and the map from Ran P_c onto the z-dependent continuous subspace.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .boundstate import DELTA_MAX, BoundStateJacobian, bound_state_jacobian, solve_nonlinear_bound_state
from .error_handling import (
    ConvergenceError,
    DecompositionError,
    InvalidArgumentError,
    OutOfRegimeError,
)
from .evolution import Trajectory
from .grid import ComplexField, h1_norm, inner_product, reduced_inner
from .spectral import SpectralDecomposition

logger = logging.getLogger(__name__)

ORTHO_TOLERANCE = 1e-9
NEWTON_MAX_ITERATIONS = 30
UNIQUENESS_TOLERANCE = 1e-8
SINGULAR_DETERMINANT = 1e-8

Tangents = Tuple[ComplexField, ComplexField, Optional[BoundStateJacobian]]


@dataclass(frozen=True, eq=False)
class ModulationState:
    """Decomposition of one snapshot."""

    t: float
    z: complex
    E: float
    theta: float
    eta: ComplexField = field(repr=False)
    ortho_residual: Tuple[float, float]
    complex_residual: Tuple[float, float]
    iterations: int = 0
    jacobian: Optional[BoundStateJacobian] = field(repr=False, default=None)

    @property
    def residual(self) -> float:
        return abs(self.ortho_residual[0]) + abs(self.ortho_residual[1])


@dataclass(frozen=True, eq=False)
class ModulationPath:
    """
    z(t) along a trajectory with its modulation diagnostics.

    ``zdot`` is differentiated in the co-rotating frame: with p = z e^{-i Theta},
    zdot = p' e^{i Theta} + i E z, so ``defect`` = |zdot - i E z| = |p'|.
    """

    states: Tuple[ModulationState, ...] = field(repr=False)
    times: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    E: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    zdot: np.ndarray = field(repr=False)
    defect: np.ndarray = field(repr=False)
    predicted: np.ndarray = field(repr=False)
    phase_limit: np.ndarray = field(repr=False)
    phase_limit_literal: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def ratio(self) -> np.ndarray:
        """defect / (size of the quadratic+cubic modulation forcing); nan where that vanishes."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.predicted > 0, self.defect / self.predicted, np.nan)

    def max_ortho_residual(self) -> float:
        return max(state.residual for state in self.states)

    def cauchy_gaps(self) -> np.ndarray:
        """|p(t_i) - p(t_{i-1})| for the phase-removed parameter p = z e^{-i Theta}; first entry 0."""
        gaps = np.zeros(len(self.times))
        gaps[1:] = np.abs(np.diff(self.phase_limit))
        return gaps

    def modulus_dyadic_gaps(self, horizons: Sequence[float]) -> Dict[float, float]:
        """| |z(T)| - |z(T/2)| | at the stored times closest to T and T/2."""
        return dyadic_gaps(self.times, np.abs(self.z), horizons)

    def phase_limit_dyadic_gaps(self, horizons: Sequence[float]) -> Dict[float, float]:
        return dyadic_gaps(self.times, self.phase_limit, horizons)

    def table(self) -> Tuple[List[str], np.ndarray]:
        """Export columns (t, Re z, Im z, E, Theta, defect, cauchy_gap)."""
        header = ["t", "re_z", "im_z", "E", "theta", "defect", "cauchy_gap"]
        rows = np.column_stack([
            self.times, self.z.real, self.z.imag, self.E, self.theta, self.defect, self.cauchy_gaps(),
        ])
        return header, rows


def dyadic_gaps(times: np.ndarray, values: np.ndarray, horizons: Sequence[float]) -> Dict[float, float]:
    """|v(T) - v(T/2)| for each horizon T, using the nearest stored times."""
    out: Dict[float, float] = {}
    for T in horizons:
        if T / 2 < times[0] or T > times[-1] + 1e-12:
            raise InvalidArgumentError(f"horizon T={T} is outside the stored times [{times[0]}, {times[-1]}]")
        i_full = int(np.argmin(np.abs(times - T)))
        i_half = int(np.argmin(np.abs(times - T / 2)))
        out[float(T)] = float(np.abs(values[i_full] - values[i_half]))
    return out


def _tangents(z: complex, dec: SpectralDecomposition, delta_max: float) -> Tangents:
    if z == 0:
        phi = dec.phi
        return phi, phi * 1j, None
    jac = bound_state_jacobian(z, dec, delta_max)
    return jac.D1Q, jac.D2Q, jac


def _orthogonality(eta: ComplexField, d1: ComplexField, d2: ComplexField
                   ) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    ieta = eta * 1j
    reduced = (reduced_inner(ieta, d1), reduced_inner(ieta, d2))
    full = (abs(inner_product(ieta, d1)), abs(inner_product(ieta, d2)))
    return reduced, full


def _newton(u: ComplexField, dec: SpectralDecomposition, guess: complex, delta_max: float
            ) -> Tuple[complex, int, ComplexField, Tangents]:
    """Quasi-Newton on K_j(z) = <i(u - Q[z]), D_j Q[z]> with J_jl = -<i D_l Q, D_j Q>."""
    z = complex(guess)
    history: List[float] = []
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        if abs(z) > delta_max:
            raise DecompositionError(f"Newton iterate |z|={abs(z):.4g} left the ball of radius {delta_max}")
        Q = solve_nonlinear_bound_state(z, dec, delta_max).Q
        tangents = _tangents(z, dec, delta_max)
        d1, d2, _ = tangents
        reduced, _ = _orthogonality(u - Q, d1, d2)
        residual = abs(reduced[0]) + abs(reduced[1])
        history.append(residual)
        logger.debug(f"decompose iteration {iteration}: z={z:.10g}, residual {residual:.3e}")
        if residual < ORTHO_TOLERANCE:
            return z, iteration, Q, tangents
        i1, i2 = d1 * 1j, d2 * 1j
        jac = -np.array([
            [reduced_inner(i1, d1), reduced_inner(i2, d1)],
            [reduced_inner(i1, d2), reduced_inner(i2, d2)],
        ])
        try:
            step = np.linalg.solve(jac, -np.array(reduced))
        except np.linalg.LinAlgError as e:
            raise DecompositionError(f"singular decomposition Jacobian at z={z}") from e
        z = z + complex(step[0], step[1])
    raise DecompositionError(
        f"decomposition did not converge in {NEWTON_MAX_ITERATIONS} iterations "
        f"(residual {history[-1]:.3e})"
    )


def decompose(
    u: ComplexField,
    dec: SpectralDecomposition,
    hint: Optional[complex] = None,
    delta: float = DELTA_MAX,
    t: float = 0.0,
    theta: float = 0.0,
    check_uniqueness: bool = True,
) -> ModulationState:
    """
    Split u into Q[z] + eta with eta satisfying both orthogonality conditions.

    Args:
        u: State with ||u||_{H^1} <= delta
        dec: Spectral decomposition with one bound state
        hint: Initial guess for z (defaults to (phi, u))
        delta: Smallness radius
        t: Time stamp carried into the state
        theta: Accumulated phase carried into the state
        check_uniqueness: Re-solve from 1.2x the initial guess and compare

    Raises:
        OutOfRegimeError: ||u||_{H^1} > delta
        DecompositionError: Newton fails, or the second start lands elsewhere
    """
    if u.grid != dec.grid:
        raise InvalidArgumentError("decompose: state is not on the decomposition's grid")
    size = h1_norm(u)
    if size > delta:
        raise OutOfRegimeError(f"||u||_H1 = {size:.4g} exceeds delta = {delta}")

    guess = complex(hint) if hint is not None else inner_product(dec.phi, u)
    z, iterations, Q, (d1, d2, jac) = _newton(u, dec, guess, delta)
    if check_uniqueness and guess != 0:
        z_alt, _, _, _ = _newton(u, dec, 1.2 * guess, delta)
        if abs(z_alt - z) > UNIQUENESS_TOLERANCE:
            raise DecompositionError(
                f"decomposition is not unique: starts {guess:.6g} and {1.2 * guess:.6g} "
                f"reach {z:.10g} and {z_alt:.10g}"
            )

    state = solve_nonlinear_bound_state(z, dec, delta)
    eta = u - Q
    reduced, full = _orthogonality(eta, d1, d2)
    return ModulationState(t, z, state.E, theta, eta, reduced, full, iterations, jac)


def _forcing_size(state: ModulationState, dec: SpectralDecomposition, delta: float) -> float:
    """|<conj(Q) eta^2 + 2 Q |eta|^2 + |eta|^2 eta, D_j Q>| over j = 1, 2."""
    Q = solve_nonlinear_bound_state(state.z, dec, delta).Q.values
    eta = state.eta.values
    forcing = ComplexField(dec.grid, np.conj(Q) * eta ** 2 + 2.0 * Q * np.abs(eta) ** 2 + np.abs(eta) ** 2 * eta)
    if state.jacobian is not None:
        d1, d2 = state.jacobian.D1Q, state.jacobian.D2Q
    else:
        d1, d2, _ = _tangents(state.z, dec, delta)
    return float(np.hypot(reduced_inner(forcing, d1), reduced_inner(forcing, d2)))


def track_modulation(traj: Trajectory, dec: SpectralDecomposition,
                     delta: float = DELTA_MAX) -> ModulationPath:
    """
    Decompose every snapshot of a trajectory, warm-starting from the previous z.

    Raises:
        DecompositionError / OutOfRegimeError: with the failing snapshot index in the message
    """
    if len(traj) < 3:
        raise InvalidArgumentError("track_modulation needs at least 3 snapshots")
    states: List[ModulationState] = []
    hint: Optional[complex] = None
    theta = 0.0
    for index, t in enumerate(traj.times):
        try:
            state = decompose(traj.snapshot(index), dec, hint=hint, delta=delta,
                              check_uniqueness=index == 0)
        except OutOfRegimeError as e:
            raise OutOfRegimeError(f"snapshot {index} (t={t:.4g}): {e}") from e
        except ConvergenceError as e:
            raise DecompositionError(f"snapshot {index} (t={t:.4g}): {e}") from e
        if states:
            previous = states[-1]
            theta += 0.5 * (t - previous.t) * (state.E + previous.E)
        states.append(ModulationState(t, state.z, state.E, theta, state.eta, state.ortho_residual,
                                      state.complex_residual, state.iterations, state.jacobian))
        hint = state.z

    times = np.array([s.t for s in states])
    z = np.array([s.z for s in states])
    E = np.array([s.E for s in states])
    theta_arr = np.array([s.theta for s in states])
    rotated = z * np.exp(-1j * theta_arr)
    rotated_rate = np.gradient(rotated, times)
    zdot = rotated_rate * np.exp(1j * theta_arr) + 1j * E * z
    defect = np.abs(rotated_rate)
    predicted = np.array([_forcing_size(s, dec, delta) for s in states])

    path = ModulationPath(
        states=tuple(states),
        times=times,
        z=z,
        E=E,
        theta=theta_arr,
        zdot=zdot,
        defect=defect,
        predicted=predicted,
        phase_limit=rotated,
        phase_limit_literal=z * np.exp(1j * theta_arr),
    )
    logger.info(
        f"Tracked {len(states)} snapshots: |z| from {abs(z[0]):.6g} to {abs(z[-1]):.6g}, "
        f"max orthogonality residual {path.max_ortho_residual():.2e}"
    )
    return path


def projection_comparison(z: complex, eta: ComplexField, dec: SpectralDecomposition,
                          delta_max: float = DELTA_MAX) -> Tuple[ComplexField, float]:
    """
    Map eta in Ran P_c onto the continuous subspace at z: eta + (alpha(z) eta) phi.

    alpha = a + ib solves <i(eta + alpha phi), D_j Q[z]> = 0 for j = 1, 2.

    Returns:
        (mapped field, ||P_c mapped - P_c eta||_2)

    Raises:
        OutOfRegimeError: |z| > delta_max or the 2x2 system is near-singular
    """
    if abs(z) > delta_max:
        raise OutOfRegimeError(f"|z|={abs(z):.4g} exceeds delta_max={delta_max}")
    phi = dec.phi
    d1, d2, _ = _tangents(complex(z), dec, delta_max)
    iphi = phi * 1j
    matrix = np.array([
        [reduced_inner(iphi, d1), -reduced_inner(phi, d1)],
        [reduced_inner(iphi, d2), -reduced_inner(phi, d2)],
    ])
    det = float(np.linalg.det(matrix))
    if abs(det) < SINGULAR_DETERMINANT:
        raise OutOfRegimeError(f"projection-comparison system is singular at z={z} (det {det:.2e})")
    ieta = eta * 1j
    rhs = -np.array([reduced_inner(ieta, d1), reduced_inner(ieta, d2)])
    a, b = np.linalg.solve(matrix, rhs)
    mapped = eta + phi * complex(a, b)
    defect = (dec.project_continuous(mapped) - dec.project_continuous(eta)).norm()
    return mapped, defect


def projection_operator_norm(z: complex, packets: Sequence[ComplexField],
                             dec: SpectralDecomposition) -> float:
    """max over packets of ||(map - I) eta|| / ||eta|| with each packet first projected onto Ran P_c."""
    worst = 0.0
    for packet in packets:
        eta = dec.project_continuous(packet)
        size = eta.norm()
        if size == 0:
            continue
        mapped, _ = projection_comparison(z, eta, dec)
        worst = max(worst, (mapped - eta).norm() / size)
    return worst
