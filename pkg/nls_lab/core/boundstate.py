"""
Small nonlinear bound states Q[z], their Jacobian, and the refined-decomposition profiles.

Q[z] solves (H - E[z]) Q = |Q|^2 Q with Q = z phi + q, (q, phi) = 0. Gauge covariance
Q[z e^{ia}] = e^{ia} Q[z] reduces the solve to the real branch z = |z|.
"""

import logging
import weakref
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from .error_handling import ConvergenceError, OutOfRegimeError, SpectralAssumptionError
from .grid import ComplexField, reduced_inner
from .spectral import GENERICITY_THRESHOLD, SpectralDecomposition

logger = logging.getLogger(__name__)

DELTA_MAX = 0.2
SOLVE_TOLERANCE = 1e-12
ACCEPT_TOLERANCE = 1e-10
MAX_ITERATIONS = 200
GAP_TOLERANCE = 1e-6
REFINED_RESIDUAL_LIMIT = 1e-8
BRANCH_CACHE_SIZE = 512

_Branch = Tuple[np.ndarray, float, float, int, Tuple[float, ...]]

# Solved real branches per decomposition; entries go away with the decomposition.
_BRANCH_CACHE: "weakref.WeakKeyDictionary[SpectralDecomposition, Dict[float, _Branch]]" = (
    weakref.WeakKeyDictionary()
)


@dataclass(frozen=True, eq=False)
class NonlinearBoundState:
    """(z, Q[z], E[z]) with solve diagnostics."""

    z: complex
    Q: ComplexField
    E: float
    q: ComplexField
    residual: float
    iterations: int
    residual_history: Tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True, eq=False)
class BoundStateJacobian:
    """D1Q = dQ/dRe z, D2Q = dQ/dIm z, DE = (dE/dRe z, dE/dIm z)."""

    z: complex
    D1Q: ComplexField
    D2Q: ComplexField
    DE: Tuple[float, float]
    step: float
    gauge_defect: float

    def apply(self, w: complex) -> ComplexField:
        """DQ[z] w = D1Q Re w + D2Q Im w."""
        return self.D1Q * w.real + self.D2Q * w.imag


@dataclass(frozen=True, eq=False)
class RefinedProfiles:
    """Profiles (frak A, frak B) in the range of P_c and the coefficient fields A, B."""

    z_inf: complex
    E_inf: float
    frak_a: ComplexField
    frak_b: ComplexField
    coeff_a: ComplexField
    coeff_b: ComplexField
    contraction: float
    residuals: Tuple[float, float]
    iterations: int
    shift_margin: float


def _solve_real_branch(dec: SpectralDecomposition, r: float) -> _Branch:
    cache = _BRANCH_CACHE.setdefault(dec, {})
    branch = cache.get(r)
    if branch is None:
        branch = _iterate_real_branch(dec, r)
        if len(cache) >= BRANCH_CACHE_SIZE:
            cache.pop(next(iter(cache)))
        cache[r] = branch
    return branch


def _iterate_real_branch(dec: SpectralDecomposition, r: float) -> _Branch:
    """Lyapunov-Schmidt iteration on the real branch; returns (Q, E, residual, iterations, history)."""
    h = dec.grid.spacing
    sqrt_h = np.sqrt(h)
    lam = dec.eigenvalues
    U = dec.eigenvectors
    phi = U[:, 0] / sqrt_h

    Q = r * phi
    E = -dec.rho2
    history: List[float] = []
    growth = 0
    for iteration in range(1, MAX_ITERATIONS + 1):
        c = U.T @ (Q ** 3)
        qc = U[:, 1:].T @ Q
        # residual of (H - E)Q - Q^3 at the current iterate, in eigen-coordinates
        res0 = (lam[0] - E) * (r / sqrt_h) - c[0]
        res_c = (lam[1:] - E) * qc - c[1:]
        residual = float(np.sqrt(h * (res0 ** 2 + np.sum(res_c ** 2))))
        history.append(residual)
        logger.debug(f"bound state |z|={r:.6g} iteration {iteration}: residual {residual:.3e}")
        if residual < SOLVE_TOLERANCE:
            break
        if len(history) > 1 and residual > history[-2]:
            growth += 1
            if growth >= 3:
                raise ConvergenceError(
                    f"bound-state iteration at |z|={r} is not contracting (residual {residual:.3e})"
                )
        else:
            growth = 0

        E = float(lam[0] - sqrt_h * c[0] / r)
        if E >= lam[1]:
            raise ConvergenceError(f"E={E} crossed into the continuous spectrum at |z|={r}")
        Q = r * phi + U[:, 1:] @ (c[1:] / (lam[1:] - E))
    else:
        if history[-1] > ACCEPT_TOLERANCE:
            raise ConvergenceError(
                f"bound-state iteration at |z|={r} stalled at residual {history[-1]:.3e}"
            )
        logger.warning(f"bound state |z|={r}: stopped at {MAX_ITERATIONS} iterations, "
                       f"residual {history[-1]:.3e}")

    Q = np.array(Q)
    Q.setflags(write=False)
    return Q, E, history[-1], len(history), tuple(history)


def solve_nonlinear_bound_state(z: complex, dec: SpectralDecomposition,
                                delta_max: float = DELTA_MAX) -> NonlinearBoundState:
    """
    Nonlinear bound state Q[z] and eigenvalue E[z].

    Args:
        z: Complex soliton parameter, |z| <= delta_max
        dec: Spectral decomposition with exactly one bound state
        delta_max: Smallness limit of the branch

    Returns:
        NonlinearBoundState with residual ||(H - E)Q - |Q|^2 Q||_2

    Raises:
        OutOfRegimeError: |z| > delta_max
        ConvergenceError: the fixed point iteration does not contract
    """
    z = complex(z)
    r = abs(z)
    if r > delta_max:
        raise OutOfRegimeError(f"|z|={r:.4g} exceeds delta_max={delta_max}")
    if not dec.has_bound_state:
        raise SpectralAssumptionError("nonlinear bound states need a negative eigenvalue")
    grid = dec.grid
    if r == 0.0:
        zero = grid.zeros()
        return NonlinearBoundState(z, zero, -dec.rho2, zero, 0.0, 0, ())

    Q_real, E, _, iterations, history = _solve_real_branch(dec, r)
    rotation = z / r
    Q = ComplexField(grid, rotation * Q_real)
    q = Q - dec.phi * z
    exact = ComplexField(
        grid, dec.hamiltonian @ Q.values - E * Q.values - np.abs(Q.values) ** 2 * Q.values
    ).norm()
    return NonlinearBoundState(z, Q, E, q, exact, iterations, history)


def bound_state_jacobian(z: complex, dec: SpectralDecomposition,
                         delta_max: float = DELTA_MAX) -> BoundStateJacobian:
    """
    Real Jacobian of z -> Q[z] and z -> E[z] by centered differences, step max(1e-5, 1e-3|z|).

    The gauge identity DQ[z](iz) = iQ[z] is evaluated and stored as ``gauge_defect``.
    """
    z = complex(z)
    step = max(1e-5, 1e-3 * abs(z))
    if abs(z) + step > delta_max:
        raise OutOfRegimeError(f"|z|+h={abs(z) + step:.4g} exceeds delta_max={delta_max}")

    def state(w: complex) -> NonlinearBoundState:
        return solve_nonlinear_bound_state(w, dec, delta_max)

    plus_a, minus_a = state(z + step), state(z - step)
    plus_b, minus_b = state(z + 1j * step), state(z - 1j * step)
    D1Q = (plus_a.Q - minus_a.Q) * (0.5 / step)
    D2Q = (plus_b.Q - minus_b.Q) * (0.5 / step)
    DE = ((plus_a.E - minus_a.E) / (2 * step), (plus_b.E - minus_b.E) / (2 * step))

    centre = state(z)
    iz = 1j * z
    gauge = (D1Q * iz.real + D2Q * iz.imag - centre.Q * 1j).norm()
    return BoundStateJacobian(z, D1Q, D2Q, DE, step, gauge)


def solve_refined_profiles(z_inf: complex, dec: SpectralDecomposition,
                           delta_max: float = DELTA_MAX, tolerance: float = 1e-13,
                           max_iterations: int = 100) -> RefinedProfiles:
    """
    Picard iteration for the coupled system

        (H + rho^2) A~  = P_c(A A~ + A phi + B B~) - c1 A~ + c2 B~
        (H - rho^2 - 2E) B~ = P_c(B A~ + B phi + A B~) - c2 A~ + c1 B~

    with A = 2|Q[z_inf]|^2, B = Q[z_inf]^2 after rotating z_inf to the positive real axis,
    E = E[z_inf], c1 = (A phi, phi) + (A A~, phi) + (B B~, phi) and
    c2 = (B phi, phi) + (A B~, phi) + (B A~, phi).

    Raises:
        OutOfRegimeError: measured contraction factor >= 1/2
        ConvergenceError: no convergence within max_iterations, or residuals above 1e-8
        SpectralAssumptionError: no bound state, non-generic V, or a spectral gap below 1e-6
    """
    if not dec.has_bound_state:
        raise SpectralAssumptionError("refined profiles need a trapping potential")
    if abs(dec.scattering.genericity_value) <= GENERICITY_THRESHOLD:
        raise SpectralAssumptionError("refined profiles need a generic potential")
    grid = dec.grid
    h = grid.spacing
    r = abs(complex(z_inf))
    state = solve_nonlinear_bound_state(r, dec, delta_max)
    Q = state.Q.values.real
    E = state.E
    A = 2.0 * Q ** 2
    B = Q ** 2
    lam = dec.eigenvalues[1:]
    U = dec.eigenvectors[:, 1:]
    phi = dec.phi.values.real
    rho2 = dec.rho2

    shift_a = lam + rho2
    shift_b = lam - rho2 - 2.0 * E
    margin = float(-rho2 - 2.0 * E - rho2)
    if min(shift_a.min(), shift_b.min()) < GAP_TOLERANCE:
        raise SpectralAssumptionError("near-singular inversion in the refined-profile system")

    def pair(f: np.ndarray, g: np.ndarray) -> float:
        return float(h * np.dot(f, g))

    def right_sides(fa: np.ndarray, fb: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        c1 = pair(A * phi, phi) + pair(A * fa, phi) + pair(B * fb, phi)
        c2 = pair(B * phi, phi) + pair(A * fb, phi) + pair(B * fa, phi)
        ra = U @ (U.T @ (A * fa + A * phi + B * fb)) - c1 * fa + c2 * fb
        rb = U @ (U.T @ (B * fa + B * phi + A * fb)) - c2 * fa + c1 * fb
        return ra, rb

    fa = np.zeros(grid.n_points)
    fb = np.zeros(grid.n_points)
    contraction = 0.0
    previous_change = None
    iterations = 0
    if r > 0:
        for iterations in range(1, max_iterations + 1):
            ra, rb = right_sides(fa, fb)
            new_a = U @ ((U.T @ ra) / shift_a)
            new_b = U @ ((U.T @ rb) / shift_b)
            change = float(np.sqrt(h * (np.sum((new_a - fa) ** 2) + np.sum((new_b - fb) ** 2))))
            fa, fb = new_a, new_b
            if previous_change is not None and previous_change > 1e-14:
                contraction = max(contraction, change / previous_change)
                if contraction >= 0.5:
                    raise OutOfRegimeError(
                        f"refined-profile iteration contraction {contraction:.3f} >= 1/2 at |z|={r}"
                    )
            logger.debug(f"refined profiles iteration {iterations}: change {change:.3e}")
            previous_change = change
            if change < tolerance:
                break
        else:
            raise ConvergenceError(f"refined-profile iteration did not converge at |z|={r}")

    ra, rb = right_sides(fa, fb)
    Hfa = dec.hamiltonian @ fa
    Hfb = dec.hamiltonian @ fb
    res_a = float(np.sqrt(h * np.sum((Hfa + rho2 * fa - ra) ** 2)))
    res_b = float(np.sqrt(h * np.sum((Hfb - (rho2 + 2.0 * E) * fb - rb) ** 2)))
    if max(res_a, res_b) > REFINED_RESIDUAL_LIMIT:
        raise ConvergenceError(
            f"refined-profile residuals {res_a:.2e}, {res_b:.2e} exceed {REFINED_RESIDUAL_LIMIT:g} at |z|={r}"
        )
    logger.info(f"Refined profiles at |z|={r:.4g}: contraction {contraction:.3e}, "
                f"residuals {res_a:.2e}, {res_b:.2e}")
    return RefinedProfiles(
        z_inf=complex(z_inf),
        E_inf=E,
        frak_a=ComplexField(grid, fa),
        frak_b=ComplexField(grid, fb),
        coeff_a=ComplexField(grid, A),
        coeff_b=ComplexField(grid, B),
        contraction=contraction,
        residuals=(res_a, res_b),
        iterations=iterations,
        shift_margin=margin,
    )


@dataclass(frozen=True)
class BranchRow:
    """One sample of the real bound-state branch."""

    modulus: float
    E: float
    q_norm: float
    residual: float


def bound_state_branch(moduli: Sequence[float], dec: SpectralDecomposition,
                       delta_max: float = DELTA_MAX) -> List[BranchRow]:
    """Sample (|z|, E, ||q||, residual) along the real branch."""
    rows = []
    for r in moduli:
        state = solve_nonlinear_bound_state(float(r), dec, delta_max)
        rows.append(BranchRow(float(r), state.E, state.q.norm(), state.residual))
    return rows


def branch_orders(rows: Sequence[BranchRow], rho2: float) -> Tuple[float, float]:
    """Fitted exponents p, s in ||q|| ~ |z|^p and |E + rho^2| ~ |z|^s."""
    usable = [row for row in rows if row.modulus > 0 and row.q_norm > 0 and row.E + rho2 != 0]
    if len(usable) < 2:
        return float("nan"), float("nan")
    logz = np.log([row.modulus for row in usable])
    q_fit = linregress(logz, np.log([row.q_norm for row in usable]))
    e_fit = linregress(logz, np.log([abs(row.E + rho2) for row in usable]))
    return float(q_fit.slope), float(e_fit.slope)


def orthogonality_to_phi(state: NonlinearBoundState, dec: SpectralDecomposition) -> float:
    """Reduced inner product <phi, q>."""
    return reduced_inner(dec.phi, state.q)
