"""
Tests for the split-step integrator and trajectories.
"""

import numpy as np
import pytest

from nls_lab.core.boundstate import solve_nonlinear_bound_state
from nls_lab.core.error_handling import (
    BoundaryPollutionError,
    InvalidArgumentError,
    OutOfRegimeError,
    PreconditionError,
)
from nls_lab.core.evolution import (
    QUARTIC_PREFACTOR,
    QUARTIC_PREFACTOR_ALT,
    EvolutionConfig,
    ModelCoefficients,
    conservation_selection,
    conserved_quantities,
    evolve,
)
from nls_lab.core.grid import SpatialGrid
from nls_lab.core.spectral import linear_propagator


@pytest.fixture
def packet(small_grid):
    """Small packet away from the boundary."""
    return small_grid.field(lambda x: 0.05 * np.exp(-x ** 2 / 4.0 + 0.5j * x))


@pytest.fixture
def strong_packet(small_grid):
    """O(1) packet whose int |u|^4 changes visibly within t = 1."""
    return small_grid.field(lambda x: np.exp(-x ** 2 / 4.0 + 0.5j * x))


class TestEvolutionConfig:
    """Test cases for EvolutionConfig validation."""

    def test_step_count(self):
        """Test n_steps = t_end / |dt|."""
        assert EvolutionConfig(dt=0.02, t_end=1.0).n_steps == 50
        assert EvolutionConfig(dt=-0.02, t_end=1.0).n_steps == 50

    @pytest.mark.parametrize("kwargs", [
        {"dt": 0.0, "t_end": 1.0},
        {"dt": 0.5, "t_end": 0.1},
        {"dt": 0.01, "t_end": 1.0, "snapshot_stride": 0},
        {"dt": 0.01, "t_end": 1.0, "nonlinearity_sign": 2},
        {"dt": 0.01, "t_end": 1.0, "variant": "kdv"},
        {"dt": 0.01, "t_end": 1.0, "variant": "model"},
    ])
    def test_invalid(self, kwargs):
        """Test rejected configurations."""
        with pytest.raises(InvalidArgumentError):
            EvolutionConfig(**kwargs)

    def test_model_out_of_regime(self, small_grid):
        """Test that large model coefficients are refused."""
        big = np.full(small_grid.n_points, 0.5)
        zero = np.zeros(small_grid.n_points)
        with pytest.raises(OutOfRegimeError):
            EvolutionConfig(dt=0.01, t_end=1.0, variant="model", model=ModelCoefficients(big, zero, zero))

    def test_reversed(self):
        """Test that reversing flips the sign of dt only."""
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=5)
        back = cfg.reversed()
        assert back.dt == -0.02
        assert back.snapshot_stride == 5


class TestEvolve:
    """Test cases for evolve."""

    def test_snapshot_schedule(self, well_decomposition, packet):
        """Test snapshots every stride steps plus the last step."""
        traj = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=20), well_decomposition)
        np.testing.assert_allclose(traj.times, [0.0, 0.4, 0.8, 1.0])
        assert len(traj) == 4
        np.testing.assert_allclose(traj.fields[0], packet.values)
        assert len(traj.step_times) == 51

    def test_start_time(self, well_decomposition, packet):
        """Test that times are offset by t0."""
        traj = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=25), well_decomposition, t0=1.0)
        np.testing.assert_allclose(traj.times, [1.0, 1.5, 2.0])

    def test_mass_conservation(self, well_decomposition, packet):
        """Test that the full NLS flow conserves mass to roundoff."""
        traj = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=10), well_decomposition)
        assert traj.relative_mass_drift() < 1e-10

    def test_linear_flow_is_exact(self, well_decomposition, packet):
        """Test that lambda = 0 reproduces the dense propagator."""
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=50, nonlinearity_sign=0)
        traj = evolve(packet, cfg, well_decomposition)
        expected = linear_propagator(packet, 1.0, well_decomposition)
        assert (traj.final - expected).norm() < 1e-10

    def test_solitary_wave(self, well_decomposition):
        """Test that Q[z] only rotates: u(t) = e^{iEt} Q."""
        state = solve_nonlinear_bound_state(0.05, well_decomposition)
        traj = evolve(state.Q, EvolutionConfig(dt=0.02, t_end=2.0, snapshot_stride=100), well_decomposition)
        expected = state.Q * np.exp(1j * state.E * 2.0)
        assert (traj.final - expected).norm() < 1e-5

    def test_time_reversibility(self, well_decomposition, packet):
        """Test that integrating forward and back returns the initial datum."""
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=50)
        forward = evolve(packet, cfg, well_decomposition)
        back = evolve(forward.final, cfg.reversed(), well_decomposition, t0=1.0)
        assert back.times[-1] == pytest.approx(0.0, abs=1e-12)
        assert (back.final - packet).norm() < 1e-9

    def test_model_variant_runs(self, bump_decomposition, small_grid, packet):
        """Test the model equation with localized coefficients."""
        profile = 0.01 * np.exp(-small_grid.nodes ** 2)
        model = ModelCoefficients(profile, profile, 5 * profile, phase_rate=lambda t: -0.3)
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=25, variant="model", model=model)
        traj = evolve(packet, cfg, bump_decomposition, theta0=0.0)
        assert len(traj) == 3
        np.testing.assert_allclose(traj.phase, [0.0, -0.3, -0.6], atol=1e-12)
        assert np.all(np.isfinite(traj.fields))

    def test_dt_too_large(self, well_decomposition, packet):
        """Test the accuracy guard |dt| <= dx/2."""
        with pytest.raises(InvalidArgumentError, match="accuracy guard"):
            evolve(packet, EvolutionConfig(dt=0.1, t_end=1.0), well_decomposition)

    def test_not_band_limited(self, well_decomposition, small_grid):
        """Test that a rough initial datum is refused."""
        rough = small_grid.field(lambda x: 0.01 * np.exp(-x ** 2) * np.cos(20.0 * x))
        with pytest.raises(PreconditionError, match="band-limited"):
            evolve(rough, EvolutionConfig(dt=0.02, t_end=0.1), well_decomposition)

    def test_not_decayed(self, well_decomposition, small_grid):
        """Test that mass at the boundary is refused up front."""
        flat = small_grid.field(np.full(small_grid.n_points, 0.01))
        with pytest.raises(PreconditionError, match="boundary"):
            evolve(flat, EvolutionConfig(dt=0.02, t_end=0.1), well_decomposition)

    def test_boundary_pollution(self, well_decomposition, small_grid):
        """Test that radiation reaching the edge aborts the run."""
        # carrier k = -2 travels right at speed 4 under e^{iHt}
        fast = small_grid.field(lambda x: 0.01 * np.exp(-(x - 14.0) ** 2 - 2j * x))
        cfg = EvolutionConfig(dt=0.02, t_end=2.0, snapshot_stride=5, nonlinearity_sign=0)
        with pytest.raises(BoundaryPollutionError) as excinfo:
            evolve(fast, cfg, well_decomposition)
        assert excinfo.value.boundary_fraction > 1e-6
        assert 0 < excinfo.value.time <= 2.0

    def test_grid_mismatch(self, well_decomposition):
        """Test that the datum must live on the decomposition's grid."""
        with pytest.raises(InvalidArgumentError):
            evolve(SpatialGrid(10.0, 128).zeros(), EvolutionConfig(dt=0.02, t_end=0.1), well_decomposition)


class TestTrajectory:
    """Test cases for Trajectory helpers."""

    def test_until_and_subsample(self, well_decomposition, packet):
        """Test truncation at a time and thinning of snapshots."""
        traj = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=5), well_decomposition)
        head = traj.until(0.5)
        assert head.times[-1] == pytest.approx(0.5)
        assert head.step_times[-1] == pytest.approx(0.5)
        assert len(head.mass) == len(head.step_times)
        assert len(head.phase) == len(head)
        thin = traj.subsample(2)
        np.testing.assert_allclose(thin.times, traj.times[::2])

    def test_index_of(self, well_decomposition, packet):
        """Test the nearest stored time lookup."""
        traj = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=10), well_decomposition)
        assert traj.times[traj.index_of(0.41)] == pytest.approx(0.4)


class TestConservedQuantities:
    """Test cases for conserved_quantities."""

    def test_mass_of_gaussian(self, well_potential):
        """Test the mass of exp(-x^2/2)."""
        u = well_potential.grid.field(lambda x: np.exp(-x ** 2 / 2.0))
        mass, energy = conserved_quantities(u, well_potential)
        assert mass == pytest.approx(np.sqrt(np.pi))
        assert np.isfinite(energy)

    def test_quartic_prefactor(self, well_potential):
        """Test that the energy moves by -c4 int |u|^4 when c4 changes."""
        u = well_potential.grid.field(lambda x: np.exp(-x ** 2 / 2.0))
        _, e_half = conserved_quantities(u, well_potential, 0.5)
        _, e_quarter = conserved_quantities(u, well_potential, 0.25)
        # int exp(-2x^2) dx = sqrt(pi/2)
        assert e_quarter - e_half == pytest.approx(0.25 * np.sqrt(np.pi / 2.0))

    def test_nonlinearity_sign(self, well_potential):
        """Test that the quartic term enters as -lambda c4 int |u|^4."""
        u = well_potential.grid.field(lambda x: np.exp(-x ** 2 / 2.0))
        _, focusing = conserved_quantities(u, well_potential, 0.5, nonlinearity_sign=1)
        _, linear = conserved_quantities(u, well_potential, 0.5, nonlinearity_sign=0)
        _, defocusing = conserved_quantities(u, well_potential, 0.5, nonlinearity_sign=-1)
        assert defocusing - focusing == pytest.approx(np.sqrt(np.pi / 2.0))
        assert linear == pytest.approx(0.5 * (focusing + defocusing))

    def test_invalid_sign(self, well_potential):
        """Test that the sign must be -1, 0 or +1."""
        u = well_potential.grid.field(lambda x: np.exp(-x ** 2 / 2.0))
        with pytest.raises(InvalidArgumentError):
            conserved_quantities(u, well_potential, nonlinearity_sign=2)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_energy_drift_is_second_order(self, well_decomposition, strong_packet, sign):
        """Test that halving dt divides the energy drift by about 4 for both signs of lambda."""
        drifts = []
        for dt in (0.02, 0.01):
            cfg = EvolutionConfig(dt=dt, t_end=1.0, snapshot_stride=int(round(1.0 / dt)), nonlinearity_sign=sign)
            drifts.append(evolve(strong_packet, cfg, well_decomposition).energy_drift())
        assert 3.0 < drifts[0] / drifts[1] < 5.0

    def test_energy_with_other_prefactor(self, well_decomposition, strong_packet):
        """Test that re-weighting the stored quartic integral matches a run with the other c4."""
        cfg = EvolutionConfig(dt=0.02, t_end=0.5, snapshot_stride=25, nonlinearity_sign=-1)
        traj = evolve(strong_packet, cfg, well_decomposition)
        other = evolve(strong_packet, EvolutionConfig(dt=0.02, t_end=0.5, snapshot_stride=25, nonlinearity_sign=-1,
                                                      quartic_prefactor=0.25), well_decomposition)
        np.testing.assert_allclose(traj.energy_with(0.25), other.energy, rtol=0, atol=1e-12)
        assert len(traj.until(0.2).quartic) == len(traj.until(0.2).step_times)


class TestConservationSelection:
    """Test cases for conservation_selection."""

    @pytest.mark.parametrize("sign", [1, -1])
    def test_only_true_prefactor_converges(self, well_decomposition, strong_packet, sign):
        """Test that only c4 = 1/2 shows the dt^2 drift ratio."""
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=50, nonlinearity_sign=sign)
        selection = conservation_selection(strong_packet, cfg, well_decomposition)
        assert selection.selected == QUARTIC_PREFACTOR
        assert 3.0 < selection.ratio(QUARTIC_PREFACTOR) < 5.0
        assert selection.ratio(QUARTIC_PREFACTOR_ALT) < 2.0
        assert selection.conclusive

    def test_needs_nonlinear_run(self, well_decomposition, strong_packet):
        """Test that a linear run cannot tell prefactors apart."""
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, nonlinearity_sign=0)
        with pytest.raises(PreconditionError):
            conservation_selection(strong_packet, cfg, well_decomposition)


class TestStructure:
    """Test cases for symmetries and the order of the splitting."""

    def test_gauge_equivariance(self, well_decomposition, strong_packet):
        """Test evolve(e^{i theta} u0) = e^{i theta} evolve(u0)."""
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=50)
        rotation = np.exp(0.7j)
        plain = evolve(strong_packet, cfg, well_decomposition)
        rotated = evolve(strong_packet * rotation, cfg, well_decomposition)
        np.testing.assert_allclose(rotated.fields, rotation * plain.fields, rtol=0, atol=1e-12)

    def test_zero_model_is_full_equation(self, well_decomposition, small_grid, packet):
        """Test that the model equation with vanishing coefficients reproduces the full flow."""
        zero = np.zeros(small_grid.n_points)
        model = ModelCoefficients(zero, zero, zero, phase_rate=lambda t: -0.3)
        full = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=10), well_decomposition)
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=10, variant="model", model=model)
        reduced = evolve(packet, cfg, well_decomposition)
        np.testing.assert_allclose(reduced.fields, full.fields, rtol=0, atol=1e-13)

    def test_constant_a1_is_a_phase(self, well_decomposition, small_grid, packet):
        """Test that a constant a1 rotates the full flow by e^{-i a1 t} through the RK4 substep."""
        zero = np.zeros(small_grid.n_points)
        a1 = 0.01
        model = ModelCoefficients(np.full(small_grid.n_points, a1), zero, zero)
        full = evolve(packet, EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=50), well_decomposition)
        cfg = EvolutionConfig(dt=0.02, t_end=1.0, snapshot_stride=50, variant="model", model=model)
        shifted = evolve(packet, cfg, well_decomposition)
        assert (shifted.final - full.final * np.exp(-1j * a1)).norm() < 1e-10

    def test_strang_order(self, well_decomposition, strong_packet):
        """Test that the error at t = 1 drops by about 4 when dt is halved."""
        def final(dt: float):
            cfg = EvolutionConfig(dt=dt, t_end=1.0, snapshot_stride=int(round(1.0 / dt)))
            return evolve(strong_packet, cfg, well_decomposition).final

        reference = final(0.0025)
        coarse = (final(0.02) - reference).norm()
        fine = (final(0.01) - reference).norm()
        assert 3.2 < coarse / fine < 5.0
