"""
Tests for grids, complex fields and quadrature helpers.
"""

import numpy as np
import pytest

from nls_lab.core.error_handling import InvalidArgumentError
from nls_lab.core.grid import (
    ComplexField,
    FrequencyGrid,
    SpatialGrid,
    derivative_values,
    h1_norm,
    inner_product,
    reduced_inner,
    spatial_derivative,
    weighted_sup_norm,
)


class TestSpatialGrid:
    """Test cases for SpatialGrid."""

    def test_nodes_and_spacing(self):
        """Test node placement x_j = -L + j*dx."""
        grid = SpatialGrid(10.0, 100)
        assert grid.spacing == pytest.approx(0.2)
        assert grid.nodes[0] == pytest.approx(-10.0)
        assert grid.nodes[-1] == pytest.approx(10.0 - 0.2)
        assert grid.nodes.shape == (100,)

    @pytest.mark.parametrize("n_points", [63, 65, 32])
    def test_rejects_bad_point_count(self, n_points):
        """Test that odd or too small point counts are rejected."""
        with pytest.raises(InvalidArgumentError):
            SpatialGrid(10.0, n_points)

    def test_rejects_nonpositive_half_width(self):
        """Test that the half width must be positive."""
        with pytest.raises(InvalidArgumentError):
            SpatialGrid(0.0, 128)

    def test_masks(self):
        """Test the outer and inner node masks."""
        grid = SpatialGrid(10.0, 200)
        outer = grid.outer_mask()
        assert np.all(np.abs(grid.nodes[outer]) >= 9.0)
        assert not np.any(outer & grid.inner_mask())

    def test_japanese_bracket(self):
        """Test <x> = sqrt(1 + x^2)."""
        grid = SpatialGrid(10.0, 200)
        assert np.min(grid.japanese_bracket()) >= 1.0
        assert grid.japanese_bracket()[0] == pytest.approx(np.sqrt(101.0))


class TestFrequencyGrid:
    """Test cases for FrequencyGrid."""

    def test_zero_is_never_a_node(self):
        """Test the half-spacing offset."""
        kgrid = FrequencyGrid(8.0, 256)
        assert np.min(np.abs(kgrid.nodes)) == pytest.approx(kgrid.spacing / 2)

    def test_nodes_symmetric(self):
        """Test that the mirror index maps k to -k."""
        kgrid = FrequencyGrid(4.0, 64)
        k = kgrid.nodes
        np.testing.assert_allclose(k[kgrid.mirror_index()], -k, atol=1e-13)

    def test_positive_index(self):
        """Test that positive_index picks exactly the k > 0 nodes in order."""
        kgrid = FrequencyGrid(4.0, 64)
        k = kgrid.nodes[kgrid.positive_index()]
        assert np.all(k > 0)
        assert np.all(np.diff(k) > 0)
        assert k.size == 32

    def test_rejects_odd_count(self):
        """Test that m_points must be even."""
        with pytest.raises(InvalidArgumentError):
            FrequencyGrid(4.0, 33)

    def test_check_compatible(self):
        """Test the band limit against pi/dx."""
        coarse = SpatialGrid(100.0, 64)
        with pytest.raises(InvalidArgumentError, match="band limit"):
            FrequencyGrid(8.0, 64).check_compatible(coarse)
        FrequencyGrid(0.5, 64).check_compatible(coarse)


class TestComplexField:
    """Test cases for ComplexField."""

    def test_shape_mismatch(self, small_grid):
        """Test that a field must match its grid."""
        with pytest.raises(InvalidArgumentError):
            ComplexField(small_grid, np.zeros(10))

    def test_non_finite_rejected(self, small_grid):
        """Test that NaN samples are rejected."""
        values = np.zeros(small_grid.n_points, dtype=complex)
        values[3] = np.nan
        with pytest.raises(InvalidArgumentError, match="non-finite"):
            ComplexField(small_grid, values)

    def test_values_are_read_only(self, small_grid):
        """Test that field samples cannot be mutated in place."""
        u = small_grid.zeros()
        with pytest.raises(ValueError):
            u.values[0] = 1.0

    def test_arithmetic(self, small_grid, gaussian_packet):
        """Test field addition, subtraction and scaling."""
        twice = gaussian_packet + gaussian_packet
        np.testing.assert_allclose(twice.values, (2 * gaussian_packet).values)
        assert (gaussian_packet - gaussian_packet).sup_norm() == 0.0
        np.testing.assert_allclose((-gaussian_packet).values, -gaussian_packet.values)

    def test_different_grids_rejected(self, small_grid):
        """Test that mixing grids raises."""
        other = SpatialGrid(10.0, 512)
        with pytest.raises(InvalidArgumentError):
            small_grid.zeros() + other.zeros()

    def test_gaussian_norm(self, small_grid):
        """Test the L2 norm of exp(-x^2/2) against sqrt(sqrt(pi))."""
        u = small_grid.field(lambda x: np.exp(-x ** 2 / 2.0))
        assert u.norm() == pytest.approx(np.pi ** 0.25, rel=1e-10)
        assert u.sup_norm() == pytest.approx(1.0)


class TestInnerProducts:
    """Test cases for the inner products and weighted norms."""

    def test_complex_pairing_is_conjugate_linear_on_the_left(self, gaussian_packet):
        """Test (i a, b) = -i (a, b)."""
        base = inner_product(gaussian_packet, gaussian_packet)
        assert inner_product(1j * gaussian_packet, gaussian_packet) == pytest.approx(-1j * base)

    def test_reduced_is_real_part(self, small_grid, gaussian_packet):
        """Test that the reduced pairing drops the imaginary part."""
        other = small_grid.field(lambda x: 1j * np.exp(-x ** 2))
        full = inner_product(gaussian_packet, other)
        assert inner_product(gaussian_packet, other, "reduced") == pytest.approx(complex(full.real, 0.0))
        assert reduced_inner(gaussian_packet, other) == pytest.approx(full.real)

    def test_reduced_orthogonality_of_i_multiple(self, small_grid):
        """Test <u, i u> = 0 for the reduced pairing."""
        u = small_grid.field(lambda x: np.exp(-x ** 2))
        assert reduced_inner(u, 1j * u) == pytest.approx(0.0, abs=1e-14)

    def test_unknown_kind(self, gaussian_packet):
        """Test that an unknown pairing kind raises."""
        with pytest.raises(InvalidArgumentError):
            inner_product(gaussian_packet, gaussian_packet, "hermitian")  # type: ignore[arg-type]

    def test_weighted_sup_norm(self, small_grid):
        """Test that sigma = 0 reduces to the sup norm and negative sigma raises."""
        u = small_grid.field(lambda x: np.exp(-(x - 3.0) ** 2))
        assert weighted_sup_norm(u, 0.0) == pytest.approx(u.sup_norm())
        assert weighted_sup_norm(u, 1.0) < u.sup_norm()
        with pytest.raises(InvalidArgumentError):
            weighted_sup_norm(u, -1.0)


class TestDerivatives:
    """Test cases for the finite-difference derivatives."""

    def test_exact_on_quartics(self):
        """Test that the 4th-order stencils differentiate quartics exactly."""
        grid = SpatialGrid(2.0, 64)
        x = grid.nodes
        u = x ** 4 - 2 * x ** 3 + x
        np.testing.assert_allclose(derivative_values(u, grid.spacing, 1), 4 * x ** 3 - 6 * x ** 2 + 1,
                                   atol=1e-9)
        np.testing.assert_allclose(derivative_values(u, grid.spacing, 2)[2:-2], 12 * x[2:-2] ** 2 - 12 * x[2:-2],
                                   atol=1e-8)

    def test_gaussian_derivative(self, small_grid):
        """Test the first derivative of a gaussian."""
        x = small_grid.nodes
        u = small_grid.field(np.exp(-x ** 2))
        du = spatial_derivative(u, 1)
        np.testing.assert_allclose(du.values.real, -2 * x * np.exp(-x ** 2), atol=1e-3)

    def test_bad_order(self, small_grid):
        """Test that only orders 1 and 2 exist."""
        with pytest.raises(InvalidArgumentError):
            derivative_values(small_grid.nodes, small_grid.spacing, 3)

    def test_h1_norm_dominates_l2(self, gaussian_packet):
        """Test ||u||_H1 >= ||u||_L2."""
        assert h1_norm(gaussian_packet) > gaussian_packet.norm()
