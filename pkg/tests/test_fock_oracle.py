"""Tests for the truncated-Fock brute-force oracle."""

import numpy as np
import pytest

from su11_diag.diagonalizer import diagonalize as analytic_diagonalize
from su11_diag.fock_oracle import (
    converged_spectrum,
    decoupling_residual,
    diagonalize,
    offdiagonal_norm,
)
from su11_diag.hamiltonian import AlphaCoeffs, build_matrix
from su11_diag.su_algebra import (
    DisplacementParam,
    FockSpace,
    displacement_su2,
    displacement_su11,
)


class TestDiagonalize:
    """Test the dense eigendecomposition."""

    def test_eigenpairs_have_small_residuals(self) -> None:
        """Test ascending eigenvalues and A v = lambda v."""
        matrix = build_matrix(AlphaCoeffs(4.0, 0.3, 0.1, 0.2), FockSpace.square(6))
        result = diagonalize(matrix)
        assert np.all(np.diff(result.eigenvalues) >= 0)
        assert np.max(result.residuals(matrix.entries)) < 1e-10
        assert result.space == matrix.space

    def test_bare_array_accepted(self) -> None:
        """Test that a plain Hermitian array works without a space."""
        result = diagonalize(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert result.lowest(2) == pytest.approx([1.0, 3.0])
        assert result.space is None

    def test_non_hermitian_rejected(self) -> None:
        """Test that a non-Hermitian input is refused."""
        with pytest.raises(ValueError, match="not Hermitian"):
            diagonalize(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_non_square_rejected(self) -> None:
        """Test that a non-square array is refused."""
        with pytest.raises(ValueError, match="square matrix"):
            diagonalize(np.zeros((2, 3)))


class TestConvergence:
    """Test the cutoff ladder."""

    def test_stable_example_converges(self) -> None:
        """Test the (4, 0.5) ground energy sqrt(15)/4 + 1."""
        report = converged_spectrum(AlphaCoeffs(4.0, 0.5), 3, cutoffs=[20, 30], threads=1)
        assert report.all_converged
        assert report.ground_monotone()
        assert report.final[0] == pytest.approx(np.sqrt(15.0) / 4 + 1.0, rel=1e-10)
        assert report.cutoffs == [20, 30]

    def test_unstable_example_does_not_converge(self) -> None:
        """Test that an unbounded spectrum keeps falling with the cutoff."""
        report = converged_spectrum(AlphaCoeffs(1.0, 0.6), 1, cutoffs=[20, 30], threads=1)
        assert not report.all_converged
        assert report.sequences[1, 0] < report.sequences[0, 0]

    def test_ladder_needs_two_rungs(self) -> None:
        """Test that a single cutoff is refused."""
        with pytest.raises(ValueError, match="at least two cutoffs"):
            converged_spectrum(AlphaCoeffs(4.0), 1, cutoffs=[20])

    def test_too_many_levels_for_cutoff(self) -> None:
        """Test that the smallest rung must hold the requested levels."""
        with pytest.raises(ValueError, match="holds fewer than"):
            converged_spectrum(AlphaCoeffs(4.0), 10, cutoffs=[1, 2])


class TestOffDiagonalNorm:
    """Test the diagonality measure."""

    def test_coupled_hamiltonian_is_not_diagonal(self) -> None:
        """Test that the untransformed Hamiltonian has off-diagonal entries."""
        alpha = AlphaCoeffs(4.0, 0.3, 0.1, 0.2)
        assert offdiagonal_norm(build_matrix(alpha, FockSpace.square(30)), margin=10) > 0.1

    def test_truncated_conjugation_on_deep_interior(self) -> None:
        """Test D^dag H D built on one truncated space, far from the cutoff."""
        alpha = AlphaCoeffs(4.0, 0.3, 0.1, 0.2)
        solution = analytic_diagonalize(alpha)
        space = FockSpace.square(30)
        unitary = displacement_su2(space, solution.chi.chi) @ displacement_su11(
            space, solution.xi.xi_a, solution.xi.xi_b
        ).matrix
        transformed = build_matrix(alpha, space).conjugated_by(unitary)
        assert offdiagonal_norm(transformed, margin=26, total_number=True) < 1e-8

    def test_margin_must_leave_interior(self) -> None:
        """Test that the margin must be below the cutoff."""
        with pytest.raises(ValueError, match="margin"):
            offdiagonal_norm(build_matrix(AlphaCoeffs(4.0), FockSpace.square(4)), margin=4)

    def test_bare_array_needs_space(self) -> None:
        """Test that a bare array without a space is refused."""
        with pytest.raises(ValueError, match="FockSpace is required"):
            offdiagonal_norm(np.eye(4), margin=0)


class TestDecouplingResidual:
    """Test D^dag H D with padded squeeze ladders."""

    @pytest.mark.parametrize(
        "alpha",
        [
            AlphaCoeffs(4.0, 0.3, 0.1, 0.2),
            AlphaCoeffs(3.0, 0.5j, 0.2 - 0.1j, 0.3 + 0.2j),
            AlphaCoeffs(4.0, 0.6, 0.2, 0.4),
        ],
    )
    def test_diagonal_at_cutoff_60(self, alpha: AlphaCoeffs) -> None:
        """Test the off-diagonal part on n_a, n_b <= 50."""
        solution = analytic_diagonalize(alpha)
        residual = decoupling_residual(
            alpha, solution.chi.chi, solution.xi.xi_a, solution.xi.xi_b, cutoff=60, margin=10
        )
        assert residual < 1e-6

    def test_tilt_alone_leaves_squeezing(self) -> None:
        """Test that skipping the squeeze leaves large off-diagonal entries."""
        alpha = AlphaCoeffs(3.0, 0.5j, 0.2 - 0.1j, 0.3 + 0.2j)
        solution = analytic_diagonalize(alpha)
        identity = DisplacementParam.identity()
        residual = decoupling_residual(alpha, solution.chi.chi, identity, identity, cutoff=30)
        assert residual > 0.1

    def test_margin_must_leave_interior(self) -> None:
        """Test that the margin must be below the cutoff."""
        identity = DisplacementParam.identity()
        with pytest.raises(ValueError, match="margin"):
            decoupling_residual(AlphaCoeffs(4.0), identity, identity, identity, cutoff=10, margin=10)
