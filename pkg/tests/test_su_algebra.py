"""Tests for the generator realizations and displacement operators."""

import numpy as np
import pytest

from su11_diag.su_algebra import (
    LINEAR_BASIS,
    QUADRATIC_BASIS,
    DisplacementParam,
    FockSpace,
    GeneratorLabel,
    OperatorMatrix,
    apply_generator,
    apply_su2,
    bargmann_index,
    build_generator,
    commutation_residuals,
    compose,
    displacement_su2,
    displacement_su11,
    expand_in_generators,
    expansion_block,
    expansion_distance,
    generator_blocks,
    padded_single_mode_displacement,
    similarity_su2_closed_form,
    similarity_su11_closed_form,
    single_mode_displacement,
    single_mode_leakage,
    squeezed_block,
    squeezed_vacuum_amplitudes,
    structure_constants,
    two_mode_apply,
    wrap_phase,
)

GL = GeneratorLabel

SINGLE_MODE_BASIS = (
    GL.K_ZERO_A,
    GL.K_PLUS_A,
    GL.K_MINUS_A,
    GL.K_ZERO_B,
    GL.K_PLUS_B,
    GL.K_MINUS_B,
    GL.IDENTITY,
)


class TestFockSpace:
    """Test basis ordering and interior selection."""

    def test_index_matches_occupations(self) -> None:
        """Test that index() and occupations() describe the same ordering."""
        space = FockSpace(3, 5)
        n_a, n_b = space.occupations()
        assert space.dimension == 24
        assert space.index(2, 4) == 2 * 6 + 4
        assert (n_a[16], n_b[16]) == (2, 4)

    def test_state_outside_space_raises(self) -> None:
        """Test that an occupation beyond the cutoff is rejected."""
        with pytest.raises(ValueError, match="outside the space"):
            FockSpace.square(3).index(4, 0)

    def test_invalid_cutoff_raises(self) -> None:
        """Test that cutoffs below one are rejected."""
        with pytest.raises(ValueError, match="cutoff_a"):
            FockSpace(0, 3)

    def test_interior_with_total_number(self) -> None:
        """Test that total_number keeps only complete shells."""
        space = FockSpace.square(6)
        n_a, n_b = space.occupations()
        box = space.interior_indices(2)
        shells = space.interior_indices(2, total_number=True)
        assert box.size == 25
        assert np.all(n_a[shells] + n_b[shells] <= 4)
        assert set(shells) <= set(box)

    def test_negative_margin_raises(self) -> None:
        """Test that a negative margin is rejected."""
        with pytest.raises(ValueError, match="margin"):
            FockSpace.square(4).interior_indices(-1)


class TestDisplacementParam:
    """Test normalization of (theta, phi)."""

    def test_negative_theta_flips_phase(self) -> None:
        """Test that theta < 0 becomes |theta| with phi shifted by pi."""
        param = DisplacementParam(-0.4, 0.1)
        assert param.theta == pytest.approx(0.4)
        assert param.phi == pytest.approx(0.1 + np.pi - 2 * np.pi)

    def test_zeta_round_trip(self) -> None:
        """Test that from_zeta inverts the zeta property."""
        param = DisplacementParam(0.7, -1.2)
        back = DisplacementParam.from_zeta(param.zeta)
        assert back.theta == pytest.approx(0.7)
        assert back.phi == pytest.approx(-1.2)

    def test_unit_and_zeta_agree(self) -> None:
        """Test that unit is zeta divided by its modulus."""
        param = DisplacementParam(0.5, 0.9)
        assert param.unit == pytest.approx(param.zeta / abs(param.zeta))
        assert param.unit == pytest.approx(-np.exp(-0.9j))

    def test_negated_is_inverse_argument(self) -> None:
        """Test that negated() flips the sign of zeta."""
        param = DisplacementParam(0.3, 0.2)
        assert param.negated().zeta == pytest.approx(-param.zeta)


class TestHelpers:
    """Test phase wrapping and the Bargmann index."""

    @pytest.mark.parametrize(
        ("angle", "expected"),
        [(3 * np.pi, np.pi), (-np.pi, np.pi), (0.5, 0.5), (2 * np.pi + 0.1, 0.1)],
    )
    def test_wrap_phase(self, angle: float, expected: float) -> None:
        """Test wrapping into (-pi, pi]."""
        assert wrap_phase(angle) == pytest.approx(expected)

    @pytest.mark.parametrize(
        ("state", "expected"),
        [((0, 0), (0.5, 0, 0.0)), ((3, 1), (1.5, 1, 1.0)), ((1, 4), (2.0, 1, -1.5))],
    )
    def test_bargmann_index(self, state: tuple, expected: tuple) -> None:
        """Test (k, n, mu) for a few states."""
        assert bargmann_index(*state) == expected

    def test_k0_ab_eigenvalue(self) -> None:
        """Test that K0^(ab)|n_a, n_b> = (k + n)|n_a, n_b>."""
        space = FockSpace.square(6)
        k0 = build_generator(space, GL.K_ZERO_AB).entries
        for n_a, n_b in [(0, 0), (2, 1), (1, 4)]:
            k, n, _ = bargmann_index(n_a, n_b)
            vector = space.basis_vector(n_a, n_b)
            assert np.allclose(k0 @ vector, (k + n) * vector)


class TestGenerators:
    """Test the bosonic realization."""

    def test_commutation_relations(self) -> None:
        """Test every su(1,1), su(2) and N_d relation on the interior."""
        residuals = commutation_residuals(FockSpace.square(8))
        assert residuals
        assert max(residuals.values()) < 1e-12

    def test_unknown_label_raises(self) -> None:
        """Test that parsing an unknown label fails."""
        with pytest.raises(ValueError, match="Unknown generator label"):
            GeneratorLabel.parse("K9")

    def test_parse_accepts_string_value(self) -> None:
        """Test that string values parse to labels."""
        assert GeneratorLabel.parse("K+(ab)") is GL.K_PLUS_AB

    def test_hermitian_flag_is_checked(self) -> None:
        """Test that a non-Hermitian matrix flagged Hermitian is rejected."""
        space = FockSpace.square(3)
        with pytest.raises(ValueError, match="flagged Hermitian"):
            OperatorMatrix(space, build_generator(space, GL.K_PLUS_A).entries, hermitian=True)

    def test_apply_generator_matches_matrix(self) -> None:
        """Test that the factor-wise product equals the dense matrix product."""
        space = FockSpace(4, 6)
        rng = np.random.default_rng(7)
        vectors = rng.normal(size=(space.dimension, 3)) + 1j * rng.normal(size=(space.dimension, 3))
        for label in (GL.K_ZERO_AB, GL.J_PLUS, GL.K_MINUS_B, GL.A_DAG):
            dense = build_generator(space, label).entries @ vectors
            assert np.allclose(apply_generator(space, label, vectors), dense)

    def test_two_mode_apply_matches_kron(self) -> None:
        """Test the Kronecker product shortcut on a single vector."""
        rng = np.random.default_rng(3)
        mode_a, mode_b = rng.normal(size=(4, 4)), rng.normal(size=(5, 5))
        vector = rng.normal(size=20)
        assert np.allclose(two_mode_apply(mode_a, mode_b, vector), np.kron(mode_a, mode_b) @ vector)

    def test_expansion_block_matches_compose(self) -> None:
        """Test that precomputed blocks reproduce the composed matrix."""
        space = FockSpace.square(6)
        indices = space.interior_indices(2)
        expansion = {GL.K_ZERO_AB: 2.0, GL.K_PLUS_A: 0.3j, GL.K_MINUS_A: -0.3j}
        blocks = generator_blocks(space, indices, list(expansion))
        assert np.allclose(
            expansion_block(expansion, blocks), compose(space, expansion).block(indices)
        )

    def test_expand_recovers_coefficients(self) -> None:
        """Test that the least-squares oracle recovers a known expansion."""
        space = FockSpace.square(8)
        expansion = {GL.K_ZERO_AB: 3.0, GL.J_PLUS: 0.2 - 0.1j, GL.J_MINUS: 0.2 + 0.1j, GL.IDENTITY: 0.5}
        fitted = expand_in_generators(compose(space, expansion), space, margin=2)
        assert expansion_distance(fitted, expansion) < 1e-12

    def test_structure_constants(self) -> None:
        """Test a few entries of the commutator table."""
        f = structure_constants()
        index = {label: i for i, label in enumerate(QUADRATIC_BASIS)}
        assert f[index[GL.K_ZERO_AB], index[GL.K_PLUS_AB], index[GL.K_PLUS_AB]] == pytest.approx(1.0)
        assert f[index[GL.J_PLUS], index[GL.J_MINUS], index[GL.J_ZERO]] == pytest.approx(2.0)
        assert np.allclose(f[index[GL.J_ZERO], index[GL.K_ZERO_AB]], 0.0)
        assert np.allclose(f[:, :, index[GL.IDENTITY]], 0.0)


class TestSu2Displacement:
    """Test the SU(2) displacement and its similarity closed forms."""

    def test_unitary_and_identity(self) -> None:
        """Test unitarity, and the identity at theta = 0."""
        space = FockSpace.square(6)
        assert displacement_su2(space, DisplacementParam(1.1, 0.4)).unitarity_error() < 1e-12
        identity = displacement_su2(space, DisplacementParam.identity()).entries
        assert np.allclose(identity, np.eye(space.dimension))

    def test_apply_matches_matrix(self) -> None:
        """Test the shell-wise application on vectors and on columns."""
        space = FockSpace.square(5)
        chi = DisplacementParam(0.8, -0.6)
        matrix = displacement_su2(space, chi).entries
        vector = space.basis_vector(2, 1)
        assert np.allclose(apply_su2(space, chi, vector), matrix @ vector)
        columns = np.eye(space.dimension)[:, :4]
        assert np.allclose(apply_su2(space, chi, columns), matrix @ columns)

    @pytest.mark.parametrize("label", [GL.K_MINUS_A, GL.K_MINUS_B, GL.K_MINUS_AB, GL.K_PLUS_A, GL.K_ZERO_AB])
    def test_similarity_closed_form(self, label: GeneratorLabel) -> None:
        """Test D^dag X D against the matrix conjugation."""
        space = FockSpace.square(10)
        chi = DisplacementParam(0.9, 0.7)
        conjugated = build_generator(space, label).conjugated_by(displacement_su2(space, chi))
        fitted = expand_in_generators(conjugated, space, margin=2, total_number=True)
        assert expansion_distance(fitted, similarity_su2_closed_form(label, chi)) < 1e-10

    def test_unsupported_label_raises(self) -> None:
        """Test that generators outside the table are rejected."""
        with pytest.raises(ValueError, match="No SU\\(2\\) similarity"):
            similarity_su2_closed_form(GL.J_ZERO, DisplacementParam(0.3))


class TestSu11Displacement:
    """Test single-mode squeezing and its similarity closed forms."""

    def test_squeezed_vacuum(self) -> None:
        """Test the first column of D(xi) against the analytic amplitudes."""
        xi = DisplacementParam(0.4, 1.3)
        column = single_mode_displacement(xi, 40)[:, 0]
        assert np.max(np.abs(column - squeezed_vacuum_amplitudes(xi, 40))) < 1e-10

    def test_small_leakage_for_mild_squeeze(self) -> None:
        """Test that a mild squeeze reports negligible truncation leakage."""
        space = FockSpace.square(30)
        result = displacement_su11(
            space, DisplacementParam(0.3), DisplacementParam(0.2, 1.0), margin=20
        )
        assert result.leakage < 1e-8
        assert result.matrix.entries.shape == (space.dimension, space.dimension)

    @pytest.mark.parametrize("label", [GL.A, GL.B_DAG, GL.K_ZERO_A, GL.K_PLUS_B])
    def test_similarity_closed_form(self, label: GeneratorLabel) -> None:
        """Test D^dag(xi) X D(xi) against the truncated matrices."""
        space = FockSpace.square(30)
        xi_a, xi_b = DisplacementParam(0.3, 0.5), DisplacementParam(0.2, -1.0)
        squeeze = displacement_su11(space, xi_a, xi_b).matrix
        conjugated = build_generator(space, label).conjugated_by(squeeze)
        basis = LINEAR_BASIS if label in LINEAR_BASIS else SINGLE_MODE_BASIS
        fitted = expand_in_generators(conjugated, space, margin=26, basis=basis)
        closed = similarity_su11_closed_form(label, xi_a, xi_b)
        assert expansion_distance(fitted, closed) < 1e-8

    def test_other_mode_untouched(self) -> None:
        """Test that only the displacement of the generator's mode acts."""
        closed = similarity_su11_closed_form(GL.A, DisplacementParam.identity(), DisplacementParam(0.5))
        assert closed == {GL.A: 1.0 + 0j}

    def test_truncation_deficit_shrinks_with_cutoff(self) -> None:
        """Test that the first ten columns lose less weight at larger cutoffs."""
        xi_a, xi_b = DisplacementParam(1.0, 0.7), DisplacementParam(0.8, -0.4)
        deficits = []
        for cutoff in (20, 40, 60):
            space = FockSpace.square(cutoff)
            deficits.append(displacement_su11(space, xi_a, xi_b, margin=cutoff - 10).leakage)
        assert deficits[0] > deficits[1] > deficits[2]
        assert deficits[2] < 1e-6

    def test_padded_ladder_is_long_enough(self) -> None:
        """Test that a strong squeeze grows the ladder past the first guess."""
        xi = DisplacementParam(1.6, 0.3)
        padded = padded_single_mode_displacement(xi, 20)
        assert padded.shape[0] > 61
        assert single_mode_leakage(padded, padded.shape[0] - 20) < 1e-20

    def test_padded_ladder_rejects_empty_block(self) -> None:
        """Test that at least one column is required."""
        with pytest.raises(ValueError, match="levels must be positive"):
            padded_single_mode_displacement(DisplacementParam(0.3), 0)

    def test_squeezed_block_matches_dense_conjugation(self) -> None:
        """Test the mode-by-mode conjugation against a large dense one."""
        expansion = {
            GL.K_ZERO_AB: 2.0,
            GL.J_PLUS: 0.3 + 0.1j,
            GL.J_MINUS: 0.3 - 0.1j,
            GL.K_PLUS_AB: 0.2,
            GL.K_MINUS_A: 0.1j,
            GL.IDENTITY: 0.5,
        }
        xi_a, xi_b = DisplacementParam(0.3, 0.9), DisplacementParam(0.2, -1.2)
        space = FockSpace.square(40)
        squeeze = displacement_su11(space, xi_a, xi_b).matrix
        dense = compose(space, expansion).conjugated_by(squeeze).entries
        low = np.array([space.index(n_a, n_b) for n_a in range(4) for n_b in range(4)])
        block = squeezed_block(expansion, xi_a, xi_b, 4)
        assert np.max(np.abs(block - dense[np.ix_(low, low)])) < 1e-8
