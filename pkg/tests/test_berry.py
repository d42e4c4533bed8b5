"""Tests for parameter paths, the invariant operator and adiabatic phases."""

from typing import Dict

import numpy as np
import pytest

from su11_diag.berry import (
    TRAJECTORY_COLUMNS,
    DegeneracyError,
    OpenPathError,
    ParameterPath,
    Windings,
    berry_phase_closed,
    berry_phase_numeric,
    berry_phase_windings,
    dt_coefficients,
    dt_transform_coefficients,
    dt_transform_oracle,
    dynamical_phase,
    integrand_rows,
    invariant_consistency,
    invariant_operator,
    invariant_residual,
    lewis_phase,
    linear_path,
    phase_locked_path,
    phase_result,
    wilson_loop_phase,
)
from su11_diag.hamiltonian import AlphaCoeffs
from su11_diag.su_algebra import (
    FockSpace,
    GeneratorLabel,
    bargmann_index,
    expansion_distance,
    wrap_phase,
)
from su11_diag.verify import moving_alpha

LOOP_BASE = AlphaCoeffs(4.0, 0.6, 0.2, 0.4)


@pytest.fixture(scope="module")
def loop() -> ParameterPath:
    """Phase-locked loop with unit windings."""
    return phase_locked_path(LOOP_BASE, samples=400, threads=1)


@pytest.fixture(scope="module")
def moving_path() -> ParameterPath:
    """Loop on which every displacement angle moves."""
    return ParameterPath.from_function(moving_alpha, 1.0, samples=16, threads=1)


def _closed_ground(path: ParameterPath) -> float:
    theta_a, theta_b = path.trajectory[0, 2], path.trajectory[0, 4]
    return -np.pi / 2 * (np.cosh(theta_a) + np.cosh(theta_b) - 2)


class TestParameterPath:
    """Test path construction and its diagnostics."""

    def test_loop_is_closed_locked_and_flat(self, loop: ParameterPath) -> None:
        """Test the properties the closed form relies on."""
        assert loop.samples == 400
        assert loop.duration == pytest.approx(1.0)
        assert loop.closed
        assert loop.is_phase_locked()
        assert loop.constant_angles()
        assert loop.phase_windings() == Windings(1, 1, 1)
        assert loop.trajectory.shape == (401, len(TRAJECTORY_COLUMNS))

    def test_windings_read_from_samples(self, loop: ParameterPath) -> None:
        """Test that a path without recorded windings infers them."""
        bare = ParameterPath.from_samples(loop.times, loop.alphas, threads=1)
        assert bare.windings is None
        assert bare.phase_windings() == Windings(1, 1, 1)

    def test_phases_are_unwrapped(self, loop: ParameterPath) -> None:
        """Test that adjacent phase samples never jump by 2 pi."""
        steps = np.abs(np.diff(loop.trajectory[:, [1, 3, 5]], axis=0))
        assert np.max(steps) < 0.1

    def test_broken_winding_lock_raises(self) -> None:
        """Test that 2 w_ab != w_a + w_b is refused."""
        with pytest.raises(ValueError, match="violate the phase lock"):
            phase_locked_path(LOOP_BASE, windings=(1, 1, 2), samples=8)

    def test_broken_base_lock_raises(self) -> None:
        """Test that base phases off the requested lock order are refused."""
        base = AlphaCoeffs(4.0, 0.6, 0.2, 0.4j)
        with pytest.raises(ValueError, match="Base phases break the lock"):
            phase_locked_path(base, samples=8)
        assert phase_locked_path(base, samples=8, lock_order=1).is_phase_locked()

    def test_linear_path_is_open(self) -> None:
        """Test that an interpolation between two points is not a loop."""
        path = linear_path(AlphaCoeffs(4.0, 0.3), AlphaCoeffs(4.0, 0.5, 0.1, 0.2), samples=10)
        assert not path.closed
        with pytest.raises(OpenPathError, match="not a closed loop"):
            path.require_closed()

    def test_too_few_samples(self) -> None:
        """Test that two samples are not a path."""
        with pytest.raises(ValueError, match="at least 3 samples"):
            ParameterPath([0.0, 1.0], [LOOP_BASE, LOOP_BASE])

    def test_times_must_increase(self) -> None:
        """Test that unordered sample times are refused."""
        with pytest.raises(ValueError, match="strictly increasing"):
            ParameterPath([0.0, 0.5, 0.5], [LOOP_BASE] * 3)

    def test_rates_of_phase_locked_loop(self, loop: ParameterPath) -> None:
        """Test that only the phases move, at constant speed."""
        assert np.allclose(loop.rates[:, [0, 2, 4]], 0.0, atol=1e-9)
        assert np.allclose(loop.rates[:, 3], -2 * np.pi)
        assert np.allclose(loop.rates[:, 5], -2 * np.pi)

    def test_displacement_at_uses_generator(self, moving_path: ParameterPath) -> None:
        """Test that exact solves reproduce the sampled displacements."""
        exact = moving_path.displacement_at(float(moving_path.times[5]))
        assert np.allclose(exact.row(), moving_path.displacements(5).row())
        bare = ParameterPath.from_samples(moving_path.times, moving_path.alphas, threads=1)
        assert bare.generator is None
        assert np.allclose(bare.displacement_at(float(bare.times[5])).row(), bare.trajectory[5])


class TestDtTransform:
    """Test the transformed time derivative."""

    def test_zero_rates_give_zero(self) -> None:
        """Test that a static displacement has no time derivative."""
        coefficients = dt_coefficients([0.4, 0.1, 0.3, -0.2, 0.2, 0.5], [0.0] * 6)
        expansion = coefficients.as_expansion()
        assert max(abs(v) for v in expansion.values()) == 0.0

    def test_expansion_is_hermitian(self, moving_path: ParameterPath) -> None:
        """Test that raising and lowering coefficients are conjugates."""
        expansion = dt_transform_coefficients(moving_path, 0.3).as_expansion()
        pairs = [
            (GeneratorLabel.J_PLUS, GeneratorLabel.J_MINUS),
            (GeneratorLabel.K_PLUS_AB, GeneratorLabel.K_MINUS_AB),
            (GeneratorLabel.K_PLUS_A, GeneratorLabel.K_MINUS_A),
        ]
        for plus, minus in pairs:
            assert expansion[plus] == pytest.approx(np.conj(expansion[minus]))
        assert expansion[GeneratorLabel.K_ZERO_AB].imag == 0.0

    def test_matches_finite_difference_oracle(self, moving_path: ParameterPath) -> None:
        """Test the closed form against i D^dag dD/dt and its O(delta^2) error."""
        space = FockSpace.square(30)
        closed = dt_transform_coefficients(moving_path, 0.3).as_expansion()
        coarse = expansion_distance(dt_transform_oracle(moving_path, 0.3, space, 1e-3), closed)
        fine = expansion_distance(dt_transform_oracle(moving_path, 0.3, space, 1e-4), closed)
        assert coarse < 1e-3
        assert coarse / fine > 30


class TestInvariant:
    """Test the invariant operator I = D K0^(ab) D^dag."""

    def test_matrix_matches_expansion(self, moving_path: ParameterPath) -> None:
        """Test matrix conjugation against the generator expansion."""
        invariant = invariant_operator(moving_path, 0.25, FockSpace.square(24))
        assert invariant.discrepancy < 1e-8
        assert invariant.matrix.hermiticity_error() < 1e-14

    def test_residual_shrinks_with_period(self) -> None:
        """Test that i dI/dt + [I, H] falls off as the loop slows down."""
        space = FockSpace.square(16)
        fast = phase_locked_path(LOOP_BASE, samples=200, duration=1.0, threads=1)
        slow = phase_locked_path(LOOP_BASE, samples=200, duration=10.0, threads=1)
        fast_residual = invariant_residual(fast, space, threads=1)
        slow_residual = invariant_residual(slow, space, threads=1)
        assert fast_residual > 5 * slow_residual

    def test_eigenvalues_match_k0_ab(self, moving_path: ParameterPath) -> None:
        """Test that I(t) keeps the spectrum (n_a + n_b + 1)/2 of K0^(ab)."""
        space = FockSpace.square(12)
        invariant = invariant_operator(moving_path, 0.25, space)
        eigenvalues = np.linalg.eigvalsh(invariant.matrix.entries)
        n_a, n_b = space.occupations()
        expected = np.sort((n_a + n_b + 1) / 2.0)
        assert np.max(np.abs(eigenvalues - expected)) < 1e-10
        assert eigenvalues[:6] == pytest.approx([0.5, 1.0, 1.0, 1.5, 1.5, 1.5], abs=1e-10)

    def test_residual_falls_as_inverse_period(self) -> None:
        """Test the log-log slope of the residual against the loop period."""
        space = FockSpace.square(24)
        periods = np.array([10.0, 100.0, 1000.0])
        residuals = [
            invariant_residual(
                phase_locked_path(LOOP_BASE, samples=200, duration=float(period), threads=1),
                space,
                margin=16,
                threads=1,
            )
            for period in periods
        ]
        slope = np.polyfit(np.log(periods), np.log(residuals), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.1)

    def test_consistency_on_moving_path(self) -> None:
        """Test that only the dI/dt term survives and it scales with the speed."""

        def slow_alpha(t: float) -> AlphaCoeffs:
            return moving_alpha(t / 10.0)

        fast = ParameterPath.from_function(moving_alpha, 1.0, samples=64, threads=1)
        slow = ParameterPath.from_function(slow_alpha, 10.0, samples=64, threads=1)
        fast_residuals = invariant_consistency(fast, 5)
        slow_residuals = invariant_consistency(slow, 5)
        assert max(fast_residuals.values()) > 1e-2
        for label, residual in fast_residuals.items():
            assert residual == pytest.approx(10 * slow_residuals[label], rel=1e-6, abs=1e-10)

    def test_consistency_on_static_loop(self) -> None:
        """Test the coefficient equations where nothing moves."""
        static = phase_locked_path(LOOP_BASE, windings=(0, 0, 0), samples=8, threads=1)
        residuals: Dict[str, float] = invariant_consistency(static, 3)
        assert set(residuals) == {"J0", "J+", "K0(ab)", "K+(ab)", "K+(a)", "K+(b)"}
        assert max(residuals.values()) < 1e-9


class TestPhases:
    """Test dynamical, Lewis and Berry phases."""

    def test_closed_form_matches_integral(self, loop: ParameterPath) -> None:
        """Test the closed form on a phase-locked loop."""
        berry = berry_phase_closed(loop, *bargmann_index(0, 0))
        assert berry.applicable
        assert abs(berry.difference) < 1e-9
        assert berry.closed_form == pytest.approx(_closed_ground(loop), abs=1e-9)
        assert berry.closed_form < 0

    @pytest.mark.parametrize("state", [(0, 0), (2, 1), (0, 3)])
    def test_closed_form_from_windings(self, loop: ParameterPath, state: tuple) -> None:
        """Test the winding formula against the path's own advances."""
        k, n, mu = bargmann_index(*state)
        theta, theta_a, theta_b = loop.trajectory[0, [0, 2, 4]]
        expected = berry_phase_windings(theta, theta_a, theta_b, (1, 1, 1), k, n, mu)
        assert berry_phase_closed(loop, k, n, mu).closed_form == pytest.approx(expected, abs=1e-9)

    def test_general_lock_order(self) -> None:
        """Test the closed form on a loop locked at order one."""
        path = phase_locked_path(AlphaCoeffs(4.0, 0.6, 0.2, 0.4j), samples=200, lock_order=1, threads=1)
        berry = berry_phase_closed(path, *bargmann_index(1, 0))
        assert berry.applicable
        assert abs(berry.difference) < 1e-9

    def test_reversed_loop_flips_sign(self, loop: ParameterPath) -> None:
        """Test that traversing the loop backwards negates the Berry phase."""
        forward = berry_phase_closed(loop, *bargmann_index(1, 0)).closed_form
        backward = berry_phase_closed(loop.reversed(), *bargmann_index(1, 0)).closed_form
        assert backward == pytest.approx(-forward, abs=1e-9)

    def test_zero_windings_have_no_geometric_phase(self) -> None:
        """Test a loop that never moves."""
        static = phase_locked_path(LOOP_BASE, windings=(0, 0, 0), samples=10, threads=1)
        berry = berry_phase_closed(static, *bargmann_index(0, 0))
        assert berry.closed_form == pytest.approx(0.0, abs=1e-12)
        assert berry.integral == pytest.approx(0.0, abs=1e-12)
        energy = static.solutions[0].spectrum.energy(0, 0)
        assert dynamical_phase(static, 0, 0) == pytest.approx(-energy)

    def test_open_path_has_no_closed_form(self) -> None:
        """Test that only the integral is reported on an open path."""
        path = linear_path(AlphaCoeffs(4.0, 0.3), AlphaCoeffs(4.0, 0.5, 0.1, 0.2), samples=10)
        berry = berry_phase_closed(path, *bargmann_index(0, 0))
        assert not berry.applicable
        assert berry.difference is None

    def test_lewis_phase_splits_into_dynamical_and_berry(self, loop: ParameterPath) -> None:
        """Test Lewis = dynamical + Berry integral for the consistent form."""
        k, n, mu = bargmann_index(1, 0)
        lewis = lewis_phase(loop, n, k, mu)
        berry = berry_phase_closed(loop, k, n, mu).integral
        assert lewis == pytest.approx(dynamical_phase(loop, 1, 0) + berry, abs=1e-9)

    def test_printed_lewis_form_differs_for_mu(self, loop: ParameterPath) -> None:
        """Test that the two Lewis forms agree only when mu = 0."""
        k, n, mu = bargmann_index(0, 0)
        assert lewis_phase(loop, n, k, mu, form="printed") == pytest.approx(lewis_phase(loop, n, k, mu))
        k, n, mu = bargmann_index(2, 0)
        assert lewis_phase(loop, n, k, mu, form="printed") != pytest.approx(lewis_phase(loop, n, k, mu))

    def test_unknown_lewis_form(self, loop: ParameterPath) -> None:
        """Test that only the listed forms are accepted."""
        with pytest.raises(ValueError, match="Unknown Lewis phase form"):
            lewis_phase(loop, 0, 0.5, 0.0, form="other")

    @pytest.mark.parametrize("state", [(0, 0), (1, 0), (0, 1), (2, 0)])
    def test_numeric_phase_matches_closed_form(self, loop: ParameterPath, state: tuple) -> None:
        """Test the overlap-based phase, including the mu-dependent term."""
        numeric = berry_phase_numeric(loop, *state, FockSpace.square(20), threads=1)
        closed = berry_phase_closed(loop, *bargmann_index(*state)).closed_form
        assert abs(wrap_phase(numeric - closed)) < 1e-3

    def test_numeric_ground_phase(self, loop: ParameterPath) -> None:
        """Test the ground state against -pi/2 (cosh theta_a + cosh theta_b - 2)."""
        numeric = berry_phase_numeric(loop, 0, 0, FockSpace.square(20), threads=1)
        assert abs(wrap_phase(numeric - _closed_ground(loop))) < 1e-3

    def test_numeric_phase_flips_on_reversed_loop(self, loop: ParameterPath) -> None:
        """Test that the overlap phase changes sign with the direction of travel."""
        space = FockSpace.square(20)
        forward = berry_phase_numeric(loop, 1, 0, space, threads=1)
        backward = berry_phase_numeric(loop.reversed(), 1, 0, space, threads=1)
        assert abs(wrap_phase(forward + backward)) < 1e-3

    def test_dynamical_phase_converges_with_samples(self) -> None:
        """Test second-order convergence of the trapezoid rule on an open path."""
        start, end = AlphaCoeffs(4.0, 0.3), AlphaCoeffs(4.0, 0.5, 0.1, 0.2)
        phases = [
            dynamical_phase(linear_path(start, end, samples=samples, threads=1), 1, 0)
            for samples in (16, 32, 64, 256)
        ]
        errors = [abs(phase - phases[-1]) for phase in phases[:-1]]
        assert errors[0] > 3 * errors[1] > 9 * errors[2]

    def test_numeric_phase_needs_closed_loop(self) -> None:
        """Test that the overlap phase refuses an open path."""
        path = linear_path(AlphaCoeffs(4.0, 0.3), AlphaCoeffs(4.0, 0.5), samples=10)
        with pytest.raises(OpenPathError):
            berry_phase_numeric(path, 0, 0, FockSpace.square(10))

    def test_wilson_loop_detects_orthogonal_states(self) -> None:
        """Test that a vanishing overlap is reported as a degeneracy."""
        states = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0])]
        with pytest.raises(DegeneracyError, match="near a degeneracy"):
            wilson_loop_phase(states)

    def test_wilson_loop_ignores_state_phases(self) -> None:
        """Test gauge invariance of the discrete phase."""
        states = [np.array([1.0, 0.0]), np.array([np.exp(0.3j), 0.0]), np.array([1.0, 0.0])]
        assert wilson_loop_phase(states) == pytest.approx(0.0, abs=1e-15)

    def test_phase_result(self, loop: ParameterPath) -> None:
        """Test the collected phases and the integral fallback."""
        result = phase_result(loop, 1, 2)
        assert result.source == "closed"
        assert result.total == pytest.approx(result.dynamical + result.geometric)
        assert (result.n_l, result.m_n) == (3, -1)
        path = linear_path(AlphaCoeffs(4.0, 0.3), AlphaCoeffs(4.0, 0.5), samples=10)
        assert phase_result(path, 0, 0).source == "integral"

    def test_phase_result_errors(self, loop: ParameterPath) -> None:
        """Test unknown sources and the missing space for numeric phases."""
        with pytest.raises(ValueError, match="Unknown geometric source"):
            phase_result(loop, 0, 0, source="guess")
        with pytest.raises(ValueError, match="FockSpace is required"):
            phase_result(loop, 0, 0, source="numeric")

    def test_integrand_rows(self, loop: ParameterPath) -> None:
        """Test the per-sample table."""
        rows = integrand_rows(loop, 0, 0)
        assert len(rows) == loop.samples + 1
        assert list(rows[0])[:7] == ["t", *TRAJECTORY_COLUMNS]
        assert rows[5]["lewis_integrand"] == pytest.approx(
            rows[5]["berry_integrand"] - rows[5]["energy"], abs=1e-9
        )
