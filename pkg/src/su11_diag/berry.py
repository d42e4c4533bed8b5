"""Adiabatic phases along closed loops of Hamiltonian coefficients.

A ParameterPath samples AlphaCoeffs over [0, T] and solves the two-step
diagonalization at every sample, which gives the displacement trajectory
(theta, phi, theta_a, phi_a, theta_b, phi_b)(t). From it this module builds
the transformed time derivative i D^dag dD/dt, the invariant operator
I(t) = D K0^(ab) D^dag, and the dynamical, Lewis and Berry phases.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from .diagonalizer import (
    EIGENSTATE_LEAKAGE_BOUND,
    Diagonalization,
    diagonalize,
    eigenstate,
)
from .hamiltonian import AlphaCoeffs, build_matrix
from .su_algebra import (
    QUADRATIC_BASIS,
    DisplacementParam,
    Expansion,
    FockSpace,
    GeneratorLabel,
    OperatorMatrix,
    apply_su2,
    bargmann_index,
    compose,
    displacement_su2,
    expand_block,
    matrix_distance,
    single_mode_displacement,
    structure_constants,
    two_mode_apply,
    wrap_phase,
)
from .utils import parallel_map

logger = logging.getLogger(__name__)

GL = GeneratorLabel

DEFAULT_SAMPLES = 2000
CLOSURE_TOLERANCE = 1e-12
LOCK_TOLERANCE = 1e-9
CONSTANT_ANGLE_TOLERANCE = 1e-8
OVERLAP_FLOOR = 0.5
INVARIANT_TOLERANCE = 1e-8
# Relative step of the generator-based finite differences.
RATE_STEP = 1e-6
# Interior states kept when no margin is given: n_a + n_b <= this.
INTERIOR_STATES = 4

TRAJECTORY_COLUMNS: Tuple[str, ...] = (
    "theta",
    "phi",
    "theta_a",
    "phi_a",
    "theta_b",
    "phi_b",
)
_PHASE_COLUMNS = [1, 3, 5]

LEWIS_FORMS: Tuple[str, ...] = ("consistent", "printed")
GEOMETRIC_SOURCES: Tuple[str, ...] = ("closed", "integral", "numeric")

# Generators whose coefficient equations make up the invariant condition; the
# lowering partners give the conjugate equations.
CONSISTENCY_LABELS: Tuple[GeneratorLabel, ...] = (
    GL.J_ZERO,
    GL.J_PLUS,
    GL.K_ZERO_AB,
    GL.K_PLUS_AB,
    GL.K_PLUS_A,
    GL.K_PLUS_B,
)

AlphaGenerator = Callable[[float], AlphaCoeffs]


class DegeneracyError(RuntimeError):
    """Neighbouring eigenstates along a loop stopped overlapping."""


class OpenPathError(ValueError):
    """A closed loop was required but alpha(0) != alpha(T)."""


class Windings(NamedTuple):
    """Integer windings of the phases gamma_a, gamma_b, gamma_ab."""

    a: int
    b: int
    ab: int


class Displacements(NamedTuple):
    """The three displacement parameters at one instant."""

    chi: DisplacementParam
    xi_a: DisplacementParam
    xi_b: DisplacementParam

    @classmethod
    def from_solution(cls, solution: Diagonalization) -> "Displacements":
        """Take chi and xi from a diagonalization."""
        return cls(solution.chi.chi, solution.xi.xi_a, solution.xi.xi_b)

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "Displacements":
        """Build from a trajectory row (theta, phi, theta_a, phi_a, theta_b, phi_b)."""
        return cls(
            DisplacementParam(row[0], row[1]),
            DisplacementParam(row[2], row[3]),
            DisplacementParam(row[4], row[5]),
        )

    def row(self) -> np.ndarray:
        """Trajectory row of these parameters (phases wrapped)."""
        return np.array(
            [
                self.chi.theta,
                self.chi.phi,
                self.xi_a.theta,
                self.xi_a.phi,
                self.xi_b.theta,
                self.xi_b.phi,
            ]
        )


def _wrap_phase_columns(difference: np.ndarray) -> np.ndarray:
    wrapped = np.array(difference, dtype=float)
    wrapped[..., _PHASE_COLUMNS] = np.angle(np.exp(1j * wrapped[..., _PHASE_COLUMNS]))
    return wrapped


class ParameterPath:
    """Time-sampled coefficients with their solved displacement trajectory.

    Construction diagonalizes every sample (in parallel) and unwraps the three
    displacement phases so that adjacent samples never jump by 2 pi.

    Attributes:
        times: Sample times t_0 < ... < t_N
        alphas: Coefficients at each sample
        generator: Optional t -> AlphaCoeffs the samples were taken from
        windings: Windings the path was built with, when known
        lock_order: Integer n of 2 gamma_ab - gamma_a - gamma_b = n pi, when known
        solutions: Diagonalization at each sample
        trajectory: Array (N+1, 6), columns as in TRAJECTORY_COLUMNS
        rates: Time derivatives of the trajectory at each sample

    """

    def __init__(
        self,
        times: Sequence[float],
        alphas: Sequence[AlphaCoeffs],
        generator: Optional[AlphaGenerator] = None,
        windings: Optional[Windings] = None,
        lock_order: Optional[int] = None,
        threads: Optional[int] = None,
    ) -> None:
        """Diagonalize every sample and derive the trajectory.

        Raises:
            ValueError: For fewer than three samples or unordered times.
            UnstableHamiltonianError: If any sample is unstable.

        """
        self.times = np.asarray(times, dtype=float)
        self.alphas = list(alphas)
        if self.times.ndim != 1 or self.times.size < 3:
            msg = f"A path needs at least 3 samples, got {self.times.size}"
            raise ValueError(msg)
        if len(self.alphas) != self.times.size:
            msg = f"{len(self.alphas)} coefficient sets for {self.times.size} times"
            raise ValueError(msg)
        if np.any(np.diff(self.times) <= 0):
            msg = "Sample times must be strictly increasing"
            raise ValueError(msg)

        self.generator = generator
        self.windings = windings
        self.lock_order = lock_order
        self.solutions: List[Diagonalization] = parallel_map(
            diagonalize, self.alphas, threads
        )
        raw = np.array(
            [Displacements.from_solution(s).row() for s in self.solutions]
        )
        self.trajectory = raw.copy()
        self.trajectory[:, _PHASE_COLUMNS] = np.unwrap(raw[:, _PHASE_COLUMNS], axis=0)
        self.rates = self._sample_rates()
        logger.debug(
            "Path with %s samples over T=%s (closed=%s)",
            self.samples,
            self.duration,
            self.closed,
        )

    @classmethod
    def from_function(
        cls,
        generator: AlphaGenerator,
        duration: float,
        samples: int = DEFAULT_SAMPLES,
        **kwargs: object,
    ) -> "ParameterPath":
        """Sample ``generator`` at N+1 uniform times on [0, duration]."""
        if duration <= 0:
            msg = f"duration must be positive, got {duration}"
            raise ValueError(msg)
        if samples < 2:
            msg = f"samples must be >= 2, got {samples}"
            raise ValueError(msg)
        times = np.linspace(0.0, duration, samples + 1)
        alphas = [generator(float(t)) for t in times]
        return cls(times, alphas, generator=generator, **kwargs)

    @classmethod
    def from_samples(
        cls, times: Sequence[float], alphas: Sequence[AlphaCoeffs], **kwargs: object
    ) -> "ParameterPath":
        """Path from explicit samples; derivatives come from the samples alone."""
        return cls(times, alphas, **kwargs)

    @property
    def samples(self) -> int:
        """Number of intervals N."""
        return self.times.size - 1

    @property
    def duration(self) -> float:
        """Loop period T."""
        return float(self.times[-1] - self.times[0])

    @property
    def closed(self) -> bool:
        """alpha(0) equals alpha(T) to CLOSURE_TOLERANCE."""
        scale = max(1.0, abs(self.alphas[0].alpha0))
        return self.alphas[0].distance(self.alphas[-1]) <= CLOSURE_TOLERANCE * scale

    def require_closed(self) -> None:
        """Raise OpenPathError unless the loop closes."""
        if not self.closed:
            gap = self.alphas[0].distance(self.alphas[-1])
            msg = (
                f"Path is not a closed loop: alpha(0) and alpha(T) differ by {gap:.3e} "
                f"(tolerance {CLOSURE_TOLERANCE:.0e})"
            )
            raise OpenPathError(msg)

    def _uniform(self) -> bool:
        steps = np.diff(self.times)
        return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))

    def _sample_rates(self) -> np.ndarray:
        traj = self.trajectory
        if not (self.closed and self._uniform()):
            return np.gradient(traj, self.times, axis=0, edge_order=2)
        # Periodic central differences; the unwrapped phases may end a whole
        # number of turns away from where they started.
        step = self.times[1] - self.times[0]
        offset = traj[-1] - traj[0]
        extended = np.vstack([traj[-2] - offset, traj])
        rates = np.empty_like(traj)
        rates[:-1] = (extended[2:] - extended[:-2]) / (2 * step)
        rates[-1] = rates[0]
        return rates

    def displacements(self, index: int) -> Displacements:
        """Solved displacements at sample ``index``."""
        return Displacements.from_solution(self.solutions[index])

    def displacement_at(self, t: float) -> Displacements:
        """Displacements at any time, solved exactly when a generator is known."""
        if self.generator is not None:
            return Displacements.from_solution(diagonalize(self.generator(t)))
        row = [np.interp(t, self.times, column) for column in self.trajectory.T]
        return Displacements.from_row(row)

    def rates_at(self, t: float) -> np.ndarray:
        """Trajectory derivative at ``t``.

        With a generator this is a central difference of exact solves with step
        RATE_STEP * T; otherwise the sampled rates are interpolated.
        """
        if self.generator is None:
            return np.array([np.interp(t, self.times, column) for column in self.rates.T])
        step = RATE_STEP * self.duration
        ahead = self.displacement_at(t + step).row()
        behind = self.displacement_at(t - step).row()
        return _wrap_phase_columns(ahead - behind) / (2 * step)

    def gamma_phases(self) -> np.ndarray:
        """Unwrapped arg alpha+^(j) for j = a, b, ab at every sample, shape (N+1, 3)."""
        phases = np.array([[gamma for _, gamma in alpha.polar()] for alpha in self.alphas])
        return np.unwrap(phases, axis=0)

    def phase_windings(self) -> Windings:
        """Windings of the coefficient phases read off the samples."""
        if self.windings is not None:
            return self.windings
        phases = self.gamma_phases()
        turns = np.rint((phases[-1] - phases[0]) / (2 * np.pi)).astype(int)
        return Windings(*(int(t) for t in turns))

    def lock_residual(self, order: Optional[int] = None) -> float:
        """Largest |2 gamma_ab - gamma_a - gamma_b - order pi| over the samples.

        A sample where one of the lambda_j vanishes places no constraint and is
        skipped. ``order`` defaults to the path's own lock order, or to the one
        seen at the first constrained sample.
        """
        magnitudes = np.array([[lam for lam, _ in alpha.polar()] for alpha in self.alphas])
        phases = self.gamma_phases()
        constrained = np.all(magnitudes > 0, axis=1)
        if not np.any(constrained):
            return 0.0
        combination = 2 * phases[:, 2] - phases[:, 0] - phases[:, 1]
        if order is None:
            order = self.lock_order
        if order is None:
            order = int(np.rint(combination[constrained][0] / np.pi))
        residuals = np.abs(np.angle(np.exp(1j * (combination - order * np.pi))))
        return float(np.max(residuals[constrained]))

    def is_phase_locked(self, order: Optional[int] = None) -> bool:
        """Whether the lock condition holds at every sample."""
        return self.lock_residual(order) <= LOCK_TOLERANCE

    def constant_angles(self) -> bool:
        """theta, theta_a, theta_b do not change along the path."""
        spread = np.ptp(self.trajectory[:, [0, 2, 4]], axis=0)
        return bool(np.all(spread <= CONSTANT_ANGLE_TOLERANCE))

    def reversed(self) -> "ParameterPath":
        """The same loop traversed backwards."""
        start, end = float(self.times[0]), float(self.times[-1])
        if self.generator is None:
            return ParameterPath(self.times, self.alphas[::-1])
        forward = self.generator

        def backward(t: float) -> AlphaCoeffs:
            return forward(start + end - t)

        return ParameterPath(
            self.times, [backward(float(t)) for t in self.times], generator=backward
        )


def phase_locked_path(
    base: AlphaCoeffs,
    windings: Union[Windings, Sequence[int]] = (1, 1, 1),
    samples: int = DEFAULT_SAMPLES,
    duration: float = 1.0,
    lock_order: int = 0,
    threads: Optional[int] = None,
) -> ParameterPath:
    """Loop holding every lambda_j fixed while gamma_j winds by 2 pi w_j.

    Args:
        base: Coefficients at t = 0; must already satisfy the lock condition.
        windings: (w_a, w_b, w_ab) with 2 w_ab = w_a + w_b.
        samples: Number of intervals N.
        duration: Loop period T.
        lock_order: The integer n in 2 gamma_ab - gamma_a - gamma_b = n pi.
        threads: Worker cap for the per-sample solves.

    Raises:
        ValueError: If the windings or the base phases break the lock.
        UnstableHamiltonianError: If the base is unstable.

    """
    windings = Windings(*(int(w) for w in windings))
    if 2 * windings.ab != windings.a + windings.b:
        msg = (
            f"Windings {tuple(windings)} violate the phase lock: "
            f"2*w_ab = {2 * windings.ab} but w_a + w_b = {windings.a + windings.b}"
        )
        raise ValueError(msg)
    (lam_a, gam_a), (lam_b, gam_b), (lam_ab, gam_ab) = base.polar()
    if min(lam_a, lam_b, lam_ab) > 0:
        mismatch = wrap_phase(2 * gam_ab - gam_a - gam_b - lock_order * np.pi)
        if abs(mismatch) > LOCK_TOLERANCE:
            msg = (
                f"Base phases break the lock 2*gamma_ab - gamma_a - gamma_b = "
                f"{lock_order}*pi (off by {mismatch:.3e})"
            )
            raise ValueError(msg)

    rate = 2 * np.pi / duration

    def alpha_at(t: float) -> AlphaCoeffs:
        return AlphaCoeffs(
            base.alpha0,
            lam_a * np.exp(1j * (gam_a + rate * windings.a * t)),
            lam_b * np.exp(1j * (gam_b + rate * windings.b * t)),
            lam_ab * np.exp(1j * (gam_ab + rate * windings.ab * t)),
        )

    return ParameterPath.from_function(
        alpha_at,
        duration,
        samples,
        windings=windings,
        lock_order=lock_order,
        threads=threads,
    )


def linear_path(
    start: AlphaCoeffs,
    end: AlphaCoeffs,
    samples: int = DEFAULT_SAMPLES,
    duration: float = 1.0,
    threads: Optional[int] = None,
) -> ParameterPath:
    """Straight-line interpolation between two coefficient sets (an open path)."""

    def alpha_at(t: float) -> AlphaCoeffs:
        s = t / duration
        return AlphaCoeffs(
            (1 - s) * start.alpha0 + s * end.alpha0,
            (1 - s) * start.alpha_plus_a + s * end.alpha_plus_a,
            (1 - s) * start.alpha_plus_b + s * end.alpha_plus_b,
            (1 - s) * start.alpha_plus_ab + s * end.alpha_plus_ab,
        )

    return ParameterPath.from_function(alpha_at, duration, samples, threads=threads)


# --- transformed time derivative ---------------------------------------------


@dataclass(frozen=True)
class DtCoefficients:
    """Coefficients of i D^dag dD/dt for D = D(chi) D(xi)_ab.

    a's come from the SU(2) stage alone, b's from the SU(1,1) stage alone and
    c's from carrying the SU(2) stage through the squeeze.
    """

    a0: float
    a1: complex
    b0: float
    b1: float
    b2: complex
    b3: complex
    c0: float
    c1: float
    c2: complex
    c3: complex
    c4: complex
    c5: complex

    @property
    def k0_rate(self) -> float:
        """Coefficient of K0^(ab)."""
        return self.b0 + self.c0

    @property
    def j0_rate(self) -> float:
        """Coefficient of J0."""
        return self.b1 + self.c1

    def as_expansion(self) -> Expansion:
        """The operator written over the quadratic generators."""
        plus_a = self.b2 + self.c4
        plus_b = self.b3 + self.c5
        return {
            GL.K_ZERO_AB: complex(self.k0_rate),
            GL.J_ZERO: complex(self.j0_rate),
            GL.J_PLUS: self.c2,
            GL.J_MINUS: np.conj(self.c2),
            GL.K_PLUS_AB: self.c3,
            GL.K_MINUS_AB: np.conj(self.c3),
            GL.K_PLUS_A: plus_a,
            GL.K_MINUS_A: np.conj(plus_a),
            GL.K_PLUS_B: plus_b,
            GL.K_MINUS_B: np.conj(plus_b),
            GL.IDENTITY: 0j,
        }


def dt_coefficients(row: Sequence[float], rates: Sequence[float]) -> DtCoefficients:
    """Evaluate the a, b and c coefficients from angles and their rates."""
    theta, phi, theta_a, phi_a, theta_b, phi_b = (float(v) for v in row)
    d_theta, d_phi, d_theta_a, d_phi_a, d_theta_b, d_phi_b = (float(v) for v in rates)
    ch_a, sh_a = np.cosh(theta_a), np.sinh(theta_a)
    ch_b, sh_b = np.cosh(theta_b), np.sinh(theta_b)

    a0 = d_phi * (np.cos(theta) - 1)
    a1 = -np.exp(-1j * phi) / 2 * (d_phi * np.sin(theta) + 1j * d_theta)

    b0 = (d_phi_a * (ch_a - 1) + d_phi_b * (ch_b - 1)) / 2
    b1 = (d_phi_a * (ch_a - 1) - d_phi_b * (ch_b - 1)) / 2
    b2 = -np.exp(-1j * phi_a) / 2 * (d_phi_a * sh_a + 1j * d_theta_a)
    b3 = -np.exp(-1j * phi_b) / 2 * (d_phi_b * sh_b + 1j * d_theta_b)

    half_ch_a, half_sh_a = np.cosh(theta_a / 2), np.sinh(theta_a / 2)
    half_ch_b, half_sh_b = np.cosh(theta_b / 2), np.sinh(theta_b / 2)
    c2 = a1 * half_ch_a * half_ch_b + np.conj(a1) * np.exp(
        -1j * (phi_a - phi_b)
    ) * half_sh_a * half_sh_b
    c3 = -(
        a1 * np.exp(-1j * phi_b) * half_ch_a * half_sh_b
        + np.conj(a1) * np.exp(-1j * phi_a) * half_ch_b * half_sh_a
    )
    return DtCoefficients(
        a0=float(a0),
        a1=complex(a1),
        b0=float(b0),
        b1=float(b1),
        b2=complex(b2),
        b3=complex(b3),
        c0=float(a0 * (ch_a - ch_b) / 2),
        c1=float(a0 * (ch_a + ch_b) / 2),
        c2=complex(c2),
        c3=complex(c3),
        c4=complex(-a0 * sh_a * np.exp(-1j * phi_a) / 2),
        c5=complex(a0 * sh_b * np.exp(-1j * phi_b) / 2),
    )


def dt_transform_coefficients(path: ParameterPath, t: float) -> DtCoefficients:
    """Transformed time-derivative coefficients at time ``t`` on the path."""
    return dt_coefficients(path.displacement_at(t).row(), path.rates_at(t))


def _default_margin(space: FockSpace, margin: Optional[int]) -> int:
    if margin is None:
        return max(min(space.cutoff_a, space.cutoff_b) - INTERIOR_STATES, 0)
    return margin


def _unit_columns(space: FockSpace, indices: np.ndarray) -> np.ndarray:
    columns = np.zeros((space.dimension, indices.size), dtype=complex)
    columns[indices, np.arange(indices.size)] = 1.0
    return columns


def displacement_columns(
    space: FockSpace, displacements: Displacements, indices: np.ndarray
) -> np.ndarray:
    """Columns D[:, indices] of D(chi) D(xi)_ab, without forming D."""
    mode_a = single_mode_displacement(displacements.xi_a, space.cutoff_a)
    mode_b = single_mode_displacement(displacements.xi_b, space.cutoff_b)
    squeezed = two_mode_apply(mode_a, mode_b, _unit_columns(space, indices))
    return apply_su2(space, displacements.chi, squeezed)


def dt_transform_oracle(
    path: ParameterPath,
    t: float,
    space: FockSpace,
    delta: float = 1e-3,
    margin: Optional[int] = None,
) -> Expansion:
    """Finite-difference matrix version of i D^dag dD/dt, re-expanded in generators.

    D is evaluated at t - delta, t and t + delta; only the interior columns are
    ever formed. The error is O(delta^2).
    """
    margin = _default_margin(space, margin)
    indices = space.interior_indices(margin, total_number=True)
    here = displacement_columns(space, path.displacement_at(t), indices)
    ahead = displacement_columns(space, path.displacement_at(t + delta), indices)
    behind = displacement_columns(space, path.displacement_at(t - delta), indices)
    derivative = (ahead - behind) / (2 * delta)
    # Rows of D^dag on the interior are the conjugated interior columns of D.
    block = 1j * (here.conj().T @ derivative)
    return expand_block(block, space, margin, QUADRATIC_BASIS, total_number=True)


# --- invariant operator ------------------------------------------------------


def invariant_expansion(displacements: Displacements) -> Expansion:
    """Generator expansion of I = D K0^(ab) D^dag."""
    theta, phi = displacements.chi.theta, displacements.chi.phi
    theta_a, phi_a = displacements.xi_a.theta, displacements.xi_a.phi
    theta_b, phi_b = displacements.xi_b.theta, displacements.xi_b.phi
    ch_a, sh_a = np.cosh(theta_a), np.sinh(theta_a)
    ch_b, sh_b = np.cosh(theta_b), np.sinh(theta_b)
    cos, sin = np.cos(theta), np.sin(theta)

    j_zero = (ch_a - ch_b) * cos / 2
    j_plus = (ch_a - ch_b) * sin * np.exp(-1j * phi) / 4
    k_zero_ab = (ch_a + ch_b) / 2
    k_plus_ab = (
        sin
        * (sh_a * np.exp(1j * (phi - phi_a)) - sh_b * np.exp(-1j * (phi + phi_b)))
        / 4
    )
    k_plus_a = (
        sh_a * (cos + 1) * np.exp(-1j * phi_a)
        - sh_b * (cos - 1) * np.exp(-1j * (2 * phi + phi_b))
    ) / 4
    k_plus_b = (
        sh_b * (cos + 1) * np.exp(-1j * phi_b)
        - sh_a * (cos - 1) * np.exp(1j * (2 * phi - phi_a))
    ) / 4
    return {
        GL.J_ZERO: complex(j_zero),
        GL.J_PLUS: complex(j_plus),
        GL.J_MINUS: complex(np.conj(j_plus)),
        GL.K_ZERO_AB: complex(k_zero_ab),
        GL.K_PLUS_AB: complex(k_plus_ab),
        GL.K_MINUS_AB: complex(np.conj(k_plus_ab)),
        GL.K_PLUS_A: complex(k_plus_a),
        GL.K_MINUS_A: complex(np.conj(k_plus_a)),
        GL.K_PLUS_B: complex(k_plus_b),
        GL.K_MINUS_B: complex(np.conj(k_plus_b)),
    }


def _k0_ab_diagonal(space: FockSpace) -> np.ndarray:
    n_a, n_b = space.occupations()
    return (n_a + n_b + 1) / 2.0


def invariant_matrix(space: FockSpace, displacements: Displacements) -> OperatorMatrix:
    """I = D K0^(ab) D^dag by matrix conjugation on the whole truncated space."""
    mode_a = single_mode_displacement(displacements.xi_a, space.cutoff_a)
    mode_b = single_mode_displacement(displacements.xi_b, space.cutoff_b)
    full = displacement_su2(space, displacements.chi).entries @ np.kron(mode_a, mode_b)
    entries = (full * _k0_ab_diagonal(space)) @ full.conj().T
    entries = (entries + entries.conj().T) / 2
    return OperatorMatrix(space, entries, hermitian=True)


def invariant_block(
    space: FockSpace, displacements: Displacements, indices: np.ndarray
) -> np.ndarray:
    """Interior block I[indices, indices], built from D^dag on those columns only."""
    inverse = Displacements(
        displacements.chi.negated(),
        displacements.xi_a.negated(),
        displacements.xi_b.negated(),
    )
    rotated = apply_su2(space, inverse.chi, _unit_columns(space, indices))
    mode_a = single_mode_displacement(inverse.xi_a, space.cutoff_a)
    mode_b = single_mode_displacement(inverse.xi_b, space.cutoff_b)
    columns = two_mode_apply(mode_a, mode_b, rotated)
    return columns.conj().T @ (columns * _k0_ab_diagonal(space)[:, None])


class InvariantOperator(NamedTuple):
    """I(t) by matrix conjugation and its distance to the generator expansion."""

    matrix: OperatorMatrix
    discrepancy: float


def invariant_operator(
    path: ParameterPath,
    t: float,
    space: FockSpace,
    margin: Optional[int] = None,
) -> InvariantOperator:
    """Invariant operator at ``t``, cross-checked against its expansion.

    The discrepancy is measured on the interior complete shells only; values
    above INVARIANT_TOLERANCE are logged.
    """
    margin = _default_margin(space, margin)
    displacements = path.displacement_at(t)
    matrix = invariant_matrix(space, displacements)
    expected = compose(space, invariant_expansion(displacements))
    indices = space.interior_indices(margin, total_number=True)
    discrepancy = matrix_distance(matrix, expected, indices)
    if discrepancy > INVARIANT_TOLERANCE:
        logger.warning(
            "Invariant operator differs from its expansion by %.3e at t=%s",
            discrepancy,
            t,
        )
    return InvariantOperator(matrix, discrepancy)


def _neighbours(path: ParameterPath, index: int) -> Tuple[int, int, float]:
    """Indices either side of ``index`` and the time between them."""
    last = path.samples
    if path.closed and 0 < index < last:
        return index - 1, index + 1, float(path.times[index + 1] - path.times[index - 1])
    if path.closed:
        step = float(path.times[1] - path.times[0])
        return last - 1, 1, 2 * step
    if not 0 < index < last:
        msg = f"Sample {index} has no neighbours on an open path"
        raise ValueError(msg)
    return index - 1, index + 1, float(path.times[index + 1] - path.times[index - 1])


def _check_indices(path: ParameterPath, points: int) -> np.ndarray:
    candidates = np.arange(path.samples) if path.closed else np.arange(1, path.samples)
    picks = np.linspace(0, candidates.size - 1, min(points, candidates.size))
    return np.unique(candidates[np.rint(picks).astype(int)])


def invariant_residual(
    path: ParameterPath,
    space: FockSpace,
    margin: Optional[int] = None,
    points: int = 8,
    threads: Optional[int] = None,
) -> float:
    """Largest |i dI/dt + [I, H]| on the interior over a spread of samples.

    dI/dt is a central difference between neighbouring samples, periodic on a
    closed loop.
    """
    margin = _default_margin(space, margin)
    interior = space.interior_indices(margin, total_number=True)

    def residual_at(index: int) -> float:
        behind, ahead, span = _neighbours(path, index)
        current = invariant_matrix(space, path.displacements(index)).entries
        derivative = (
            invariant_matrix(space, path.displacements(ahead)).entries
            - invariant_matrix(space, path.displacements(behind)).entries
        ) / span
        hamiltonian = build_matrix(path.alphas[index], space).entries
        residual = (
            1j * derivative + current @ hamiltonian - hamiltonian @ current
        )
        return float(np.max(np.abs(residual[np.ix_(interior, interior)]), initial=0.0))

    residuals = parallel_map(residual_at, _check_indices(path, points), threads)
    return max(residuals, default=0.0)


def _expansion_vector(expansion: Expansion) -> np.ndarray:
    return np.array([expansion.get(label, 0.0) for label in QUADRATIC_BASIS], dtype=complex)


def invariant_consistency(path: ParameterPath, index: int) -> Dict[str, float]:
    """Residuals of the coefficient equations of i dI/dt + [I, H] = 0 at a sample.

    The commutator is taken in the generator basis with the tabulated structure
    constants, so no matrices are built. Each entry is the modulus of the
    coefficient of one generator; the lowering ones are the conjugates.
    """
    behind, ahead, span = _neighbours(path, index)
    current = _expansion_vector(invariant_expansion(path.displacements(index)))
    derivative = (
        _expansion_vector(invariant_expansion(path.displacements(ahead)))
        - _expansion_vector(invariant_expansion(path.displacements(behind)))
    ) / span
    hamiltonian = _expansion_vector(path.alphas[index].expansion())
    commutator = np.einsum("p,q,pqr->r", current, hamiltonian, structure_constants())
    residual = 1j * derivative + commutator
    return {
        label.value: float(abs(residual[QUADRATIC_BASIS.index(label)]))
        for label in CONSISTENCY_LABELS
    }


# --- phases ------------------------------------------------------------------


def _sample_dt(path: ParameterPath) -> List[DtCoefficients]:
    return [dt_coefficients(row, rate) for row, rate in zip(path.trajectory, path.rates)]


def dynamical_phase(path: ParameterPath, n_a: int, n_b: int) -> float:
    """-integral of E_(n_a, n_b)(t) dt by the trapezoid rule."""
    energies = [solution.spectrum.energy(n_a, n_b) for solution in path.solutions]
    return -float(trapezoid(energies, path.times))


def _mode_energies(path: ParameterPath) -> Tuple[np.ndarray, np.ndarray]:
    """A0(t) and B0(t): cosh(theta_i) alpha0 - 2|beta+^(i)| sinh(theta_i) cos(phi_i + arg beta+^(i))."""
    a_values, b_values = [], []
    for solution, row in zip(path.solutions, path.trajectory):
        alpha0 = solution.alpha.alpha0
        for values, beta, theta, phi in (
            (a_values, solution.beta.beta_plus_a, row[2], row[3]),
            (b_values, solution.beta.beta_plus_b, row[4], row[5]),
        ):
            values.append(
                np.cosh(theta) * alpha0
                - 2 * abs(beta) * np.sinh(theta) * np.cos(phi + np.angle(beta))
            )
    return np.array(a_values), np.array(b_values)


def lewis_phase(
    path: ParameterPath, n: int, k: float, mu: float, form: str = "consistent"
) -> float:
    """Phase <lambda| i d/dt - H |lambda> integrated along the path.

    Args:
        path: The sampled path.
        n: Ladder index of the SU(1,1) state.
        k: Bargmann index.
        mu: J0 eigenvalue of the state.
        form: ``"consistent"`` pairs mu with (b1 + c1) - (A0 - B0)/2, so the
            result minus the dynamical phase is the Berry integral;
            ``"printed"`` multiplies mu by -(A0 + B0)/2 instead.

    """
    if form not in LEWIS_FORMS:
        msg = f"Unknown Lewis phase form {form!r}; expected one of {LEWIS_FORMS}"
        raise ValueError(msg)
    coefficients = _sample_dt(path)
    k0_rates = np.array([c.k0_rate for c in coefficients])
    j0_rates = np.array([c.j0_rate for c in coefficients])
    mode_a, mode_b = _mode_energies(path)
    half_sum, half_difference = (mode_a + mode_b) / 2, (mode_a - mode_b) / 2
    integrand = (n + k) * (k0_rates - half_sum)
    if form == "consistent":
        integrand = integrand + mu * (j0_rates - half_difference)
    else:
        integrand = integrand - mu * half_sum
    return float(trapezoid(integrand, path.times))


def _closed_form(
    theta: float,
    theta_a: float,
    theta_b: float,
    advances: Sequence[float],
    k: float,
    n: int,
    mu: float,
) -> float:
    d_phi, d_phi_a, d_phi_b = advances
    ch_a, ch_b = np.cosh(theta_a), np.cosh(theta_b)
    tilt = d_phi * (np.cos(theta) - 1)
    k0_part = (d_phi_a * (ch_a - 1) + d_phi_b * (ch_b - 1) + tilt * (ch_a - ch_b)) / 2
    j0_part = (d_phi_a * (ch_a - 1) - d_phi_b * (ch_b - 1) + tilt * (ch_a + ch_b)) / 2
    return float((n + k) * k0_part + mu * j0_part)


def berry_phase_windings(
    theta: float,
    theta_a: float,
    theta_b: float,
    windings: Union[Windings, Sequence[int]],
    k: float,
    n: int,
    mu: float,
) -> float:
    """Closed-form Berry phase of a phase-locked loop with general windings.

    Along such a loop phi_a advances by -2 pi w_a, phi_b by -2 pi w_b and the
    tilt phase phi by 2 pi (w_ab - w_a), with every angle constant. For
    w = (1, 1, 1) this is
    2 pi (mu/2)(cosh theta_b - cosh theta_a) - 2 pi ((n+k)/2)(cosh theta_a + cosh theta_b - 2).
    """
    w = Windings(*windings)
    advances = (2 * np.pi * (w.ab - w.a), -2 * np.pi * w.a, -2 * np.pi * w.b)
    return _closed_form(theta, theta_a, theta_b, advances, k, n, mu)


class BerryPhase(NamedTuple):
    """Berry phase by quadrature and, on phase-locked loops, in closed form."""

    integral: float
    closed_form: Optional[float]
    difference: Optional[float]

    @property
    def applicable(self) -> bool:
        """Whether the closed form applied to the path."""
        return self.closed_form is not None


def berry_phase_closed(path: ParameterPath, k: float, n: int, mu: float) -> BerryPhase:
    """Integral (n+k) int (b0 + c0) dt + mu int (b1 + c1) dt and its closed form.

    The closed form needs a closed, phase-locked loop with constant angles;
    otherwise only the integral is returned.
    """
    coefficients = _sample_dt(path)
    integrand = [(n + k) * c.k0_rate + mu * c.j0_rate for c in coefficients]
    integral = float(trapezoid(integrand, path.times))
    if not (path.closed and path.is_phase_locked() and path.constant_angles()):
        logger.info("Closed-form Berry phase does not apply to this path")
        return BerryPhase(integral, None, None)

    traj = path.trajectory
    turns = np.rint((traj[-1, _PHASE_COLUMNS] - traj[0, _PHASE_COLUMNS]) / (2 * np.pi))
    theta, theta_a, theta_b = np.mean(traj[:, [0, 2, 4]], axis=0)
    closed = _closed_form(theta, theta_a, theta_b, 2 * np.pi * turns, k, n, mu)
    return BerryPhase(integral, closed, integral - closed)


def wilson_loop_phase(states: Sequence[np.ndarray]) -> float:
    """-arg prod <psi_i|psi_i+1> over consecutive states, wrapped to (-pi, pi].

    The caller closes the loop by repeating the first state at the end. Any
    phase attached to an individual state cancels between its two overlaps.

    Raises:
        DegeneracyError: If a neighbouring overlap falls below OVERLAP_FLOOR.

    """
    overlaps = np.array(
        [np.vdot(left, right) for left, right in zip(states[:-1], states[1:])]
    )
    weakest = int(np.argmin(np.abs(overlaps)))
    if abs(overlaps[weakest]) < OVERLAP_FLOOR:
        msg = (
            f"Overlap between samples {weakest} and {weakest + 1} is "
            f"{abs(overlaps[weakest]):.3f}; the state is near a degeneracy or the "
            "path needs denser sampling"
        )
        raise DegeneracyError(msg)
    return wrap_phase(-float(np.sum(np.angle(overlaps))))


def berry_phase_numeric(
    path: ParameterPath,
    n_a: int,
    n_b: int,
    space: FockSpace,
    leakage_bound: float = EIGENSTATE_LEAKAGE_BOUND,
    threads: Optional[int] = None,
) -> float:
    """Discrete geometric phase of eigenstate (n_a, n_b) around the loop.

    Raises:
        OpenPathError: If the path is not closed.
        TruncationError: If the state leaks past the cutoff at some sample.
        DegeneracyError: If neighbouring states stop overlapping.

    """
    path.require_closed()

    def state(index: int) -> np.ndarray:
        solution = path.solutions[index]
        return eigenstate(n_a, n_b, solution.chi, solution.xi, space, leakage_bound).vector

    states = parallel_map(state, range(path.samples), threads)
    states.append(states[0])
    return wilson_loop_phase(states)


@dataclass(frozen=True)
class PhaseResult:
    """Dynamical and geometric phase of one state around a loop.

    Attributes:
        dynamical: -integral of the energy
        geometric: Berry phase from ``source``
        total: dynamical + geometric
        k: Bargmann index
        n: Ladder index
        mu: J0 eigenvalue
        n_l: n_a + n_b
        m_n: n_a - n_b
        source: One of GEOMETRIC_SOURCES

    """

    dynamical: float
    geometric: float
    total: float
    k: float
    n: int
    mu: float
    n_l: int
    m_n: int
    source: str


def phase_result(
    path: ParameterPath,
    n_a: int,
    n_b: int,
    source: str = "closed",
    space: Optional[FockSpace] = None,
) -> PhaseResult:
    """Collect the phases of |n_a, n_b> around a loop.

    ``source="closed"`` falls back to the integral when the closed form does
    not apply; ``"numeric"`` needs ``space``.
    """
    if source not in GEOMETRIC_SOURCES:
        msg = f"Unknown geometric source {source!r}; expected one of {GEOMETRIC_SOURCES}"
        raise ValueError(msg)
    k, n, mu = bargmann_index(n_a, n_b)
    dynamical = dynamical_phase(path, n_a, n_b)
    if source == "numeric":
        if space is None:
            msg = "A FockSpace is required for the numeric Berry phase"
            raise ValueError(msg)
        geometric = berry_phase_numeric(path, n_a, n_b, space)
    else:
        berry = berry_phase_closed(path, k, n, mu)
        if source == "closed" and berry.applicable:
            geometric = berry.closed_form
        else:
            source = "integral"
            geometric = berry.integral
    n_l, m_n = n_a + n_b, n_a - n_b
    return PhaseResult(
        dynamical, geometric, dynamical + geometric, k, n, mu, n_l, m_n, source
    )


def integrand_rows(path: ParameterPath, n_a: int, n_b: int) -> List[Dict[str, float]]:
    """Per-sample trajectory, energy and phase integrands for tabular output."""
    k, n, mu = bargmann_index(n_a, n_b)
    mode_a, mode_b = _mode_energies(path)
    rows = []
    for index, coefficients in enumerate(_sample_dt(path)):
        row: Dict[str, float] = {"t": float(path.times[index])}
        row.update(zip(TRAJECTORY_COLUMNS, map(float, path.trajectory[index])))
        half_sum = (mode_a[index] + mode_b[index]) / 2
        half_difference = (mode_a[index] - mode_b[index]) / 2
        row.update(
            {
                "energy": path.solutions[index].spectrum.energy(n_a, n_b),
                "k0_rate": coefficients.k0_rate,
                "j0_rate": coefficients.j0_rate,
                "berry_integrand": (n + k) * coefficients.k0_rate
                + mu * coefficients.j0_rate,
                "lewis_integrand": (n + k) * (coefficients.k0_rate - half_sum)
                + mu * (coefficients.j0_rate - half_difference),
            }
        )
        rows.append(row)
    return rows
