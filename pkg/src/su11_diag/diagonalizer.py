"""Two-step displacement diagonalization.

Step one tilts the Hamiltonian with the SU(2) displacement D(chi) so that the
cross-mode squeezing terms K+-^(ab) vanish. Step two squeezes each mode with
D(xi_a)D(xi_b) so that the single-mode K+-^(i) terms vanish, leaving
H'' = omega_a K0^(a) + omega_b K0^(b).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import gammaln

from .hamiltonian import AlphaCoeffs
from .su_algebra import (
    DisplacementParam,
    FockSpace,
    apply_su2,
    single_mode_displacement,
)

logger = logging.getLogger(__name__)

CHI_TOLERANCE = 1e-12
NEWTON_MAX_ITER = 200
GRID_SIZE = 16
EIGENSTATE_LEAKAGE_BOUND = 1e-8

# The elimination condition's left side can be read as (tan theta)/2 or as
# tan(theta/2); both seeds are available, the first is the exact root.
ELIMINATION_READINGS: Tuple[str, ...] = ("tan_over_two", "tan_half_angle")


class UnstableHamiltonianError(ValueError):
    """Spectrum unbounded below: alpha0 <= 2|beta+^(i)| for some mode."""


class SolverError(RuntimeError):
    """No root of the cross-mode elimination condition was found."""

    def __init__(self, message: str, best_residual: float) -> None:
        """Keep the smallest residual reached alongside the message."""
        super().__init__(message)
        self.best_residual = best_residual


class TruncationError(ValueError):
    """Requested state is too close to the cutoff for the leakage bound."""


@dataclass(frozen=True)
class BetaCoeffs:
    """Coefficients of H' = D^dag(chi) H D(chi).

    Attributes:
        beta0: Coefficient of K0^(ab), always equal to alpha0
        beta_plus_a: Coefficient of K+^(a)
        beta_plus_b: Coefficient of K+^(b)
        beta_plus_ab: Coefficient of K+^(ab)

    """

    beta0: float
    beta_plus_a: complex = 0j
    beta_plus_b: complex = 0j
    beta_plus_ab: complex = 0j

    @property
    def beta_minus_a(self) -> complex:
        """Conjugate partner of beta_plus_a."""
        return complex(self.beta_plus_a).conjugate()

    @property
    def beta_minus_b(self) -> complex:
        """Conjugate partner of beta_plus_b."""
        return complex(self.beta_plus_b).conjugate()

    @property
    def beta_minus_ab(self) -> complex:
        """Conjugate partner of beta_plus_ab."""
        return complex(self.beta_plus_ab).conjugate()

    def as_alpha(self) -> AlphaCoeffs:
        """The same coefficient set viewed as a Hamiltonian."""
        return AlphaCoeffs(
            self.beta0, self.beta_plus_a, self.beta_plus_b, self.beta_plus_ab
        )


class ChiMethod(str, Enum):
    """How the SU(2) displacement was obtained."""

    CLOSED_FORM = "closed_form"
    ROOT_FIND = "root_find"
    IDENTITY = "identity"


@dataclass(frozen=True)
class ChiSolution:
    """SU(2) displacement killing the K+-^(ab) terms.

    Attributes:
        chi: The displacement parameter, theta in [0, pi)
        residual: |beta-^(ab)(chi)|
        method: Which path produced the solution

    """

    chi: DisplacementParam
    residual: float
    method: ChiMethod


@dataclass(frozen=True)
class XiSolution:
    """Per-mode SU(1,1) squeeze parameters."""

    xi_a: DisplacementParam
    xi_b: DisplacementParam
    stable: bool = True


@dataclass(frozen=True)
class Spectrum:
    """Energies of H'' = omega_a K0^(a) + omega_b K0^(b)."""

    omega_a: float
    omega_b: float

    def energy(self, n_a: int, n_b: int) -> float:
        """E(n_a, n_b) = omega_a (n_a + 1/2)/2 + omega_b (n_b + 1/2)/2."""
        return self.omega_a * (n_a + 0.5) / 2 + self.omega_b * (n_b + 0.5) / 2

    def energy_chiral(self, n_l: int, m_n: int) -> float:
        """Energy in chiral quantum numbers n_l = n_a + n_b, m_n = n_a - n_b."""
        total = self.omega_a + self.omega_b
        difference = self.omega_a - self.omega_b
        return total * (n_l + 1) / 4 + difference * m_n / 4

    @staticmethod
    def chiral_numbers(n_a: int, n_b: int) -> Tuple[int, int]:
        """(n_l, m_n) = (n_a + n_b, n_a - n_b)."""
        return n_a + n_b, n_a - n_b

    def levels(self, count: int) -> List["Level"]:
        """The ``count`` lowest levels, ties ordered by (n_a, n_b).

        Each level carries how many of the listed states share its energy.
        """
        states = sorted(
            (self.energy(n_a, n_b), n_a, n_b)
            for n_a in range(count)
            for n_b in range(count)
        )[:count]
        energies = np.array([state[0] for state in states])
        scale = max(1.0, float(np.max(np.abs(energies), initial=0.0)))
        result = []
        for energy, n_a, n_b in states:
            degeneracy = int(np.sum(np.abs(energies - energy) <= 1e-12 * scale))
            n_l, m_n = self.chiral_numbers(n_a, n_b)
            result.append(Level(energy, n_a, n_b, n_l, m_n, degeneracy))
        return result


class Level(NamedTuple):
    """One analytic level in both labelings."""

    energy: float
    n_a: int
    n_b: int
    n_l: int
    m_n: int
    degeneracy: int


class Diagonalization(NamedTuple):
    """Everything the two-step method produces for one coefficient set."""

    alpha: AlphaCoeffs
    chi: ChiSolution
    beta: BetaCoeffs
    xi: XiSolution
    spectrum: Spectrum


class Eigenstate(NamedTuple):
    """State vector with its truncation leakage."""

    vector: np.ndarray
    leakage: float


def _beta_minus_ab(alpha: AlphaCoeffs, theta: float, phi: float) -> complex:
    u = -np.exp(-1j * phi)
    return (
        u / 2 * alpha.alpha_minus_a * np.sin(theta)
        - np.conj(u) / 2 * alpha.alpha_minus_b * np.sin(theta)
        + alpha.alpha_minus_ab * np.cos(theta)
    )


def transform_step1(alpha: AlphaCoeffs, chi: DisplacementParam) -> BetaCoeffs:
    """Coefficients of D^dag(chi) H D(chi); theta = 0 returns alpha unchanged."""
    u, uc = chi.unit, np.conj(chi.unit)
    cos, sin = np.cos(chi.theta), np.sin(chi.theta)
    x, y, z = alpha.alpha_minus_a, alpha.alpha_minus_b, alpha.alpha_minus_ab

    minus_a = x * (cos + 1) / 2 - uc**2 / 2 * y * (cos - 1) - z * uc * sin
    minus_b = -(u**2) / 2 * x * (cos - 1) + y * (cos + 1) / 2 + z * u * sin
    minus_ab = _beta_minus_ab(alpha, chi.theta, chi.phi)
    return BetaCoeffs(
        beta0=alpha.alpha0,
        beta_plus_a=np.conj(minus_a),
        beta_plus_b=np.conj(minus_b),
        beta_plus_ab=np.conj(minus_ab),
    )


def elimination_seed(
    alpha: AlphaCoeffs, reading: str = "tan_over_two"
) -> Optional[DisplacementParam]:
    """Closed-form starting point for the cross-mode elimination.

    With F1 = alpha+^(ab) alpha-^(a) + alpha-^(ab) alpha+^(b) and F2 = conj(F1),
    the phase is e^{i phi} = sqrt(F1/F2) and the magnitude is fixed by
    sqrt(F1 F2)/(|alpha+^(a)|^2 - |alpha+^(b)|^2), read either as (tan theta)/2
    or as tan(theta/2). The square root is taken on the branch phi = arg F1, so
    the sign of the denominator selects theta above or below pi/2.

    Returns:
        The seed, or None when F1 vanishes and the formula is indeterminate.

    """
    if reading not in ELIMINATION_READINGS:
        msg = f"Unknown elimination reading {reading!r}"
        raise ValueError(msg)
    f1 = (
        alpha.alpha_plus_ab * alpha.alpha_minus_a
        + alpha.alpha_minus_ab * alpha.alpha_plus_b
    )
    if abs(f1) == 0:
        return None
    denominator = abs(alpha.alpha_plus_a) ** 2 - abs(alpha.alpha_plus_b) ** 2
    if reading == "tan_over_two":
        theta = float(np.arctan2(2 * abs(f1), denominator))
    else:
        theta = 2 * float(np.arctan2(abs(f1), denominator))
    return _canonical(theta, float(np.angle(f1)))


def _canonical(theta: float, phi: float) -> DisplacementParam:
    """Fold a root into theta in [0, pi); (theta + pi) is a root whenever theta is."""
    if theta < 0:
        theta, phi = -theta, phi + np.pi
    theta = float(np.mod(theta, np.pi))
    return DisplacementParam(theta, phi)


def _residual_vector(alpha: AlphaCoeffs, x: np.ndarray) -> np.ndarray:
    value = _beta_minus_ab(alpha, x[0], x[1])
    return np.array([value.real, value.imag])


def _jacobian(alpha: AlphaCoeffs, x: np.ndarray) -> np.ndarray:
    theta, phi = x
    u = -np.exp(-1j * phi)
    mix = u * alpha.alpha_minus_a - np.conj(u) * alpha.alpha_minus_b
    d_theta = np.cos(theta) / 2 * mix - alpha.alpha_minus_ab * np.sin(theta)
    d_phi = (
        -0.5j
        * np.sin(theta)
        * (u * alpha.alpha_minus_a + np.conj(u) * alpha.alpha_minus_b)
    )
    return np.array([[d_theta.real, d_phi.real], [d_theta.imag, d_phi.imag]])


def _newton(
    alpha: AlphaCoeffs, theta: float, phi: float, tolerance: float, max_iter: int
) -> Tuple[float, float, float]:
    """Damped Newton iteration on (Re, Im) of beta-^(ab)(theta, phi)."""
    x = np.array([theta, phi], dtype=float)
    f = _residual_vector(alpha, x)
    norm = float(np.hypot(*f))
    for _ in range(max_iter):
        if norm < tolerance:
            break
        step, *_ = np.linalg.lstsq(_jacobian(alpha, x), -f, rcond=None)
        damping = 1.0
        while damping > 1e-6:
            trial = x + damping * step
            f_trial = _residual_vector(alpha, trial)
            norm_trial = float(np.hypot(*f_trial))
            if norm_trial < norm:
                break
            damping /= 2
        else:
            break
        x, f, norm = trial, f_trial, norm_trial
    return float(x[0]), float(x[1]), norm


def solve_chi(
    alpha: AlphaCoeffs,
    tolerance: float = CHI_TOLERANCE,
    max_iter: int = NEWTON_MAX_ITER,
    grid: int = GRID_SIZE,
) -> ChiSolution:
    """Find chi with beta+-^(ab)(chi) = 0.

    The closed-form seed is tried first, then polished by damped Newton, then a
    ``grid`` x ``grid`` multi-start over (theta, phi). The tolerance is scaled by
    the largest coefficient magnitude when that exceeds one.

    Raises:
        SolverError: If no start converges; carries the best residual.

    """
    if alpha.alpha_plus_ab == 0:
        return ChiSolution(DisplacementParam.identity(), 0.0, ChiMethod.IDENTITY)

    scale = max(
        1.0, abs(alpha.alpha_plus_a), abs(alpha.alpha_plus_b), abs(alpha.alpha_plus_ab)
    )
    target = tolerance * scale
    seed = elimination_seed(alpha)
    if seed is not None:
        residual = abs(_beta_minus_ab(alpha, seed.theta, seed.phi))
        if residual < target:
            return ChiSolution(seed, residual, ChiMethod.CLOSED_FORM)
        theta, phi, residual = _newton(alpha, seed.theta, seed.phi, target, max_iter)
        if residual < target:
            polished = _canonical(theta, phi)
            logger.warning(
                "Closed-form elimination seed (theta=%s, phi=%s) needed polishing "
                "to (theta=%s, phi=%s)",
                seed.theta,
                seed.phi,
                polished.theta,
                polished.phi,
            )
            return ChiSolution(polished, residual, ChiMethod.ROOT_FIND)

    best = np.inf
    thetas = (np.arange(grid) + 0.5) * np.pi / grid
    phis = -np.pi + (np.arange(grid) + 0.5) * 2 * np.pi / grid
    for theta0 in thetas:
        for phi0 in phis:
            theta, phi, residual = _newton(alpha, theta0, phi0, target, max_iter)
            if residual < target:
                logger.info("Elimination root found by multi-start from %s", theta0)
                return ChiSolution(
                    _canonical(theta, phi), residual, ChiMethod.ROOT_FIND
                )
            best = min(best, residual)

    msg = f"No root of the cross-mode elimination condition (best residual {best:.3e})"
    raise SolverError(msg, best)


def is_stable(beta: BetaCoeffs) -> bool:
    """alpha0 > 2|beta+^(i)| for both modes."""
    return all(beta.beta0 > 2 * abs(b) for b in (beta.beta_plus_a, beta.beta_plus_b))


def _require_stable(beta: BetaCoeffs) -> None:
    for mode, value in (("a", beta.beta_plus_a), ("b", beta.beta_plus_b)):
        if not beta.beta0 > 2 * abs(value):
            msg = (
                f"Mode {mode} is unstable: alpha0^2 = {beta.beta0**2!r} does not "
                f"exceed 4|beta+^({mode})|^2 = {4 * abs(value) ** 2!r}"
            )
            raise UnstableHamiltonianError(msg)


def solve_xi(beta: BetaCoeffs) -> XiSolution:
    """Per-mode squeeze parameters: tanh(theta_i) = 2|beta+^(i)|/alpha0."""
    _require_stable(beta)
    params = []
    for value in (beta.beta_plus_a, beta.beta_plus_b):
        magnitude = abs(value)
        theta = float(np.arctanh(2 * magnitude / beta.beta0))
        phi = -float(np.angle(value)) if magnitude > 0 else 0.0
        params.append(DisplacementParam(theta, phi))
    return XiSolution(params[0], params[1], stable=True)


def spectrum(beta: BetaCoeffs) -> Spectrum:
    """Frequencies omega_i = sqrt(alpha0^2 - 4|beta+^(i)|^2)."""
    _require_stable(beta)
    omega_a = float(np.sqrt(beta.beta0**2 - 4 * abs(beta.beta_plus_a) ** 2))
    omega_b = float(np.sqrt(beta.beta0**2 - 4 * abs(beta.beta_plus_b) ** 2))
    return Spectrum(omega_a, omega_b)


def diagonalize(alpha: AlphaCoeffs) -> Diagonalization:
    """Run both steps for one coefficient set."""
    chi = solve_chi(alpha)
    beta = transform_step1(alpha, chi.chi)
    xi = solve_xi(beta)
    return Diagonalization(alpha, chi, beta, xi, spectrum(beta))


def eigenstate(
    n_a: int,
    n_b: int,
    chi: Union[ChiSolution, DisplacementParam],
    xi: XiSolution,
    space: FockSpace,
    leakage_bound: float = EIGENSTATE_LEAKAGE_BOUND,
) -> Eigenstate:
    """D(chi) D(xi)_ab |n_a, n_b> on the truncated space.

    The leakage is the weight of D(xi)_ab|n_a, n_b> on the top two levels of
    either mode and, when chi is non-trivial, on the incomplete total-number
    shells where the SU(2) rotation is no longer exact.

    Raises:
        TruncationError: If the leakage exceeds ``leakage_bound``.

    """
    chi_param = chi.chi if isinstance(chi, ChiSolution) else chi
    space.index(n_a, n_b)
    column_a = single_mode_displacement(xi.xi_a, space.cutoff_a)[:, n_a]
    column_b = single_mode_displacement(xi.xi_b, space.cutoff_b)[:, n_b]
    squeezed = np.kron(column_a, column_b)

    occ_a, occ_b = space.occupations()
    edge = (occ_a >= space.cutoff_a - 1) | (occ_b >= space.cutoff_b - 1)
    if chi_param.theta != 0:
        edge |= occ_a + occ_b >= min(space.cutoff_a, space.cutoff_b) - 1
    leakage = float(np.sum(np.abs(squeezed[edge]) ** 2))
    if leakage > leakage_bound:
        msg = (
            f"State |{n_a},{n_b}> leaks {leakage:.3e} past the cutoff of {space} "
            f"(bound {leakage_bound:.1e})"
        )
        raise TruncationError(msg)
    return Eigenstate(apply_su2(space, chi_param, squeezed), leakage)


def laguerre(n: int, alpha: float, x: Union[float, np.ndarray]) -> np.ndarray:
    """Associated Laguerre polynomial L_n^alpha(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    previous = np.ones_like(x)
    if n == 0:
        return previous
    current = 1.0 + alpha - x
    for k in range(1, n):
        previous, current = current, (
            (2 * k + 1 + alpha - x) * current - (k + alpha) * previous
        ) / (k + 1)
    return current


def wavefunction(
    n_l: int, m_n: int, rho: Union[float, np.ndarray], phi: Union[float, np.ndarray]
) -> Union[complex, np.ndarray]:
    """Two-dimensional oscillator eigenfunction in polar coordinates.

    The prefactor sqrt(2 n_l!/(n_l + m_n)!)/sqrt(pi) is evaluated through
    log-gamma; it normalizes the function under the area element rho drho dphi/2.
    """
    if n_l < 0 or m_n < 0:
        msg = f"Quantum numbers must be non-negative, got n_l={n_l}, m_n={m_n}"
        raise ValueError(msg)
    rho_arr = np.asarray(rho, dtype=float)
    phi_arr = np.asarray(phi, dtype=float)
    log_norm = 0.5 * (np.log(2.0) + gammaln(n_l + 1) - gammaln(n_l + m_n + 1))
    radial = rho_arr**m_n * laguerre(n_l, m_n, rho_arr**2) * np.exp(-(rho_arr**2) / 2)
    value = (
        (-1) ** n_l
        * np.exp(log_norm)
        / np.sqrt(np.pi)
        * np.exp(1j * m_n * phi_arr)
        * radial
    )
    if np.ndim(value) == 0:
        return complex(value)
    return value
