"""Coefficients of the SU(1,1)-linear two-mode Hamiltonian and its matrix.

H = alpha0 K0^(ab) + sum_j (alpha+^(j) K+^(j) + alpha-^(j) K-^(j)), j = a, b, ab,
with alpha-^(j) = conj(alpha+^(j)). The generalized two-mode oscillator adds an
SU(2) sector beta0 J0 + beta+ J+ + beta- J-.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Tuple, Union

import numpy as np

from .su_algebra import FockSpace, GeneratorLabel, OperatorMatrix, compose

# Absolute tolerance below which the SU(2) sector counts as absent.
ISOTROPIC_TOLERANCE = 1e-12

PHYSICAL_KEYS: Tuple[str, ...] = (
    "omega1",
    "omega2",
    "u1",
    "u2",
    "u",
    "u_prime",
    "s",
    "v",
)

ComplexLike = Union[complex, float, int]


def _complex_from_json(value: Any, key: str) -> complex:
    """Decode ``[re, im]`` (or a bare real number) into a complex value."""
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    msg = f"Coefficient '{key}' must be a number or an [re, im] pair, got {value!r}"
    raise ValueError(msg)


def _complex_to_json(value: complex) -> List[float]:
    return [float(np.real(value)), float(np.imag(value))]


@dataclass(frozen=True)
class AlphaCoeffs:
    """The seven Hamiltonian coefficients, stored as alpha0 and the raising three.

    Attributes:
        alpha0: Real coefficient of K0^(ab)
        alpha_plus_a: Coefficient of K+^(a)
        alpha_plus_b: Coefficient of K+^(b)
        alpha_plus_ab: Coefficient of K+^(ab)

    """

    alpha0: float
    alpha_plus_a: complex = 0j
    alpha_plus_b: complex = 0j
    alpha_plus_ab: complex = 0j

    def __post_init__(self) -> None:
        alpha0 = complex(self.alpha0)
        if alpha0.imag != 0:
            msg = f"alpha0 must be real for a Hermitian Hamiltonian, got {alpha0}"
            raise ValueError(msg)
        object.__setattr__(self, "alpha0", alpha0.real)
        for name in ("alpha_plus_a", "alpha_plus_b", "alpha_plus_ab"):
            object.__setattr__(self, name, complex(getattr(self, name)))

    @property
    def alpha_minus_a(self) -> complex:
        """Conjugate of alpha_plus_a."""
        return self.alpha_plus_a.conjugate()

    @property
    def alpha_minus_b(self) -> complex:
        """Conjugate of alpha_plus_b."""
        return self.alpha_plus_b.conjugate()

    @property
    def alpha_minus_ab(self) -> complex:
        """Conjugate of alpha_plus_ab."""
        return self.alpha_plus_ab.conjugate()

    def expansion(self) -> Dict[GeneratorLabel, complex]:
        """Generator-basis expansion of the Hamiltonian."""
        return {
            GeneratorLabel.K_ZERO_AB: complex(self.alpha0),
            GeneratorLabel.K_PLUS_A: self.alpha_plus_a,
            GeneratorLabel.K_MINUS_A: self.alpha_minus_a,
            GeneratorLabel.K_PLUS_B: self.alpha_plus_b,
            GeneratorLabel.K_MINUS_B: self.alpha_minus_b,
            GeneratorLabel.K_PLUS_AB: self.alpha_plus_ab,
            GeneratorLabel.K_MINUS_AB: self.alpha_minus_ab,
        }

    def polar(self) -> Tuple[Tuple[float, float], ...]:
        """(lambda_j, gamma_j) with alpha+^(j) = lambda_j e^{i gamma_j} for a, b, ab."""
        return tuple(
            (abs(value), float(np.angle(value)))
            for value in (self.alpha_plus_a, self.alpha_plus_b, self.alpha_plus_ab)
        )

    def distance(self, other: "AlphaCoeffs") -> float:
        """Largest componentwise absolute difference."""
        return max(
            abs(self.alpha0 - other.alpha0),
            abs(self.alpha_plus_a - other.alpha_plus_a),
            abs(self.alpha_plus_b - other.alpha_plus_b),
            abs(self.alpha_plus_ab - other.alpha_plus_ab),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Document form, complex values as [re, im] pairs."""
        return {
            "alpha0": self.alpha0,
            "alpha_a": _complex_to_json(self.alpha_plus_a),
            "alpha_b": _complex_to_json(self.alpha_plus_b),
            "alpha_ab": _complex_to_json(self.alpha_plus_ab),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AlphaCoeffs":
        """Build from the ``alpha0``/``alpha_a``/``alpha_b``/``alpha_ab`` document."""
        if "alpha0" not in data:
            msg = "Coefficient document is missing 'alpha0'"
            raise ValueError(msg)
        unknown = set(data) - {"alpha0", "alpha_a", "alpha_b", "alpha_ab"}
        if unknown:
            msg = f"Unknown coefficient keys: {', '.join(sorted(unknown))}"
            raise ValueError(msg)
        alpha0 = _complex_from_json(data["alpha0"], "alpha0")
        return cls(
            alpha0=alpha0,
            alpha_plus_a=_complex_from_json(data.get("alpha_a", 0.0), "alpha_a"),
            alpha_plus_b=_complex_from_json(data.get("alpha_b", 0.0), "alpha_b"),
            alpha_plus_ab=_complex_from_json(data.get("alpha_ab", 0.0), "alpha_ab"),
        )


@dataclass(frozen=True)
class PhysicalOscillatorParams:
    """Frequencies and linear phase-space couplings of two oscillators.

    Attributes:
        omega1: Frequency of oscillator 1 (> 0)
        omega2: Frequency of oscillator 2 (> 0)
        u1: Single-mode x1 p1 coupling
        u2: Single-mode x2 p2 coupling
        u: x1 p2 coupling
        u_prime: x2 p1 coupling
        s: p1 p2 coupling
        v: x1 x2 coupling

    """

    omega1: float
    omega2: float
    u1: float = 0.0
    u2: float = 0.0
    u: float = 0.0
    u_prime: float = 0.0
    s: float = 0.0
    v: float = 0.0

    def __post_init__(self) -> None:
        for name in ("omega1", "omega2"):
            if getattr(self, name) <= 0:
                msg = f"{name} must be strictly positive, got {getattr(self, name)}"
                raise ValueError(msg)

    def to_dict(self) -> Dict[str, float]:
        """All couplings by name."""
        return {key: float(getattr(self, key)) for key in PHYSICAL_KEYS}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PhysicalOscillatorParams":
        """Build from a mapping; omega1 and omega2 are required."""
        unknown = set(data) - set(PHYSICAL_KEYS)
        if unknown:
            msg = f"Unknown physical parameter keys: {', '.join(sorted(unknown))}"
            raise ValueError(msg)
        missing = [key for key in ("omega1", "omega2") if key not in data]
        if missing:
            msg = f"Physical parameters are missing: {', '.join(missing)}"
            raise ValueError(msg)
        return cls(**{key: float(value) for key, value in data.items()})


@dataclass(frozen=True)
class GeneralizedCoeffs:
    """SU(1,1) coefficients plus the SU(2) sector of the generalized oscillator."""

    alpha: AlphaCoeffs
    beta0: float = 0.0
    beta_plus: complex = 0j

    @property
    def beta_minus(self) -> complex:
        """Conjugate of beta_plus."""
        return complex(self.beta_plus).conjugate()

    def expansion(self) -> Dict[GeneratorLabel, complex]:
        """Expansion including J0 and J+- terms."""
        terms = self.alpha.expansion()
        terms[GeneratorLabel.J_ZERO] = complex(self.beta0)
        terms[GeneratorLabel.J_PLUS] = complex(self.beta_plus)
        terms[GeneratorLabel.J_MINUS] = self.beta_minus
        return terms


def from_physical(params: PhysicalOscillatorParams) -> GeneralizedCoeffs:
    """Map oscillator couplings onto the generator coefficients."""
    w1, w2 = params.omega1, params.omega2
    root = np.sqrt(w1 * w2)
    alpha = AlphaCoeffs(
        alpha0=w1 + w2,
        alpha_plus_a=-1j * w1 * params.u1 / 2,
        alpha_plus_b=-1j * w2 * params.u2 / 2,
        alpha_plus_ab=root * (params.v - params.s) / 8
        - 1j * (w2 * params.u + w1 * params.u_prime) / 4,
    )
    beta_plus = root * (params.v + params.s) / 8 + 1j * (
        w2 * params.u - w1 * params.u_prime
    ) / 4
    return GeneralizedCoeffs(alpha=alpha, beta0=w1 - w2, beta_plus=beta_plus)


def reduce_isotropic(
    coeffs: GeneralizedCoeffs, tolerance: float = ISOTROPIC_TOLERANCE
) -> AlphaCoeffs:
    """Drop a vanishing SU(2) sector, leaving the pure SU(1,1) coefficients.

    Raises:
        ValueError: If beta0 or beta+ exceeds the tolerance.

    """
    if abs(coeffs.beta0) > tolerance:
        msg = (
            f"Not isotropic: beta0 = {coeffs.beta0!r} (omega1 != omega2) "
            f"exceeds {tolerance}"
        )
        raise ValueError(msg)
    if abs(coeffs.beta_plus) > tolerance:
        msg = (
            f"Not isotropic: beta_plus = {coeffs.beta_plus!r} "
            f"(u != u_prime or v != -s) exceeds {tolerance}"
        )
        raise ValueError(msg)
    return coeffs.alpha


def build_matrix(alpha: AlphaCoeffs, space: FockSpace) -> OperatorMatrix:
    """Hermitian Hamiltonian matrix sum(alpha * K) on ``space``."""
    matrix = compose(space, alpha.expansion())
    return OperatorMatrix(space, matrix.entries, hermitian=True, tolerance=1e-12)


def build_generalized_matrix(
    coeffs: GeneralizedCoeffs, space: FockSpace
) -> OperatorMatrix:
    """Matrix of the generalized oscillator including its SU(2) sector."""
    matrix = compose(space, coeffs.expansion())
    return OperatorMatrix(space, matrix.entries, hermitian=True, tolerance=1e-12)
