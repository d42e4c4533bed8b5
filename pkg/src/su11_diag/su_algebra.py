"""Bosonic su(1,1) and su(2) realizations on a truncated two-mode Fock space.

Basis states |n_a, n_b> are ordered row-major in the occupation numbers:
``index = n_a * (cutoff_b + 1) + n_b``. All matrices are dense and complex.

The module provides:
  - the generator realizations K^(a), K^(b), K^(ab), J and the ladder operators
  - SU(2) and SU(1,1) x SU(1,1) displacement operators by matrix exponential
  - closed-form similarity expansions D^dag X D in the generator basis
  - squeeze conjugations on padded single-mode ladders, free of truncation error
  - a least-squares re-expansion of any matrix in the generator basis, which is
    the oracle every closed form is checked against
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

logger = logging.getLogger(__name__)

# Columns whose weight on the two top ladder levels exceeds this are reported.
LEAKAGE_THRESHOLD = 1e-8

Expansion = Dict["GeneratorLabel", complex]


class GeneratorLabel(str, Enum):
    """Names of the operators with a bosonic realization."""

    K_PLUS_A = "K+(a)"
    K_MINUS_A = "K-(a)"
    K_ZERO_A = "K0(a)"
    K_PLUS_B = "K+(b)"
    K_MINUS_B = "K-(b)"
    K_ZERO_B = "K0(b)"
    K_PLUS_AB = "K+(ab)"
    K_MINUS_AB = "K-(ab)"
    K_ZERO_AB = "K0(ab)"
    J_PLUS = "J+"
    J_MINUS = "J-"
    J_ZERO = "J0"
    N_D = "Nd"
    A = "a"
    A_DAG = "a+"
    B = "b"
    B_DAG = "b+"
    IDENTITY = "1"

    @classmethod
    def parse(cls, value: Union[str, "GeneratorLabel"]) -> "GeneratorLabel":
        """Return the label for ``value``, raising ValueError for unknown names."""
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            msg = f"Unknown generator label: {value!r}"
            raise ValueError(msg) from None


GL = GeneratorLabel

# Each realization is a sum of coef * (mode-a factor) (x) (mode-b factor).
# N_d is realized as (a^dag a - b^dag b)/2 so that it coincides with J0.
_REALIZATIONS: Dict[GeneratorLabel, Tuple[Tuple[float, str, str], ...]] = {
    GL.K_PLUS_A: ((0.5, "a+a+", "1"),),
    GL.K_MINUS_A: ((0.5, "aa", "1"),),
    GL.K_ZERO_A: ((0.5, "n", "1"), (0.25, "1", "1")),
    GL.K_PLUS_B: ((0.5, "1", "a+a+"),),
    GL.K_MINUS_B: ((0.5, "1", "aa"),),
    GL.K_ZERO_B: ((0.5, "1", "n"), (0.25, "1", "1")),
    GL.K_PLUS_AB: ((1.0, "a+", "a+"),),
    GL.K_MINUS_AB: ((1.0, "a", "a"),),
    GL.K_ZERO_AB: ((0.5, "n", "1"), (0.5, "1", "n"), (0.5, "1", "1")),
    GL.J_PLUS: ((1.0, "a+", "a"),),
    GL.J_MINUS: ((1.0, "a", "a+"),),
    GL.J_ZERO: ((0.5, "n", "1"), (-0.5, "1", "n")),
    GL.N_D: ((0.5, "n", "1"), (-0.5, "1", "n")),
    GL.A: ((1.0, "a", "1"),),
    GL.A_DAG: ((1.0, "a+", "1"),),
    GL.B: ((1.0, "1", "a"),),
    GL.B_DAG: ((1.0, "1", "a+"),),
    GL.IDENTITY: ((1.0, "1", "1"),),
}

HERMITIAN_LABELS = frozenset(
    {GL.K_ZERO_A, GL.K_ZERO_B, GL.K_ZERO_AB, GL.J_ZERO, GL.N_D, GL.IDENTITY}
)

# Hermitian-conjugate partner of every label.
ADJOINT: Dict[GeneratorLabel, GeneratorLabel] = {
    GL.K_PLUS_A: GL.K_MINUS_A,
    GL.K_MINUS_A: GL.K_PLUS_A,
    GL.K_PLUS_B: GL.K_MINUS_B,
    GL.K_MINUS_B: GL.K_PLUS_B,
    GL.K_PLUS_AB: GL.K_MINUS_AB,
    GL.K_MINUS_AB: GL.K_PLUS_AB,
    GL.J_PLUS: GL.J_MINUS,
    GL.J_MINUS: GL.J_PLUS,
    GL.A: GL.A_DAG,
    GL.A_DAG: GL.A,
    GL.B: GL.B_DAG,
    GL.B_DAG: GL.B,
    **{label: label for label in HERMITIAN_LABELS},
}

# The ten quadratic generators spanning the two-mode algebra, plus identity.
QUADRATIC_BASIS: Tuple[GeneratorLabel, ...] = (
    GL.K_ZERO_AB,
    GL.J_ZERO,
    GL.J_PLUS,
    GL.J_MINUS,
    GL.K_PLUS_AB,
    GL.K_MINUS_AB,
    GL.K_PLUS_A,
    GL.K_MINUS_A,
    GL.K_PLUS_B,
    GL.K_MINUS_B,
    GL.IDENTITY,
)

LINEAR_BASIS: Tuple[GeneratorLabel, ...] = (GL.A, GL.A_DAG, GL.B, GL.B_DAG)


@dataclass(frozen=True)
class FockSpace:
    """Two-mode truncated number basis with a cutoff per mode.

    Attributes:
        cutoff_a: Maximum photon number of mode a
        cutoff_b: Maximum photon number of mode b

    """

    cutoff_a: int
    cutoff_b: int

    def __post_init__(self) -> None:
        for name in ("cutoff_a", "cutoff_b"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                msg = f"{name} must be an integer >= 1, got {value!r}"
                raise ValueError(msg)

    @classmethod
    def square(cls, cutoff: int) -> "FockSpace":
        """Space with the same cutoff on both modes."""
        return cls(cutoff, cutoff)

    @property
    def dimension(self) -> int:
        """Number of basis states."""
        return (self.cutoff_a + 1) * (self.cutoff_b + 1)

    def index(self, n_a: int, n_b: int) -> int:
        """Basis index of |n_a, n_b>."""
        if not (0 <= n_a <= self.cutoff_a and 0 <= n_b <= self.cutoff_b):
            msg = f"State |{n_a},{n_b}> is outside the space {self}"
            raise ValueError(msg)
        return n_a * (self.cutoff_b + 1) + n_b

    def occupations(self) -> Tuple[np.ndarray, np.ndarray]:
        """Arrays (n_a, n_b) of occupation numbers for every basis index."""
        return np.divmod(np.arange(self.dimension), self.cutoff_b + 1)

    def basis_vector(self, n_a: int, n_b: int) -> np.ndarray:
        """Unit vector of |n_a, n_b>."""
        vector = np.zeros(self.dimension, dtype=complex)
        vector[self.index(n_a, n_b)] = 1.0
        return vector

    def interior_indices(self, margin: int, total_number: bool = False) -> np.ndarray:
        """Indices of states at least ``margin`` levels below the cutoffs.

        Args:
            margin: Number of ladder levels kept clear below each cutoff.
            total_number: Also require n_a + n_b <= min(cutoffs) - margin. The
                SU(2) displacement is exact only on complete total-number shells.

        Returns:
            Sorted index array (possibly empty).

        """
        if margin < 0:
            msg = f"margin must be non-negative, got {margin}"
            raise ValueError(msg)
        n_a, n_b = self.occupations()
        mask = (n_a <= self.cutoff_a - margin) & (n_b <= self.cutoff_b - margin)
        if total_number:
            mask &= n_a + n_b <= min(self.cutoff_a, self.cutoff_b) - margin
        return np.flatnonzero(mask)

    def shrunk(self, margin: int) -> "FockSpace":
        """Space whose box equals the interior box of this one."""
        return FockSpace(self.cutoff_a - margin, self.cutoff_b - margin)


@dataclass(frozen=True)
class DisplacementParam:
    """Magnitude/phase pair of a displacement argument zeta = -(theta/2)e^{-i phi}.

    Values are normalized to theta >= 0 and phi in (-pi, pi].
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        theta, phi = float(self.theta), float(self.phi)
        if theta < 0:
            theta, phi = -theta, phi + np.pi
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", wrap_phase(phi))

    @classmethod
    def identity(cls) -> "DisplacementParam":
        """theta = 0, the identity displacement."""
        return cls(0.0, 0.0)

    @classmethod
    def from_zeta(cls, zeta: complex) -> "DisplacementParam":
        """Recover (theta, phi) from the complex argument."""
        if zeta == 0:
            return cls.identity()
        return cls(2.0 * abs(zeta), -np.angle(-zeta))

    @property
    def zeta(self) -> complex:
        """The complex argument -(theta/2)e^{-i phi}."""
        return -0.5 * self.theta * np.exp(-1j * self.phi)

    @property
    def unit(self) -> complex:
        """zeta/|zeta|, defined for every theta including zero."""
        return -np.exp(-1j * self.phi)

    def negated(self) -> "DisplacementParam":
        """Parameter of the inverse displacement (zeta -> -zeta)."""
        return DisplacementParam(self.theta, self.phi + np.pi)


def wrap_phase(phi: float) -> float:
    """Map an angle into (-pi, pi]."""
    wrapped = float(np.angle(np.exp(1j * phi)))
    if wrapped <= -np.pi:
        wrapped += 2.0 * np.pi
    return wrapped


def bargmann_index(n_a: int, n_b: int) -> Tuple[float, int, float]:
    """Return (k, n, mu) for |n_a, n_b>.

    K0^(ab) has eigenvalue k + n on the state, with k = (|n_a - n_b| + 1)/2 and
    n = min(n_a, n_b); mu = (n_a - n_b)/2 is the J0 (= N_d) eigenvalue.
    """
    return (abs(n_a - n_b) + 1) / 2.0, min(n_a, n_b), (n_a - n_b) / 2.0


@dataclass
class OperatorMatrix:
    """Dense complex matrix of an operator on a FockSpace.

    Attributes:
        space: The Fock space the matrix acts on
        entries: dimension x dimension complex array
        hermitian: When True, M = M^dag is verified at construction
        unitary: When True, M^dag M = 1 is verified at construction
        tolerance: Absolute tolerance of the flag checks

    """

    space: FockSpace
    entries: np.ndarray
    hermitian: bool = False
    unitary: bool = False
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=complex)
        shape = (self.space.dimension, self.space.dimension)
        if self.entries.shape != shape:
            msg = f"Matrix shape {self.entries.shape} does not match {shape}"
            raise ValueError(msg)
        if self.hermitian and self.hermiticity_error() >= self.tolerance:
            msg = f"Matrix flagged Hermitian deviates by {self.hermiticity_error():.3e}"
            raise ValueError(msg)
        if self.unitary and self.unitarity_error() >= self.tolerance:
            msg = f"Matrix flagged unitary deviates by {self.unitarity_error():.3e}"
            raise ValueError(msg)

    def hermiticity_error(self) -> float:
        """max |M - M^dag|."""
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def unitarity_error(self) -> float:
        """max |M^dag M - 1|."""
        product = self.entries.conj().T @ self.entries
        return float(np.max(np.abs(product - np.eye(self.space.dimension))))

    def dagger(self) -> "OperatorMatrix":
        """Hermitian conjugate."""
        return OperatorMatrix(self.space, self.entries.conj().T)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _require_same_space(self, other)
        return OperatorMatrix(self.space, self.entries @ other.entries)

    def conjugated_by(self, unitary: "OperatorMatrix") -> "OperatorMatrix":
        """Return U^dag M U."""
        _require_same_space(self, unitary)
        u = unitary.entries
        return OperatorMatrix(self.space, u.conj().T @ self.entries @ u)

    def commutator(self, other: "OperatorMatrix") -> "OperatorMatrix":
        """[self, other]."""
        _require_same_space(self, other)
        a, b = self.entries, other.entries
        return OperatorMatrix(self.space, a @ b - b @ a)

    def block(self, indices: np.ndarray) -> np.ndarray:
        """Submatrix on the given rows and columns."""
        return self.entries[np.ix_(indices, indices)]


def _require_same_space(left: OperatorMatrix, right: OperatorMatrix) -> None:
    if left.space != right.space:
        msg = f"Operators live on different spaces: {left.space} vs {right.space}"
        raise ValueError(msg)


@lru_cache(maxsize=64)
def _mode_factors(cutoff: int) -> Dict[str, np.ndarray]:
    lower = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)
    upper = lower.T.copy()
    return {
        "1": np.eye(cutoff + 1),
        "a": lower,
        "a+": upper,
        "n": np.diag(np.arange(cutoff + 1, dtype=float)),
        "aa": lower @ lower,
        "a+a+": upper @ upper,
    }


def _realize(space: FockSpace, label: GeneratorLabel) -> np.ndarray:
    factors_a = _mode_factors(space.cutoff_a)
    factors_b = _mode_factors(space.cutoff_b)
    entries = np.zeros((space.dimension, space.dimension), dtype=complex)
    for coef, name_a, name_b in _REALIZATIONS[label]:
        entries += coef * np.kron(factors_a[name_a], factors_b[name_b])
    return entries


def build_generator(
    space: FockSpace, label: Union[str, GeneratorLabel]
) -> OperatorMatrix:
    """Matrix of the labeled operator in the fixed basis.

    Args:
        space: Target Fock space.
        label: A GeneratorLabel or its string value (e.g. ``"K+(ab)"``).

    Returns:
        OperatorMatrix, flagged Hermitian for the diagonal generators.

    """
    label = GeneratorLabel.parse(label)
    return OperatorMatrix(
        space, _realize(space, label), hermitian=label in HERMITIAN_LABELS
    )


def compose(space: FockSpace, expansion: Expansion) -> OperatorMatrix:
    """Matrix of sum(coefficient * generator) over an expansion."""
    entries = np.zeros((space.dimension, space.dimension), dtype=complex)
    for label, coef in expansion.items():
        if coef != 0:
            entries += coef * _realize(space, GeneratorLabel.parse(label))
    return OperatorMatrix(space, entries)


def adjoint_expansion(expansion: Expansion) -> Expansion:
    """Expansion of X^dag given the expansion of X."""
    return {ADJOINT[label]: np.conj(coef) for label, coef in expansion.items()}


def commutation_residuals(space: FockSpace, margin: int = 2) -> Dict[str, float]:
    """Check the su(1,1), su(2) and N_d commutators on the interior columns.

    Returns:
        Mapping from a readable relation name to its max absolute residual.

    """
    cols = space.interior_indices(margin)

    def gen(label: GeneratorLabel) -> np.ndarray:
        return _realize(space, label)

    def comm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return x @ y - y @ x

    def residual(matrix: np.ndarray) -> float:
        return float(np.max(np.abs(matrix[:, cols]), initial=0.0))

    residuals: Dict[str, float] = {}
    triples = {
        "a": (GL.K_ZERO_A, GL.K_PLUS_A, GL.K_MINUS_A),
        "b": (GL.K_ZERO_B, GL.K_PLUS_B, GL.K_MINUS_B),
        "ab": (GL.K_ZERO_AB, GL.K_PLUS_AB, GL.K_MINUS_AB),
    }
    for name, (zero, plus, minus) in triples.items():
        k0, kp, km = gen(zero), gen(plus), gen(minus)
        residuals[f"[K0,K+]=K+ ({name})"] = residual(comm(k0, kp) - kp)
        residuals[f"[K0,K-]=-K- ({name})"] = residual(comm(k0, km) + km)
        residuals[f"[K-,K+]=2K0 ({name})"] = residual(comm(km, kp) - 2 * k0)

    j0, jp, jm = gen(GL.J_ZERO), gen(GL.J_PLUS), gen(GL.J_MINUS)
    residuals["[J0,J+]=J+"] = residual(comm(j0, jp) - jp)
    residuals["[J0,J-]=-J-"] = residual(comm(j0, jm) + jm)
    residuals["[J+,J-]=2J0"] = residual(comm(jp, jm) - 2 * j0)

    nd = gen(GL.N_D)
    residuals["Nd=J0"] = residual(nd - j0)
    for label in (GL.K_PLUS_AB, GL.K_MINUS_AB, GL.K_ZERO_AB):
        residuals[f"[Nd,{label.value}]=0"] = residual(comm(nd, gen(label)))
    return residuals


# --- displacement operators -------------------------------------------------


def _total_number_shells(space: FockSpace) -> List[np.ndarray]:
    n_a, n_b = space.occupations()
    total = n_a + n_b
    return [
        np.flatnonzero(total == shell)
        for shell in range(space.cutoff_a + space.cutoff_b + 1)
    ]


def _su2_shell_blocks(
    space: FockSpace, chi: DisplacementParam
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Per-shell (indices, exp(chi J+ - chi* J-)) pairs.

    J+ = a^dag b maps |n_a, n_b> to |n_a + 1, n_b - 1>, i.e. to the next index of
    the same total-number shell.
    """
    zeta = chi.zeta
    n_a_all, n_b_all = space.occupations()
    blocks = []
    for indices in _total_number_shells(space):
        n_a, n_b = n_a_all[indices], n_b_all[indices]
        hops = np.sqrt((n_a[:-1] + 1.0) * n_b[:-1])
        lower = np.diag(hops, k=-1).astype(complex)
        generator = zeta * lower - np.conj(zeta) * lower.T
        blocks.append((indices, expm(generator)))
    return blocks


def displacement_su2(space: FockSpace, chi: DisplacementParam) -> OperatorMatrix:
    """SU(2) displacement exp(chi J+ - chi* J-).

    J+ and J- conserve n_a + n_b, so the exponential is assembled shell by shell;
    the result is exactly unitary at any cutoff.
    """
    entries = np.zeros((space.dimension, space.dimension), dtype=complex)
    if chi.theta == 0:
        np.fill_diagonal(entries, 1.0)
        return OperatorMatrix(space, entries)
    for indices, block in _su2_shell_blocks(space, chi):
        entries[np.ix_(indices, indices)] = block
    return OperatorMatrix(space, entries, unitary=True)


def apply_su2(
    space: FockSpace, chi: DisplacementParam, vector: np.ndarray
) -> np.ndarray:
    """Apply D(chi) to a state vector, or to the columns of a matrix, shell by shell."""
    vector = np.array(vector, dtype=complex)
    if chi.theta == 0:
        return vector
    result = np.zeros_like(vector)
    for indices, block in _su2_shell_blocks(space, chi):
        result[indices] = block @ vector[indices]
    return result


def single_mode_displacement(xi: DisplacementParam, cutoff: int) -> np.ndarray:
    """exp(xi a^dag^2/2 - xi* a^2/2) on a single mode truncated at ``cutoff``."""
    factors = _mode_factors(cutoff)
    zeta = xi.zeta
    generator = 0.5 * (zeta * factors["a+a+"] - np.conj(zeta) * factors["aa"])
    return expm(generator)


def single_mode_leakage(columns: np.ndarray, margin: Optional[int] = None) -> float:
    """Largest weight an interior column puts on the two top ladder levels."""
    cutoff = columns.shape[0] - 1
    if margin is None:
        margin = max(2, cutoff // 2)
    interior = columns[:, : max(cutoff - margin + 1, 0)]
    if interior.size == 0:
        return 0.0
    edge = np.abs(interior[max(cutoff - 1, 0) :, :]) ** 2
    return float(np.max(np.sum(edge, axis=0)))


class Displacement(NamedTuple):
    """A displacement matrix with its truncation-leakage estimate."""

    matrix: OperatorMatrix
    leakage: float


def displacement_su11(
    space: FockSpace,
    xi_a: DisplacementParam,
    xi_b: DisplacementParam,
    margin: Optional[int] = None,
) -> Displacement:
    """SU(1,1) x SU(1,1) displacement D(xi_a)D(xi_b).

    The two single-mode exponentials commute, so the product equals the single
    exponential of the summed generators; it is built as a Kronecker product.

    Args:
        space: Target Fock space.
        xi_a: Squeeze parameter of mode a.
        xi_b: Squeeze parameter of mode b.
        margin: Levels below each cutoff that count as interior for the leakage
            estimate (default: half the cutoff).

    Returns:
        Displacement with the matrix and the largest interior-column weight on
        the top two levels of either mode.

    """
    mode_a = single_mode_displacement(xi_a, space.cutoff_a)
    mode_b = single_mode_displacement(xi_b, space.cutoff_b)
    leak_a = single_mode_leakage(mode_a, margin)
    leak_b = single_mode_leakage(mode_b, margin)
    leakage = leak_a + leak_b - leak_a * leak_b
    if leakage > LEAKAGE_THRESHOLD:
        logger.warning("SU(1,1) displacement truncation leakage %.3e", leakage)
    return Displacement(OperatorMatrix(space, np.kron(mode_a, mode_b)), leakage)


# Padded ladders grow until the kept columns leave less than this on the top two
# levels; amplitudes there are then at the 1e-10 scale.
PADDED_LEAKAGE = 1e-20
PADDED_EXTRA_LEVELS = 40
MAX_PADDED_CUTOFF = 2048


def padded_single_mode_displacement(xi: DisplacementParam, levels: int) -> np.ndarray:
    """Single-mode D(xi) on a ladder long enough for its first ``levels`` columns.

    The ladder starts PADDED_EXTRA_LEVELS above ``levels`` and doubles until
    those columns carry less than PADDED_LEAKAGE on the top two levels.

    Raises:
        ValueError: If no ladder up to MAX_PADDED_CUTOFF is long enough.

    """
    if levels < 1:
        msg = f"levels must be positive, got {levels}"
        raise ValueError(msg)
    cutoff = levels + PADDED_EXTRA_LEVELS
    while cutoff <= MAX_PADDED_CUTOFF:
        matrix = single_mode_displacement(xi, cutoff)
        leakage = single_mode_leakage(matrix, cutoff - levels + 1)
        if leakage < PADDED_LEAKAGE:
            logger.debug("Padded %s to cutoff %d (leakage %.1e)", xi, cutoff, leakage)
            return matrix
        cutoff *= 2
    msg = f"Squeeze {xi} needs more than {MAX_PADDED_CUTOFF} levels for {levels} columns"
    raise ValueError(msg)


def _conjugated_factors(unitary: np.ndarray, levels: int) -> Dict[str, np.ndarray]:
    columns = unitary[:, :levels]
    return {
        name: columns.conj().T @ factor @ columns
        for name, factor in _mode_factors(unitary.shape[0] - 1).items()
    }


def squeezed_block(
    expansion: Expansion,
    xi_a: DisplacementParam,
    xi_b: DisplacementParam,
    levels: int,
) -> np.ndarray:
    """Block n_a, n_b < levels of (D(xi_a)D(xi_b))^dag X D(xi_a)D(xi_b).

    X is sum(coefficient * generator) over ``expansion``. Every mode factor of
    the realizations is conjugated on its own padded ladder, so the block holds
    no truncation error. Rows and columns follow FockSpace.square(levels - 1).
    """
    conj_a = _conjugated_factors(padded_single_mode_displacement(xi_a, levels), levels)
    conj_b = _conjugated_factors(padded_single_mode_displacement(xi_b, levels), levels)
    weights: Dict[Tuple[str, str], complex] = {}
    for label, coef in expansion.items():
        if coef == 0:
            continue
        for factor, name_a, name_b in _REALIZATIONS[GeneratorLabel.parse(label)]:
            key = (name_a, name_b)
            weights[key] = weights.get(key, 0.0) + coef * factor
    block = np.zeros((levels, levels, levels, levels), dtype=complex)
    for (name_a, name_b), weight in weights.items():
        block += weight * np.einsum("ik,jl->ijkl", conj_a[name_a], conj_b[name_b])
    return block.reshape(levels * levels, levels * levels)


def squeezed_vacuum_amplitudes(xi: DisplacementParam, cutoff: int) -> np.ndarray:
    """Analytic amplitudes <n|D(xi)|0> of single-mode squeezed vacuum."""
    r = xi.theta / 2.0
    amplitudes = np.zeros(cutoff + 1, dtype=complex)
    ratio = xi.unit * np.tanh(r)
    for m in range(cutoff // 2 + 1):
        log_norm = 0.5 * gammaln(2 * m + 1) - m * np.log(2.0) - gammaln(m + 1)
        amplitudes[2 * m] = ratio**m * np.exp(log_norm) / np.sqrt(np.cosh(r))
    return amplitudes


# --- closed-form similarity transformations ----------------------------------

SU2_SUPPORTED = frozenset(
    {
        GL.K_PLUS_A,
        GL.K_MINUS_A,
        GL.K_PLUS_B,
        GL.K_MINUS_B,
        GL.K_PLUS_AB,
        GL.K_MINUS_AB,
        GL.K_ZERO_AB,
    }
)

SU11_SUPPORTED = frozenset(
    {
        GL.K_PLUS_A,
        GL.K_MINUS_A,
        GL.K_ZERO_A,
        GL.K_PLUS_B,
        GL.K_MINUS_B,
        GL.K_ZERO_B,
        GL.A,
        GL.A_DAG,
        GL.B,
        GL.B_DAG,
    }
)


def similarity_su2_closed_form(
    label: Union[str, GeneratorLabel], chi: DisplacementParam
) -> Expansion:
    """Expansion of D^dag(chi) X D(chi) for X in the su(2)-mixed K generators.

    Raising versions follow from (D^dag K- D)^dag = D^dag K+ D.
    """
    label = GeneratorLabel.parse(label)
    if label not in SU2_SUPPORTED:
        msg = f"No SU(2) similarity closed form for {label.value}"
        raise ValueError(msg)
    if label == GL.K_ZERO_AB or chi.theta == 0:
        return {label: 1.0 + 0j}
    if label in (GL.K_PLUS_A, GL.K_PLUS_B, GL.K_PLUS_AB):
        return adjoint_expansion(similarity_su2_closed_form(ADJOINT[label], chi))

    u = chi.unit
    cos, sin = np.cos(chi.theta), np.sin(chi.theta)
    if label == GL.K_MINUS_A:
        return {
            GL.K_MINUS_AB: u / 2 * sin,
            GL.K_MINUS_A: (cos + 1) / 2,
            GL.K_MINUS_B: -(u**2) / 2 * (cos - 1),
        }
    if label == GL.K_MINUS_B:
        return {
            GL.K_MINUS_AB: -np.conj(u) / 2 * sin,
            GL.K_MINUS_A: -np.conj(u) ** 2 / 2 * (cos - 1),
            GL.K_MINUS_B: (cos + 1) / 2,
        }
    return {
        GL.K_MINUS_AB: cos + 0j,
        GL.K_MINUS_A: -np.conj(u) * sin,
        GL.K_MINUS_B: u * sin,
    }


_MODE_OF = {
    GL.K_PLUS_A: "a",
    GL.K_MINUS_A: "a",
    GL.K_ZERO_A: "a",
    GL.A: "a",
    GL.A_DAG: "a",
    GL.K_PLUS_B: "b",
    GL.K_MINUS_B: "b",
    GL.K_ZERO_B: "b",
    GL.B: "b",
    GL.B_DAG: "b",
}

_MODE_LABELS = {
    "a": (GL.K_PLUS_A, GL.K_MINUS_A, GL.K_ZERO_A, GL.A, GL.A_DAG),
    "b": (GL.K_PLUS_B, GL.K_MINUS_B, GL.K_ZERO_B, GL.B, GL.B_DAG),
}


def similarity_su11_closed_form(
    label: Union[str, GeneratorLabel],
    xi_a: DisplacementParam,
    xi_b: DisplacementParam,
) -> Expansion:
    """Expansion of D^dag(xi)_ab X D(xi)_ab for single-mode generators and bosons.

    Only the displacement of the mode that X belongs to acts non-trivially.
    """
    label = GeneratorLabel.parse(label)
    if label not in SU11_SUPPORTED:
        msg = f"No SU(1,1) similarity closed form for {label.value}"
        raise ValueError(msg)
    mode = _MODE_OF[label]
    xi = xi_a if mode == "a" else xi_b
    plus, minus, zero, lower, upper = _MODE_LABELS[mode]
    if xi.theta == 0:
        return {label: 1.0 + 0j}

    v = xi.unit
    ch, sh = np.cosh(xi.theta), np.sinh(xi.theta)
    if label == plus:
        return {
            zero: sh * np.conj(v),
            plus: (ch + 1) / 2 + 0j,
            minus: (ch - 1) * np.conj(v) ** 2 / 2,
        }
    if label == minus:
        return adjoint_expansion(similarity_su11_closed_form(plus, xi_a, xi_b))
    if label == zero:
        return {zero: ch + 0j, plus: sh * v / 2, minus: sh * np.conj(v) / 2}
    half = xi.theta / 2
    if label == lower:
        return {lower: np.cosh(half) + 0j, upper: v * np.sinh(half)}
    return adjoint_expansion(similarity_su11_closed_form(lower, xi_a, xi_b))


# --- generator-basis expansion oracle ----------------------------------------


def expand_in_generators(
    matrix: Union[OperatorMatrix, np.ndarray],
    space: FockSpace,
    margin: int,
    basis: Sequence[GeneratorLabel] = QUADRATIC_BASIS,
    total_number: bool = False,
) -> Expansion:
    """Least-squares coefficients of ``matrix`` in a generator basis.

    Only the interior block is fitted. The generator blocks are taken from the
    smaller space whose box is the interior box, where the ladder elements are
    identical.

    Args:
        matrix: Operator to expand.
        space: Space the matrix lives on.
        margin: Interior margin (see FockSpace.interior_indices).
        basis: Generators to fit.
        total_number: Restrict to complete total-number shells as well.

    Returns:
        Mapping label -> fitted complex coefficient.

    """
    entries = matrix.entries if isinstance(matrix, OperatorMatrix) else matrix
    big = space.interior_indices(margin, total_number)
    return expand_block(entries[np.ix_(big, big)], space, margin, basis, total_number)


def expand_block(
    block: np.ndarray,
    space: FockSpace,
    margin: int,
    basis: Sequence[GeneratorLabel] = QUADRATIC_BASIS,
    total_number: bool = False,
) -> Expansion:
    """Like expand_in_generators, for a matrix already cut to the interior.

    ``block`` rows and columns follow ``space.interior_indices(margin,
    total_number)``; oracles that only ever form those columns use this.
    """
    inner = space.shrunk(margin)
    big = space.interior_indices(margin, total_number)
    if block.shape != (big.size, big.size):
        msg = f"Block shape {block.shape} does not match {big.size} interior states"
        raise ValueError(msg)
    n_a, n_b = space.occupations()
    small = n_a[big] * (inner.cutoff_b + 1) + n_b[big]
    design = np.column_stack(
        [_realize(inner, label)[np.ix_(small, small)].ravel() for label in basis]
    )
    coefficients, *_ = np.linalg.lstsq(design, np.ravel(block), rcond=None)
    return dict(zip(basis, coefficients))


def two_mode_apply(
    mode_a: np.ndarray, mode_b: np.ndarray, vectors: np.ndarray
) -> np.ndarray:
    """(mode_a kron mode_b) @ vectors without forming the Kronecker product."""
    dim_a, dim_b = mode_a.shape[0], mode_b.shape[0]
    stacked = np.asarray(vectors, dtype=complex)
    single = stacked.ndim == 1
    columns = stacked.reshape(dim_a, dim_b, -1)
    result = np.einsum("ij,jkn,lk->iln", mode_a, columns, mode_b)
    result = result.reshape(dim_a * dim_b, -1)
    return result[:, 0] if single else result


def apply_generator(
    space: FockSpace, label: Union[str, GeneratorLabel], vectors: np.ndarray
) -> np.ndarray:
    """Labeled operator applied to vectors, mode factor by mode factor."""
    label = GeneratorLabel.parse(label)
    factors_a = _mode_factors(space.cutoff_a)
    factors_b = _mode_factors(space.cutoff_b)
    result = np.zeros(np.shape(vectors), dtype=complex)
    for coef, name_a, name_b in _REALIZATIONS[label]:
        result += coef * two_mode_apply(factors_a[name_a], factors_b[name_b], vectors)
    return result


def generator_blocks(
    space: FockSpace, indices: np.ndarray, labels: Sequence[GeneratorLabel]
) -> Dict[GeneratorLabel, np.ndarray]:
    """Blocks of each generator on the given rows and columns."""
    columns = np.zeros((space.dimension, indices.size), dtype=complex)
    columns[indices, np.arange(indices.size)] = 1.0
    return {
        label: apply_generator(space, label, columns)[indices] for label in labels
    }


def expansion_block(
    expansion: Expansion, blocks: Dict[GeneratorLabel, np.ndarray]
) -> np.ndarray:
    """Sum of coefficient * block over an expansion, given precomputed blocks."""
    size = next(iter(blocks.values())).shape[0]
    result = np.zeros((size, size), dtype=complex)
    for label, coef in expansion.items():
        if coef != 0:
            result += coef * blocks[GeneratorLabel.parse(label)]
    return result


def expansion_distance(left: Expansion, right: Expansion) -> float:
    """Max absolute coefficient difference over the union of labels."""
    labels = set(left) | set(right)
    return max(
        (abs(left.get(label, 0.0) - right.get(label, 0.0)) for label in labels),
        default=0.0,
    )


def matrix_distance(
    left: OperatorMatrix, right: OperatorMatrix, indices: np.ndarray
) -> float:
    """Max absolute entry difference on the given rows and columns."""
    if indices.size == 0:
        return 0.0
    return float(np.max(np.abs(left.block(indices) - right.block(indices))))


@lru_cache(maxsize=1)
def structure_constants() -> np.ndarray:
    """Tensor f with [X_p, X_q] = sum_r f[p, q, r] X_r over QUADRATIC_BASIS.

    Computed once from matrices on a small space; the identity column stays zero
    because every generator already carries its ordering constant.
    """
    space = FockSpace.square(8)
    margin = 3
    size = len(QUADRATIC_BASIS)
    tensor = np.zeros((size, size, size), dtype=complex)
    mats = [_realize(space, label) for label in QUADRATIC_BASIS]
    for p in range(size):
        for q in range(size):
            comm = mats[p] @ mats[q] - mats[q] @ mats[p]
            fit = expand_in_generators(comm, space, margin)
            tensor[p, q] = [fit[label] for label in QUADRATIC_BASIS]
    tensor[np.abs(tensor) < 1e-12] = 0.0
    return tensor
