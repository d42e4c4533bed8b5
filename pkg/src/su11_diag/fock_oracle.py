"""Brute-force spectra on the truncated Fock space.

Everything here is independent of the closed forms in ``diagonalizer``: it only
builds the Hamiltonian matrix and hands it to a dense Hermitian eigensolver,
or conjugates it by displacement matrices whose parameters the caller supplies.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigh

from .hamiltonian import AlphaCoeffs, build_matrix
from .su_algebra import (
    DisplacementParam,
    FockSpace,
    OperatorMatrix,
    displacement_su2,
    expand_in_generators,
    squeezed_block,
)
from .utils import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (20, 40, 60)
DEFAULT_MARGIN = 10
HERMITIAN_TOLERANCE = 1e-10
# Complete total-number shells up to here fix every tilted coefficient.
TILT_CUTOFF = 12


@dataclass
class EigenResult:
    """Dense eigendecomposition of one Hamiltonian matrix.

    Attributes:
        eigenvalues: Ascending real eigenvalues
        eigenvectors: Matching columns
        space: The Fock space used, or None for a bare array

    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    space: Optional[FockSpace] = None

    def lowest(self, count: int) -> np.ndarray:
        """The ``count`` smallest eigenvalues."""
        return self.eigenvalues[:count]

    def residuals(self, matrix: np.ndarray) -> np.ndarray:
        """Per-pair ||A v - lambda v|| for the returned eigenpairs."""
        applied = matrix @ self.eigenvectors
        return np.linalg.norm(applied - self.eigenvectors * self.eigenvalues, axis=0)


@dataclass
class ConvergenceReport:
    """Lowest eigenvalues along a ladder of increasing cutoffs.

    Attributes:
        cutoffs: Cutoff of each rung (same on both modes)
        sequences: Array (rungs, levels) of the lowest eigenvalues per rung
        relative_change: Per-level relative change between the last two rungs
        converged: Per-level flag, relative change below the tolerance
        rel_tol: The tolerance used

    """

    cutoffs: List[int]
    sequences: np.ndarray
    relative_change: np.ndarray
    converged: List[bool]
    rel_tol: float

    @property
    def all_converged(self) -> bool:
        """Every requested level converged."""
        return all(self.converged)

    @property
    def final(self) -> np.ndarray:
        """Eigenvalues on the largest rung."""
        return self.sequences[-1]

    def ground_monotone(self) -> bool:
        """Whether the ground energy never increases along the ladder."""
        ground = self.sequences[:, 0]
        slack = 1e-12 * max(1.0, float(np.max(np.abs(ground))))
        return bool(np.all(np.diff(ground) <= slack))


def _entries(matrix: Union[OperatorMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(matrix, OperatorMatrix):
        return matrix.entries
    entries = np.asarray(matrix, dtype=complex)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        msg = f"Expected a square matrix, got shape {entries.shape}"
        raise ValueError(msg)
    return entries


def diagonalize(matrix: Union[OperatorMatrix, np.ndarray]) -> EigenResult:
    """Full dense Hermitian eigendecomposition.

    Args:
        matrix: An OperatorMatrix or a bare square array.

    Returns:
        EigenResult with ascending eigenvalues.

    Raises:
        ValueError: If the input is not Hermitian to 1e-10 relative to its size.

    """
    entries = _entries(matrix)
    scale = max(1.0, float(np.max(np.abs(entries), initial=0.0)))
    error = float(np.max(np.abs(entries - entries.conj().T), initial=0.0))
    if error > HERMITIAN_TOLERANCE * scale:
        msg = f"Matrix is not Hermitian (max |H - H^dag| = {error:.3e})"
        raise ValueError(msg)
    eigenvalues, eigenvectors = eigh(entries)
    space = matrix.space if isinstance(matrix, OperatorMatrix) else None
    return EigenResult(eigenvalues, eigenvectors, space)


def converged_spectrum(
    alpha: AlphaCoeffs,
    levels: int,
    rel_tol: float = 1e-8,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    threads: Optional[int] = None,
) -> ConvergenceReport:
    """Lowest ``levels`` oracle eigenvalues at each rung of a cutoff ladder.

    Rungs are independent and run in parallel. An unstable Hamiltonian shows up
    as a ground energy that keeps falling with the cutoff and is reported as
    not converged.
    """
    if levels < 1:
        msg = f"levels must be >= 1, got {levels}"
        raise ValueError(msg)
    if len(cutoffs) < 2:
        msg = "A convergence ladder needs at least two cutoffs"
        raise ValueError(msg)
    ladder = sorted(int(c) for c in cutoffs)
    if (ladder[0] + 1) ** 2 < levels:
        msg = f"Cutoff {ladder[0]} holds fewer than {levels} states"
        raise ValueError(msg)

    def rung(cutoff: int) -> np.ndarray:
        space = FockSpace.square(cutoff)
        values = eigh(
            build_matrix(alpha, space).entries,
            eigvals_only=True,
            subset_by_index=[0, levels - 1],
        )
        logger.debug("cutoff %s: E0 = %s", cutoff, values[0])
        return values

    sequences = np.array(parallel_map(rung, ladder, threads))
    last, previous = sequences[-1], sequences[-2]
    change = np.abs(last - previous) / np.maximum(np.abs(last), 1e-300)
    converged = [bool(c < rel_tol) for c in change]
    if not all(converged):
        logger.info(
            "Spectrum not converged on cutoffs %s (largest change %.3e)",
            ladder,
            float(np.max(change)),
        )
    return ConvergenceReport(ladder, sequences, change, converged, rel_tol)


def offdiagonal_norm(
    matrix: Union[OperatorMatrix, np.ndarray],
    margin: int = DEFAULT_MARGIN,
    space: Optional[FockSpace] = None,
    total_number: bool = False,
) -> float:
    """Largest off-diagonal modulus on the interior rows and columns.

    Args:
        matrix: Operator to inspect.
        margin: Levels kept clear below each cutoff.
        space: Required when ``matrix`` is a bare array.
        total_number: Also restrict to complete total-number shells, needed
            once an SU(2) displacement has been applied.

    Raises:
        ValueError: If the margin leaves no interior state.

    """
    if space is None:
        if not isinstance(matrix, OperatorMatrix):
            msg = "A FockSpace is required for a bare array"
            raise ValueError(msg)
        space = matrix.space
    if margin >= min(space.cutoff_a, space.cutoff_b):
        msg = f"margin {margin} must be smaller than the cutoffs of {space}"
        raise ValueError(msg)
    indices = space.interior_indices(margin, total_number)
    block = _entries(matrix)[np.ix_(indices, indices)]
    off = block - np.diag(np.diag(block))
    return float(np.max(np.abs(off), initial=0.0))


def decoupling_residual(
    alpha: AlphaCoeffs,
    chi: DisplacementParam,
    xi_a: DisplacementParam,
    xi_b: DisplacementParam,
    cutoff: int = DEFAULT_CUTOFFS[-1],
    margin: int = DEFAULT_MARGIN,
    tilt_cutoff: int = TILT_CUTOFF,
) -> float:
    """Largest off-diagonal modulus of D^dag H D with D = D(chi) D(xi_a) D(xi_b).

    D(chi) conserves n_a + n_b, so the tilted Hamiltonian is read exactly off a
    small space of complete total-number shells and re-expanded over the
    quadratic generators. The squeeze is then applied mode by mode on padded
    ladders, so no truncation error reaches the interior n_a, n_b <= cutoff -
    margin that is inspected.

    Raises:
        ValueError: If the margin leaves no interior state.

    """
    if not 0 <= margin < cutoff:
        msg = f"margin {margin} must lie in [0, {cutoff})"
        raise ValueError(msg)
    space = FockSpace.square(tilt_cutoff)
    tilted = build_matrix(alpha, space).conjugated_by(displacement_su2(space, chi))
    expansion = expand_in_generators(tilted, space, margin=2, total_number=True)
    block = squeezed_block(expansion, xi_a, xi_b, cutoff - margin + 1)
    off = block - np.diag(np.diag(block))
    return float(np.max(np.abs(off), initial=0.0))
