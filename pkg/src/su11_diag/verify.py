"""Oracle battery: every closed form against a matrix built from scratch.

Each family walks a grid of displacement parameters (or times along a moving
path) and records the largest entry-wise deviation between the closed form and
its matrix counterpart on the interior of the truncated space.
"""

import logging
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .berry import (
    ParameterPath,
    dt_transform_coefficients,
    dt_transform_oracle,
    invariant_block,
    invariant_expansion,
)
from .diagonalizer import solve_chi, transform_step1
from .hamiltonian import AlphaCoeffs
from .su_algebra import (
    SU2_SUPPORTED,
    SU11_SUPPORTED,
    DisplacementParam,
    Expansion,
    FockSpace,
    GeneratorLabel,
    apply_generator,
    commutation_residuals,
    compose,
    displacement_su2,
    expansion_block,
    expansion_distance,
    generator_blocks,
    similarity_su2_closed_form,
    similarity_su11_closed_form,
    single_mode_displacement,
    squeezed_vacuum_amplitudes,
    two_mode_apply,
)
from .utils import parallel_map

logger = logging.getLogger(__name__)

FAMILIES: Tuple[str, ...] = (
    "commutators",
    "su2-similarity",
    "su11-similarity",
    "squeezed-vacuum",
    "factorization",
    "tilt",
    "elimination",
    "dt-coefficients",
    "invariant",
)

FAMILY_TOLERANCE: Dict[str, float] = {
    "commutators": 1e-12,
    "su2-similarity": 1e-10,
    "su11-similarity": 1e-8,
    "squeezed-vacuum": 1e-10,
    "factorization": 1e-10,
    "tilt": 1e-10,
    "elimination": 1e-11,
    "dt-coefficients": 1e-7,
    "invariant": 1e-8,
}

# Size of the fault injected by the ``corrupt`` hook.
CORRUPTION = 1e-3

# Coefficient sets the tilt and elimination families run on.
SAMPLE_COEFFICIENTS: Tuple[AlphaCoeffs, ...] = (
    AlphaCoeffs(4.0, 0.3, 0.1, 0.2),
    AlphaCoeffs(4.0, 0.6, 0.2, 0.4),
    AlphaCoeffs(3.0, 0.5j, 0.2 - 0.1j, 0.3 + 0.2j),
)


def moving_alpha(t: float) -> AlphaCoeffs:
    """Unit-period loop where every displacement angle and phase moves."""
    turn = 2 * np.pi * t
    return AlphaCoeffs(
        4.0,
        0.4 * (1 + 0.2 * np.sin(turn)) * np.exp(1j * (0.3 + turn)),
        0.15 * np.exp(1j * (-0.4 + 2 * turn)),
        0.2 * (1 + 0.3 * np.cos(turn)) * np.exp(1j * (0.1 + turn)),
    )


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one identity at one parameter point."""

    family: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        """Residual within tolerance (NaN fails)."""
        return bool(self.residual <= self.tolerance)


@dataclass
class VerifySettings:
    """Grid sizes, cutoffs and hooks of the battery.

    Attributes:
        grid: Points per angle axis
        cutoff_su2: Cutoff for SU(2)-only checks
        cutoff_su11: Cutoff for checks involving squeezing
        interior: Squeezed checks use states with n_a + n_b <= interior
        theta_max_su11: Largest squeeze angle on the grid
        path_points: Times sampled along the moving loop
        deltas: Finite-difference steps, largest first
        tolerance: Replaces every family tolerance when set
        corrupt: Family whose closed form gets a deliberate fault
        families: Families to run (default all)
        threads: Worker cap

    """

    grid: int = 5
    cutoff_su2: int = 10
    cutoff_su11: int = 40
    interior: int = 4
    theta_max_su11: float = 0.4
    path_points: int = 10
    deltas: Tuple[float, float] = (1e-3, 1e-4)
    tolerance: Optional[float] = None
    corrupt: Optional[str] = None
    families: List[str] = field(default_factory=lambda: list(FAMILIES))
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.grid < 2:
            msg = f"grid must be >= 2, got {self.grid}"
            raise ValueError(msg)
        if self.cutoff_su2 < 4 or self.cutoff_su11 <= self.interior:
            msg = "cutoff_su2 must be >= 4 and cutoff_su11 must exceed interior"
            raise ValueError(msg)
        if self.tolerance is not None and self.tolerance <= 0:
            msg = f"tolerance must be positive, got {self.tolerance}"
            raise ValueError(msg)
        self.deltas = tuple(float(d) for d in self.deltas)
        if len(self.deltas) != 2 or not self.deltas[0] > self.deltas[1] > 0:
            msg = f"deltas must be two decreasing positive steps, got {self.deltas}"
            raise ValueError(msg)
        unknown = sorted(set(self.families) - set(FAMILIES))
        if self.corrupt is not None and self.corrupt not in FAMILIES:
            unknown.append(self.corrupt)
        if unknown:
            msg = f"Unknown verification families: {', '.join(unknown)}"
            raise ValueError(msg)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "VerifySettings":
        """Build from the ``verify`` config section."""
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            msg = f"Unknown verify keys: {', '.join(unknown)}"
            raise ValueError(msg)
        return cls(**dict(data))

    def tolerance_for(self, family: str) -> float:
        """Tolerance applied to a family."""
        if self.tolerance is not None:
            return self.tolerance
        return FAMILY_TOLERANCE[family]


@dataclass
class VerifyReport:
    """All check results, in battery order."""

    results: List[CheckResult]

    @property
    def failures(self) -> List[CheckResult]:
        """Checks over tolerance."""
        return [r for r in self.results if not r.passed]

    @property
    def passed(self) -> bool:
        """No check failed."""
        return not self.failures

    def worst(self) -> Dict[str, float]:
        """Largest residual per family."""
        worst: Dict[str, float] = {}
        for result in self.results:
            worst[result.family] = max(worst.get(result.family, 0.0), result.residual)
        return worst


def theta_grid(count: int, maximum: float) -> np.ndarray:
    """Evenly spaced angles from 0 to ``maximum`` inclusive."""
    return np.linspace(0.0, maximum, count)


def phi_grid(count: int) -> np.ndarray:
    """Evenly spaced phases in (-pi, pi]."""
    return -np.pi + 2 * np.pi * (np.arange(count) + 1) / count


def _tampered(expansion: Expansion, family: str, settings: VerifySettings) -> Expansion:
    if settings.corrupt != family or not expansion:
        return expansion
    tampered = dict(expansion)
    first = next(iter(tampered))
    tampered[first] = tampered[first] + CORRUPTION
    return tampered


def _unit_columns(space: FockSpace, indices: np.ndarray) -> np.ndarray:
    columns = np.zeros((space.dimension, indices.size), dtype=complex)
    columns[indices, np.arange(indices.size)] = 1.0
    return columns


def _max_abs(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix), initial=0.0))


def _angle_name(prefix: str, param: DisplacementParam) -> str:
    return f"{prefix} theta={param.theta:.4f} phi={param.phi:.4f}"


def check_commutators(settings: VerifySettings) -> List[CheckResult]:
    """su(1,1), su(2) and N_d commutation relations on the realization."""
    family = "commutators"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su2)
    shift = CORRUPTION if settings.corrupt == family else 0.0
    return [
        CheckResult(family, name, residual + shift, tolerance)
        for name, residual in commutation_residuals(space, margin=2).items()
    ]


def check_su2_similarity(settings: VerifySettings) -> List[CheckResult]:
    """D^dag(chi) X D(chi) for the K generators against its closed form."""
    family = "su2-similarity"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su2)
    indices = space.interior_indices(2, total_number=True)
    blocks = generator_blocks(space, indices, list(GeneratorLabel))
    labels = sorted(SU2_SUPPORTED, key=lambda label: label.value)
    results = []
    for theta in theta_grid(settings.grid, np.pi / 2):
        for phi in phi_grid(settings.grid):
            chi = DisplacementParam(theta, phi)
            columns = displacement_su2(space, chi).entries[:, indices]
            for label in labels:
                transformed = columns.conj().T @ apply_generator(space, label, columns)
                closed = _tampered(similarity_su2_closed_form(label, chi), family, settings)
                residual = _max_abs(transformed - expansion_block(closed, blocks))
                name = _angle_name(label.value, chi)
                results.append(CheckResult(family, name, residual, tolerance))
    return results


def check_su11_similarity(settings: VerifySettings) -> List[CheckResult]:
    """D^dag(xi)_ab X D(xi)_ab for single-mode generators and bosons."""
    family = "su11-similarity"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su11)
    indices = space.interior_indices(settings.cutoff_su11 - settings.interior)
    blocks = generator_blocks(space, indices, list(GeneratorLabel))
    labels = sorted(SU11_SUPPORTED, key=lambda label: label.value)
    unit = _unit_columns(space, indices)
    results = []
    for theta in theta_grid(settings.grid, settings.theta_max_su11):
        for phi in phi_grid(settings.grid):
            xi_a = DisplacementParam(theta, phi)
            xi_b = DisplacementParam(theta / 2, -phi)
            columns = two_mode_apply(
                single_mode_displacement(xi_a, space.cutoff_a),
                single_mode_displacement(xi_b, space.cutoff_b),
                unit,
            )
            for label in labels:
                transformed = columns.conj().T @ apply_generator(space, label, columns)
                closed = _tampered(
                    similarity_su11_closed_form(label, xi_a, xi_b), family, settings
                )
                residual = _max_abs(transformed - expansion_block(closed, blocks))
                name = _angle_name(label.value, xi_a)
                results.append(CheckResult(family, name, residual, tolerance))
    return results


def check_squeezed_vacuum(settings: VerifySettings) -> List[CheckResult]:
    """First column of the single-mode displacement against the known amplitudes."""
    family = "squeezed-vacuum"
    tolerance = settings.tolerance_for(family)
    cutoff = settings.cutoff_su11
    results = []
    for theta in theta_grid(settings.grid, settings.theta_max_su11):
        for phi in phi_grid(settings.grid):
            xi = DisplacementParam(theta, phi)
            column = single_mode_displacement(xi, cutoff)[:, 0]
            expected = squeezed_vacuum_amplitudes(xi, cutoff)
            if settings.corrupt == family:
                expected = expected + CORRUPTION
            residual = _max_abs(column - expected)
            results.append(CheckResult(family, _angle_name("|0>", xi), residual, tolerance))
    return results


def check_factorization(settings: VerifySettings) -> List[CheckResult]:
    """exp of the summed squeeze generators equals the product of the two modes."""
    family = "factorization"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su2)
    results = []
    for theta, phi in zip(
        theta_grid(settings.grid, settings.theta_max_su11), phi_grid(settings.grid)
    ):
        xi_a, xi_b = DisplacementParam(theta, phi), DisplacementParam(theta / 2, -phi)
        generator = {
            GeneratorLabel.K_PLUS_A: xi_a.zeta,
            GeneratorLabel.K_MINUS_A: -np.conj(xi_a.zeta),
            GeneratorLabel.K_PLUS_B: xi_b.zeta,
            GeneratorLabel.K_MINUS_B: -np.conj(xi_b.zeta),
        }
        joint = expm(compose(space, _tampered(generator, family, settings)).entries)
        product = np.kron(
            single_mode_displacement(xi_a, space.cutoff_a),
            single_mode_displacement(xi_b, space.cutoff_b),
        )
        residual = _max_abs(joint - product)
        results.append(CheckResult(family, _angle_name("D(xi)_ab", xi_a), residual, tolerance))
    return results


def check_tilt(settings: VerifySettings) -> List[CheckResult]:
    """The tilted coefficients against D^dag(chi) H D(chi) built as matrices."""
    family = "tilt"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su2)
    indices = space.interior_indices(2, total_number=True)
    blocks = generator_blocks(space, indices, list(GeneratorLabel))
    results = []
    for number, alpha in enumerate(SAMPLE_COEFFICIENTS):
        hamiltonian = compose(space, alpha.expansion()).entries
        for theta in theta_grid(settings.grid, np.pi / 2):
            for phi in phi_grid(settings.grid):
                chi = DisplacementParam(theta, phi)
                columns = displacement_su2(space, chi).entries[:, indices]
                transformed = columns.conj().T @ hamiltonian @ columns
                closed = _tampered(
                    transform_step1(alpha, chi).as_alpha().expansion(), family, settings
                )
                residual = _max_abs(transformed - expansion_block(closed, blocks))
                name = _angle_name(f"alpha#{number}", chi)
                results.append(CheckResult(family, name, residual, tolerance))
    return results


def check_elimination(settings: VerifySettings) -> List[CheckResult]:
    """The solved tilt leaves no K+-^(ab) term."""
    family = "elimination"
    tolerance = settings.tolerance_for(family)
    results = []
    for number, alpha in enumerate(SAMPLE_COEFFICIENTS):
        chi = solve_chi(alpha).chi
        if settings.corrupt == family:
            chi = DisplacementParam(chi.theta + CORRUPTION, chi.phi)
        residual = abs(transform_step1(alpha, chi).beta_plus_ab)
        name = f"alpha#{number} ({chi.theta:.6f}, {chi.phi:.6f})"
        results.append(CheckResult(family, name, residual, tolerance))
    return results


def _moving_path() -> ParameterPath:
    return ParameterPath.from_function(moving_alpha, 1.0, samples=16, threads=1)


def _check_times(settings: VerifySettings) -> np.ndarray:
    return (np.arange(settings.path_points) + 0.5) / settings.path_points


def check_dt_coefficients(settings: VerifySettings) -> List[CheckResult]:
    """Transformed time-derivative coefficients against a finite-difference matrix.

    The two step sizes are combined by Richardson extrapolation, which removes
    the O(delta^2) term of the central difference.
    """
    family = "dt-coefficients"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su11)
    margin = settings.cutoff_su11 - settings.interior
    path = _moving_path()
    coarse_step, fine_step = settings.deltas
    ratio = (coarse_step / fine_step) ** 2
    results = []
    for t in _check_times(settings):
        closed = _tampered(
            dt_transform_coefficients(path, t).as_expansion(), family, settings
        )
        coarse = dt_transform_oracle(path, t, space, coarse_step, margin)
        fine = dt_transform_oracle(path, t, space, fine_step, margin)
        extrapolated = {
            label: (ratio * fine[label] - coarse[label]) / (ratio - 1) for label in fine
        }
        residual = expansion_distance(extrapolated, closed)
        results.append(CheckResult(family, f"t={t:.4f}", residual, tolerance))
    return results


def check_invariant(settings: VerifySettings) -> List[CheckResult]:
    """I = D K0^(ab) D^dag against its generator expansion along the moving loop."""
    family = "invariant"
    tolerance = settings.tolerance_for(family)
    space = FockSpace.square(settings.cutoff_su11)
    indices = space.interior_indices(
        settings.cutoff_su11 - settings.interior, total_number=True
    )
    blocks = generator_blocks(space, indices, list(GeneratorLabel))
    path = _moving_path()
    results = []
    for t in _check_times(settings):
        displacements = path.displacement_at(t)
        closed = _tampered(invariant_expansion(displacements), family, settings)
        block = invariant_block(space, displacements, indices)
        residual = _max_abs(block - expansion_block(closed, blocks))
        results.append(CheckResult(family, f"t={t:.4f}", residual, tolerance))
    return results


CHECKS: Dict[str, Callable[[VerifySettings], List[CheckResult]]] = {
    "commutators": check_commutators,
    "su2-similarity": check_su2_similarity,
    "su11-similarity": check_su11_similarity,
    "squeezed-vacuum": check_squeezed_vacuum,
    "factorization": check_factorization,
    "tilt": check_tilt,
    "elimination": check_elimination,
    "dt-coefficients": check_dt_coefficients,
    "invariant": check_invariant,
}


def run_battery(settings: Optional[VerifySettings] = None) -> VerifyReport:
    """Run the selected families in parallel; results keep battery order."""
    settings = settings or VerifySettings()
    selected: Sequence[str] = [f for f in FAMILIES if f in settings.families]
    per_family = parallel_map(
        lambda family: CHECKS[family](settings), selected, settings.threads
    )
    report = VerifyReport([result for batch in per_family for result in batch])
    for failure in report.failures:
        logger.debug(
            "%s %s: residual %.3e > %.1e",
            failure.family,
            failure.name,
            failure.residual,
            failure.tolerance,
        )
    return report
