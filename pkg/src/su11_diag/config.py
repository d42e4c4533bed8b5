"""Run configuration for the su11-diag command line."""

import copy
import json
import warnings
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from .berry import (
    DEFAULT_SAMPLES,
    LEWIS_FORMS,
    ParameterPath,
    linear_path,
    phase_locked_path,
)
from .diagonalizer import UnstableHamiltonianError
from .hamiltonian import (
    AlphaCoeffs,
    PhysicalOscillatorParams,
    from_physical,
    reduce_isotropic,
)
from .verify import VerifySettings

# Searched for in the working directory and up to five parents.
CONFIG_FILENAMES: Tuple[str, ...] = ("su11.json", "su11.yaml")

MODES: Tuple[str, ...] = ("spectrum", "verify", "berry", "transform-check")
SOURCE_KEYS: Tuple[str, ...] = ("alpha", "physical", "path")
FORMATS: Tuple[str, ...] = ("csv", "json")
PATH_TYPES: Tuple[str, ...] = ("phase_locked", "linear")

DEFAULT_CONFIG: Dict[str, Any] = {
    "mode": "spectrum",
    "cutoffs": [20, 40, 60],
    "cutoff": 30,
    "levels": 10,
    "samples": DEFAULT_SAMPLES,
    "tolerance": 1e-6,
    "margin": 10,
    "output": None,
    "format": "csv",
    "state": [0, 0],
    "numeric_berry": True,
    "lewis_form": "consistent",
    "threads": 0,
    "verify": {},
}

KNOWN_KEYS = frozenset(DEFAULT_CONFIG) | frozenset(SOURCE_KEYS)


class ConfigError(ValueError):
    """Invalid or contradictory run configuration."""


class RunConfig:
    """Validated run configuration with defaults merged in."""

    def __init__(
        self,
        config_path: Optional[Path] = None,
        data: Optional[Mapping[str, Any]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> None:
        """Load, merge and validate a configuration.

        Args:
            config_path: JSON or YAML document. If None and no ``data`` is given,
                su11.json / su11.yaml is searched for.
            data: Configuration mapping used instead of a file.
            overrides: Top-level values from command-line flags; None entries
                are ignored.

        Raises:
            ConfigError: If the document cannot be read or fails validation.

        """
        if data is None:
            self.config_path = config_path or self._find_config_file()
            data = self._load_config()
        else:
            self.config_path = config_path
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        self.config_data: Dict[str, Any] = copy.deepcopy(DEFAULT_CONFIG)
        self.config_data.update(copy.deepcopy(dict(data)))
        self.config_data.update(self.overrides)
        self._validate()

    def _find_config_file(self) -> Optional[Path]:
        """Search for su11.json or su11.yaml in current and parent directories."""
        current = Path.cwd()

        # Search up to 5 levels up
        for _ in range(5):
            for name in CONFIG_FILENAMES:
                config_file = current / name
                if config_file.exists():
                    return config_file

            if current.parent == current:
                break
            current = current.parent

        return None

    def _load_config(self) -> Dict[str, Any]:
        """Load the document: JSON by suffix, YAML otherwise."""
        if not self.config_path:
            return {}
        if not self.config_path.exists():
            msg = f"Config file not found: {self.config_path}"
            raise ConfigError(msg)
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                if self.config_path.suffix == ".json":
                    document = json.load(f)
                else:
                    document = yaml.safe_load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            msg = f"Cannot parse {self.config_path}: {e}"
            raise ConfigError(msg) from e
        if document is None:
            return {}
        if not isinstance(document, dict):
            msg = f"{self.config_path} must hold a mapping at the top level"
            raise ConfigError(msg)
        return document

    def _validate(self) -> None:
        data = self.config_data
        unknown = sorted(set(data) - KNOWN_KEYS)
        if unknown:
            warnings.warn(
                f"Ignoring unknown config keys: {', '.join(unknown)}", stacklevel=2
            )

        if data["mode"] not in MODES:
            msg = f"Unknown mode {data['mode']!r}; expected one of {', '.join(MODES)}"
            raise ConfigError(msg)
        sources = [key for key in SOURCE_KEYS if data.get(key) is not None]
        if len(sources) > 1:
            msg = f"Conflicting coefficient sources: {' and '.join(sources)} (give exactly one)"
            raise ConfigError(msg)

        # YAML 1.1 reads exponent-only literals such as 1e-6 as strings.
        if isinstance(data["tolerance"], str):
            try:
                data["tolerance"] = float(data["tolerance"])
            except ValueError:
                pass
        if not _is_number(data["tolerance"]) or data["tolerance"] <= 0:
            msg = f"tolerance must be a positive number, got {data['tolerance']!r}"
            raise ConfigError(msg)
        for key, minimum in (("cutoff", 1), ("levels", 1), ("samples", 2), ("margin", 0)):
            if not _is_integer(data[key]) or data[key] < minimum:
                msg = f"{key} must be an integer >= {minimum}, got {data[key]!r}"
                raise ConfigError(msg)
        cutoffs = data["cutoffs"]
        if (
            not isinstance(cutoffs, list)
            or len(cutoffs) < 2
            or not all(_is_integer(c) and c >= 1 for c in cutoffs)
        ):
            msg = f"cutoffs must list at least two positive integers, got {cutoffs!r}"
            raise ConfigError(msg)
        if data["format"] not in FORMATS:
            msg = f"format must be one of {', '.join(FORMATS)}, got {data['format']!r}"
            raise ConfigError(msg)
        if data["lewis_form"] not in LEWIS_FORMS:
            msg = f"lewis_form must be one of {', '.join(LEWIS_FORMS)}, got {data['lewis_form']!r}"
            raise ConfigError(msg)
        state = data["state"]
        if (
            not isinstance(state, list)
            or len(state) != 2
            or not all(_is_integer(n) and n >= 0 for n in state)
        ):
            msg = f"state must be [n_a, n_b] with non-negative integers, got {state!r}"
            raise ConfigError(msg)
        if not isinstance(data["verify"], dict):
            msg = "verify must be a mapping"
            raise ConfigError(msg)

    def get_mode(self) -> str:
        """Configured mode."""
        return self.config_data["mode"]

    def get_source(self) -> Optional[str]:
        """Which coefficient source is present, if any."""
        for key in SOURCE_KEYS:
            if self.config_data.get(key) is not None:
                return key
        return None

    def get_alpha(self) -> AlphaCoeffs:
        """Static coefficients from ``alpha`` or ``physical``.

        Raises:
            ConfigError: If neither is present or the values are invalid.

        """
        try:
            if self.config_data.get("alpha") is not None:
                return AlphaCoeffs.from_dict(self.config_data["alpha"])
            if self.config_data.get("physical") is not None:
                params = PhysicalOscillatorParams.from_dict(self.config_data["physical"])
                return reduce_isotropic(from_physical(params))
        except (ValueError, TypeError) as e:
            msg = f"Invalid coefficients: {e}"
            raise ConfigError(msg) from e
        msg = "This mode needs an 'alpha' or 'physical' coefficient source"
        raise ConfigError(msg)

    def get_path_spec(self) -> Dict[str, Any]:
        """The raw ``path`` section."""
        spec = self.config_data.get("path")
        if not isinstance(spec, dict):
            msg = "This mode needs a 'path' section"
            raise ConfigError(msg)
        return spec

    def build_path(self) -> ParameterPath:
        """Construct the configured parameter path.

        Raises:
            ConfigError: If the path section is malformed or breaks the lock.
            UnstableHamiltonianError: If a sample is unstable.

        """
        spec = self.get_path_spec()
        kind = spec.get("type", "phase_locked")
        if kind not in PATH_TYPES:
            msg = f"Unknown path type {kind!r}; expected one of {', '.join(PATH_TYPES)}"
            raise ConfigError(msg)
        # --samples beats the path section, which beats the top-level key.
        samples = int(self.overrides.get("samples", spec.get("samples", self.get_samples())))
        duration = float(spec.get("duration", 1.0))
        try:
            if kind == "linear":
                return linear_path(
                    AlphaCoeffs.from_dict(spec["start"]),
                    AlphaCoeffs.from_dict(spec["end"]),
                    samples=samples,
                    duration=duration,
                    threads=self.get_threads(),
                )
            return phase_locked_path(
                AlphaCoeffs.from_dict(spec["base"]),
                windings=spec.get("windings", [1, 1, 1]),
                samples=samples,
                duration=duration,
                lock_order=int(spec.get("lock_order", 0)),
                threads=self.get_threads(),
            )
        except UnstableHamiltonianError:
            raise
        except KeyError as e:
            msg = f"Path section of type {kind!r} is missing {e}"
            raise ConfigError(msg) from e
        except (TypeError, ValueError) as e:
            msg = f"Invalid path section: {e}"
            raise ConfigError(msg) from e

    def get_cutoffs(self) -> List[int]:
        """Cutoff ladder for the oracle spectrum."""
        return [int(c) for c in self.config_data["cutoffs"]]

    def get_cutoff(self) -> int:
        """Single cutoff for eigenstates and matrix checks."""
        return int(self.config_data["cutoff"])

    def get_levels(self) -> int:
        """Number of levels to report."""
        return int(self.config_data["levels"])

    def get_samples(self) -> int:
        """Default number of path intervals."""
        return int(self.config_data["samples"])

    def get_tolerance(self) -> float:
        """Acceptance tolerance for analytic-vs-oracle comparisons."""
        return float(self.config_data["tolerance"])

    def get_margin(self) -> int:
        """Interior margin below the cutoffs."""
        return int(self.config_data["margin"])

    def get_output(self) -> Optional[Path]:
        """Output file, or None for standard output."""
        output = self.config_data.get("output")
        return Path(output) if output else None

    def get_format(self) -> str:
        """csv or json."""
        return self.config_data["format"]

    def get_state(self) -> Tuple[int, int]:
        """(n_a, n_b) of the state followed around a loop."""
        n_a, n_b = self.config_data["state"]
        return int(n_a), int(n_b)

    def get_numeric_berry(self) -> bool:
        """Whether the berry mode also computes the overlap-based phase."""
        return bool(self.config_data["numeric_berry"])

    def get_lewis_form(self) -> str:
        """Which Lewis phase form the berry mode reports."""
        return self.config_data["lewis_form"]

    def get_threads(self) -> Optional[int]:
        """Worker cap; None defers to $SU11_THREADS."""
        threads = int(self.config_data.get("threads") or 0)
        return threads or None

    def get_verify_settings(self) -> VerifySettings:
        """Oracle battery settings; a --tol flag also sets the battery tolerance."""
        section = dict(self.config_data["verify"])
        if "tolerance" in self.overrides:
            section["tolerance"] = self.overrides["tolerance"]
        section.setdefault("threads", self.get_threads())
        try:
            return VerifySettings.from_dict(section)
        except (TypeError, ValueError) as e:
            msg = f"Invalid verify section: {e}"
            raise ConfigError(msg) from e


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)
