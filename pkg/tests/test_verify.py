"""Tests for the oracle battery."""

import numpy as np
import pytest

from su11_diag.verify import (
    CORRUPTION,
    FAMILIES,
    FAMILY_TOLERANCE,
    CheckResult,
    VerifyReport,
    VerifySettings,
    check_elimination,
    check_squeezed_vacuum,
    phi_grid,
    run_battery,
    theta_grid,
)

FAST_FAMILIES = ["commutators", "su2-similarity", "factorization", "tilt", "elimination"]


def fast_settings(**kwargs: object) -> VerifySettings:
    """Small grids on the SU(2)-only families."""
    options = {"grid": 3, "families": FAST_FAMILIES, "threads": 1}
    options.update(kwargs)
    return VerifySettings(**options)


class TestSettings:
    """Test battery settings."""

    def test_defaults_cover_every_family(self) -> None:
        """Test that all families run by default with their own tolerances."""
        settings = VerifySettings()
        assert settings.families == list(FAMILIES)
        assert settings.tolerance_for("dt-coefficients") == FAMILY_TOLERANCE["dt-coefficients"]

    def test_tolerance_override(self) -> None:
        """Test that a global tolerance replaces the family ones."""
        assert VerifySettings(tolerance=1e-3).tolerance_for("commutators") == 1e-3

    @pytest.mark.parametrize(
        ("kwargs", "message"),
        [
            ({"grid": 1}, "grid must be >= 2"),
            ({"cutoff_su11": 4}, "cutoff_su11 must exceed interior"),
            ({"tolerance": 0.0}, "tolerance must be positive"),
            ({"deltas": (1e-4, 1e-3)}, "two decreasing positive steps"),
            ({"families": ["tilt", "magic"]}, "Unknown verification families: magic"),
            ({"corrupt": "magic"}, "Unknown verification families: magic"),
        ],
    )
    def test_invalid_settings(self, kwargs: dict, message: str) -> None:
        """Test each settings rule."""
        with pytest.raises(ValueError, match=message):
            VerifySettings(**kwargs)

    def test_from_dict_rejects_unknown_keys(self) -> None:
        """Test the config-section constructor."""
        assert VerifySettings.from_dict({"grid": 4}).grid == 4
        with pytest.raises(ValueError, match="Unknown verify keys: speed"):
            VerifySettings.from_dict({"speed": 1})

    def test_deltas_from_lists(self) -> None:
        """Test that list deltas from a document become a tuple."""
        assert VerifySettings(deltas=[1e-2, 1e-3]).deltas == (1e-2, 1e-3)


class TestResults:
    """Test result records."""

    def test_nan_residual_fails(self) -> None:
        """Test that an undefined residual never passes."""
        assert not CheckResult("tilt", "x", float("nan"), 1.0).passed
        assert CheckResult("tilt", "x", 1.0, 1.0).passed

    def test_report_summaries(self) -> None:
        """Test failures and the per-family maxima."""
        report = VerifyReport(
            [
                CheckResult("tilt", "a", 1e-12, 1e-10),
                CheckResult("tilt", "b", 1e-9, 1e-10),
                CheckResult("elimination", "c", 1e-13, 1e-11),
            ]
        )
        assert [r.name for r in report.failures] == ["b"]
        assert not report.passed
        assert report.worst() == {"tilt": 1e-9, "elimination": 1e-13}

    def test_grids(self) -> None:
        """Test the angle grids."""
        assert theta_grid(3, 1.0) == pytest.approx([0.0, 0.5, 1.0])
        phis = phi_grid(4)
        assert phis[-1] == pytest.approx(np.pi)
        assert np.all(phis > -np.pi)


class TestBattery:
    """Test running the identity families."""

    def test_fast_families_pass(self) -> None:
        """Test that the SU(2)-only families pass at their tolerances."""
        report = run_battery(fast_settings())
        assert report.results
        assert report.passed, [(r.family, r.name, r.residual) for r in report.failures]
        assert {r.family for r in report.results} == set(FAST_FAMILIES)

    def test_results_keep_battery_order(self) -> None:
        """Test that families appear in battery order whatever the thread count."""
        report = run_battery(fast_settings(threads=4))
        seen = list(dict.fromkeys(r.family for r in report.results))
        assert seen == [f for f in FAMILIES if f in FAST_FAMILIES]

    @pytest.mark.parametrize("family", FAST_FAMILIES)
    def test_corruption_is_caught(self, family: str) -> None:
        """Test that a deliberate fault in a closed form fails its family."""
        report = run_battery(fast_settings(corrupt=family, families=[family]))
        assert not report.passed
        assert all(r.family == family for r in report.failures)

    def test_elimination_residuals(self) -> None:
        """Test that the solved tilts leave essentially nothing behind."""
        results = check_elimination(fast_settings())
        assert len(results) == 3
        assert max(r.residual for r in results) < 1e-11

    def test_squeezed_vacuum_corruption_size(self) -> None:
        """Test that the injected fault shows up at its own size."""
        results = check_squeezed_vacuum(fast_settings(corrupt="squeezed-vacuum"))
        assert min(r.residual for r in results) == pytest.approx(CORRUPTION, rel=1e-3)

    @pytest.mark.slow
    def test_full_battery_passes(self) -> None:
        """Test every family at the default cutoffs."""
        report = run_battery(VerifySettings())
        assert report.passed, [(r.family, r.name, r.residual) for r in report.failures]
        assert {r.family for r in report.results} == set(FAMILIES)
