"""Tests for shared output and threading helpers."""

import io
import json

import numpy as np
import pytest

from su11_diag.utils import (
    complex_columns,
    format_float,
    parallel_map,
    to_json,
    worker_count,
    write_csv,
)


class TestFormatting:
    """Test round-trip number formatting."""

    @pytest.mark.parametrize("value", [0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)])
    def test_format_float_round_trips(self, value: float) -> None:
        """Test that the text parses back to the same double."""
        assert float(format_float(value)) == float(value)

    def test_complex_columns(self) -> None:
        """Test the real/imaginary split."""
        assert complex_columns("chi", 1 - 2j) == {"chi_re": 1.0, "chi_im": -2.0}

    def test_write_csv(self) -> None:
        """Test header, booleans, blanks and float text."""
        stream = io.StringIO()
        write_csv([{"a": 1, "b": 0.1, "c": True}, {"a": 2, "b": None, "c": np.bool_(False)}], stream)
        assert stream.getvalue() == "a,b,c\n1,0.1,true\n2,,false\n"

    def test_write_csv_explicit_columns(self) -> None:
        """Test that explicit columns select and order the output."""
        stream = io.StringIO()
        write_csv([{"a": 1, "b": 2}], stream, columns=["b"])
        assert stream.getvalue() == "b\n2\n"

    def test_to_json(self) -> None:
        """Test numpy scalars, complex values and non-finite floats."""
        text = to_json({"z": 1 + 2j, "n": np.int64(3), "x": float("inf"), "a": [np.float64(0.5)]})
        assert json.loads(text) == {"a": [0.5], "n": 3, "x": None, "z": [1.0, 2.0]}
        assert text.index('"a"') < text.index('"z"')


class TestThreads:
    """Test the worker pool helpers."""

    def test_explicit_count(self) -> None:
        """Test that an explicit cap wins."""
        assert worker_count(3) == 3

    def test_environment_fallback(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test $SU11_THREADS when no cap is given."""
        monkeypatch.setenv("SU11_THREADS", "2")
        assert worker_count() == 2
        monkeypatch.setenv("SU11_THREADS", "many")
        assert worker_count() >= 1

    def test_parallel_map_keeps_order(self) -> None:
        """Test that results come back in input order."""
        assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
        assert parallel_map(lambda x: x + 1, [], threads=4) == []
