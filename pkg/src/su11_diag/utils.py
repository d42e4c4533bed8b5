"""Shared utility functions for su11-diag."""

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import IO, Any, Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "SU11_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def format_float(value: Any) -> str:
    """Shortest round-trip text for a float.

    ``repr`` of a Python float is the shortest string that parses back to the
    same IEEE-754 double, so output is byte-stable across platforms.
    """
    return repr(float(value))


def worker_count(threads: Optional[int] = None) -> int:
    """Number of worker threads to use.

    Args:
        threads: Explicit cap. None or 0 falls back to $SU11_THREADS, and 0 or
            unset there means one thread per CPU.

    """
    if not threads:
        raw = os.environ.get(THREADS_ENV, "").strip()
        try:
            threads = int(raw) if raw else 0
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, raw)
            threads = 0
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None
) -> List[R]:
    """Map ``func`` over ``items`` on a thread pool, keeping input order.

    numpy and scipy release the GIL inside their kernels, so threads are enough
    for the dense linear algebra done here.
    """
    items = list(items)
    workers = min(worker_count(threads), max(len(items), 1))
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def complex_columns(name: str, value: complex) -> Dict[str, float]:
    """Split a complex value into ``<name>_re`` and ``<name>_im`` columns."""
    value = complex(value)
    return {f"{name}_re": value.real, f"{name}_im": value.imag}


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return ""
    return str(value)


def write_csv(
    rows: Sequence[Dict[str, Any]], stream: IO[str], columns: Optional[List[str]] = None
) -> None:
    """Write rows with a header, comma-delimited, floats in round-trip form."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column)) for column in columns])


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [float(np.real(value)), float(np.imag(value))]
    return value


def to_json(document: Dict[str, Any]) -> str:
    """Deterministic JSON text (sorted keys, non-finite floats as null)."""
    return json.dumps(_jsonable(document), indent=2, sort_keys=True)
