"""Shared helpers for the JSON and CSV file interfaces."""

from __future__ import annotations

import numpy as np


class SchemaError(ValueError):
    """An input document is missing a field or carries a malformed value."""


def fmt_float(x) -> str:
    # repr of a Python float is the shortest round-trip form, which keeps
    # emitted files byte-stable across runs.
    return repr(float(x))


def mat_to_obj(a: np.ndarray) -> dict:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]),
            "data": [float(v) for v in a.ravel(order="C")]}


def mat_from_obj(obj, name: str) -> np.ndarray:
    if not isinstance(obj, dict):
        raise SchemaError(f"matrix '{name}' must be an object with rows/cols/data")
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise SchemaError(f"matrix '{name}' is missing field '{key}'")
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != rows * cols:
        raise SchemaError(
            f"matrix '{name}': expected {rows * cols} entries, got {data.size}")
    return data.reshape(rows, cols)


def require(obj: dict, field: str, where: str):
    if field not in obj:
        raise SchemaError(f"{where} is missing field '{field}'")
    return obj[field]
