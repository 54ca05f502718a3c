"""CSV and JSON file helpers for samples, model specs, and test results."""

import json

import numpy as np

from .exceptions import InputError
from .models import model_from_spec


def read_samples_csv(path) -> np.ndarray:
    """Headerless CSV of reals, one observation per row."""
    rows = []
    width = None
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"cannot read samples: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                values = [float(v) for v in fields]
            except ValueError:
                raise InputError(f"{path}: malformed CSV row at line {lineno}")
            if any(not np.isfinite(v) for v in values):
                raise InputError(f"{path}: non-finite entry at line {lineno}")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputError(f"{path}: inconsistent column count at line {lineno}")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: empty sample file")
    return np.asarray(rows, dtype=float)


def write_samples_csv(path, matrix) -> None:
    """Write samples with shortest round-trip decimal encoding (bit-exact)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.all(np.isfinite(matrix)):
        raise InputError("refusing to write non-finite sample values")
    with open(path, "w") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_result_json(path, result) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model_spec(path):
    """Read a {"model": ..., "params": ...} JSON file into (params, ScoreModel)."""
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_spec(spec)
