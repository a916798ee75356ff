"""Plain-text field and matrix files.

Field CSVs have the header ``t,alpha,x,value`` and rows ordered by time,
then cluster, then space; numbers use 17 significant digits so a reload
reproduces the stored doubles. Matrix files start with a ``rows cols``
line followed by whitespace separated rows.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

HEADER = "t,alpha,x,value"


def write_field_csv(path: str | Path, values: np.ndarray, times: np.ndarray, alphas: np.ndarray,
                    x: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    K, M, n = values.shape
    if (len(times), len(alphas), len(x)) != (K, M, n):
        raise InvalidInputError(f"axes {(len(times), len(alphas), len(x))} do not match field shape {values.shape}")
    T, A, X = np.meshgrid(times, alphas, x, indexing="ij")
    table = np.column_stack([T.ravel(), A.ravel(), X.ravel(), values.ravel()])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=HEADER, comments="")


def read_field_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_field_csv`: ``(times, alphas, x, values[K, M, n])``."""
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip()
            if header != HEADER:
                raise InvalidInputError(f"{path}: expected header {HEADER!r}, got {header!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    times = np.unique(data[:, 0])
    alphas = np.unique(data[:, 1])
    x = np.unique(data[:, 2])
    shape = (len(times), len(alphas), len(x))
    if data.shape[0] != np.prod(shape):
        raise InvalidInputError(f"{path}: rows do not form a full (t, alpha, x) grid")
    values = data[:, 3].reshape(shape)
    T, A, X = np.meshgrid(times, alphas, x, indexing="ij")
    if not (np.array_equal(data[:, 0], T.ravel()) and np.array_equal(data[:, 1], A.ravel())
            and np.array_equal(data[:, 2], X.ravel())):
        raise InvalidInputError(f"{path}: rows are not in (t, alpha, x) order")
    return times, alphas, x, values


def write_matrix(path: str | Path, a: np.ndarray) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, fmt="%.17g", header=f"{a.shape[0]} {a.shape[1]}", comments="")


def read_matrix(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    if not lines:
        raise InvalidInputError(f"{path}: empty matrix file")
    try:
        rows, cols = (int(v) for v in lines[0].split())
        data = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    except ValueError:
        raise InvalidInputError(f"{path}: malformed matrix file (first line must be 'rows cols')") from None
    if data.shape != (rows, cols):
        raise InvalidInputError(f"{path}: header says {rows}x{cols}, found {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{path}: non-finite entries")
    return data


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")
