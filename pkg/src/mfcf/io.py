"""CSV matrix I/O shared by the CLI subcommands.

Dialect: comma separated, ``.`` decimal point.  An optional header row is
auto-detected (first line with any non-numeric token); header labels
become vertex names.  Floats are written with ``repr`` so files
round-trip bit-exactly.
"""

from __future__ import annotations

import csv

import numpy as np


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def read_matrix_csv(path) -> tuple[np.ndarray, list[str] | None]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    labels = None
    if not all(_is_number(tok) for tok in rows[0]):
        labels = [tok.strip() for tok in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no data rows")
    try:
        data = np.array([[float(tok) for tok in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric data: {exc}") from None
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows (widths {sorted(widths)})")
    if labels is not None and len(labels) != data.shape[1]:
        raise ValueError(
            f"{path}: header has {len(labels)} fields, rows have "
            f"{data.shape[1]}")
    return data, labels


def write_matrix_csv(path, M, labels=None) -> None:
    M = np.asarray(M, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if labels is not None:
            w.writerow(labels)
        for row in M:
            w.writerow([repr(float(x)) for x in row])


def write_triplets_csv(path, M, zero_tol: float = 0.0) -> None:
    """Sparse ``i,j,value`` form: upper triangle including the diagonal."""
    M = np.asarray(M, dtype=float)
    p = M.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for i in range(p):
            for j in range(i, p):
                if abs(M[i, j]) > zero_tol or i == j:
                    w.writerow([i, j, repr(float(M[i, j]))])


def read_triplets_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    if rows[0][:3] == ["i", "j", "value"]:
        rows = rows[1:]
    entries = [(int(r[0]), int(r[1]), float(r[2])) for r in rows if r]
    p = max(max(i, j) for i, j, _ in entries) + 1
    M = np.zeros((p, p))
    for i, j, v in entries:
        M[i, j] = v
        M[j, i] = v
    return M
