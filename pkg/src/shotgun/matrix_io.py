"""Loading and column normalization of design matrices.

Three on-disk formats are supported:

* ``svmlight``: ``<label> <index>:<value> ...`` per line, 1-based indices.
* ``mm``: a MatrixMarket coordinate file plus a sidecar with one label per
  line (``<path>.labels`` unless given explicitly).
* ``csv``: dense comma-separated rows, label in the first column.

Matrices are stored column-major (CSC) since every solver in the package
touches one column at a time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

FORMATS = ("svmlight", "mm", "csv")


class DatasetError(ValueError):
    """Base class for input data problems."""


class ParseError(DatasetError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BoundsError(DatasetError):
    pass


class DomainError(DatasetError):
    pass


@dataclass(frozen=True)
class DesignMatrix:
    """An n x d matrix held as CSC with sorted, duplicate-free, nonzero entries."""

    csc: sp.csc_matrix

    def __post_init__(self):
        m = self.csc
        if not sp.isspmatrix_csc(m):
            raise TypeError("DesignMatrix expects a scipy.sparse csc_matrix")
        m.indptr = m.indptr.astype(np.int64, copy=False)
        m.indices = m.indices.astype(np.int64, copy=False)
        m.data = m.data.astype(np.float64, copy=False)
        m.sort_indices()

    @classmethod
    def from_dense(cls, a) -> "DesignMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls(sp.csc_matrix(a))

    @classmethod
    def from_sparse(cls, m) -> "DesignMatrix":
        m = sp.csc_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        return cls(m)

    @property
    def n(self) -> int:
        return self.csc.shape[0]

    @property
    def d(self) -> int:
        return self.csc.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.csc.shape

    @property
    def nnz(self) -> int:
        return self.csc.nnz

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.csc.indptr[j], self.csc.indptr[j + 1]
        return self.csc.indices[lo:hi], self.csc.data[lo:hi]

    def column_norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.csc.multiply(self.csc).sum(axis=0)).ravel())

    def matvec(self, x) -> np.ndarray:
        return self.csc @ np.asarray(x, dtype=np.float64)

    def rmatvec(self, r) -> np.ndarray:
        return self.csc.T @ np.asarray(r, dtype=np.float64)

    def toarray(self) -> np.ndarray:
        return self.csc.toarray()

    def check(self) -> None:
        """Raise if the structural invariants do not hold."""
        m = self.csc
        if m.nnz and (m.indices.min() < 0 or m.indices.max() >= self.n):
            raise BoundsError("row index out of range")
        for j in range(self.d):
            rows, vals = self.column(j)
            if np.any(np.diff(rows) <= 0):
                raise DatasetError(f"column {j}: row indices not strictly increasing")
            if np.any(vals == 0):
                raise DatasetError(f"column {j}: explicit zero stored")


@dataclass(frozen=True)
class ColumnScales:
    """Per-column L2 norms removed by :func:`normalize_columns`.

    ``retained[j]`` is the original index of normalized column ``j``.
    """

    scales: np.ndarray
    retained: np.ndarray
    dropped: list[int] = field(default_factory=list)
    d_original: int = 0

    def to_original(self, w) -> np.ndarray:
        """Map normalized-space weights to the original column space."""
        w = np.asarray(w, dtype=np.float64)
        out = np.zeros(self.d_original)
        out[self.retained] = w / self.scales
        return out

    def from_original(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        return w[self.retained] * self.scales

    def original_penalties(self, lam: float) -> np.ndarray:
        """Per-coordinate lambda giving the same objective in original space."""
        out = np.zeros(self.d_original)
        out[self.retained] = lam * self.scales
        return out


def normalize_columns(m: DesignMatrix) -> tuple[DesignMatrix, ColumnScales]:
    """Scale every column to unit L2 norm, dropping all-zero columns."""
    norms = m.column_norms()
    keep = np.flatnonzero(norms > 0)
    dropped = [int(j) for j in np.flatnonzero(norms == 0)]
    sub = m.csc[:, keep] if len(dropped) else m.csc.copy()
    scales = norms[keep]
    sub = sp.csc_matrix(sub @ sp.diags(1.0 / scales)) if len(keep) else sp.csc_matrix(sub)
    sub.sort_indices()
    return DesignMatrix(sub), ColumnScales(scales, keep, dropped, m.d)


def validate_labels(y, loss: str | None) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DomainError("labels must be finite")
    if loss == "logistic":
        bad = np.flatnonzero((y != 1.0) & (y != -1.0))
        if len(bad):
            raise DomainError(
                f"logistic loss needs labels in {{-1, +1}}; sample {bad[0]} has {y[bad[0]]:g}"
            )
    return y


def _build(n: int, d: int, rows, cols, vals) -> DesignMatrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if len(rows) and (rows.min() < 0 or rows.max() >= n):
        raise BoundsError("row index out of range")
    if len(cols) and (cols.min() < 0 or cols.max() >= d):
        raise BoundsError(f"column index out of range for d={d}")
    if len(rows):
        key = cols * n + rows
        uniq, counts = np.unique(key, return_counts=True)
        if np.any(counts > 1):
            dup = uniq[counts > 1][0]
            raise DatasetError(f"duplicate entry at row {dup % n}, column {dup // n}")
    nz = vals != 0
    m = sp.csc_matrix((vals[nz], (rows[nz], cols[nz])), shape=(n, d))
    return DesignMatrix(m)


def _read_svmlight(path: Path, n_features: int | None):
    labels, rows, cols, vals = [], [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0].replace("−", "-"))
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
            i = len(labels)
            labels.append(label)
            for tok in tokens[1:]:
                if tok.startswith("qid:"):
                    continue
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise ParseError(f"expected index:value, got {tok!r}", lineno)
                try:
                    j = int(idx)
                    v = float(val.replace("−", "-"))
                except ValueError:
                    raise ParseError(f"bad feature {tok!r}", lineno) from None
                if j < 1:
                    raise BoundsError(f"line {lineno}: feature index {j} < 1")
                if n_features is not None and j > n_features:
                    raise BoundsError(f"line {lineno}: feature index {j} > d={n_features}")
                rows.append(i)
                cols.append(j - 1)
                vals.append(v)
    if not labels:
        raise DatasetError("no samples")
    d = n_features if n_features is not None else (max(cols) + 1 if cols else 0)
    return _build(len(labels), d, rows, cols, vals), np.array(labels)


def _read_mm(path: Path, labels_path: Path | None):
    try:
        coo = scipy.io.mmread(str(path))
    except Exception as exc:  # scipy raises assorted types here
        raise ParseError(f"cannot parse MatrixMarket file: {exc}") from None
    if not sp.issparse(coo):
        coo = sp.coo_matrix(coo)
    coo = sp.coo_matrix(coo)
    n, d = coo.shape
    if n == 0:
        raise DatasetError("no samples")
    m = _build(n, d, coo.row, coo.col, coo.data)
    labels_path = labels_path or Path(str(path) + ".labels")
    labels = []
    with open(labels_path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                labels.append(float(line))
            except ValueError:
                raise ParseError(f"bad label {line!r} in {labels_path}", lineno) from None
    if len(labels) != n:
        raise DatasetError(f"{labels_path} has {len(labels)} labels for {n} samples")
    return m, np.array(labels)


def _read_csv(path: Path):
    labels, rows = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise ParseError("non-numeric field", lineno) from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"expected {width} fields, got {len(vals)}", lineno)
            labels.append(vals[0])
            rows.append(vals[1:])
    if not labels:
        raise DatasetError("no samples")
    return DesignMatrix.from_dense(np.array(rows).reshape(len(labels), width - 1)), np.array(labels)


def load_dataset(
    path,
    format: str = "svmlight",
    *,
    loss: str | None = None,
    n_features: int | None = None,
    labels_path=None,
) -> tuple[DesignMatrix, np.ndarray]:
    """Read an un-normalized design matrix and its labels.

    ``loss="logistic"`` additionally checks that labels are exactly +-1.
    """
    path = Path(path)
    if format == "svmlight":
        m, y = _read_svmlight(path, n_features)
    elif format == "mm":
        m, y = _read_mm(path, Path(labels_path) if labels_path else None)
    elif format == "csv":
        m, y = _read_csv(path)
    else:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    return m, validate_labels(y, loss)


def load_normalized(path, format: str = "svmlight", **kwargs):
    """``load_dataset`` followed by ``normalize_columns``."""
    m, y = load_dataset(path, format, **kwargs)
    a, scales = normalize_columns(m)
    return a, y, scales
