"""Containers shared by the solvers, metrics and I/O layers.

Dense factors (W, ground-truth endmembers) are plain 2-D ``numpy`` float64
arrays; :func:`as_dense` validates them. The data matrix lives in a
compressed sparse-column :class:`SparseMatrix`, and the orthogonal factor H
is stored compactly as one ``(cluster, value)`` pair per column in
:class:`OrthogonalH`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

#: Assignment sentinel for a column of H that has no nonzero entry.
UNASSIGNED = -1


class Divergence(str, enum.Enum):
    FROBENIUS = "fro"
    KL = "kl"

    @classmethod
    def parse(cls, value: "str | Divergence") -> "Divergence":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"fro": cls.FROBENIUS, "frobenius": cls.FROBENIUS, "kl": cls.KL}
        if key not in aliases:
            raise ValueError(f"unknown divergence {value!r}; expected 'fro' or 'kl'")
        return aliases[key]


def as_dense(values, name: str = "matrix") -> np.ndarray:
    """Return ``values`` as a finite 2-D float64 array (column-major copy)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return np.asfortranarray(arr)


class SparseMatrix:
    """Compressed sparse-column matrix with validated structure.

    Parameters
    ----------
    shape : (rows, cols)
    indptr : column pointers, length ``cols + 1``
    indices : row index of every stored entry
    data : stored values

    Row indices must be strictly increasing within each column. Use
    :meth:`from_triples` to build from unsorted or duplicated coordinates.
    """

    __slots__ = ("shape", "indptr", "indices", "data", "_csc")

    def __init__(self, shape, indptr, indices, data):
        rows, cols = (int(s) for s in shape)
        if rows < 0 or cols < 0:
            raise ValueError("negative dimension")
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=np.float64)
        if indptr.shape != (cols + 1,):
            raise ValueError(f"indptr must have length {cols + 1}, got {indptr.shape}")
        if indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise ValueError("column pointers must start at 0 and be nondecreasing")
        nnz = int(indptr[-1])
        if indices.shape != (nnz,) or data.shape != (nnz,):
            raise ValueError("indices/data length must equal the last column pointer")
        if nnz:
            if indices.min() < 0 or indices.max() >= rows:
                raise ValueError("row index out of range")
            # strictly increasing rows inside each column
            step = np.diff(indices)
            starts = indptr[1:-1]
            boundary = np.zeros(nnz - 1, dtype=bool)
            boundary[starts[(starts > 0) & (starts < nnz)] - 1] = True
            if np.any((step <= 0) & ~boundary):
                raise ValueError("row indices must be strictly increasing within a column")
            if not np.all(np.isfinite(data)):
                raise ValueError("stored values must be finite")
        self.shape = (rows, cols)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._csc = None

    # construction ---------------------------------------------------------

    @classmethod
    def from_triples(cls, shape, rows, cols, values) -> "SparseMatrix":
        """Build from coordinate triples; duplicates are summed."""
        m, n = (int(s) for s in shape)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise ValueError("coordinate out of range")
        mat = sp.coo_matrix((values, (rows, cols)), shape=(m, n)).tocsc()
        mat.sum_duplicates()
        mat.sort_indices()
        return cls((m, n), mat.indptr, mat.indices, mat.data)

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csc = sp.csc_matrix(mat, dtype=np.float64, copy=True)
        csc.sum_duplicates()
        csc.sort_indices()
        return cls(csc.shape, csc.indptr, csc.indices, csc.data)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        """Store the nonzero entries of a dense array."""
        return cls.from_scipy(sp.csc_matrix(as_dense(arr)))

    # access ---------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def col_of_entry(self) -> np.ndarray:
        """Column index of every stored entry (length ``nnz``)."""
        return np.repeat(np.arange(self.shape[1]), np.diff(self.indptr))

    def to_scipy(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = sp.csc_matrix(
                (self.data, self.indices, self.indptr), shape=self.shape, copy=False
            )
        return self._csc

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of column ``j``."""
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def triples(self):
        """Yield ``(row, col, value)`` in column-major order."""
        for j in range(self.shape[1]):
            rows, vals = self.column(j)
            for i, v in zip(rows.tolist(), vals.tolist()):
                yield i, j, v

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.col_of_entry, weights=self.data, minlength=self.shape[1])

    def col_sq_norms(self) -> np.ndarray:
        return np.bincount(self.col_of_entry, weights=self.data**2, minlength=self.shape[1])

    def min_value(self) -> float:
        return float(self.data.min()) if self.nnz else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def as_sparse(x) -> SparseMatrix:
    """Coerce a dense array, scipy sparse matrix or :class:`SparseMatrix`."""
    if isinstance(x, SparseMatrix):
        return x
    if sp.issparse(x):
        return SparseMatrix.from_scipy(x)
    return SparseMatrix.from_dense(x)


@dataclass
class OrthogonalH:
    """Nonnegative row-orthogonal r-by-n factor stored column by column.

    ``assignment[j]`` is the row holding the single nonzero of column ``j``
    (or :data:`UNASSIGNED`) and ``value[j]`` its value. ``row_scale`` holds
    the row norms divided out by :meth:`scale_rows`, when that has run.
    """

    r: int
    assignment: np.ndarray
    value: np.ndarray
    row_scale: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        self.r = int(self.r)
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.assignment.ndim != 1 or self.assignment.shape != self.value.shape:
            raise ValueError("assignment and value must be 1-D of equal length")
        if np.any((self.assignment < UNASSIGNED) | (self.assignment >= self.r)):
            raise ValueError("assignment out of range")
        if np.any(self.value < 0) or not np.all(np.isfinite(self.value)):
            raise ValueError("H values must be finite and nonnegative")

    @classmethod
    def unassigned(cls, r: int, n: int) -> "OrthogonalH":
        return cls(r, np.full(n, UNASSIGNED), np.zeros(n))

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    @property
    def labels(self) -> np.ndarray:
        return self.assignment.copy()

    def _active(self) -> np.ndarray:
        return (self.assignment != UNASSIGNED) & (self.value > 0)

    def row_sums(self) -> np.ndarray:
        a = self._active()
        return np.bincount(self.assignment[a], weights=self.value[a], minlength=self.r)

    def row_norms(self) -> np.ndarray:
        a = self._active()
        return np.sqrt(np.bincount(self.assignment[a], weights=self.value[a] ** 2, minlength=self.r))

    def cluster_sizes(self) -> np.ndarray:
        """Number of columns with a positive entry in each row."""
        a = self._active()
        return np.bincount(self.assignment[a], minlength=self.r)

    def empty_rows(self) -> np.ndarray:
        return np.flatnonzero(self.cluster_sizes() == 0)

    def scale_rows(self) -> "OrthogonalH":
        """Copy with every nonempty row rescaled to unit l2 norm."""
        norms = self.row_norms()
        safe = np.where(norms > 0, norms, 1.0)
        value = self.value.copy()
        a = self.assignment != UNASSIGNED
        value[a] /= safe[self.assignment[a]]
        return OrthogonalH(self.r, self.assignment.copy(), value, row_scale=norms)

    def to_dense(self) -> np.ndarray:
        return orthogonal_h_to_dense(self)


def orthogonal_h_to_dense(h: OrthogonalH) -> np.ndarray:
    out = np.zeros((h.r, h.n))
    cols = np.flatnonzero(h.assignment != UNASSIGNED)
    out[h.assignment[cols], cols] = h.value[cols]
    return out


def h_change_norm(h: OrthogonalH, h_prev: OrthogonalH) -> float:
    """Frobenius norm of ``h - h_prev`` from the compact forms, in O(n)."""
    if h.r != h_prev.r or h.n != h_prev.n:
        raise ValueError(f"shape mismatch: {(h.r, h.n)} vs {(h_prev.r, h_prev.n)}")
    v = np.where(h.assignment == UNASSIGNED, 0.0, h.value)
    vp = np.where(h_prev.assignment == UNASSIGNED, 0.0, h_prev.value)
    same = h.assignment == h_prev.assignment
    sq = np.where(same, (v - vp) ** 2, v**2 + vp**2)
    return float(np.sqrt(sq.sum()))


@dataclass
class SolverConfig:
    divergence: Divergence = Divergence.KL
    rank: int = 2
    maxiter: int = 100
    delta: float = 1e-6
    epsilon: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        self.divergence = Divergence.parse(self.divergence)
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class SolverReport:
    iterations: int = 0
    objective: list[float] = field(default_factory=list)
    h_change: list[float] = field(default_factory=list)
    iter_times: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    repaired_clusters: int = 0
    degenerate_columns: int = 0

    @property
    def final_objective(self) -> float:
        return self.objective[-1] if self.objective else float("nan")


def check_labels(labels, r: int | None = None) -> np.ndarray:
    """Validate a label vector (nonnegative ints, each below ``r`` if given)."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValueError("labels must be 1-D")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("labels must be integers")
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ValueError("labels must be nonnegative")
    if r is not None and arr.size and arr.max() >= r:
        raise ValueError(f"label {arr.max()} out of range for r={r}")
    return arr
