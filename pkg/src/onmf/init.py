"""Initial centroids picked from the data columns."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .types import SparseMatrix, as_sparse


class InitMethod(str, enum.Enum):
    GREEDY = "greedy"
    INDICES = "indices"
    RANDOM = "random"


@dataclass(frozen=True)
class InitSelection:
    indices: tuple[int, ...]
    method: InitMethod


def greedy_projection(x: SparseMatrix, r: int) -> np.ndarray:
    """Successive projection: pick the column with the largest residual norm,
    project every column onto the orthogonal complement of the picks so far,
    repeat ``r`` times.

    Residual norms are updated with one ``u^T X`` product per step, where ``u``
    is the new orthonormal direction, so the total cost is O(nnz(X) r + m r^2).
    """
    csc = x.to_scipy()
    sq_norms = x.col_sq_norms()
    resid = sq_norms.copy()
    basis = np.zeros((x.shape[0], 0))
    picked: list[int] = []
    for _ in range(r):
        scores = resid.copy()
        scores[sq_norms == 0] = -1.0  # behind any nonzero column, even a dependent one
        scores[picked] = -np.inf
        j = int(np.argmax(scores))
        picked.append(j)
        col = csc[:, j].toarray().ravel()
        # two Gram-Schmidt passes keep the basis orthonormal in floating point
        for _ in range(2):
            col = col - basis @ (basis.T @ col)
        nrm = np.linalg.norm(col)
        if nrm <= 1e-12 * np.sqrt(sq_norms[j]):
            continue
        u = col / nrm
        basis = np.column_stack([basis, u])
        proj = np.asarray(csc.T @ u).ravel()
        resid = np.maximum(resid - proj**2, 0.0)
    return np.array(picked, dtype=np.int64)


def init_w(x, r: int, method="greedy", seed: int = 0, indices=None):
    """Initial W as ``r`` columns of X.

    Returns ``(W, selection)``. ``method`` is ``"greedy"`` (successive
    projection), ``"random"`` (``r`` distinct nonzero columns drawn with
    ``seed``) or ``"indices"`` (the given ``indices``).
    """
    x = as_sparse(x)
    method = InitMethod(method)
    n = x.shape[1]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    nonzero = np.flatnonzero(x.col_sq_norms() > 0)
    if nonzero.size < r:
        raise ValueError(f"X has only {nonzero.size} nonzero columns, need {r}")

    if method is InitMethod.GREEDY:
        idx = greedy_projection(x, r)
    elif method is InitMethod.RANDOM:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(nonzero, size=r, replace=False))
    else:
        if indices is None:
            raise ValueError("method 'indices' requires explicit indices")
        idx = np.asarray(indices, dtype=np.int64)
        if idx.shape != (r,):
            raise ValueError(f"expected {r} indices, got {idx.size}")
        if np.any((idx < 0) | (idx >= n)):
            raise ValueError("index out of range")
        if np.unique(idx).size != r:
            raise ValueError("indices must be distinct")
    w = np.asfortranarray(x.to_scipy()[:, idx].toarray())
    return w, InitSelection(tuple(int(i) for i in idx), method)
