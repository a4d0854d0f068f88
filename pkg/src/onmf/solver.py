"""Alternating optimization for orthogonal NMF (Frobenius and KL).

Each outer iteration assigns every data column to one centroid with a
closed-form scale (the H step), rescales the rows of H to unit norm, and
recomputes the centroids in closed form (the W step). H is kept in the
compact :class:`~onmf.types.OrthogonalH` form, so both W updates and both
objectives cost O(nnz(X)) and the assignment step costs O(nnz(X) r).
"""

from __future__ import annotations

import logging
import time

import numpy as np

from .types import (
    UNASSIGNED,
    Divergence,
    OrthogonalH,
    SolverConfig,
    SolverReport,
    SparseMatrix,
    as_dense,
    as_sparse,
    h_change_norm,
)

log = logging.getLogger(__name__)

# per-column errors below this multiple of eps times the column's scale are
# cancellation noise in the expanded formulas and are reported as 0
_ROUNDING_FLOOR = 64 * np.finfo(np.float64).eps


def _check_dims(x: SparseMatrix, w: np.ndarray, h: OrthogonalH | None = None):
    if w.shape[0] != x.shape[0]:
        raise ValueError(f"W has {w.shape[0]} rows but X has {x.shape[0]}")
    if h is not None:
        if h.n != x.shape[1]:
            raise ValueError(f"H has {h.n} columns but X has {x.shape[1]}")
        if h.r != w.shape[1]:
            raise ValueError(f"H has rank {h.r} but W has {w.shape[1]} columns")


def _check_nonneg(x: SparseMatrix, what="X"):
    if x.nnz and x.min_value() < 0:
        raise ValueError(f"KL divergence is undefined for negative entries in {what}")


def _entry_values(x: SparseMatrix, w: np.ndarray, h: OrthogonalH):
    """(WH)_{ij} at every stored entry of X, plus the owning column index."""
    cols = x.col_of_entry
    k = h.assignment[cols]
    assigned = k != UNASSIGNED
    approx = np.zeros(x.nnz)
    approx[assigned] = h.value[cols[assigned]] * w[x.indices[assigned], k[assigned]]
    return approx, cols


def frobenius_column_errors(x, w, h: OrthogonalH) -> np.ndarray:
    """Per-column ``||X(:,j) - W H(:,j)||^2``."""
    x = as_sparse(x)
    w = as_dense(w, "W")
    _check_dims(x, w, h)
    k = h.assignment
    assigned = k != UNASSIGNED
    v = np.where(assigned, h.value, 0.0)
    approx, cols = _entry_values(x, w, h)
    cross = np.bincount(cols, weights=x.data * approx, minlength=x.shape[1])
    w_sq = (w**2).sum(axis=0)
    fit = np.zeros(x.shape[1])
    fit[assigned] = v[assigned] ** 2 * w_sq[k[assigned]]
    x_sq = x.col_sq_norms()
    err = x_sq - 2.0 * cross + fit
    return np.where(err > _ROUNDING_FLOOR * (x_sq + fit), err, 0.0)


def frobenius_error(x, w, h: OrthogonalH) -> float:
    """Squared Frobenius norm ``||X - WH||_F^2`` without forming WH."""
    return float(frobenius_column_errors(x, w, h).sum())


def kl_column_divergences(x, w, h: OrthogonalH) -> np.ndarray:
    """Per-column ``D_KL(X(:,j), W H(:,j))``; ``inf`` where WH vanishes on X's support."""
    x = as_sparse(x)
    w = as_dense(w, "W")
    _check_dims(x, w, h)
    _check_nonneg(x)
    if np.any(w < 0):
        raise ValueError("KL divergence requires W >= 0")
    k = h.assignment
    assigned = k != UNASSIGNED
    w_sums = w.sum(axis=0)
    mass = np.zeros(x.shape[1])
    mass[assigned] = h.value[assigned] * w_sums[k[assigned]]
    approx, cols = _entry_values(x, w, h)
    pos = x.data > 0
    log_term = np.zeros(x.nnz)
    with np.errstate(divide="ignore"):
        log_term[pos] = x.data[pos] * (np.log(x.data[pos]) - np.log(approx[pos]))
    x_sums = x.col_sums()
    out = mass - x_sums + np.bincount(cols, weights=log_term, minlength=x.shape[1])
    return np.where(out > _ROUNDING_FLOOR * (x_sums + mass), out, 0.0)


def kl_divergence(x, w, h: OrthogonalH) -> float:
    """Generalized KL divergence ``D_KL(X, WH)`` (``0 log 0 = 0``, ``D(0, y) = y``)."""
    return float(kl_column_divergences(x, w, h).sum())


def objective(x, w, h: OrthogonalH, divergence) -> float:
    if Divergence.parse(divergence) is Divergence.KL:
        return kl_divergence(x, w, h)
    return frobenius_error(x, w, h)


def _check_w_columns(w: np.ndarray):
    zero = np.flatnonzero(~np.any(w != 0, axis=0))
    if zero.size:
        raise ValueError(f"W has all-zero column(s) {zero.tolist()}; repair empty clusters first")


def fro_update_h(x, w, *, scale: bool = True) -> OrthogonalH:
    """Assign each column to the centroid with the largest projection.

    The chosen row is ``argmax_k W(:,k)^T X(:,j) / ||W(:,k)||`` (ties go to
    the smallest k) with value ``max(0, X(:,j)^T W(:,k) / ||W(:,k)||^2)``.
    With ``scale`` the rows are then normalized to unit l2 norm and the
    divided-out norms kept in ``row_scale``.
    """
    x = as_sparse(x)
    w = as_dense(w, "W")
    _check_dims(x, w)
    _check_w_columns(w)
    norms = np.linalg.norm(w, axis=0)
    scores = np.asarray(x.to_scipy().T @ (w / norms))  # n x r, = A^T
    best = np.argmax(scores, axis=1)
    top = scores[np.arange(x.shape[1]), best]
    value = np.maximum(top, 0.0) / norms[best]
    h = OrthogonalH(w.shape[1], best, value)
    return h.scale_rows() if scale else h


def kl_update_h(x, w, epsilon: float = 1e-3, *, scale: bool = True) -> OrthogonalH:
    """Assign each column by the epsilon-shifted log-likelihood score.

    Scores are ``log(W_n + epsilon)^T X`` with ``W_n`` the l1-normalized
    columns of W; the winner (smallest k on ties) gets the optimal scale
    ``e^T X(:,j) / e^T W(:,k)``. All-zero data columns go to the centroid
    with the smallest mass and get value 0.
    """
    x = as_sparse(x)
    w = as_dense(w, "W")
    _check_dims(x, w)
    _check_nonneg(x)
    if np.any(w < 0):
        raise ValueError("KL update requires W >= 0")
    _check_w_columns(w)
    w_sums = w.sum(axis=0)
    log_wn = np.log(w / w_sums + epsilon)
    scores = np.asarray(x.to_scipy().T @ log_wn)
    best = np.argmax(scores, axis=1)
    x_sums = x.col_sums()
    best[x_sums == 0] = int(np.argmin(w_sums))
    value = x_sums / w_sums[best]
    h = OrthogonalH(w.shape[1], best, value)
    return h.scale_rows() if scale else h


def _cluster_sums(x: SparseMatrix, h: OrthogonalH, weights: np.ndarray) -> np.ndarray:
    """``sum_j weights_j X(:,j)`` grouped by cluster, as an m x r array."""
    m, r = x.shape[0], h.r
    cols = x.col_of_entry
    k = h.assignment[cols]
    keep = k != UNASSIGNED
    flat = x.indices[keep] + m * k[keep]
    w = np.bincount(flat, weights=x.data[keep] * weights[cols[keep]], minlength=m * r)
    return w.reshape((r, m)).T.copy(order="F")


def _repair(x: SparseMatrix, w: np.ndarray, h: OrthogonalH, col_errors) -> int:
    """Reseed empty clusters in place with the worst-fit data columns."""
    empty = h.empty_rows()
    if empty.size == 0:
        return 0
    nonzero = np.flatnonzero(x.col_sq_norms() > 0)
    if nonzero.size == 0:
        raise ValueError("cannot repair empty clusters: X has no nonzero column")
    errs = col_errors(x, w, h)[nonzero]
    # stable sort on -err; inf sorts first
    order = nonzero[np.argsort(-errs, kind="stable")]
    dense_cols = x.to_scipy()[:, order[: empty.size]].toarray()
    for slot, k in enumerate(empty):
        w[:, k] = dense_cols[:, slot % dense_cols.shape[1]]
    return int(empty.size)


def fro_update_w(x, h: OrthogonalH, *, repair: bool = True) -> np.ndarray:
    """Centroids ``W(:,k) = sum_{j in K_k} X(:,j) H_{k,j}`` in O(nnz(X))."""
    x = as_sparse(x)
    if h.n != x.shape[1]:
        raise ValueError(f"H has {h.n} columns but X has {x.shape[1]}")
    w = _cluster_sums(x, h, np.where(h.assignment == UNASSIGNED, 0.0, h.value))
    if repair:
        _repair(x, w, h, frobenius_column_errors)
    return w


def kl_update_w(x, h: OrthogonalH, *, repair: bool = True) -> np.ndarray:
    """Centroids ``W(:,k) = X(:,K_k) e / H(k,:) e`` in O(nnz(X) + n)."""
    x = as_sparse(x)
    _check_nonneg(x)
    if h.n != x.shape[1]:
        raise ValueError(f"H has {h.n} columns but X has {x.shape[1]}")
    member = ((h.assignment != UNASSIGNED) & (h.value > 0)).astype(np.float64)
    w = _cluster_sums(x, h, member)
    denom = h.row_sums()
    nonempty = denom > 0
    w[:, nonempty] /= denom[nonempty]
    w[:, ~nonempty] = 0.0
    if repair:
        _repair(x, w, h, kl_column_divergences)
    return w


def run_onmf(x, w0, config: SolverConfig, callback=None):
    """Alternate H and W updates until H stops moving.

    Stops when ``||H - H_prev||_F < config.delta`` or after ``config.maxiter``
    iterations. Returns ``(W, H, report)`` where H has unit-norm rows.
    ``callback(iteration, W, H)`` is called after every iteration, before
    empty clusters are reseeded.
    """
    x = as_sparse(x)
    w = as_dense(w0, "W0").copy(order="F")
    div = config.divergence
    m, n = x.shape
    r = w.shape[1]
    if w.shape[0] != m:
        raise ValueError(f"W0 has {w.shape[0]} rows but X has {m}")
    if r != config.rank:
        raise ValueError(f"W0 has {r} columns but rank is {config.rank}")
    if r > n:
        raise ValueError(f"rank {r} exceeds the number of columns {n}")
    _check_w_columns(w)
    if div is Divergence.KL:
        _check_nonneg(x)
        if np.any(w < 0):
            raise ValueError("KL-ONMF requires a nonnegative initial W")
        update_h = lambda w_: kl_update_h(x, w_, config.epsilon)  # noqa: E731
        update_w = kl_update_w
        col_err = kl_column_divergences
    else:
        update_h = lambda w_: fro_update_h(x, w_)  # noqa: E731
        update_w = fro_update_w
        col_err = frobenius_column_errors

    report = SolverReport()
    h_prev = None
    h = None
    t_start = time.perf_counter()
    for it in range(1, config.maxiter + 1):
        t0 = time.perf_counter()
        h = update_h(w)
        w = update_w(x, h, repair=False)
        f = float(col_err(x, w, h).sum())
        if callback is not None:
            callback(it, w, h)
        report.repaired_clusters += _repair(x, w, h, col_err)
        report.iter_times.append(time.perf_counter() - t0)
        change = np.inf if h_prev is None else h_change_norm(h, h_prev)
        report.objective.append(f)
        report.h_change.append(float(change))
        report.iterations = it
        log.debug("iter %d objective %.6g h_change %.3g", it, f, change)
        if change < config.delta:
            report.converged = True
            break
        h_prev = h
    report.wall_time = time.perf_counter() - t_start
    if div is Divergence.FROBENIUS:
        report.degenerate_columns = int(np.count_nonzero((h.value == 0) & (x.col_sq_norms() > 0)))
    return w, h, report
