"""Clustering accuracy and endmember (MRSA) scores under optimal matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import as_dense, check_labels

MAX_CLUSTERS = 64


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # r_true x r_pred

    @property
    def r_true(self) -> int:
        return self.counts.shape[0]

    @property
    def r_pred(self) -> int:
        return self.counts.shape[1]

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def contingency_table(truth, pred) -> ContingencyTable:
    truth = check_labels(truth)
    pred = check_labels(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"label vectors differ in length: {truth.size} vs {pred.size}")
    r_true = int(truth.max()) + 1 if truth.size else 0
    r_pred = int(pred.max()) + 1 if pred.size else 0
    if max(r_true, r_pred) > MAX_CLUSTERS:
        raise ValueError(f"at most {MAX_CLUSTERS} clusters supported")
    counts = np.zeros((r_true, r_pred), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ContingencyTable(counts)


def clustering_accuracy(truth, pred) -> float:
    """Fraction of items correctly clustered under the best cluster matching.

    The matching maximizes the total overlap ``sum_i |C_i & C~_pi(i)|`` and is
    solved exactly as a bipartite assignment on the contingency table.
    """
    table = contingency_table(truth, pred)
    if table.n == 0:
        raise ValueError("empty label vectors")
    rows, cols = linear_sum_assignment(table.counts, maximize=True)
    return float(table.counts[rows, cols].sum()) / table.n


def mrsa(x, y) -> float:
    """Mean-removed spectral angle between two vectors, scaled to [0, 100]."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError("vectors differ in length")
    if x.size < 2:
        raise ValueError("need at least 2 entries")
    xc = x - x.mean()
    yc = y - y.mean()
    nx, ny = np.linalg.norm(xc), np.linalg.norm(yc)
    if nx == 0 or ny == 0:
        raise ValueError("MRSA is undefined for constant vectors")
    u, v = xc / nx, yc / ny
    # same angle as arccos(u.v) but accurate near 0 and pi
    angle = 2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v))
    return float(np.clip(100.0 / np.pi * angle, 0.0, 100.0))


def mrsa_matrix(w_true, w_est) -> np.ndarray:
    """``C[k, l] = MRSA(w_true[:, k], w_est[:, l])``."""
    w_true = as_dense(w_true, "w_true")
    w_est = as_dense(w_est, "w_est")
    r1, r2 = w_true.shape[1], w_est.shape[1]
    return np.array([[mrsa(w_true[:, k], w_est[:, l]) for l in range(r2)] for k in range(r1)])


def matched_mrsa(w_est, w_true):
    """Mean MRSA between true and estimated columns under the best matching.

    Returns ``(score, perm)`` with ``perm[k]`` the estimated column matched to
    true column ``k``.
    """
    w_est = as_dense(w_est, "w_est")
    w_true = as_dense(w_true, "w_true")
    if w_est.shape != w_true.shape:
        raise ValueError(f"shape mismatch: {w_est.shape} vs {w_true.shape}")
    cost = mrsa_matrix(w_true, w_est)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(w_true.shape[1], dtype=np.int64)
    perm[rows] = cols
    return float(cost[rows, cols].mean()), perm
