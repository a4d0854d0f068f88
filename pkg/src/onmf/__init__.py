"""Orthogonal nonnegative matrix factorization for clustering.

Two alternating-optimization solvers share one interface: the Frobenius-norm
variant (weighted spherical k-means) and the Kullback-Leibler variant suited
to count data such as bag-of-words matrices.
"""

from .init import InitSelection, init_w
from .metrics import clustering_accuracy, matched_mrsa, mrsa
from .solver import (
    fro_update_h,
    fro_update_w,
    frobenius_error,
    kl_divergence,
    kl_update_h,
    kl_update_w,
    run_onmf,
)
from .types import (
    UNASSIGNED,
    Divergence,
    OrthogonalH,
    SolverConfig,
    SolverReport,
    SparseMatrix,
    h_change_norm,
    orthogonal_h_to_dense,
)

__all__ = [
    "UNASSIGNED", "Divergence", "InitSelection", "OrthogonalH", "SolverConfig", "SolverReport",
    "SparseMatrix", "clustering_accuracy", "fro_update_h", "fro_update_w", "frobenius_error",
    "h_change_norm", "init_w", "kl_divergence", "kl_update_h", "kl_update_w", "matched_mrsa",
    "mrsa", "orthogonal_h_to_dense", "run_onmf",
]
__version__ = "0.1.0"
