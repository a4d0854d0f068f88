"""Planted-cluster data generation and the multi-seed experiment driver."""

from __future__ import annotations

import enum
import json
import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io as onmf_io
from .init import init_w
from .metrics import clustering_accuracy, matched_mrsa
from .solver import run_onmf
from .types import Divergence, SolverConfig, SparseMatrix, as_sparse, check_labels

log = logging.getLogger(__name__)


class WLaw(str, enum.Enum):
    DIRICHLET = "dirichlet"
    DISJOINT = "disjoint"


class Noise(str, enum.Enum):
    NONE = "none"
    POISSON = "poisson"
    GAUSSIAN = "gaussian"


@dataclass
class SyntheticSpec:
    """Recipe for a planted-cluster matrix.

    Ground-truth centroids are scaled so each column sums to ``m`` (mean
    entry 1). Column ``j`` belongs to cluster ``j % r`` and equals a uniform
    scale in ``scale`` times its centroid, before noise. ``small_norm``
    shrinks the last centroid to plant a faint cluster; with Gaussian noise
    and no ``sigma`` the noise level is then the RMS of the faint cluster's
    noiseless entries, which puts that cluster at the noise floor.
    """

    m: int = 50
    n: int = 500
    r: int = 5
    law: WLaw = WLaw.DIRICHLET
    scale: tuple[float, float] = (5.0, 15.0)
    noise: Noise = Noise.NONE
    sigma: float | None = None
    small_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        self.law = WLaw(self.law)
        self.noise = Noise(self.noise)
        self.scale = (float(self.scale[0]), float(self.scale[1]))
        if self.m < 1 or self.r < 1:
            raise ValueError("m and r must be positive")
        if self.n < self.r:
            raise ValueError("need n >= r")
        if self.law is WLaw.DISJOINT and self.m < self.r:
            raise ValueError("disjoint supports need m >= r")
        if not 0 < self.scale[0] <= self.scale[1]:
            raise ValueError("scale range must be positive and ordered")
        if self.noise is Noise.GAUSSIAN:
            if self.sigma is None and self.small_norm is None:
                raise ValueError("gaussian noise needs sigma or a small_norm cluster")
            if self.sigma is not None and not self.sigma > 0:
                raise ValueError("sigma must be > 0")
        if self.small_norm is not None and not 0 < self.small_norm <= 1:
            raise ValueError("small_norm must lie in (0, 1]")


def true_centroids(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    m, r = spec.m, spec.r
    if spec.law is WLaw.DIRICHLET:
        w = rng.dirichlet(np.ones(m), size=r).T
    else:
        w = np.zeros((m, r))
        for k, rows in enumerate(np.array_split(np.arange(m), r)):
            w[rows, k] = rng.uniform(0.5, 1.5, size=rows.size)
        w /= w.sum(axis=0)
    return w * m


def generate(spec: SyntheticSpec):
    """Return ``(X, labels, W_true)`` for ``spec``; bitwise reproducible per seed."""
    rng = np.random.default_rng(spec.seed)
    w_true = true_centroids(spec, rng)
    if spec.small_norm is not None:
        w_true[:, -1] *= spec.small_norm
    labels = np.arange(spec.n) % spec.r
    v = rng.uniform(spec.scale[0], spec.scale[1], size=spec.n)
    x = w_true[:, labels] * v
    if spec.noise is Noise.POISSON:
        x = rng.poisson(x).astype(np.float64)
    elif spec.noise is Noise.GAUSSIAN:
        sigma = spec.sigma
        if sigma is None:
            sigma = float(np.sqrt(np.mean(x[:, labels == spec.r - 1] ** 2)))
        x = np.maximum(x + rng.normal(0.0, sigma, size=x.shape), 0.0)
    return SparseMatrix.from_dense(x), labels, w_true


# experiments -----------------------------------------------------------------


@dataclass
class Dataset:
    name: str
    x: SparseMatrix
    labels: np.ndarray | None = None
    w_true: np.ndarray | None = None
    rank: int | None = None
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        self.x = as_sparse(self.x)
        if self.labels is not None:
            self.labels = check_labels(self.labels)
            if self.labels.size != self.x.shape[1]:
                raise ValueError(f"{self.name}: {self.labels.size} labels for {self.x.shape[1]} columns")
        if self.rank is None:
            if self.w_true is not None:
                self.rank = int(np.shape(self.w_true)[1])
            elif self.labels is not None:
                self.rank = int(np.unique(self.labels).size)

    @property
    def n(self) -> int:
        return self.x.shape[1]


@dataclass
class ExperimentConfig:
    divergence: Divergence = Divergence.KL
    init: str = "greedy"
    rank: int | None = None
    maxiter: int = 100
    delta: float = 1e-6
    epsilon: float = 1e-3

    def __post_init__(self):
        self.divergence = Divergence.parse(self.divergence)

    @property
    def algorithm(self) -> str:
        return self.divergence.value

    def solver_config(self, rank: int, seed: int) -> SolverConfig:
        return SolverConfig(self.divergence, rank, self.maxiter, self.delta, self.epsilon, seed)


def parse_init(spec: str):
    """``greedy`` | ``random`` | ``indices:i1,i2,...`` -> (method, indices)."""
    spec = spec.strip()
    if spec.startswith("indices:"):
        try:
            idx = [int(t) for t in spec[len("indices:"):].split(",") if t.strip()]
        except ValueError:
            raise ValueError(f"bad index list in {spec!r}") from None
        return "indices", idx
    if spec in ("greedy", "random"):
        return spec, None
    raise ValueError(f"unknown init {spec!r}; expected greedy, random or indices:...")


def evaluate(dataset: Dataset, w, h):
    """Pick the dataset's metric: accuracy when labels exist, else matched MRSA."""
    if dataset.labels is not None:
        return "accuracy", clustering_accuracy(dataset.labels, h.assignment)
    if dataset.w_true is not None:
        return "mrsa", matched_mrsa(w, dataset.w_true)[0]
    return "", float("nan")


def run_once(dataset: Dataset, config: ExperimentConfig, seed: int):
    """Init + solve once; returns ``(RunReport, W, H)``."""
    rank = config.rank or dataset.rank
    if rank is None:
        raise ValueError(f"{dataset.name}: rank unknown (no labels, truth W or config rank)")
    method, idx = parse_init(config.init)
    t0 = time.perf_counter()
    w0, _ = init_w(dataset.x, rank, method, seed=seed, indices=idx)
    w, h, rep = run_onmf(dataset.x, w0, config.solver_config(rank, seed))
    elapsed = time.perf_counter() - t0
    name, value = evaluate(dataset, w, h)
    report = onmf_io.RunReport(
        dataset=dataset.name, algorithm=config.algorithm, r=rank, seed=seed,
        iterations=rep.iterations, time_s=elapsed, metric_name=name, metric_value=value,
        objective=list(rep.objective), h_change=list(rep.h_change), n=dataset.n,
    )
    return report, w, h


def run_experiment(datasets, configs, repeats: int = 1) -> list[onmf_io.RunReport]:
    """Run every (dataset, config) pair with seeds ``0..repeats-1``.

    ``datasets`` holds :class:`Dataset` objects or zero-argument loaders
    returning one; a loader or solver failure is recorded as a failed report
    and the batch continues. Reports come back in input order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    reports = []
    for entry in datasets:
        try:
            ds = entry() if callable(entry) else entry
        except Exception as exc:  # noqa: BLE001 - a bad dataset must not stop the batch
            name = getattr(entry, "name", getattr(entry, "__name__", "dataset"))
            log.error("loading %s failed: %s", name, exc)
            for cfg in configs:
                for seed in range(repeats):
                    reports.append(onmf_io.RunReport(name, cfg.algorithm, cfg.rank or 0, seed, error=str(exc)))
            continue
        for cfg in configs:
            for seed in range(repeats):
                try:
                    rep, _, _ = run_once(ds, cfg, seed)
                except Exception as exc:  # noqa: BLE001
                    log.error("%s/%s seed %d failed: %s", ds.name, cfg.algorithm, seed, exc)
                    rep = onmf_io.RunReport(ds.name, cfg.algorithm, cfg.rank or ds.rank or 0, seed,
                                            n=ds.n, error=str(exc))
                reports.append(rep)
    return reports


@dataclass
class Summary:
    dataset: str
    algorithm: str
    n: int
    r: int
    runs: int
    failures: int
    metric_name: str
    metric_mean: float
    metric_first: float
    mean_time_s: float
    mean_iterations: float


def summarize(reports) -> list[Summary]:
    """Per (dataset, algorithm) means over seeds, in first-seen order."""
    groups = defaultdict(list)
    for rep in reports:
        groups[(rep.dataset, rep.algorithm)].append(rep)
    out = []
    for (ds, alg), reps in groups.items():
        ok = [r for r in reps if not r.failed]
        first = min(ok, key=lambda r: r.seed) if ok else None
        out.append(Summary(
            dataset=ds, algorithm=alg,
            n=max((r.n for r in reps), default=0),
            r=reps[0].r, runs=len(reps), failures=len(reps) - len(ok),
            metric_name=ok[0].metric_name if ok else "",
            metric_mean=float(np.mean([r.metric_value for r in ok])) if ok else float("nan"),
            metric_first=first.metric_value if first else float("nan"),
            mean_time_s=float(np.mean([r.time_s for r in ok])) if ok else float("nan"),
            mean_iterations=float(np.mean([r.iterations for r in ok])) if ok else float("nan"),
        ))
    return out


def weighted_average(summaries, algorithm: str, field: str = "metric_mean") -> float:
    """Average of ``field`` across datasets weighted by their column count."""
    rows = [s for s in summaries if s.algorithm == algorithm and not np.isnan(getattr(s, field))]
    total = sum(s.n for s in rows)
    if total == 0:
        return float("nan")
    return sum(getattr(s, field) * s.n for s in rows) / total


# manifests -------------------------------------------------------------------


def _loader(entry: dict, base: Path):
    """Zero-argument loader for one manifest dataset entry."""
    name = entry.get("name")
    if not name:
        raise ValueError("every manifest dataset needs a 'name'")

    def path(key):
        return base / entry[key] if key in entry else None

    def load() -> Dataset:
        width = height = None
        if "synthetic" in entry:
            x, labels, w_true = generate(SyntheticSpec(**entry["synthetic"]))
            return Dataset(name, x, labels, w_true, rank=entry.get("rank"))
        if "hsi" in entry:
            cube = onmf_io.read_hsi_cube(path("hsi"))
            x, width, height = cube.matrix(), cube.width, cube.height
        elif "matrix" in entry:
            x = onmf_io.read_matrix_market(path("matrix"))
        else:
            raise ValueError(f"{name}: dataset needs one of 'synthetic', 'matrix' or 'hsi'")
        labels = onmf_io.read_labels(path("labels")) if "labels" in entry else None
        w_true = onmf_io.read_dense_matrix_market(path("truth_w")) if "truth_w" in entry else None
        return Dataset(name, x, labels, w_true, rank=entry.get("rank"), width=width, height=height)

    load.name = name
    return load


def load_manifest(path):
    """Read a JSON manifest; returns ``(dataset loaders, configs, repeats)``.

    ::

        {"repeats": 20,
         "datasets": [{"name": "toy", "matrix": "x.mtx", "labels": "y.txt"},
                      {"name": "syn", "synthetic": {"m": 50, "n": 500, "r": 5}}],
         "configs": [{"divergence": "fro"}, {"divergence": "kl"}]}

    Paths are relative to the manifest file.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "datasets" not in doc:
        raise ValueError(f"{path}: manifest must be an object with a 'datasets' list")
    loaders = [_loader(e, path.parent) for e in doc["datasets"]]
    cfg_docs = doc.get("configs") or [{"divergence": "fro"}, {"divergence": "kl"}]
    configs = [ExperimentConfig(**c) for c in cfg_docs]
    return loaders, configs, int(doc.get("repeats", 1))


def summary_rows(summaries) -> list[dict]:
    return [asdict(s) for s in summaries]
