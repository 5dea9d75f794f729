"""Cross-task variability and the PCA / k-means view of a model-score matrix."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.decomposition import PCA
from sklearn.utils.validation import check_array, check_is_fitted

from ..errors import ConfigError, DataError

SCORE_FIELDS = ("model", "task", "metric", "score")


@dataclass
class ModelPerformanceMatrix:
    """Models as rows, ``(task, metric)`` pairs as columns."""

    models: list[str]
    columns: list[tuple[str, str]]
    values: np.ndarray

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "ModelPerformanceMatrix":
        cells: dict[tuple[str, tuple[str, str]], float] = {}
        for rec in records:
            cells[(rec["model"], (rec["task"], rec["metric"]))] = float(rec["score"])
        models = sorted({m for m, _ in cells})
        columns = sorted({c for _, c in cells})
        missing = [(m, c) for m in models for c in columns if (m, c) not in cells]
        if missing:
            shown = ", ".join(f"{m}/{t}/{k}" for m, (t, k) in missing[:10])
            raise DataError(f"score matrix has {len(missing)} missing cells: {shown}")
        values = np.array([[cells[(m, c)] for c in columns] for m in models], dtype=np.float64)
        return cls(models, columns, values)

    @property
    def tasks(self) -> list[str]:
        return sorted({t for t, _ in self.columns})

    def column(self, task: str, metric: str) -> np.ndarray:
        return self.values[:, self.columns.index((task, metric))]


def read_scores(path: str | os.PathLike) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or list(reader.fieldnames) != list(SCORE_FIELDS):
                raise DataError(f"{path}: expected header {','.join(SCORE_FIELDS)}")
            rows = []
            for lineno, row in enumerate(reader, 2):
                try:
                    row["score"] = float(row["score"])
                except (TypeError, ValueError):
                    raise DataError(f"{path}:{lineno}: score is not a number") from None
                rows.append(row)
            return rows
    except FileNotFoundError:
        raise DataError(f"scores file {path} does not exist") from None


def write_scores(rows: Sequence[Mapping], path: str | os.PathLike) -> None:
    """Upsert rows keyed by (model, task, metric) into a sorted scores CSV."""
    merged: dict[tuple[str, str, str], float] = {}
    if os.path.exists(path):
        for r in read_scores(path):
            merged[(r["model"], r["task"], r["metric"])] = r["score"]
    for r in rows:
        merged[(r["model"], r["task"], r["metric"])] = float(r["score"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_FIELDS)
        for (model, task, metric), score in sorted(merged.items()):
            w.writerow([model, task, metric, f"{score:.9g}"])


@dataclass(frozen=True)
class CrossTaskStats:
    task: str
    median: float
    q1: float
    q3: float
    iqr: float
    delta: float


def cross_task_stats(matrix: ModelPerformanceMatrix, metric: str = "main_score") -> list[CrossTaskStats]:
    """Median, inter-quartile range and best-worst spread of one metric per task.

    Quartiles use linear interpolation between order statistics.
    """
    out = []
    for task in matrix.tasks:
        if (task, metric) not in matrix.columns:
            raise DataError(f"task {task!r} has no {metric!r} scores")
        col = matrix.column(task, metric)
        q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75], method="linear")
        out.append(CrossTaskStats(task, float(med), float(q1), float(q3), float(q3 - q1),
                                  float(col.max() - col.min())))
    return out


def pca_project(X, n_components: int = 2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project mean-centred rows onto the top principal axes.

    Returns ``(projections, explained_variance_ratio, components)`` where
    ``components`` has one orthonormal axis per row.
    """
    X = check_array(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise DataError("PCA needs at least two rows")
    if not 1 <= n_components <= min(n - 1, d):
        raise ConfigError(f"n_components must be in [1, {min(n - 1, d)}], got {n_components}")
    with np.errstate(invalid="ignore", divide="ignore"):  # zero total variance
        pca = PCA(n_components=n_components, svd_solver="full").fit(X)
    total = float(((X - X.mean(axis=0)) ** 2).sum())
    ratios = pca.explained_variance_ratio_ if total > 0 else np.zeros(n_components)
    return pca.transform(X), np.asarray(ratios, dtype=np.float64), pca.components_


class KMeans(ClusterMixin, BaseEstimator):
    """Lloyd's k-means with deterministic farthest-point seeding.

    The first centre is a point drawn with ``seed``; each further centre is
    the point farthest from the centres chosen so far (lowest index on
    ties). Points keep their cluster unless another centre is strictly
    closer. A cluster that empties is re-seeded at the point farthest from
    its current centre, taken from a cluster with more than one member.
    ``inertia_history_`` records the inertia after every update step.
    """

    def __init__(self, n_clusters: int = 4, seed: int = 0, max_iter: int = 300):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter

    def _init_centers(self, X: np.ndarray) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        chosen = [int(rng.integers(len(X)))]
        dist = ((X - X[chosen[0]]) ** 2).sum(axis=1)
        for _ in range(1, self.n_clusters):
            cand = dist.copy()
            cand[chosen] = -1.0
            nxt = int(np.argmax(cand))
            chosen.append(nxt)
            dist = np.minimum(dist, ((X - X[nxt]) ** 2).sum(axis=1))
        return X[chosen].copy()

    @staticmethod
    def _sq_dist(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
        return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not isinstance(self.n_clusters, (int, np.integer)) or self.n_clusters < 1:
            raise ConfigError("n_clusters must be a positive integer")
        if len(X) < self.n_clusters:
            raise DataError(f"k-means needs at least {self.n_clusters} points, got {len(X)}")
        centers = self._init_centers(X)
        d = self._sq_dist(X, centers)
        labels = np.argmin(d, axis=1)
        history = []
        self.n_iter_ = 0
        for it in range(self.max_iter):
            if it:
                d = self._sq_dist(X, centers)
                current = d[np.arange(len(X)), labels]
                best = np.argmin(d, axis=1)
                move = d[np.arange(len(X)), best] < current
                new = np.where(move, best, labels)
                if not move.any():
                    break
                labels = new
            self._reseed_empty(X, d, labels)
            centers = np.stack([X[labels == j].mean(axis=0) for j in range(self.n_clusters)])
            history.append(float(((X - centers[labels]) ** 2).sum()))
            self.n_iter_ = it + 1
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_history_ = history
        self.inertia_ = history[-1]
        return self

    def _reseed_empty(self, X, d, labels) -> None:
        for j in range(self.n_clusters):
            if np.any(labels == j):
                continue
            sizes = np.bincount(labels, minlength=self.n_clusters)
            own = d[np.arange(len(X)), labels]
            own = np.where(sizes[labels] > 1, own, -1.0)
            p = int(np.argmax(own))
            labels[p] = j

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        return np.argmin(self._sq_dist(X, self.cluster_centers_), axis=1)


def kmeans(points, k: int = 4, seed: int = 0, max_iter: int = 300):
    """``(labels, centroids, inertia)`` of :class:`KMeans`."""
    model = KMeans(k, seed, max_iter).fit(points)
    return model.labels_, model.cluster_centers_, model.inertia_
