"""Reference classifiers: supervised kNN and unsupervised k-means.

Both are plain numpy. kNN ranks labels by neighbour votes; k-means uses
k-means++ seeding followed by Lloyd iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evalkit import matrix_tsv

SPLIT_SHARE = 0.2  # a class is "split" when a second cluster holds >= this share of it


def _sq_dists(A, B):
    # |a|^2 + |b|^2 - 2 a.b, clipped at zero against rounding
    d = (np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :]
         - 2.0 * A @ B.T)
    return np.maximum(d, 0.0)


@dataclass
class KNN:
    """Euclidean k-nearest-neighbour classifier with ranked output."""

    k: int = 5
    X: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"k must be a positive odd integer, got {self.k}")
        self.k = int(self.k)

    def fit(self, X, y) -> "KNN":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        y = np.asarray(y)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y differ in length")
        if X.shape[0] == 0:
            raise ValueError("kNN needs at least one training sample")
        if self.k > X.shape[0]:
            raise ValueError(f"k={self.k} exceeds the {X.shape[0]} training samples")
        self.X, self.y = X, y
        self.labels_ = np.array(sorted(set(y.tolist())))
        return self

    def rank(self, X, chunk: int = 2048) -> np.ndarray:
        """Labels ordered best first, shape (n, n_labels).

        Score = vote count among the k nearest; ties go to the smaller mean
        distance of the voters, then to the smaller label.
        """
        if self.X is None:
            raise RuntimeError("fit() first")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.X.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.X.shape[1]}")
        k = self.k
        labs = self.labels_
        lab_idx = np.searchsorted(labs, self.y)
        out = np.empty((X.shape[0], labs.size), dtype=labs.dtype)
        for start in range(0, X.shape[0], chunk):
            D = _sq_dists(X[start:start + chunk], self.X)
            nn = np.argpartition(D, k - 1, axis=1)[:, :k] if k < D.shape[1] else np.argsort(D, axis=1)
            dist = np.sqrt(np.take_along_axis(D, nn, axis=1))
            votes = np.zeros((D.shape[0], labs.size))
            dsum = np.zeros_like(votes)
            rows = np.repeat(np.arange(D.shape[0]), nn.shape[1])
            np.add.at(votes, (rows, lab_idx[nn].ravel()), 1.0)
            np.add.at(dsum, (rows, lab_idx[nn].ravel()), dist.ravel())
            mean_d = np.where(votes > 0, dsum / np.maximum(votes, 1.0), np.inf)
            lab_key = np.broadcast_to(np.arange(labs.size), votes.shape)
            order = np.lexsort((lab_key, mean_d, -votes), axis=-1)
            out[start:start + chunk] = labs[order]
        return out

    def predict(self, X) -> np.ndarray:
        return self.rank(X)[:, 0]


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _sq_dists(X, centers[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        i = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers[j] = X[i]
        d2 = np.minimum(d2, _sq_dists(X, centers[j:j + 1])[:, 0])
    return centers


@dataclass
class KMeansResult:
    centers: np.ndarray
    assign: np.ndarray
    inertia_history: list
    iterations: int
    converged: bool

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]

    def predict(self, X) -> np.ndarray:
        """Index of the nearest centre for each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.argmin(_sq_dists(X, self.centers), axis=1)


def kmeans(X, k: int, seed: int = 0, max_iters: int = 300) -> KMeansResult:
    """Lloyd iterations from k-means++ seeds; stops at an assignment fixpoint.

    An empty cluster is re-seeded with the point farthest from its current
    centre, which the donor cluster then loses.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if X.shape[0] < k:
        raise ValueError(f"k={k} exceeds the number of samples ({X.shape[0]})")
    rng = np.random.Generator(np.random.PCG64(seed))
    C = _kmeanspp(X, k, rng)
    assign = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        D = _sq_dists(X, C)
        new = np.argmin(D, axis=1)
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(D[np.arange(X.shape[0]), new]))
            new[far] = j
            D[far, j] = 0.0
            counts = np.bincount(new, minlength=k)
        history.append(float(D[np.arange(X.shape[0]), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            converged = True
            break
        assign = new
        for j in range(k):
            C[j] = X[assign == j].mean(axis=0)
    return KMeansResult(C, assign, history, it, converged)


@dataclass
class ClusterReport:
    matrix: np.ndarray  # rows = true classes, columns = cluster ids
    classes: list
    split_classes: list  # classes with >= SPLIT_SHARE of their samples off their majority cluster
    merged_clusters: dict  # cluster id -> classes that majority-map to it (only when > 1)

    @property
    def failed(self) -> bool:
        return bool(self.split_classes or self.merged_clusters)

    def to_tsv(self) -> str:
        k = self.matrix.shape[1]
        return matrix_tsv(self.matrix, self.classes, list(range(k)))

    def summary(self) -> str:
        lines = []
        for c in self.split_classes:
            row = self.matrix[self.classes.index(c)]
            parts = [j for j in np.argsort(-row, kind="stable") if row[j] >= SPLIT_SHARE * row.sum()]
            lines.append(f"class {c} split across clusters {sorted(int(j) for j in parts)}")
        for j, cs in sorted(self.merged_clusters.items()):
            lines.append(f"cluster {j} claimed by classes {cs}")
        return "\n".join(lines) if lines else "no split or merged classes"


def cluster_report(assign, truths, k: int) -> ClusterReport:
    truths = np.asarray(truths)
    classes = sorted(set(truths.tolist()))
    m = np.zeros((len(classes), k), dtype=np.int64)
    pos = {c: i for i, c in enumerate(classes)}
    np.add.at(m, (np.array([pos[t] for t in truths.tolist()], dtype=np.int64), np.asarray(assign)), 1)
    split, owners = [], {}
    for i, c in enumerate(classes):
        row = m[i]
        major = int(np.argmax(row))
        owners.setdefault(major, []).append(c)
        if np.sum(row >= SPLIT_SHARE * row.sum()) >= 2:
            split.append(c)
    merged = {j: cs for j, cs in owners.items() if len(cs) > 1}
    return ClusterReport(m, classes, split, merged)


def kmeans_confusion(result: KMeansResult, X, y) -> ClusterReport:
    return cluster_report(result.predict(X), y, result.centers.shape[0])
