"""Seeded spherical Gaussian mixtures and their Bayes-error oracles.

Random streams come from numpy's PCG64 bit generator. A run seed is expanded
with ``SeedSequence.spawn``: child 0 picks components, child k+1 draws the
noise of component k, so the output does not depend on how the draws are
scheduled.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence.spawn"

# Within-pair mean distance (in sigma) giving a two-class Bayes error of 0.02:
# Q(delta / 2) = 0.02  ->  delta = 2 * 2.05375 = 4.1075; rounded to 4.107.
PAIR_DELTA = 4.107
PAIR_GAP = 4.0  # pair-centre distance along one axis, in units of PAIR_DELTA

KMEANS_TRAP_DIM = 200
KMEANS_TRAP_SPREAD = 8.0


@dataclass(frozen=True)
class Component:
    prior: float
    mean: np.ndarray
    sigma: float
    label: int

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).ravel())
        if not 0.0 < self.prior <= 1.0:
            raise ValueError("component prior must lie in (0, 1]")
        if not self.sigma > 0:
            raise ValueError("component sigma must be positive")


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("mixture needs at least one component")
        if abs(sum(c.prior for c in comps) - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1")
        if len({c.mean.shape[0] for c in comps}) != 1:
            raise ValueError("all component means must share one dimension")

    @property
    def dim(self) -> int:
        return self.components[0].mean.shape[0]

    @property
    def labels(self) -> list:
        return sorted({c.label for c in self.components})

    def scaled(self, factor: float) -> "MixtureSpec":
        return MixtureSpec(tuple(Component(c.prior, c.mean * factor, c.sigma * factor, c.label)
                                 for c in self.components))

    def to_dict(self) -> dict:
        return {"components": [{"prior": c.prior, "mean": c.mean.tolist(), "sigma": c.sigma,
                                "class_label": c.label} for c in self.components]}

    @classmethod
    def from_dict(cls, doc) -> "MixtureSpec":
        return cls(tuple(Component(c["prior"], c["mean"], c["sigma"], int(c["class_label"]))
                         for c in doc["components"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "MixtureSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Samples(NamedTuple):
    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.y.shape[0]


def gen_mixture(spec: MixtureSpec, n: int, seed: int) -> Samples:
    if n < 0:
        raise ValueError("n must be non-negative")
    comps = spec.components
    children = np.random.SeedSequence(seed).spawn(len(comps) + 1)
    pick = np.random.Generator(np.random.PCG64(children[0]))
    priors = np.array([c.prior for c in comps])
    which = pick.choice(len(comps), size=n, p=priors / priors.sum())
    X = np.empty((n, spec.dim))
    for k, c in enumerate(comps):
        rows = np.flatnonzero(which == k)
        g = np.random.Generator(np.random.PCG64(children[k + 1]))
        X[rows] = c.mean + c.sigma * g.standard_normal((rows.size, spec.dim))
    y = np.array([c.label for c in comps], dtype=np.int64)[which]
    return Samples(X, y)


def log_component_densities(spec: MixtureSpec, X) -> np.ndarray:
    """log(prior_k) + log N(x; mean_k, sigma_k^2 I), shape (n, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    d = spec.dim
    out = np.empty((X.shape[0], len(spec.components)))
    for k, c in enumerate(spec.components):
        sq = np.sum((X - c.mean) ** 2, axis=1)
        out[:, k] = (np.log(c.prior) - 0.5 * sq / c.sigma ** 2
                     - d * np.log(c.sigma) - 0.5 * d * np.log(2 * np.pi))
    return out


def bayes_classify(spec: MixtureSpec, X) -> np.ndarray:
    """Label of the most probable class (component densities summed per label)."""
    logp = log_component_densities(spec, X)
    labels = spec.labels
    comp_labels = np.array([c.label for c in spec.components])
    per_class = np.stack([logsumexp(logp[:, comp_labels == lab], axis=1) for lab in labels], axis=1)
    return np.asarray(labels)[np.argmax(per_class, axis=1)]


def bayes_error_mc(spec: MixtureSpec, n_mc: int, seed: int) -> float:
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    X, y = gen_mixture(spec, n_mc, seed)
    return float(np.mean(bayes_classify(spec, X) != y))


def pair_bayes_error(delta_over_sigma: float) -> float:
    """Bayes error of two equal-prior spherical Gaussians delta apart: Q(delta / 2)."""
    return float(norm.sf(delta_over_sigma / 2.0))


def _pair_means(dim: int, sigma: float):
    h = 0.5 * PAIR_DELTA * sigma
    g = PAIR_GAP * PAIR_DELTA * sigma
    return h, g, np.zeros((4, dim))


def _four(means, sigma) -> MixtureSpec:
    return MixtureSpec(tuple(Component(0.25, m, sigma, lab) for lab, m in enumerate(means)))


def paper_2d_spec(sigma: float = 1.0) -> MixtureSpec:
    """Two close pairs in the plane.

    Pair (0, 1) is split along x0 around the origin. Pair (2, 3) is split
    along x1 around (g, g). Each pair stays more than beta + 3 sigma away from
    the other pair's separating line, so neither valley is disturbed.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    h, g, m = _pair_means(2, sigma)
    m[0] = (-h, 0.0)
    m[1] = (h, 0.0)
    m[2] = (g, g - h)
    m[3] = (g, g + h)
    return _four(m, sigma)


def paper_50d_spec(sigma: float = 1.0, dim: int = 50) -> MixtureSpec:
    """Two close pairs in ``dim`` >= 3 dimensions.

    Pair (0, 1) is split along axis 0 at the origin; pair (2, 3) sits g away
    along axis 1 and is split along axis 2. Each pair lies on the extension of
    the other pair's separating plane, so a valley plane only isolates a single
    class once it tilts past the far pair.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if dim < 3:
        raise ValueError("the 50-d layout needs dim >= 3")
    h, g, m = _pair_means(dim, sigma)
    m[0, 0], m[1, 0] = -h, h
    m[2, 1] = m[3, 1] = g
    m[2, 2], m[3, 2] = -h, h
    return _four(m, sigma)


def kmeans_trap_spec(sigma: float = 1.0, dim: int = KMEANS_TRAP_DIM,
                     spread: float = KMEANS_TRAP_SPREAD) -> MixtureSpec:
    """Unequal priors and spreads; class k sits ``spread`` sigma out on axis k."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if dim < 4:
        raise ValueError("the k-means trap needs dim >= 4")
    comps = []
    for k, (p, r) in enumerate(zip((0.4, 0.3, 0.2, 0.1), (1.0, 1.0, 2.0, 2.0))):
        mean = np.zeros(dim)
        mean[k] = spread * sigma
        comps.append(Component(p, mean, r * sigma, k))
    return MixtureSpec(tuple(comps))


class Builtin(NamedTuple):
    """A named benchmark with the grid it was tuned for."""
    make: object
    grid_pad: float  # cube spans [min mean - pad, max mean + pad], in sigma
    planes_per_dim: int


BUILTINS = {
    "paper2d": Builtin(paper_2d_spec, 3.0, 4),
    "paper50d": Builtin(paper_50d_spec, 4.0, 16),
    "kmeans-trap": Builtin(kmeans_trap_spec, 4.0, 4),
}


def builtin_spec(name: str, sigma: float = 1.0) -> MixtureSpec:
    try:
        return BUILTINS[name].make(sigma)
    except KeyError:
        raise ValueError(f"unknown builtin mixture {name!r}; known: {sorted(BUILTINS)}") from None


def grid_cube(spec: MixtureSpec, pad_sigma: float):
    """(lo, hi) of a cube enclosing all means with ``pad_sigma`` spare on each side."""
    means = np.array([c.mean for c in spec.components])
    s = max(c.sigma for c in spec.components)
    return float(means.min() - pad_sigma * s), float(means.max() + pad_sigma * s)


def samples_to_csv(samples: Samples) -> str:
    """Header f0..f{d-1},label; floats use repr so a reload is bit-exact."""
    X, y = samples
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"f{i}" for i in range(X.shape[1])] + ["label"])
    for row, lab in zip(X, y):
        w.writerow([repr(float(v)) for v in row] + [int(lab)])
    return buf.getvalue()


def write_samples(path, samples: Samples) -> None:
    Path(path).write_text(samples_to_csv(samples))


def read_samples(path) -> Samples:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file, header expected")
    head = rows[0]
    if not head or head[-1] != "label":
        raise ValueError(f"{path}: last column must be 'label'")
    d = len(head) - 1
    body = [r for r in rows[1:] if r]
    X = np.empty((len(body), d))
    y = np.empty(len(body), dtype=np.int64)
    for i, r in enumerate(body):
        if len(r) != d + 1:
            raise ValueError(f"{path}: row {i + 2} has {len(r)} fields, expected {d + 1}")
        try:
            X[i] = [float(v) for v in r[:d]]
            y[i] = int(r[d])
        except ValueError as exc:
            raise ValueError(f"{path}: row {i + 2}: {exc}") from None
    return Samples(X, y)
