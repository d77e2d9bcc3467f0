"""Hyperplane pool trained by small shift and rotation steps.

Every plane keeps its own normal ``w``, threshold ``theta``, a self-timer, a
shift counter and running means of the samples seen on either side of it.
Upon each sample the planes close to it are nudged away from it, so that in
the mean they drift out of high-density regions and settle in the valleys
between classes. Learning is local: a plane's update depends only on its
own state and the sample.

The per-plane functions (``shift_update``, ``mean_update``,
``rotate_update``) are the readable reference; ``Pool.step`` / ``train`` run
the same rules through the compiled or vectorised kernels in
:mod:`valleyseek.kernels`.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import kernels, vecgeom
from .evalkit import Checkpoint, RunTrace


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float
    phi: float
    alpha: float
    beta: float
    warmup_shifts: int = 100
    rng_seed: int = 0
    decay: bool = False
    decay_final: float = 0.1  # fraction of epsilon/alpha left at the last sample

    def __post_init__(self):
        for name in ("epsilon", "phi", "alpha", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.epsilon < self.phi:
            raise ValueError("epsilon must be smaller than phi")
        if not self.alpha < 0.5:
            raise ValueError("alpha must be below 0.5 rad")
        if not self.beta >= self.phi:
            raise ValueError("beta must be at least phi")
        if self.warmup_shifts < 0:
            raise ValueError("warmup_shifts must be non-negative")
        if not 0.0 < self.decay_final <= 1.0:
            raise ValueError("decay_final must lie in (0, 1]")

    @classmethod
    def scaled(cls, sigma: float = 1.0, **overrides) -> "LearnerConfig":
        """Defaults tuned for spherical classes of std-dev ``sigma``.

        epsilon = 0.0033 sigma, phi = 2 sigma, alpha = 0.04, beta = 8 sigma.
        """
        params = dict(epsilon=0.0033 * sigma, phi=2.0 * sigma, alpha=0.04,
                      beta=8.0 * sigma)
        params.update(overrides)
        return cls(**params)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class DomainBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).ravel()
        hi = np.asarray(self.hi, dtype=np.float64).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lo and hi differ in dimension")
        if not np.all(hi > lo):
            raise ValueError("domain box needs hi > lo in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float) -> "DomainBox":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @classmethod
    def around(cls, center, edge: float) -> "DomainBox":
        c = np.asarray(center, dtype=np.float64)
        return cls(c - edge / 2.0, c + edge / 2.0)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def edge(self) -> np.ndarray:
        return self.hi - self.lo


@dataclass
class Hyperplane:
    """State of a single discriminator (a copy, not a view into a pool)."""

    w: np.ndarray
    theta: float
    t: int = 0
    shift_count: int = 0
    mu1: Optional[np.ndarray] = None
    mu2: Optional[np.ndarray] = None
    c1: float = 0.0
    c2: float = 0.0
    id: int = 0

    @property
    def has_means(self) -> bool:
        return self.mu1 is not None

    def signed_distance(self, x) -> float:
        return vecgeom.signed_distance(x, self.w, self.theta)


# --- per-plane reference rules ------------------------------------------------

def shift_update(h: Hyperplane, x, cfg: LearnerConfig, epsilon=None) -> Hyperplane:
    eps = cfg.epsilon if epsilon is None else epsilon
    s = h.signed_distance(x)
    if 0.0 < s <= cfg.phi:
        return dataclasses.replace(h, theta=h.theta - eps, shift_count=h.shift_count + 1)
    if -cfg.phi <= s <= 0.0:
        return dataclasses.replace(h, theta=h.theta + eps, shift_count=h.shift_count + 1)
    return h


def mean_update(h: Hyperplane, x, cfg: LearnerConfig) -> Hyperplane:
    x = np.asarray(x, dtype=np.float64)
    s = h.signed_distance(x)
    a = abs(s)
    if a > cfg.beta:
        return h
    if not h.has_means:
        mirrored = x + 2.0 * a * h.w if s <= 0.0 else x - 2.0 * a * h.w
        if s <= 0.0:
            return dataclasses.replace(h, mu1=x.copy(), mu2=mirrored, c1=1.0, c2=1.0)
        return dataclasses.replace(h, mu1=mirrored, mu2=x.copy(), c1=1.0, c2=1.0)
    if s <= 0.0:
        cn = h.c1 + 1.0
        return dataclasses.replace(h, mu1=(h.c1 * h.mu1 + x) / cn, c1=cn)
    cn = h.c2 + 1.0
    return dataclasses.replace(h, mu2=(h.c2 * h.mu2 + x) / cn, c2=cn)


def rotate_update(h: Hyperplane, x, cfg: LearnerConfig, alpha=None) -> Hyperplane:
    """Rotate about the point where the side means' segment crosses the plane.

    Of the two senses, the one that moves the plane away from ``x`` wins.
    Degenerate frames leave the plane untouched.
    """
    if not h.has_means:
        return h
    alpha = cfg.alpha if alpha is None else alpha
    x = np.asarray(x, dtype=np.float64)
    try:
        C = vecgeom.intersection_point(h.mu1, h.mu2, h.w, h.theta)
        E = vecgeom.project_onto_plane(x, h.w, h.theta)
        u = vecgeom.toward_plane_unit(x, E)
        v = vecgeom.in_plane_unit(E, C)
    except vecgeom.DegenerateFrame:
        return h
    best = None
    for a in (alpha, -alpha):
        w_new = vecgeom.rotate_in_plane(h.w, u, v, a)
        dist = abs(w_new @ x - w_new @ C)
        if best is None or dist > best[0]:
            best = (dist, w_new)
    w_new = best[1] / np.linalg.norm(best[1])
    return dataclasses.replace(h, w=w_new, theta=float(w_new @ C))


def plane_step(h: Hyperplane, x, cfg: LearnerConfig, epsilon=None, alpha=None) -> Hyperplane:
    """One sample applied to one plane: means, shift, rotate, timer."""
    in_band = abs(h.signed_distance(x)) <= cfg.phi
    h = mean_update(h, x, cfg)
    if not in_band:
        return h
    h = shift_update(h, x, cfg, epsilon)
    if h.shift_count >= cfg.warmup_shifts:
        h = rotate_update(h, x, cfg, alpha)
    return dataclasses.replace(h, t=h.t + 1)


# --- pool ---------------------------------------------------------------------

@dataclass
class Pool:
    """Array-backed collection of N planes in R^dim plus the learning config."""

    W: np.ndarray
    theta: np.ndarray
    config: LearnerConfig
    timer: np.ndarray = None
    shift_count: np.ndarray = None
    mu1: np.ndarray = None
    mu2: np.ndarray = None
    c1: np.ndarray = None
    c2: np.ndarray = None
    has_mu: np.ndarray = None
    counters: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise ValueError("W must be an (N, d) array")
        N, d = self.W.shape
        self.theta = np.ascontiguousarray(self.theta, dtype=np.float64).reshape(N)
        if self.timer is None:
            self.timer = np.zeros(N, dtype=np.int64)
        if self.shift_count is None:
            self.shift_count = np.zeros(N, dtype=np.int64)
        if self.mu1 is None:
            self.mu1 = np.zeros((N, d))
        if self.mu2 is None:
            self.mu2 = np.zeros((N, d))
        if self.c1 is None:
            self.c1 = np.zeros(N)
        if self.c2 is None:
            self.c2 = np.zeros(N)
        if self.has_mu is None:
            self.has_mu = np.zeros(N, dtype=np.bool_)
        if self.counters is None:
            self.counters = np.zeros(kernels.N_COUNTERS, dtype=np.int64)

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def __len__(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "Pool":
        return Pool(self.W.copy(), self.theta.copy(), self.config, self.timer.copy(),
                    self.shift_count.copy(), self.mu1.copy(), self.mu2.copy(),
                    self.c1.copy(), self.c2.copy(), self.has_mu.copy(), self.counters.copy())

    def plane(self, j: int) -> Hyperplane:
        has = bool(self.has_mu[j])
        return Hyperplane(
            w=self.W[j].copy(), theta=float(self.theta[j]), t=int(self.timer[j]),
            shift_count=int(self.shift_count[j]),
            mu1=self.mu1[j].copy() if has else None,
            mu2=self.mu2[j].copy() if has else None,
            c1=float(self.c1[j]), c2=float(self.c2[j]), id=j)

    def set_plane(self, j: int, h: Hyperplane) -> None:
        self.W[j] = h.w
        self.theta[j] = h.theta
        self.timer[j] = h.t
        self.shift_count[j] = h.shift_count
        self.has_mu[j] = h.has_means
        if h.has_means:
            self.mu1[j] = h.mu1
            self.mu2[j] = h.mu2
        self.c1[j] = h.c1
        self.c2[j] = h.c2

    @property
    def diagnostics(self) -> dict:
        names = ("shifts", "rotations", "degenerate", "mean_updates", "band_hits")
        return {k: int(v) for k, v in zip(names, self.counters)}

    def _state(self):
        return (self.W, self.theta, self.timer, self.shift_count, self.mu1, self.mu2,
                self.c1, self.c2, self.has_mu)

    def step(self, x, backend=None) -> "Pool":
        X = _as_samples(x, self.dim)
        if X.shape[0] != 1:
            raise ValueError("step takes a single sample")
        cfg = self.config
        kernels.train_chunk(X, *self._state(), np.array([cfg.epsilon]), np.array([cfg.alpha]),
                            cfg.phi, cfg.beta, cfg.warmup_shifts, self.counters,
                            backend=backend)
        return self

    def output_code(self, x) -> np.ndarray:
        X = _as_samples(x, self.dim)
        y = np.maximum(0.0, X @ self.W.T - self.theta)
        return y[0] if np.ndim(x) == 1 else y

    def margins(self, X) -> np.ndarray:
        """Signed distances w_j.x - theta_j, shape (n, N)."""
        return _as_samples(X, self.dim) @ self.W.T - self.theta

    # -- serialization --

    def to_dict(self) -> dict:
        planes = []
        for j in range(len(self)):
            has = bool(self.has_mu[j])
            planes.append({
                "id": j,
                "w": self.W[j].tolist(),
                "theta": float(self.theta[j]),
                "t": int(self.timer[j]),
                "shift_count": int(self.shift_count[j]),
                "mu1": self.mu1[j].tolist() if has else None,
                "mu2": self.mu2[j].tolist() if has else None,
                "c1": float(self.c1[j]),
                "c2": float(self.c2[j]),
            })
        return {"dim": self.dim, "config": self.config.to_dict(), "planes": planes,
                "diagnostics": self.diagnostics}

    @classmethod
    def from_dict(cls, doc: dict) -> "Pool":
        d = int(doc["dim"])
        planes = sorted(doc["planes"], key=lambda p: p["id"])
        if [p["id"] for p in planes] != list(range(len(planes))):
            raise ValueError("plane ids must be dense 0..N-1")
        N = len(planes)
        W = np.array([p["w"] for p in planes], dtype=np.float64).reshape(N, d)
        has = np.array([p["mu1"] is not None for p in planes], dtype=np.bool_)
        mu1 = np.zeros((N, d))
        mu2 = np.zeros((N, d))
        for j, p in enumerate(planes):
            if has[j]:
                mu1[j] = p["mu1"]
                mu2[j] = p["mu2"]
        counters = np.zeros(kernels.N_COUNTERS, dtype=np.int64)
        diag = doc.get("diagnostics") or {}
        for i, k in enumerate(("shifts", "rotations", "degenerate", "mean_updates", "band_hits")):
            counters[i] = diag.get(k, 0)
        return cls(
            W=W, theta=np.array([p["theta"] for p in planes], dtype=np.float64),
            config=LearnerConfig.from_dict(doc["config"]),
            timer=np.array([p["t"] for p in planes], dtype=np.int64),
            shift_count=np.array([p["shift_count"] for p in planes], dtype=np.int64),
            mu1=mu1, mu2=mu2,
            c1=np.array([p["c1"] for p in planes], dtype=np.float64),
            c2=np.array([p["c2"] for p in planes], dtype=np.float64),
            has_mu=has, counters=counters)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "Pool":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _as_samples(x, dim: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected samples of dimension {dim}, got shape {np.shape(x)}")
    return np.ascontiguousarray(X)


def init_grid(domain: DomainBox, planes_per_dim: int, config: LearnerConfig) -> Pool:
    """Axis-aligned planes, ``planes_per_dim`` per axis at interior offsets.

    Offsets along axis i are lo_i + edge_i * (k + 0.5) / planes_per_dim.
    """
    if planes_per_dim < 1:
        raise ValueError("planes_per_dim must be >= 1")
    d = domain.dim
    k = (np.arange(planes_per_dim) + 0.5) / planes_per_dim
    W = np.repeat(np.eye(d), planes_per_dim, axis=0)
    theta = (domain.lo[:, None] + domain.edge[:, None] * k[None, :]).ravel()
    return Pool(W, theta, config)


def init_random(domain: DomainBox, count: int, seed: int, config: LearnerConfig) -> Pool:
    """Uniform random orientations through uniform random points of the domain."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    W = rng.standard_normal((count, domain.dim))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    points = domain.lo + rng.random((count, domain.dim)) * domain.edge
    theta = np.einsum("ij,ij->i", W, points)
    return Pool(W, theta, config)


def output_code(pool: Pool, x) -> np.ndarray:
    return pool.output_code(x)


def step(pool: Pool, x, backend=None) -> Pool:
    return pool.step(x, backend=backend)


def _schedule(cfg: LearnerConfig, start: int, stop: int, total: int):
    idx = np.arange(start, stop, dtype=np.float64)
    if cfg.decay and total > 1:
        scale = 1.0 - (1.0 - cfg.decay_final) * idx / (total - 1)
    else:
        scale = np.ones_like(idx)
    return cfg.epsilon * scale, cfg.alpha * scale


def train(pool: Pool, stream, probe: Optional[Callable[[Pool], dict]] = None,
          cadence: int = 500, backend=None) -> tuple[Pool, RunTrace]:
    """Single pass over ``stream``, updating ``pool`` in place.

    ``probe(pool)`` is called after every ``cadence`` samples and after the last
    one; it returns a mapping n -> Top-n error which lands in the trace.
    """
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    X = _stack_stream(stream, pool.dim)
    if X.shape[0] == 0:
        return pool, RunTrace([])
    X = np.ascontiguousarray(X)
    n = X.shape[0]
    cfg = pool.config
    trace = []
    t0 = time.perf_counter()
    for start in range(0, n, cadence):
        stop = min(start + cadence, n)
        eps, alpha = _schedule(cfg, start, stop, n)
        kernels.train_chunk(X[start:stop], *pool._state(), eps, alpha, cfg.phi, cfg.beta,
                            cfg.warmup_shifts, pool.counters, backend=backend)
        errors = dict(probe(pool)) if probe is not None else {}
        trace.append(Checkpoint(
            sample_index=stop, topn_errors=errors,
            wall_ms=(time.perf_counter() - t0) * 1e3,
            rotations_fired=int(pool.counters[kernels.ROTATIONS]),
            shifts_fired=int(pool.counters[kernels.SHIFTS])))
    return pool, RunTrace(trace)


def _stack_stream(stream, dim: int) -> np.ndarray:
    if isinstance(stream, np.ndarray) and stream.ndim == 2:
        if stream.shape[0] and stream.shape[1] != dim:
            raise ValueError(f"sample 0 has dimension {stream.shape[1]}, expected {dim}")
        return stream.astype(np.float64, copy=False).reshape(stream.shape[0], dim)
    rows = []
    for i, x in enumerate(stream):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (dim,):
            raise ValueError(f"sample {i} has shape {x.shape}, expected ({dim},)")
        rows.append(x)
    return np.array(rows, dtype=np.float64).reshape(len(rows), dim)
