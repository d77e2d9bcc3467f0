"""Mapping hyperplanes to human labels, and Top-n prediction from the heads.

Each class gets a single (plane, polarity) head chosen one-vs-all on a small
labelled calibration set. Classes are then ranked by the signed margin of
their own head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class EmptyClass(ValueError):
    pass


@dataclass(frozen=True)
class ClassHead:
    class_label: int
    plane_id: int
    polarity: int
    score: float


class HeadSet(list):
    """List of ClassHead, one per calibration class, sorted by label."""

    def labels(self):
        return [h.class_label for h in self]

    def to_dict(self) -> dict:
        return {"heads": [{"class": h.class_label, "plane": h.plane_id,
                           "polarity": h.polarity, "score": h.score} for h in self]}

    @classmethod
    def from_dict(cls, doc) -> "HeadSet":
        return cls(ClassHead(int(h["class"]), int(h["plane"]), int(h["polarity"]),
                             float(h["score"])) for h in doc["heads"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "HeadSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def score_table(pool, X, y, weighting: str = "balanced", classes=None):
    """Scores of every (class, plane, polarity) triple.

    Returns ``(classes, scores)`` with scores of shape (n_classes, N, 2);
    the last axis holds polarity +1 then -1.

    ``balanced``: half the in-class agreement rate plus half the out-of-class
    disagreement rate. ``counts``: the same two tallies as raw sample counts,
    divided by the calibration size.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty calibration set")
    if classes is None:
        classes = sorted(set(y.tolist()))
    m = pool.margins(X)
    pos = m > 0.0
    neg = m < 0.0  # points exactly on a plane count for neither side
    total_pos = pos.sum(axis=0)
    total_neg = neg.sum(axis=0)
    n = X.shape[0]
    scores = np.empty((len(classes), len(pool), 2))
    for ci, c in enumerate(classes):
        mask = y == c
        n_in = int(mask.sum())
        if n_in == 0:
            raise EmptyClass(f"class {c} has no calibration samples")
        n_out = n - n_in
        in_pos = pos[mask].sum(axis=0)
        in_neg = neg[mask].sum(axis=0)
        # polarity +1: class on the positive side, others on the negative side
        agree_p, reject_p = in_pos, total_neg - in_neg
        agree_m, reject_m = in_neg, total_pos - in_pos
        if weighting == "balanced":
            rej_den = n_out if n_out else 1
            scores[ci, :, 0] = 0.5 * agree_p / n_in + 0.5 * (reject_p / rej_den if n_out else 1.0)
            scores[ci, :, 1] = 0.5 * agree_m / n_in + 0.5 * (reject_m / rej_den if n_out else 1.0)
        elif weighting == "counts":
            scores[ci, :, 0] = (agree_p + reject_p) / n
            scores[ci, :, 1] = (agree_m + reject_m) / n
        else:
            raise ValueError(f"unknown weighting {weighting!r}")
    return classes, scores


def associate_labels(pool, X, y, weighting: str = "balanced", classes=None) -> HeadSet:
    """Pick, per class, the best-scoring plane and polarity.

    Ties go to the lowest plane id, then to polarity +1.
    """
    classes, scores = score_table(pool, X, y, weighting, classes)
    heads = HeadSet()
    for ci, c in enumerate(classes):
        # row-major argmax over (plane, polarity) realises the tie rule
        k = int(np.argmax(scores[ci].ravel()))
        j, p = divmod(k, 2)
        heads.append(ClassHead(int(c), j, 1 if p == 0 else -1, float(scores[ci, j, p])))
    return heads


def head_margins(heads: HeadSet, pool, X) -> np.ndarray:
    """(n, n_classes) signed margins, columns in head order."""
    planes = np.array([h.plane_id for h in heads])
    pol = np.array([h.polarity for h in heads], dtype=np.float64)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return (X @ pool.W[planes].T - pool.theta[planes]) * pol


def _rank(heads, margins, n):
    labels = np.array(heads.labels())
    # sort by (-margin, label): lexsort keys are applied last-first
    order = np.lexsort((np.broadcast_to(labels, margins.shape), -margins), axis=-1)
    return labels[order[..., :n]]


def classify_topn(heads: HeadSet, pool, x, n: int) -> list:
    if not 1 <= n <= len(heads):
        raise ValueError(f"n must lie in 1..{len(heads)}")
    m = head_margins(heads, pool, x)[0]
    return _rank(heads, m, n).tolist()


def classify_topn_batch(heads: HeadSet, pool, X, n: int) -> list:
    if not 1 <= n <= len(heads):
        raise ValueError(f"n must lie in 1..{len(heads)}")
    m = head_margins(heads, pool, X)
    if m.shape[0] == 0:
        return []
    return [row.tolist() for row in _rank(heads, m, n)]
