"""Top-n error, confusion matrices and training traces."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class Checkpoint:
    sample_index: int
    topn_errors: dict = field(default_factory=dict)
    wall_ms: float = 0.0
    rotations_fired: int = 0
    shifts_fired: int = 0


@dataclass
class RunTrace:
    checkpoints: list

    def __post_init__(self):
        idx = [c.sample_index for c in self.checkpoints]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("checkpoint sample indices must be strictly increasing")

    def __len__(self):
        return len(self.checkpoints)

    def to_csv(self, ns=(1, 3, 5), include_wall=True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        head = ["sample_index"] + [f"top{n}" for n in ns]
        if include_wall:
            head.append("wall_ms")
        writer.writerow(head + ["shifts", "rotations"])
        for c in self.checkpoints:
            row = [c.sample_index]
            row += [_fmt(c.topn_errors.get(n)) for n in ns]
            if include_wall:
                row.append(f"{c.wall_ms:.3f}")
            writer.writerow(row + [c.shifts_fired, c.rotations_fired])
        return buf.getvalue()

    def to_json(self, include_wall=True) -> str:
        rows = []
        for c in self.checkpoints:
            r = asdict(c)
            r["topn_errors"] = {str(k): v for k, v in sorted(c.topn_errors.items())}
            if not include_wall:
                r.pop("wall_ms")
            rows.append(r)
        return json.dumps({"checkpoints": rows}, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunTrace":
        doc = json.loads(text)
        cps = []
        for r in doc["checkpoints"]:
            r = dict(r)
            r["topn_errors"] = {int(k): v for k, v in r["topn_errors"].items()}
            cps.append(Checkpoint(**r))
        return cls(cps)


def _fmt(v):
    return "" if v is None else repr(float(v))


def topn_error(predictions, truths, n: int) -> float:
    """Fraction of samples whose true label is not among the first n predictions."""
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(truths) == 0:
        return 0.0
    misses = 0
    for ranked, y in zip(predictions, truths):
        if len(ranked) < n:
            raise ValueError(f"prediction list shorter than n={n}")
        if y not in list(ranked[:n]):
            misses += 1
    return misses / len(truths)


def confusion(predictions, truths, labels=None):
    """Counts with rows = true label, columns = predicted label.

    Returns ``(matrix, labels)``; ``labels`` orders both axes.
    """
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if labels is None:
        labels = sorted(set(truths) | set(predictions))
    pos = {lab: i for i, lab in enumerate(labels)}
    m = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, y in zip(predictions, truths):
        m[pos[y], pos[p]] += 1
    return m, list(labels)


def matrix_tsv(m, row_labels=None, col_labels=None) -> str:
    lines = []
    if col_labels is not None:
        lines.append("\t".join([""] + [str(c) for c in col_labels]))
    for i, row in enumerate(np.asarray(m)):
        cells = [str(int(v)) for v in row]
        if row_labels is not None:
            cells = [str(row_labels[i])] + cells
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def probe_pool(pool, calib_X, calib_y, test_X, test_y, ns=(1, 3, 5), **assoc_kw) -> dict:
    """Associate labels on the calibration set and score the test set.

    The pool is only read. Returns {n: Top-n error}; n larger than the number
    of classes is clipped to it.
    """
    from .headmap import associate_labels, classify_topn_batch

    heads = associate_labels(pool, calib_X, calib_y, **assoc_kw)
    n_max = min(max(ns), len(heads))
    ranked = classify_topn_batch(heads, pool, test_X, n_max)
    return {n: topn_error(ranked, list(test_y), min(n, n_max)) for n in ns}
