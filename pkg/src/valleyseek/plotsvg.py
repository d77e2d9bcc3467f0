"""Dependency-free SVG rendering of 2-d samples and hyperplanes."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")


def clip_line(w, theta, lo, hi):
    """Segment of {x : w.x = theta} inside the box [lo, hi], or None."""
    w = np.asarray(w, dtype=np.float64)
    pts = []
    for axis in (0, 1):
        other = 1 - axis
        if abs(w[other]) < 1e-15:
            continue
        for edge in (lo[axis], hi[axis]):
            t = (theta - w[axis] * edge) / w[other]
            if lo[other] - 1e-12 <= t <= hi[other] + 1e-12:
                p = [0.0, 0.0]
                p[axis], p[other] = edge, t
                pts.append(tuple(p))
    uniq = []
    for p in pts:
        if all(np.hypot(p[0] - q[0], p[1] - q[1]) > 1e-9 for q in uniq):
            uniq.append(p)
    if len(uniq) < 2:
        return None
    # keep the two extreme points along the line direction
    direction = np.array([-w[1], w[0]])
    proj = [float(np.dot(direction, p)) for p in uniq]
    return uniq[int(np.argmin(proj))], uniq[int(np.argmax(proj))]


class _Canvas:
    def __init__(self, lo, hi, size, margin=20):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        span = self.hi - self.lo
        self.scale = (size - 2 * margin) / float(max(span))
        self.margin = margin
        self.width = int(round(span[0] * self.scale + 2 * margin))
        self.height = int(round(span[1] * self.scale + 2 * margin))

    def xy(self, p):
        x = self.margin + (p[0] - self.lo[0]) * self.scale
        y = self.height - self.margin - (p[1] - self.lo[1]) * self.scale
        return f"{x:.2f}", f"{y:.2f}"


def render(lo, hi, samples=None, labels=None, layers=(), size=600, title=None) -> str:
    """SVG text.

    ``layers`` is a sequence of (W, theta, style) with style one of
    "before" (dashed grey) or "after" (solid black); plane ids are drawn
    next to "after" lines.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape != (2,) or hi.shape != (2,):
        raise ValueError("plots are 2-d only")
    cv = _Canvas(lo, hi, size)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{cv.width}" height="{cv.height}" '
           f'viewBox="0 0 {cv.width} {cv.height}">',
           '<rect width="100%" height="100%" fill="white"/>']
    x0, y1 = cv.xy(lo)
    x1, y0 = cv.xy(hi)
    out.append(f'<rect x="{x0}" y="{y0}" width="{float(x1) - float(x0):.2f}" '
               f'height="{float(y1) - float(y0):.2f}" fill="none" stroke="#999"/>')
    if title:
        out.append(f'<text x="{cv.margin}" y="14" font-size="12" font-family="sans-serif">'
                   f'{escape(title)}</text>')
    if samples is not None and len(samples):
        X = np.asarray(samples, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("plots are 2-d only")
        labs = np.zeros(len(X), dtype=np.int64) if labels is None else np.asarray(labels)
        order = {lab: i for i, lab in enumerate(sorted(set(labs.tolist())))}
        out.append('<g stroke="none" fill-opacity="0.5">')
        for p, lab in zip(X, labs.tolist()):
            if np.all(p >= lo) and np.all(p <= hi):
                cx, cy = cv.xy(p)
                out.append(f'<circle cx="{cx}" cy="{cy}" r="1.5" '
                           f'fill="{PALETTE[order[lab] % len(PALETTE)]}"/>')
        out.append("</g>")
    for W, theta, style in layers:
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != 2:
            raise ValueError("plots are 2-d only")
        dashed = style == "before"
        stroke = 'stroke="#888" stroke-dasharray="4 3"' if dashed else 'stroke="black"'
        out.append(f'<g {stroke} stroke-width="1.2" fill="none">')
        for j, (w, th) in enumerate(zip(W, np.asarray(theta, dtype=np.float64))):
            seg = clip_line(w, th, lo, hi)
            if seg is None:
                continue
            (ax, ay), (bx, by) = cv.xy(seg[0]), cv.xy(seg[1])
            out.append(f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}"/>')
            if not dashed:
                out.append(f'<text x="{bx}" y="{by}" font-size="10" font-family="sans-serif" '
                           f'stroke="none" fill="black">hp{j}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
