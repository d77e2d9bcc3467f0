"""d-dimensional geometry used by the rotation rule.

All functions are pure and operate on 1-D float arrays.
"""

import numpy as np

ORTHO_TOL = 1e-6


class DegenerateFrame(ValueError):
    """A rotation frame cannot be built (zero-length or parallel input)."""


class FrameNotOrthonormal(ValueError):
    pass


def _vec(a):
    return np.asarray(a, dtype=np.float64)


def _check_dims(*arrays):
    d = arrays[0].shape[-1]
    for a in arrays[1:]:
        if a.shape[-1] != d:
            raise ValueError(f"dimension mismatch: {arrays[0].shape} vs {a.shape}")


def degeneracy_tol(*vectors):
    """Length below which frame construction is rejected: 1e-9 * max(1, |inputs|)."""
    scale = max([1.0] + [float(np.linalg.norm(v)) for v in vectors])
    return 1e-9 * scale


def signed_distance(x, w, theta):
    x, w = _vec(x), _vec(w)
    _check_dims(x, w)
    return float(w @ x - theta)


def project_onto_plane(x, w, theta):
    """Orthogonal projection E of x onto the plane w.x = theta."""
    x, w = _vec(x), _vec(w)
    _check_dims(x, w)
    return x + (theta - w @ x) * w


def toward_plane_unit(x, E):
    """Unit vector from x to its projection E; equals -sign(w.x - theta) * w."""
    x, E = _vec(x), _vec(E)
    _check_dims(x, E)
    diff = E - x
    n = np.linalg.norm(diff)
    if n <= degeneracy_tol(x, E):
        raise DegenerateFrame("sample lies on the plane")
    return diff / n


def intersection_point(mu1, mu2, w, theta):
    """Point where the segment mu1-mu2 (extended) crosses the plane."""
    mu1, mu2, w = _vec(mu1), _vec(mu2), _vec(w)
    _check_dims(mu1, mu2, w)
    seg = mu2 - mu1
    den = w @ seg
    if abs(den) <= degeneracy_tol(mu1, mu2):
        raise DegenerateFrame("mean-connecting segment is parallel to the plane")
    return mu1 + (theta - w @ mu1) * seg / den


def in_plane_unit(E, C):
    E, C = _vec(E), _vec(C)
    _check_dims(E, C)
    diff = E - C
    n = np.linalg.norm(diff)
    if n <= degeneracy_tol(E, C):
        raise DegenerateFrame("projection coincides with the rotation point")
    return diff / n


def rotate_in_plane(p, u, v, alpha):
    """Rotate p by angle alpha inside span{u, v}.

    The component of p orthogonal to span{u, v} is left untouched. Positive
    alpha turns u towards v.
    """
    p, u, v = _vec(p), _vec(u), _vec(v)
    _check_dims(p, u, v)
    if (abs(u @ v) > ORTHO_TOL or abs(u @ u - 1.0) > ORTHO_TOL
            or abs(v @ v - 1.0) > ORTHO_TOL):
        raise FrameNotOrthonormal("u, v must be orthonormal")
    pu = p @ u
    pv = p @ v
    c = np.cos(alpha) - 1.0
    s = np.sin(alpha)
    return p + u * (c * pu - s * pv) + v * (s * pu + c * pv)
