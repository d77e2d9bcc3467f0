"""Hot training loops over (samples x planes).

Two implementations of the same per-sample update are kept side by side:

* ``train_chunk_loop`` - explicit loops, compiled with numba when enabled.
* ``train_chunk_numpy`` - vectorised over planes, one sample at a time.

``train_chunk`` dispatches according to ``valleyseek._accel.USE_NUMBA``.
Both mutate the state arrays in place and add to ``counters``:
``[shifts, rotations, degenerate, mean_updates, band_hits]``.
"""

import numpy as np

from . import _accel

N_COUNTERS = 5
SHIFTS, ROTATIONS, DEGENERATE, MEAN_UPDATES, BAND_HITS = range(N_COUNTERS)
DEGEN_REL = 1e-9


@_accel.njit
def _norm(a):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * a[i]
    return np.sqrt(acc)


@_accel.njit
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@_accel.njit
def _rotate_plane(w, theta, x, mu1, mu2, alpha, buf):
    """Rotation of one plane; writes into w and returns (theta, fired)."""
    d = w.shape[0]
    seg = buf[0]
    C = buf[1]
    E = buf[2]
    u = buf[3]
    v = buf[4]
    cand = buf[5]

    for i in range(d):
        seg[i] = mu2[i] - mu1[i]
    den = _dot(w, seg)
    tol = DEGEN_REL * max(1.0, _norm(mu1), _norm(mu2))
    if abs(den) <= tol:
        return theta, False
    lam = (theta - _dot(w, mu1)) / den
    for i in range(d):
        C[i] = mu1[i] + lam * seg[i]

    off = theta - _dot(w, x)
    for i in range(d):
        E[i] = x[i] + off * w[i]
    for i in range(d):
        u[i] = E[i] - x[i]
    nu = _norm(u)
    if nu <= DEGEN_REL * max(1.0, _norm(x), _norm(E)):
        return theta, False
    for i in range(d):
        u[i] /= nu

    for i in range(d):
        v[i] = E[i] - C[i]
    nv = _norm(v)
    if nv <= DEGEN_REL * max(1.0, _norm(E), _norm(C)):
        return theta, False
    for i in range(d):
        v[i] /= nv

    pu = _dot(w, u)
    pv = _dot(w, v)
    cm1 = np.cos(alpha) - 1.0
    sn = np.sin(alpha)

    # two candidate senses; keep the one moving the plane away from x
    best_sign = 1.0
    best_dist = -1.0
    for sign in (1.0, -1.0):
        s = sign * sn
        a = cm1 * pu - s * pv
        b = s * pu + cm1 * pv
        for i in range(d):
            cand[i] = w[i] + u[i] * a + v[i] * b
        th = _dot(cand, C)
        dist = abs(_dot(cand, x) - th)
        if dist > best_dist:
            best_dist = dist
            best_sign = sign

    s = best_sign * sn
    a = cm1 * pu - s * pv
    b = s * pu + cm1 * pv
    for i in range(d):
        w[i] = w[i] + u[i] * a + v[i] * b
    nw = _norm(w)
    for i in range(d):
        w[i] /= nw
    return _dot(w, C), True


@_accel.njit
def train_chunk_loop(X, W, theta, timer, shift_count, mu1, mu2, c1, c2, has_mu,
                     eps, alpha, phi, beta, warmup, counters):
    n = X.shape[0]
    N, d = W.shape
    buf = np.empty((6, d))
    for k in range(n):
        x = X[k]
        ek = eps[k]
        ak = alpha[k]
        for j in range(N):
            w = W[j]
            s = _dot(w, x) - theta[j]
            a = abs(s)
            if a > beta:
                continue

            # side means (uniform weight inside the beta band)
            counters[3] += 1
            if not has_mu[j]:
                if s <= 0.0:
                    for i in range(d):
                        mu1[j, i] = x[i]
                        mu2[j, i] = x[i] + 2.0 * a * w[i]
                else:
                    for i in range(d):
                        mu2[j, i] = x[i]
                        mu1[j, i] = x[i] - 2.0 * a * w[i]
                c1[j] = 1.0
                c2[j] = 1.0
                has_mu[j] = True
            elif s <= 0.0:
                cn = c1[j] + 1.0
                for i in range(d):
                    mu1[j, i] = (c1[j] * mu1[j, i] + x[i]) / cn
                c1[j] = cn
            else:
                cn = c2[j] + 1.0
                for i in range(d):
                    mu2[j, i] = (c2[j] * mu2[j, i] + x[i]) / cn
                c2[j] = cn

            if a > phi:
                continue
            counters[4] += 1
            if s > 0.0:
                theta[j] -= ek
            else:
                theta[j] += ek
            shift_count[j] += 1
            counters[0] += 1

            if shift_count[j] >= warmup:
                th, fired = _rotate_plane(w, theta[j], x, mu1[j], mu2[j], ak, buf)
                if fired:
                    theta[j] = th
                    counters[1] += 1
                else:
                    counters[2] += 1
            timer[j] += 1


def _rows_norm(A):
    return np.sqrt(np.einsum("ij,ij->i", A, A))


def _rotate_rows(W, theta, x, M1, M2, alpha):
    """Vectorised rotation of a subset of planes; returns (W', theta', fired)."""
    seg = M2 - M1
    den = np.einsum("ij,ij->i", W, seg)
    ok = np.abs(den) > DEGEN_REL * np.maximum(1.0, np.maximum(_rows_norm(M1), _rows_norm(M2)))
    safe_den = np.where(ok, den, 1.0)
    lam = (theta - np.einsum("ij,ij->i", W, M1)) / safe_den
    C = M1 + lam[:, None] * seg

    off = theta - W @ x
    E = x + off[:, None] * W
    U = E - x
    nu = _rows_norm(U)
    xn = np.linalg.norm(x)
    ok &= nu > DEGEN_REL * np.maximum(1.0, np.maximum(xn, _rows_norm(E)))
    U = U / np.where(nu > 0, nu, 1.0)[:, None]

    V = E - C
    nv = _rows_norm(V)
    ok &= nv > DEGEN_REL * np.maximum(1.0, np.maximum(_rows_norm(E), _rows_norm(C)))
    V = V / np.where(nv > 0, nv, 1.0)[:, None]

    pu = np.einsum("ij,ij->i", W, U)
    pv = np.einsum("ij,ij->i", W, V)
    cm1 = np.cos(alpha) - 1.0
    sn = np.sin(alpha)

    def candidate(sign):
        s = sign * sn
        a = cm1 * pu - s * pv
        b = s * pu + cm1 * pv
        return W + U * a[:, None] + V * b[:, None]

    Wp = candidate(1.0)
    Wm = candidate(-1.0)
    dp = np.abs(Wp @ x - np.einsum("ij,ij->i", Wp, C))
    dm = np.abs(Wm @ x - np.einsum("ij,ij->i", Wm, C))
    Wn = np.where((dm > dp)[:, None], Wm, Wp)
    Wn /= _rows_norm(Wn)[:, None]
    th = np.einsum("ij,ij->i", Wn, C)
    return Wn, th, ok


def train_chunk_numpy(X, W, theta, timer, shift_count, mu1, mu2, c1, c2, has_mu,
                      eps, alpha, phi, beta, warmup, counters):
    for k in range(X.shape[0]):
        x = X[k]
        s = W @ x - theta
        a = np.abs(s)
        in_beta = np.flatnonzero(a <= beta)
        if in_beta.size == 0:
            continue
        counters[MEAN_UPDATES] += in_beta.size
        sb = s[in_beta]
        lower = sb <= 0.0

        fresh = ~has_mu[in_beta]
        if fresh.any():
            idx = in_beta[fresh]
            refl = x - 2.0 * np.abs(s[idx])[:, None] * W[idx] * np.where(lower[fresh], -1.0, 1.0)[:, None]
            lo = lower[fresh][:, None]
            mu1[idx] = np.where(lo, x, refl)
            mu2[idx] = np.where(lo, refl, x)
            c1[idx] = 1.0
            c2[idx] = 1.0
            has_mu[idx] = True
        old = ~fresh
        i1 = in_beta[old & lower]
        if i1.size:
            cn = c1[i1] + 1.0
            mu1[i1] = (c1[i1, None] * mu1[i1] + x) / cn[:, None]
            c1[i1] = cn
        i2 = in_beta[old & ~lower]
        if i2.size:
            cn = c2[i2] + 1.0
            mu2[i2] = (c2[i2, None] * mu2[i2] + x) / cn[:, None]
            c2[i2] = cn

        in_phi = in_beta[a[in_beta] <= phi]
        if in_phi.size == 0:
            continue
        counters[BAND_HITS] += in_phi.size
        counters[SHIFTS] += in_phi.size
        theta[in_phi] += np.where(s[in_phi] > 0.0, -eps[k], eps[k])
        shift_count[in_phi] += 1
        timer[in_phi] += 1

        rot = in_phi[shift_count[in_phi] >= warmup]
        if rot.size:
            Wn, th, ok = _rotate_rows(W[rot], theta[rot], x, mu1[rot], mu2[rot], alpha[k])
            good = rot[ok]
            W[good] = Wn[ok]
            theta[good] = th[ok]
            n_ok = int(ok.sum())
            counters[ROTATIONS] += n_ok
            counters[DEGENERATE] += rot.size - n_ok


def train_chunk(*args, backend=None):
    backend = backend or _accel.BACKEND
    if backend == "numba":
        if _accel.numba is None:
            raise RuntimeError("numba is not available")
        return train_chunk_loop(*args)
    if backend == "numpy":
        return train_chunk_numpy(*args)
    raise ValueError(f"unknown backend {backend!r}")
