"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public functions (no suffix) dispatch on :data:`footfall._accel.USE_NUMBA`.
The ``*_nb`` / ``*_np`` variants are importable directly so tests and the
benchmark can compare both paths.

Ratio kernels return a full-length array; indices where the windows do not
fit are left at zero.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _accel
from ._accel import njit

TAU = 1e-12


# ---------------------------------------------------------------------------
# energy ratios
# ---------------------------------------------------------------------------


@njit
def _guarded_ratio(num, den, eps):
    d = den + eps
    if d > 0.0:
        return num / d
    if num == 0.0:
        return 0.0
    return np.inf


@njit(fastmath=True)
def _window_sums_nb(e, w):
    # direct sum per window (no running sums, so no cancellation error);
    # fastmath only lets the positive-term reduction vectorise
    m = e.size - w + 1
    out = np.empty(max(m, 0))
    for i in range(m):
        acc = 0.0
        for k in range(i, i + w):
            acc += e[k]
        out[i] = acc
    return out


@njit
def sta_lta_nb(x, s, l, eps):
    n = x.size
    out = np.zeros(n)
    if n - l + 1 <= s:
        return out
    e = x * x
    short = _window_sums_nb(e, s)
    long_ = _window_sums_nb(e, l)
    for i in range(s, n - l + 1):
        out[i] = _guarded_ratio(short[i - s] / s, long_[i] / l, eps)
    return out


@njit
def mer_nb(x, L, eps):
    n = x.size
    out = np.zeros(n)
    if n - L <= L:
        return out
    e = x * x
    sums = _window_sums_nb(e, L + 1)
    for i in range(L, n - L):
        r = _guarded_ratio(sums[i], sums[i - L], eps) * abs(x[i])
        out[i] = r * r * r
    return out


@njit
def ccw_nb(x, s, l, eps):
    n = x.size
    h = s // 2
    w = 2 * h + 1
    out = np.zeros(n)
    if n - h - l <= l + h:
        return out
    e = x * x
    centre = _window_sums_nb(e, w)
    flank = _window_sums_nb(e, l)
    for i in range(l + h, n - h - l):
        out[i] = _guarded_ratio(centre[i - h] / w, flank[i - h - l] / l + flank[i + h + 1] / l, eps)
    return out


def _window_sums(e, w):
    return sliding_window_view(e, w).sum(axis=1)


def _ratio_np(num, den, eps):
    d = den + eps
    out = np.zeros_like(num)
    pos = d > 0
    out[pos] = num[pos] / d[pos]
    out[~pos & (num != 0)] = np.inf
    return out


def sta_lta_np(x, s, l, eps):
    n = x.size
    e = x * x
    out = np.zeros(n)
    idx = np.arange(s, n - l + 1)
    if idx.size == 0:
        return out
    num = _window_sums(e, s)[idx - s] / s
    den = _window_sums(e, l)[idx] / l
    out[idx] = _ratio_np(num, den, eps)
    return out


def mer_np(x, L, eps):
    n = x.size
    e = x * x
    out = np.zeros(n)
    idx = np.arange(L, n - L)
    if idx.size == 0:
        return out
    sums = _window_sums(e, L + 1)
    er = _ratio_np(sums[idx], sums[idx - L], eps)
    out[idx] = (er * np.abs(x[idx])) ** 3
    return out


def ccw_np(x, s, l, eps):
    n = x.size
    h = s // 2
    w = 2 * h + 1
    e = x * x
    out = np.zeros(n)
    idx = np.arange(l + h, n - h - l)
    if idx.size == 0:
        return out
    es = _window_sums(e, w)[idx - h] / w
    flank = _window_sums(e, l) / l
    out[idx] = _ratio_np(es, flank[idx - h - l] + flank[idx + h + 1], eps)
    return out


# ---------------------------------------------------------------------------
# dynamic time warping
# ---------------------------------------------------------------------------


@njit
def dtw_nb(x, y):
    n = x.size
    m = y.size
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        xi = x[i - 1]
        for j in range(1, m + 1):
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = abs(xi - y[j - 1]) + best
    return D[n, m]


def dtw_np(x, y):
    # anti-diagonal wavefront: every cell on diagonal d depends only on d-1, d-2
    n, m = x.size, y.size
    cost = np.abs(x[:, None] - y[None, :])
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for d in range(2, n + m + 1):
        i = np.arange(max(1, d - m), min(n, d - 1) + 1)
        j = d - i
        prev = np.minimum(np.minimum(D[i - 1, j - 1], D[i - 1, j]), D[i, j - 1])
        D[i, j] = cost[i - 1, j - 1] + prev
    return float(D[n, m])


# ---------------------------------------------------------------------------
# SMO for the soft-margin SVM dual (second-order working-set selection)
# ---------------------------------------------------------------------------


@njit
def smo_nb(K, y, C, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < C and -G[t] > gmax:
                    gmax = -G[t]
                    i = t
            else:
                if alpha[t] > 0 and G[t] > gmax:
                    gmax = G[t]
                    i = t
        gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(n):
            if y[t] > 0:
                if alpha[t] > 0:
                    if G[t] > gmax2:
                        gmax2 = G[t]
                    gd = gmax + G[t]
                else:
                    continue
            else:
                if alpha[t] < C:
                    if -G[t] > gmax2:
                        gmax2 = -G[t]
                    gd = gmax - G[t]
                else:
                    continue
            if gd > 0 and i >= 0:
                quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                if quad <= 0:
                    quad = TAU
                obj = -(gd * gd) / quad
                if obj < obj_min:
                    obj_min = obj
                    j = t
        gap = gmax + gmax2
        if gap < tol or i < 0 or j < 0:
            break
        it += 1
        old_ai = alpha[i]
        old_aj = alpha[j]
        yi = y[i]
        yj = y[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            tot = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if tot > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = tot - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = tot
            if tot > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = tot - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = tot
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            G[t] += y[t] * (yi * K[i, t] * dai + yj * K[j, t] * daj)
    return alpha, G, it, gap


def smo_np(K, y, C, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    diagK = np.diag(K).copy()
    pos = y > 0
    it = 0
    gap = np.inf
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score = -y * G
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        gmax = score[i]
        gmax2 = np.max(np.where(low, -score, -np.inf))
        gap = gmax + gmax2
        if gap < tol:
            break
        gd = gmax - score
        cand = low & (gd > 0)
        if not cand.any():
            break
        quad = diagK[i] + diagK - 2.0 * K[i]
        quad = np.where(quad <= 0, TAU, quad)
        obj = np.where(cand, -(gd * gd) / quad, np.inf)
        j = int(np.argmin(obj))
        it += 1
        old_ai, old_aj = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        q = diagK[i] + diagK[j] - 2.0 * K[i, j]
        if q <= 0:
            q = TAU
        ai, aj = alpha[i], alpha[j]
        if yi != yj:
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / q
            tot = ai + aj
            ai -= delta
            aj += delta
            if tot > C:
                if ai > C:
                    ai, aj = C, tot - C
            elif aj < 0:
                aj, ai = 0.0, tot
            if tot > C:
                if aj > C:
                    aj, ai = C, tot - C
            elif ai < 0:
                ai, aj = 0.0, tot
        alpha[i], alpha[j] = ai, aj
        G += y * (yi * K[i] * (ai - old_ai) + yj * K[j] * (aj - old_aj))
    return alpha, G, it, gap


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def sta_lta(x, s, l, eps):
    fn = sta_lta_nb if _accel.USE_NUMBA else sta_lta_np
    return fn(_f64(x), int(s), int(l), float(eps))


def mer(x, L, eps):
    fn = mer_nb if _accel.USE_NUMBA else mer_np
    return fn(_f64(x), int(L), float(eps))


def ccw(x, s, l, eps):
    fn = ccw_nb if _accel.USE_NUMBA else ccw_np
    return fn(_f64(x), int(s), int(l), float(eps))


def dtw(x, y):
    fn = dtw_nb if _accel.USE_NUMBA else dtw_np
    return float(fn(_f64(x), _f64(y)))


def smo(K, y, C, tol, max_iter):
    fn = smo_nb if _accel.USE_NUMBA else smo_np
    alpha, G, it, gap = fn(_f64(K), _f64(y), float(C), float(tol), int(max_iter))
    return alpha, G, int(it), float(gap)
