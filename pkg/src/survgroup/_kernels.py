"""Compiled inner loops for tree growing, matrix assembly and soft-rule training."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def candidate_thresholds(values, max_candidates):
    """Midpoints between consecutive distinct values, thinned to at most ``max_candidates``."""
    u = np.unique(values)
    if u.size < 2:
        return np.empty(0)
    mids = (u[:-1] + u[1:]) * 0.5
    if mids.size <= max_candidates:
        return mids
    pick = np.empty(max_candidates, dtype=np.int64)
    step = (mids.size - 1) / (max_candidates - 1)
    for c in range(max_candidates):
        pick[c] = int(np.floor(c * step + 0.5))
    return mids[pick]


@njit(cache=True, nogil=True)
def best_logrank_split(Xt, times, events, min_leaf, max_candidates):
    """Best ``x_j <= threshold`` split of one node by the logrank statistic.

    ``Xt`` is (p, N) with subjects ordered by ascending time; ``events`` is 0/1.
    Both children need ``min_leaf`` subjects and at least one event. Ties go to
    the lowest feature index, then the lowest threshold.

    Returns ``(feature, threshold, statistic)``; feature is -1 if no split is valid.
    """
    p, N = Xt.shape
    total_events = 0
    for i in range(N):
        total_events += events[i]

    # time groups, i.e. runs of equal times in the sorted order
    gstart = np.empty(N + 1, dtype=np.int64)
    ng = 0
    for i in range(N):
        if i == 0 or times[i] != times[i - 1]:
            gstart[ng] = i
            ng += 1
    gstart[ng] = N

    best_f = -1
    best_thr = 0.0
    best_stat = -1.0
    for j in range(p):
        vals = Xt[j]
        thr = candidate_thresholds(vals, max_candidates)
        C = thr.size
        if C == 0:
            continue
        bins = np.searchsorted(thr, vals)  # subject goes left for candidate c iff bins <= c
        n_left = np.zeros(C + 1)
        ev_left = np.zeros(C + 1)
        for i in range(N):
            n_left[bins[i]] += 1.0
            ev_left[bins[i]] += events[i]
        for c in range(1, C + 1):
            n_left[c] += n_left[c - 1]
            ev_left[c] += ev_left[c - 1]

        obs = np.zeros(C)
        exp_ = np.zeros(C)
        var = np.zeros(C)
        risk_bin = np.zeros(C + 1)
        death_bin = np.zeros(C + 1)
        at_risk = 0.0
        for g in range(ng - 1, -1, -1):
            d = 0.0
            for i in range(gstart[g], gstart[g + 1]):
                risk_bin[bins[i]] += 1.0
                at_risk += 1.0
                if events[i]:
                    death_bin[bins[i]] += 1.0
                    d += 1.0
            if d == 0.0:
                continue
            r = at_risk
            rl = 0.0
            dl = 0.0
            for c in range(C):
                rl += risk_bin[c]
                dl += death_bin[c]
                frac = rl / r
                obs[c] += dl
                exp_[c] += d * frac
                if r > 1.0:
                    var[c] += d * frac * (1.0 - frac) * (r - d) / (r - 1.0)
            for b in range(C + 1):
                death_bin[b] = 0.0

        for c in range(C):
            nl = n_left[c]
            el = ev_left[c]
            if nl < min_leaf or N - nl < min_leaf:
                continue
            if el < 1 or total_events - el < 1:
                continue
            if var[c] <= 0.0:
                continue
            stat = (obs[c] - exp_[c]) ** 2 / var[c]
            if stat > best_stat:
                best_stat = stat
                best_f = j
                best_thr = thr[c]
    return best_f, best_thr, best_stat


@njit(cache=True, nogil=True)
def scatter_leaf_jumps(out, leaf_of, jump_ptr, jump_col, jump_val):
    """``out[i, jump_col[k]] += jump_val[k]`` for every jump ``k`` of subject i's leaf."""
    n = leaf_of.size
    for i in range(n):
        leaf = leaf_of[i]
        for k in range(jump_ptr[leaf], jump_ptr[leaf + 1]):
            out[i, jump_col[k]] += jump_val[k]


@njit(cache=True, nogil=True)
def abs_diff_weighted_rows(M, ref, w, out):
    """``out[i] = sum_u w[u] * |M[i, u] - ref[u]|`` without a temporary matrix."""
    n, m = M.shape
    for i in range(n):
        s = 0.0
        for u in range(m):
            s += w[u] * abs(M[i, u] - ref[u])
        out[i] = s


@njit(cache=True, nogil=True)
def soft_rule_forward(X, alpha, beta, w, tau, floor, e_lo, e_hi):
    """Harmonic-mean denominators ``H[i] = sum_j w[j] / max(pi_ij, floor)``.

    Fills ``e_lo = exp((alpha - x) / tau)`` and ``e_hi = exp((x - beta) / tau)``
    for the features with ``w[j] > 0``; overflow to inf gives ``pi = 0``.
    """
    n, p = X.shape
    H = np.zeros(n)
    for i in range(n):
        h = 0.0
        for j in range(p):
            if w[j] <= 0.0:
                continue
            a = np.exp((alpha[j] - X[i, j]) / tau)
            b = np.exp((X[i, j] - beta[j]) / tau)
            e_lo[i, j] = a
            e_hi[i, j] = b
            pi = 1.0 / (1.0 + a + b)
            h += w[j] / max(pi, floor)
        H[i] = h
    return H


@njit(cache=True, nogil=True)
def soft_rule_backward(e_lo, e_hi, w, s, g_s, H, total_w, tau, floor, g_alpha, g_beta, g_w):
    """Chain ``g_s = dL/ds`` through the soft rule into bound and weight gradients.

    With ``s = W / H``: ``ds/dw_j = (1 - s / pi_ij) / H`` and, where ``pi`` is
    above the floor, ``ds/dalpha_j = -s^2 w_j e_lo / (W tau)`` and
    ``ds/dbeta_j = s^2 w_j e_hi / (W tau)``.
    """
    n, p = e_lo.shape
    for j in range(p):
        g_alpha[j] = 0.0
        g_beta[j] = 0.0
        g_w[j] = 0.0
    for i in range(n):
        c = g_s[i] * s[i] * s[i] / (total_w * tau)
        d = g_s[i] / H[i]
        for j in range(p):
            if w[j] <= 0.0:
                continue
            a = e_lo[i, j]
            b = e_hi[i, j]
            pi = 1.0 / (1.0 + a + b)
            g_w[j] += d * (1.0 - s[i] / max(pi, floor))
            if pi > floor:
                g_alpha[j] -= c * w[j] * a
                g_beta[j] += c * w[j] * b
