# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled gain kernels (hot path of the greedy construction).

Mirrors ``_numpy.py`` operation by operation: same scores, same update
order, same tie-breaking.  Any change here must be made there too.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log1p

cnp.import_array()

NAME = "native"

cdef double NEG_INF = float("-inf")


def similarity_gains(double[:, ::1] W, long[::1] members, long[::1] cands,
                     int s_lo, int s_hi, threshold=None):
    """See ``_numpy.similarity_gains``."""
    cdef int k = members.shape[0]
    cdef int m = cands.shape[0]
    cdef bint use_thr = threshold is not None
    cdef double thr = threshold if use_thr else 0.0

    gains_arr = np.zeros(m)
    sizes_arr = np.zeros(m, dtype=np.int64)
    sep_arr = np.full((m, max(s_hi, 1)), -1, dtype=np.int64)
    cdef double[::1] gains = gains_arr
    cdef long[::1] sizes = sizes_arr
    cdef long[:, ::1] sep = sep_arr

    cdef double[::1] w = np.empty(k)
    cdef long[::1] order = np.empty(k, dtype=np.int64)
    cdef long[::1] chosen = np.empty(max(s_hi, 1), dtype=np.int64)
    cdef int j, i, t, s, elig, lo, hi, best_size
    cdef long v, tmp
    cdef double wv, csum, best, g

    for j in range(m):
        v = cands[j]
        # Insertion sort of the member weights, descending, stable.
        for i in range(k):
            w[i] = W[members[i], v]
            order[i] = i
        for i in range(1, k):
            wv = w[i]
            tmp = order[i]
            t = i - 1
            while t >= 0 and w[t] < wv:
                w[t + 1] = w[t]
                order[t + 1] = order[t]
                t -= 1
            w[t + 1] = wv
            order[t + 1] = tmp

        if use_thr:
            elig = 0
            for i in range(k):
                if w[i] > thr:
                    elig += 1
        else:
            elig = k
        lo = s_lo if s_lo < elig else elig
        hi = s_hi if s_hi < elig else elig

        if elig == 0:
            gains[j] = 0.0
            sizes[j] = 0
            continue

        best = NEG_INF
        best_size = 0
        csum = 0.0
        for s in range(1, s_hi + 1):
            if s > k:
                break
            csum = csum + w[s - 1]
            g = 2.0 * csum
            if s >= lo and s <= hi and g >= best:
                best = g
                best_size = s
        gains[j] = best
        sizes[j] = best_size
        for i in range(best_size):
            chosen[i] = members[order[i]]
        # Ascending separator: selection sort over the few chosen ids.
        for i in range(best_size):
            t = i
            for s in range(i + 1, best_size):
                if chosen[s] < chosen[t]:
                    t = s
            tmp = chosen[i]
            chosen[i] = chosen[t]
            chosen[t] = tmp
            sep[j, i] = chosen[i]
    return gains_arr, sizes_arr, sep_arr


def gaussian_gains(double[:, ::1] Sigma, long[::1] members, long[::1] cands,
                   int target, double nu=0.0, thresholds=None,
                   double ptol=1e-10):
    """See ``_numpy.gaussian_gains``."""
    cdef int k = members.shape[0]
    cdef int m = cands.shape[0]
    cdef bint validated = thresholds is not None
    cdef double[::1] thr
    if validated:
        thr = np.ascontiguousarray(thresholds, dtype=np.float64)

    gains_arr = np.zeros(m)
    sizes_arr = np.zeros(m, dtype=np.int64)
    sep_arr = np.full((m, max(target, 1)), -1, dtype=np.int64)
    status_arr = np.zeros(m, dtype=np.int64)
    cdef double[::1] gains = gains_arr
    cdef long[::1] sizes = sizes_arr
    cdef long[:, ::1] sep = sep_arr
    cdef long[::1] status = status_arr

    cdef double[:, ::1] C = np.empty((k + 1, k + 1))
    cdef double[::1] col = np.empty(k + 1)
    cdef unsigned char[::1] chosen = np.zeros(k, dtype=np.uint8)
    cdef int j, a, b, step, istar, nsel, i, t
    cdef long v, tmp
    cdef double dv, du, cv, score, smax, piv, delta, gain

    for j in range(m):
        v = cands[j]
        for a in range(k):
            for b in range(k):
                C[a, b] = Sigma[members[a], members[b]]
            C[a, k] = Sigma[members[a], v]
            C[k, a] = Sigma[members[a], v]
        C[k, k] = Sigma[v, v]
        for a in range(k):
            chosen[a] = 0
        gain = 0.0
        nsel = 0

        if C[k, k] <= ptol:
            status[j] = 1
        else:
            for step in range(1, target + 1):
                dv = C[k, k]
                smax = NEG_INF
                istar = -1
                for a in range(k):
                    if chosen[a]:
                        continue
                    du = C[a, a]
                    if du <= ptol:
                        continue
                    cv = C[a, k]
                    score = (cv * cv) / (du * dv)
                    if score > smax:
                        smax = score
                        istar = a
                if istar < 0:
                    if step == 1:
                        status[j] = 1
                    break
                if 1.0 - smax <= ptol:
                    status[j] = 1
                    break
                delta = -0.5 * log1p(-smax)
                if validated and 2.0 * nu * (gain + delta) <= thr[step - 1]:
                    break
                gain += delta
                chosen[istar] = 1
                nsel += 1
                piv = C[istar, istar]
                # Snapshot the pivot column: the update must not see its
                # own writes (the numpy backend uses the same outer product).
                for a in range(k + 1):
                    col[a] = C[a, istar]
                for a in range(k + 1):
                    cv = col[a]
                    for b in range(k + 1):
                        C[a, b] = C[a, b] - cv * col[b] / piv

        if status[j] != 0:
            gains[j] = 0.0
            sizes[j] = 0
        else:
            gains[j] = gain
            sizes[j] = nsel
            t = 0
            for a in range(k):
                if chosen[a]:
                    sep[j, t] = members[a]
                    t += 1
    return gains_arr, sizes_arr, sep_arr, status_arr
