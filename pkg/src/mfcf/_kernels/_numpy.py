"""Pure-numpy gain kernels (fallback backend).

Batched over candidate vertices: one call scores one clique against every
outstanding vertex.  The compiled backend in ``_native.pyx`` implements
the same arithmetic in the same order; keep the two in lockstep.
"""

import numpy as np

NAME = "python"

_NEG_INF = float("-inf")


def similarity_gains(W, members, cands, s_lo, s_hi, threshold=None):
    """Best separator per candidate vertex under the weight-sum score.

    Separator members are the top-``s`` clique members by edge weight to
    the candidate (ties to the lowest vertex index); the size ``s`` is the
    best in ``[s_lo, s_hi]`` (ties to the largest size).  ``s == len(members)``
    denotes full expansion.  Gains carry the ordered-pair factor 2.
    Returns (gains, sep_sizes, sep_members padded with -1).
    """
    members = np.asarray(members, dtype=np.int64)
    cands = np.asarray(cands, dtype=np.int64)
    k, m = len(members), len(cands)
    wmv = W[np.ix_(members, cands)]
    order = np.argsort(-wmv, axis=0, kind="stable")
    sorted_w = np.take_along_axis(wmv, order, axis=0)
    if threshold is None:
        elig = np.full(m, k, dtype=np.int64)
    else:
        elig = (sorted_w > threshold).sum(axis=0).astype(np.int64)
    csum = np.cumsum(sorted_w, axis=0)

    lo = np.minimum(s_lo, elig)
    hi = np.minimum(s_hi, elig)
    best = np.full(m, _NEG_INF)
    best_size = np.zeros(m, dtype=np.int64)
    for s in range(1, s_hi + 1):
        g = 2.0 * csum[s - 1]
        upd = (s >= lo) & (s <= hi) & (g >= best)
        best[upd] = g[upd]
        best_size[upd] = s

    empty = elig == 0
    best[empty] = 0.0
    best_size[empty] = 0

    sep_members = np.full((m, max(s_hi, 1)), -1, dtype=np.int64)
    for j in range(m):
        s = best_size[j]
        if s:
            sep_members[j, :s] = np.sort(members[order[:s, j]])
    return best, best_size, sep_members


def gaussian_gains(Sigma, members, cands, target, nu=0.0, thresholds=None,
                   ptol=1e-10):
    """Greedy separator growth per candidate under the log-likelihood gain.

    Grows each candidate's separator one clique member at a time, always
    taking the member with the largest squared conditional correlation to
    the candidate, up to ``target`` members (``target == len(members)``
    yields a full expansion).  With ``thresholds`` given (chi-square
    quantiles indexed by the number of edges the expansion adds), growth
    stops as soon as the whole-expansion deviance ``2 * nu * gain`` no
    longer clears ``thresholds[size - 1]``; a candidate whose first member
    fails keeps gain 0 and an empty separator.  Returns
    (gains, sep_sizes, sep_members, status) where status 1 marks a
    numerically non-positive-definite candidate.
    """
    members = np.asarray(members, dtype=np.int64)
    cands = np.asarray(cands, dtype=np.int64)
    k, m = len(members), len(cands)
    validated = thresholds is not None

    C = np.empty((m, k + 1, k + 1))
    base = Sigma[np.ix_(members, members)]
    cols = Sigma[np.ix_(members, cands)].T
    C[:, :k, :k] = base[None, :, :]
    C[:, :k, k] = cols
    C[:, k, :k] = cols
    C[:, k, k] = Sigma[cands, cands]

    gains = np.zeros(m)
    sizes = np.zeros(m, dtype=np.int64)
    chosen = np.zeros((m, k), dtype=bool)
    status = np.zeros(m, dtype=np.int64)
    rows = np.arange(m)

    status[C[:, k, k] <= ptol] = 1
    active = status == 0

    diag_idx = np.arange(k)
    for step in range(1, target + 1):
        if not active.any():
            break
        du = C[:, diag_idx, diag_idx]
        cv = C[:, :k, k]
        dv = C[:, k, k]
        usable = (~chosen) & (du > ptol) & active[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            score = (cv * cv) / (du * dv[:, None])
        score = np.where(usable, score, _NEG_INF)
        istar = np.argmax(score, axis=1)
        smax = score[rows, istar]
        exhausted = active & ~usable[rows, istar]
        if step == 1:
            status[exhausted] = 1
        active &= ~exhausted

        singular = active & (1.0 - smax <= ptol)
        status[singular] = 1
        active &= ~singular

        with np.errstate(invalid="ignore"):
            delta = -0.5 * np.log1p(-smax)
        take = active.copy()
        if validated:
            # Whole-expansion test: the candidate would add `step` edges.
            rejected = take & (2.0 * nu * (gains + delta)
                               <= thresholds[step - 1])
            active &= ~rejected
            take &= ~rejected
        if not take.any():
            continue
        t = np.where(take)[0]
        gains[t] += delta[t]
        sizes[t] += 1
        chosen[t, istar[t]] = True
        piv = C[t, istar[t], istar[t]]
        col = C[t, :, istar[t]]
        C[t] -= col[:, :, None] * col[:, None, :] / piv[:, None, None]

    sep_members = np.full((m, max(target, 1)), -1, dtype=np.int64)
    for j in range(m):
        s = sizes[j]
        if s and status[j] == 0:
            sep_members[j, :s] = members[chosen[j]]
        elif status[j] != 0:
            sizes[j] = 0
            gains[j] = 0.0
    return gains, sizes, sep_members, status
