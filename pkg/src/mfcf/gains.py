"""Gain functions scoring a candidate (clique, vertex) expansion.

Each gain function returns the best separator inside the clique for the
given vertex together with the gain in the active score.  The greedy
separator search is delegated to the kernel backend; the functions here
are the single-candidate entry points and the statistical helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from . import _kernels

GAIN_MODES = ("similarity", "gauss_loglik", "gauss_loglik_validated")

PIVOT_TOL = 1e-10


class GainError(ValueError):
    pass


class NotPositiveDefiniteError(GainError):
    pass


@dataclass
class GainConfig:
    """Gain-function settings; clique-size limits echo the driving config."""

    min_clique_size: int = 4
    max_clique_size: int = 4
    p_value: float = 0.05
    mode: str = "gauss_loglik"
    threshold: float | None = None  # similarity mode: drop edges <= threshold

    def __post_init__(self):
        if self.mode not in GAIN_MODES:
            raise GainError(f"unknown gain mode {self.mode!r}")
        if not 0 < self.p_value < 1:
            raise GainError("p_value must be in (0, 1)")
        if self.min_clique_size < 1 or self.min_clique_size > self.max_clique_size:
            raise GainError("need 1 <= min_clique_size <= max_clique_size")


@dataclass
class GainResult:
    gain: float
    separator: tuple[int, ...]
    vertex: int
    source_clique: int = -1

    @property
    def valid(self) -> bool:
        return np.isfinite(self.gain)


def check_similarity_matrix(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise GainError(f"weight matrix must be square, got {W.shape}")
    if not np.allclose(W, W.T, atol=1e-12, rtol=0.0):
        raise GainError("weight matrix is not symmetric")
    if np.any(np.abs(np.diag(W)) > 1e-12):
        raise GainError("weight matrix must have zero diagonal")
    return W


def logdet(M: np.ndarray) -> float:
    """Log-determinant of a symmetric positive-definite matrix.

    Computed from the Cholesky factor; pivots below the tolerance mean the
    matrix is not positive definite.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise GainError(f"matrix must be square, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-8, rtol=0.0):
        raise GainError("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("not PD") from None
    d = np.diag(L)
    if np.min(d * d) <= PIVOT_TOL:
        raise NotPositiveDefiniteError("not PD")
    return 2.0 * float(np.sum(np.log(d)))


def similarity_gain(W, clique, vertex, target_sep_size,
                    threshold=None) -> GainResult:
    """Separator of the given size with the largest weight sum to vertex.

    The score of a vertex set counts ordered pairs, so the gain carries a
    uniform factor 2; a target equal to the clique size is the full
    expansion.  Ties break on the lowest vertex index.
    """
    W = check_similarity_matrix(W)
    members = tuple(sorted(clique))
    if not 1 <= target_sep_size <= len(members):
        raise GainError(
            f"target separator size {target_sep_size} not in "
            f"[1, {len(members)}]")
    gains, sizes, seps = _kernels.similarity_gains(
        W, np.asarray(members, dtype=np.int64),
        np.asarray([vertex], dtype=np.int64),
        target_sep_size, target_sep_size, threshold)
    sep = tuple(int(x) for x in seps[0, :sizes[0]])
    return GainResult(gain=float(gains[0]), separator=sep, vertex=vertex)


def gaussian_gain(Sigma, clique, vertex, cfg: GainConfig) -> GainResult:
    """Greedy log-likelihood gain of attaching vertex through this clique.

    The separator grows one member at a time up to ``max_clique_size - 1``
    members (or the whole clique); the returned gain is
    ``(log det S_sep - log det S_sep+v) / 2``, zero for the empty separator.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    members = tuple(sorted(clique))
    target = min(len(members), cfg.max_clique_size - 1) or 1
    gains, sizes, seps, status = _kernels.gaussian_gains(
        Sigma, np.asarray(members, dtype=np.int64),
        np.asarray([vertex], dtype=np.int64), target,
        ptol=PIVOT_TOL)
    if status[0]:
        return GainResult(gain=float("-inf"), separator=(), vertex=vertex)
    sep = tuple(int(x) for x in seps[0, :sizes[0]])
    return GainResult(gain=float(gains[0]), separator=sep, vertex=vertex)


def deviance_thresholds(p_value: float, max_df: int) -> np.ndarray:
    """Chi-square quantiles for the incremental deviance test, df = 1..max_df."""
    return chi2.ppf(1.0 - p_value, np.arange(1, max_df + 1))


def validated_gaussian_gain(Sigma, clique, vertex, nu,
                            cfg: GainConfig) -> GainResult:
    """Greedy gain where the expansion must stay statistically significant.

    Growth stops at the first separator size ``s`` whose whole-expansion
    deviance ``2 * nu * gain`` fails to clear the chi-square quantile with
    ``s`` degrees of freedom (the expansion adds ``s`` edges); when even
    the first member fails, the gain is zero and the separator empty, so
    the vertex would attach as a disconnected singleton.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    if nu is None or nu <= 0:
        raise GainError("validated gain needs a positive sample size nu")
    members = tuple(sorted(clique))
    target = min(len(members), cfg.max_clique_size - 1) or 1
    thresholds = deviance_thresholds(cfg.p_value, target)
    gains, sizes, seps, status = _kernels.gaussian_gains(
        Sigma, np.asarray(members, dtype=np.int64),
        np.asarray([vertex], dtype=np.int64), target,
        nu=float(nu), thresholds=thresholds, ptol=PIVOT_TOL)
    if status[0]:
        return GainResult(gain=float("-inf"), separator=(), vertex=vertex)
    sep = tuple(int(x) for x in seps[0, :sizes[0]])
    return GainResult(gain=float(gains[0]), separator=sep, vertex=vertex)


def lrt_statistic(Sigma0, Sigma1, nu, raw=False) -> float:
    """Likelihood-ratio statistic for two covariance matrices.

    By default includes the ``-k`` centering term so that identical
    matrices give exactly zero (the chi-square calibration requires a zero
    statistic under the null); ``raw=True`` drops the centering.
    """
    S0 = np.asarray(Sigma0, dtype=float)
    S1 = np.asarray(Sigma1, dtype=float)
    if S0.shape != S1.shape:
        raise GainError(f"dimension mismatch: {S0.shape} vs {S1.shape}")
    k = S0.shape[0]
    ld0 = logdet(S0)
    ld1 = logdet(S1)
    trace = float(np.trace(np.linalg.solve(S1, S0)))
    centre = 0.0 if raw else float(k)
    return float(nu) * (ld0 - ld1 + trace - centre)


@dataclass
class _TableParams:
    """Resolved per-run gain-evaluation parameters used by the main loop."""

    mode: str
    matrix: np.ndarray
    min_size: int
    max_size: int
    nu: float = 0.0
    thresholds: np.ndarray | None = None
    threshold: float | None = None
    retired: set = field(default_factory=set)

    def size_range(self, k: int) -> tuple[int, int]:
        # Cliques below the minimum size only grow (full expansion); at the
        # maximum size only proper separators are scored.
        if k < self.min_size:
            return k, k
        hi = k if k < self.max_size else self.max_size - 1
        lo = min(hi, max(1, self.min_size - 1))
        return lo, hi

    def compliant(self, sep_size: int, k: int) -> bool:
        # Soft minimum-size rule: separators below min-1 are kept in the
        # table but only win when no compliant entry has positive gain.
        return sep_size > 0 and (sep_size == k
                                 or sep_size >= self.min_size - 1)


def score_candidates(params: _TableParams, members, cands):
    """Score one clique against candidate vertices; returns (gains, seps).

    ``gains`` is a float array aligned with ``cands``; invalid candidates
    get -inf.  ``seps`` is a list of separator tuples.
    """
    members = np.asarray(sorted(members), dtype=np.int64)
    cands = np.asarray(cands, dtype=np.int64)
    k = len(members)
    lo, hi = params.size_range(k)
    if params.mode == "similarity":
        gains, sizes, seps = _kernels.similarity_gains(
            params.matrix, members, cands, lo, hi, params.threshold)
        status = np.zeros(len(cands), dtype=np.int64)
    else:
        thr = params.thresholds[:hi] if params.thresholds is not None else None
        gains, sizes, seps, status = _kernels.gaussian_gains(
            params.matrix, members, cands, hi, nu=params.nu,
            thresholds=thr, ptol=PIVOT_TOL)
    out_gains = np.where(status == 0, gains, float("-inf"))
    out_seps = []
    for j in range(len(cands)):
        sep = tuple(int(x) for x in seps[j, :sizes[j]])
        if params.retired and sep in params.retired:
            g, sep = _rescore_avoiding(params, members, int(cands[j]), lo, hi)
            out_gains[j] = g
        out_seps.append(sep)
    return out_gains, out_seps


def _rescore_avoiding(params, members, vertex, lo, hi):
    """Recompute one entry when its best separator has been retired."""
    if params.mode == "similarity":
        return _best_subset_avoiding(params, members, vertex, lo, hi)
    return _greedy_avoiding(params, members, vertex, hi)


def _best_subset_avoiding(params, members, vertex, lo, hi):
    import heapq

    W = params.matrix
    w = np.array([W[i, vertex] for i in members])
    if params.threshold is not None:
        keep = w > params.threshold
        if not keep.any():
            return 0.0, ()
        members = np.asarray(members)[keep]
        w = w[keep]
        lo = min(lo, len(members))
        hi = min(hi, len(members))
    order = np.lexsort((members, -w))
    ids = [int(members[i]) for i in order]
    ws = [float(w[i]) for i in order]
    lo = min(lo, len(ids))
    hi = min(hi, len(ids))
    best_gain, best_sep = float("-inf"), None
    for s in range(lo, hi + 1):
        start = tuple(range(s))
        heap = [(-sum(ws[i] for i in start), start)]
        seen = {start}
        while heap:
            neg, pos = heapq.heappop(heap)
            sep = tuple(sorted(ids[i] for i in pos))
            if sep not in params.retired:
                gain = -2.0 * neg
                # Sizes scan ascending, so >= lets larger sizes win ties.
                if best_sep is None or gain >= best_gain:
                    best_gain, best_sep = gain, sep
                break
            for j in range(s - 1, -1, -1):
                nxt = pos[j] + 1
                if nxt < len(ids) and (j == s - 1 or nxt < pos[j + 1]):
                    child = pos[:j] + (nxt,) + pos[j + 1:]
                    if child not in seen:
                        seen.add(child)
                        heapq.heappush(
                            heap,
                            (-sum(ws[i] for i in child), child))
    if best_sep is None:
        return float("-inf"), ()
    return best_gain, best_sep


def _greedy_avoiding(params, members, vertex, target):
    """Depth-first greedy separator growth skipping retired final sets.

    Branches to lower-ranked members only to escape a retired separator;
    a failed deviance test ends the branch outright, because the deviance
    is monotone in the selection score.
    """
    Sigma = params.matrix
    validated = params.thresholds is not None

    def cond_stats(sep):
        rest = [m for m in members if m not in sep]
        if not sep:
            dv = Sigma[vertex, vertex]
            c = {u: Sigma[u, vertex] for u in rest}
            d = {u: Sigma[u, u] for u in rest}
            return dv, c, d
        S = Sigma[np.ix_(sep, sep)]
        rhs_v = Sigma[np.ix_(sep, [vertex])]
        sol_v = np.linalg.solve(S, rhs_v)
        dv = Sigma[vertex, vertex] - float(rhs_v.T @ sol_v)
        c, d = {}, {}
        for u in rest:
            rhs_u = Sigma[np.ix_(sep, [u])]
            sol_u = np.linalg.solve(S, rhs_u)
            c[u] = Sigma[u, vertex] - float(rhs_u.T @ sol_v)
            d[u] = Sigma[u, u] - float(rhs_u.T @ sol_u)
        return dv, c, d

    def close(sep, gain):
        key = tuple(sorted(sep))
        if not key:
            return 0.0, ()
        return (gain, key) if key not in params.retired else None

    def grow(sep, gain):
        if len(sep) == target:
            return close(sep, gain)
        dv, c, d = cond_stats(sep)
        if dv <= PIVOT_TOL:
            return None
        scored = sorted(
            (-(c[u] * c[u]) / (d[u] * dv), u)
            for u in sorted(d) if d[u] > PIVOT_TOL)
        for neg_score, u in scored:
            if 1.0 + neg_score <= PIVOT_TOL:
                continue
            delta = -0.5 * np.log1p(neg_score)
            if validated and 2.0 * params.nu * (gain + delta) <= \
                    params.thresholds[len(sep)]:
                break
            res = grow(sep + [u], gain + delta)
            if res is not None:
                return res
        return close(sep, gain)

    res = grow([], 0.0)
    if res is None:
        return float("-inf"), ()
    return res
