"""The greedy clique-forest construction loop.

The algorithm seeds the forest with one clique (or a user-supplied list),
keeps a gain table scoring every (clique, outstanding vertex) pair, and
repeatedly applies the best clique expansion until every vertex is
placed.  The table is maintained incrementally: placing a vertex drops
its column, a new or grown clique gets its row (re)scored, and with
separator reuse disabled the used separator is retired from future
proposals.

Determinism: ties in the gain argmax break on the lowest
(clique index, vertex) pair, and gain evaluation order is fixed, so a
given input and configuration always produce the same forest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import gains as _g
from .forest import (CliqueForest, ForestError, clique_expand,
                     validate_perfect_sequence)
from .gaussian import as_matrix, sample_correlation

_NEG_INF = float("-inf")


@dataclass
class MfcfConfig:
    max_clique_size: int = 4
    min_clique_size: int = 4
    reuse_separators: bool = True
    initial_cliques: list | None = None
    initial_separators: list | None = None
    gain: _g.GainConfig = field(default_factory=_g.GainConfig)
    n_obs: int | None = None  # overrides the sample size for validation
    seed: int | None = None  # reserved; the construction is deterministic

    def __post_init__(self):
        if self.min_clique_size < 1:
            raise ValueError("min_clique_size must be >= 1")
        if self.max_clique_size < self.min_clique_size:
            raise ValueError("max_clique_size must be >= min_clique_size")


@dataclass
class Expansion:
    """One accepted expansion: enough to replay the construction."""

    step: int
    source_clique: int
    vertex: int
    separator: tuple[int, ...]
    gain: float
    case: str  # "attach" | "extend" | "isolate"


def _resolve_input(W, cfg: MfcfConfig, input_kind: str):
    """Return (matrix for the gain functions, n_obs or None)."""
    values, n_obs = as_matrix(W)
    if input_kind == "auto":
        square = values.ndim == 2 and values.shape[0] == values.shape[1]
        if square and np.allclose(values, values.T, atol=1e-10, rtol=0.0):
            input_kind = "similarity"
        else:
            input_kind = "data"
    if input_kind == "data":
        corr = sample_correlation(values)
        values, n_obs = corr.values, corr.n_obs
    elif input_kind != "similarity":
        raise ValueError(f"unknown input kind {input_kind!r}")
    if cfg.n_obs is not None:
        n_obs = cfg.n_obs
    if cfg.gain.mode == "similarity":
        values = values.copy()
        np.fill_diagonal(values, 0.0)
    return np.ascontiguousarray(values, dtype=float), n_obs


def _table_params(cfg: MfcfConfig, matrix: np.ndarray,
                  n_obs) -> _g._TableParams:
    p = matrix.shape[0]
    max_size = min(cfg.max_clique_size, p) if p >= 2 else 1
    min_size = min(cfg.min_clique_size, max_size)
    mode = cfg.gain.mode
    thresholds = None
    nu = 0.0
    if mode == "gauss_loglik_validated":
        if not n_obs or n_obs <= 0:
            raise ValueError(
                "validated gain needs the sample size: pass a data matrix, "
                "a CorrelationMatrix with n_obs, or set MfcfConfig.n_obs")
        nu = float(n_obs)
        thresholds = _g.deviance_thresholds(cfg.gain.p_value,
                                            max(max_size - 1, 1))
    return _g._TableParams(
        mode=mode, matrix=matrix, min_size=min_size, max_size=max_size,
        nu=nu, thresholds=thresholds, threshold=cfg.gain.threshold,
        retired=set())


def first_clique(W, cfg: MfcfConfig | None = None,
                 input_kind: str = "auto") -> tuple[int, ...]:
    """Estimate of the best starting clique.

    Starts from the pair with the strongest association under the active
    gain and grows by full expansions until ``min_clique_size`` members;
    with fewer than ``min_clique_size`` vertices, returns them all.
    """
    cfg = cfg or MfcfConfig()
    matrix, n_obs = _resolve_input(W, cfg, input_kind)
    params = _table_params(cfg, matrix, n_obs)
    return tuple(sorted(_grow_seed(params, cfg)))


def _grow_seed(params: _g._TableParams, cfg: MfcfConfig) -> list[int]:
    """Seed members in growth order."""
    p = params.matrix.shape[0]
    want = min(cfg.min_clique_size, p)
    if p == 1 or want >= p:
        return list(range(p))
    scores = params.matrix.copy()
    if params.mode != "similarity":
        scores = scores * scores  # monotone proxy for the pairwise gain
    np.fill_diagonal(scores, _NEG_INF)
    a, b = np.unravel_index(int(np.argmax(scores)), scores.shape)
    if want <= 1:
        return [int(min(a, b))]
    seed = [int(a), int(b)]
    while len(seed) < want:
        outstanding = np.array(
            [v for v in range(p) if v not in seed], dtype=np.int64)
        # Full expansion of the current seed: with min above the current
        # size only the whole clique is offered as separator.
        grow_params = replace(params, min_size=len(seed) + 1,
                              max_size=len(seed) + 1, thresholds=None)
        g, seps = _g.score_candidates(grow_params, seed, outstanding)
        j = int(np.argmax(g))
        seed.append(int(outstanding[j]))
    return seed


def _seed_from_initial(cfg: MfcfConfig, p: int) -> CliqueForest:
    forest = CliqueForest(p=p)
    cliques = [tuple(sorted(int(v) for v in c)) for c in cfg.initial_cliques]
    seps_in = cfg.initial_separators
    for clique in cliques:
        for v in clique:
            if not 0 <= v < p:
                raise ForestError(
                    f"initial clique vertex {v} out of range [0, {p})")
    history: set[int] = set()
    for i, clique in enumerate(cliques):
        if i == 0:
            forest.cliques.append(clique)
            forest.vertex_order.extend(clique)
            history |= set(clique)
            continue
        if seps_in is not None:
            sep = tuple(sorted(int(v) for v in seps_in[i - 1]))
        else:
            sep = tuple(sorted(set(clique) & history))
        if sep:
            parent = None
            for j in range(i):
                if set(sep) <= set(forest.cliques[j]):
                    parent = j
                    break
            if parent is None:
                raise ForestError(
                    "initial cliques are not a perfect sequence: separator "
                    f"{list(sep)} of clique {i} not inside an earlier clique")
            forest.cliques.append(clique)
            forest.separators.append(sep)
            forest.tree_edges.append(
                (parent, len(forest.cliques) - 1, len(forest.separators) - 1))
        else:
            forest.cliques.append(clique)
        new = [v for v in clique if v not in history]
        forest.vertex_order.extend(new)
        history |= set(clique)
    if not validate_perfect_sequence(forest):
        raise ForestError("initial cliques are not a perfect sequence")
    return forest


class _GainTable:
    """Dense gain table over (clique row, vertex column)."""

    def __init__(self, p: int, params: _g._TableParams):
        self.params = params
        self.G = np.full((p, p), _NEG_INF)
        self.compliant = np.zeros((p, p), dtype=bool)
        self.seps: dict[tuple[int, int], tuple[int, ...]] = {}

    def score_row(self, ci: int, members, outstanding: np.ndarray) -> None:
        self.G[ci, :] = _NEG_INF
        self.compliant[ci, :] = False
        for key in [k for k in self.seps if k[0] == ci]:
            del self.seps[key]
        if outstanding.size == 0:
            return
        g, seps = _g.score_candidates(self.params, members, outstanding)
        k = len(members)
        for j, v in enumerate(outstanding):
            v = int(v)
            self.G[ci, v] = g[j]
            self.seps[(ci, v)] = seps[j]
            self.compliant[ci, v] = np.isfinite(g[j]) and \
                self.params.compliant(len(seps[j]), k)

    def drop_vertex(self, v: int, n_cliques: int) -> None:
        self.G[:, v] = _NEG_INF
        self.compliant[:, v] = False
        for ci in range(n_cliques):
            self.seps.pop((ci, v), None)

    def retire(self, sep: tuple[int, ...], forest: CliqueForest) -> None:
        """Retire a used separator and rescore the entries that held it."""
        self.params.retired.add(sep)
        hits = [(ci, v) for (ci, v), s in self.seps.items() if s == sep]
        for ci, v in hits:
            varr = np.asarray([v], dtype=np.int64)
            g, seps = _g.score_candidates(
                self.params, forest.cliques[ci], varr)
            self.G[ci, v] = g[0]
            self.seps[(ci, v)] = seps[0]
            self.compliant[ci, v] = np.isfinite(g[0]) and \
                self.params.compliant(len(seps[0]), len(forest.cliques[ci]))

    def best(self) -> tuple[int, int] | None:
        """Best entry honouring the soft minimum-size rule."""
        masked = np.where(self.compliant, self.G, _NEG_INF)
        flat = int(np.argmax(masked))
        ci, v = np.unravel_index(flat, masked.shape)
        if masked[ci, v] > 0.0:
            return int(ci), int(v)
        flat = int(np.argmax(self.G))
        ci, v = np.unravel_index(flat, self.G.shape)
        if self.G[ci, v] == _NEG_INF:
            return None
        return int(ci), int(v)


def mfcf_with_report(W, cfg: MfcfConfig | None = None,
                     input_kind: str = "auto"):
    """Run the construction and return (forest, expansion log)."""
    cfg = cfg or MfcfConfig()
    matrix, n_obs = _resolve_input(W, cfg, input_kind)
    p = matrix.shape[0]
    if p < 1:
        raise ValueError("need at least one variable")
    params = _table_params(cfg, matrix, n_obs)

    if cfg.initial_cliques:
        forest = _seed_from_initial(cfg, p)
        if not cfg.reuse_separators:
            params.retired.update(forest.separators)
    else:
        seed = _grow_seed(params, cfg)
        forest = CliqueForest(p=p)
        forest.cliques.append(tuple(sorted(seed)))
        forest.vertex_order.extend(seed)  # growth order, not sorted

    outstanding = sorted(set(range(p)) - forest.placed())
    if not outstanding:
        return forest, []

    table = _GainTable(p, params)
    out_arr = np.asarray(outstanding, dtype=np.int64)
    for ci, clique in enumerate(forest.cliques):
        table.score_row(ci, clique, out_arr)

    log: list[Expansion] = []
    step = 0
    while outstanding:
        out_arr = np.asarray(outstanding, dtype=np.int64)
        pick = table.best()
        if pick is None:
            # No scorable entry at all: isolate the lowest vertex.
            ci, v, sep, gain = 0, outstanding[0], (), 0.0
        else:
            ci, v = pick
            sep = table.seps[(ci, v)]
            gain = float(table.G[ci, v])
        step += 1

        new_index = clique_expand(forest, ci, v, sep)
        if len(sep) == 0:
            case = "isolate"
        elif new_index == ci:
            case = "extend"
        else:
            case = "attach"
        log.append(Expansion(step=step, source_clique=ci, vertex=v,
                             separator=sep, gain=gain, case=case))

        outstanding.remove(v)
        out_arr = np.asarray(outstanding, dtype=np.int64)
        table.drop_vertex(v, len(forest.cliques))
        if case == "attach" and not cfg.reuse_separators:
            table.retire(sep, forest)
        if case == "extend":
            table.score_row(ci, forest.cliques[ci], out_arr)
        else:
            table.score_row(new_index, forest.cliques[new_index], out_arr)
    return forest, log


def mfcf(W, cfg: MfcfConfig | None = None,
         input_kind: str = "auto") -> CliqueForest:
    """Build a clique forest greedily; see ``mfcf_with_report``."""
    forest, _ = mfcf_with_report(W, cfg, input_kind)
    return forest
