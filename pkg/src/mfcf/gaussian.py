"""Gaussian machinery: correlation, precision assembly and shrinkage.

The precision matrix of a decomposable model is assembled in explicit
form: the inverse of every clique submatrix is added into a zero-padded
p-by-p frame and the inverse of every separator submatrix is subtracted,
with separator multiplicity respected.  All inverses are taken on the
small submatrices, never on the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .forest import CliqueForest, to_adjacency
from .gains import NotPositiveDefiniteError, PIVOT_TOL

TARGET_KINDS = ("identity", "clique_tree")


@dataclass
class CorrelationMatrix:
    """A correlation matrix plus the sample size it came from (if any)."""

    values: np.ndarray
    n_obs: int | None = None


def as_matrix(x) -> tuple[np.ndarray, int | None]:
    """Unwrap a CorrelationMatrix or bare array into (values, n_obs)."""
    if isinstance(x, CorrelationMatrix):
        return np.asarray(x.values, dtype=float), x.n_obs
    return np.asarray(x, dtype=float), None


def sample_correlation(data) -> CorrelationMatrix:
    """Pearson correlation of the columns of an n-by-p data matrix."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < 2:
        raise ValueError("need at least 2 observations")
    Xc = X - X.mean(axis=0)
    norms = np.sqrt((Xc * Xc).sum(axis=0))
    dead = np.where(norms == 0.0)[0]
    if dead.size:
        raise ValueError(f"zero-variance column(s): {dead.tolist()}")
    R = (Xc.T @ Xc) / np.outer(norms, norms)
    R = np.clip((R + R.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return CorrelationMatrix(values=R, n_obs=n)


def pre_shrink(Sigma, epsilon: float):
    """Blend towards the identity: (1 - eps) * Sigma + eps * I."""
    values, n_obs = as_matrix(Sigma)
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must be in [0, 1)")
    out = (1.0 - epsilon) * values + epsilon * np.eye(values.shape[0])
    np.fill_diagonal(out, 1.0)
    if isinstance(Sigma, CorrelationMatrix):
        return CorrelationMatrix(values=out, n_obs=n_obs)
    return out


def _block_inverse(block: np.ndarray, what: str) -> np.ndarray:
    if block.shape[0] == 1:
        if block[0, 0] <= PIVOT_TOL:
            raise NotPositiveDefiniteError(f"singular {what}")
        return np.array([[1.0 / block[0, 0]]])
    try:
        factor = cho_factor(block, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"singular {what}") from None
    d = np.diag(factor[0])
    if np.min(d * d) <= PIVOT_TOL:
        raise NotPositiveDefiniteError(f"singular {what}")
    return cho_solve(factor, np.eye(block.shape[0]))


def assemble_precision(Sigma, forest: CliqueForest,
                       verify: bool = True) -> np.ndarray:
    """Maximum-likelihood precision for the forest structure.

    Adds clique-submatrix inverses and subtracts separator-submatrix
    inverses into a zero frame; the support of the result is exactly the
    forest adjacency.
    """
    values, _ = as_matrix(Sigma)
    p = forest.p
    if values.shape != (p, p):
        raise ValueError(
            f"matrix shape {values.shape} does not match forest p={p}")
    J = np.zeros((p, p))
    for ci, clique in enumerate(forest.cliques):
        idx = np.asarray(clique, dtype=np.intp)
        try:
            inv = _block_inverse(values[np.ix_(idx, idx)], "clique")
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(
                f"singular clique submatrix: clique {ci} "
                f"{list(clique)}") from None
        J[np.ix_(idx, idx)] += inv
    for si, sep in enumerate(forest.separators):
        if not sep:
            continue
        idx = np.asarray(sep, dtype=np.intp)
        try:
            inv = _block_inverse(values[np.ix_(idx, idx)], "separator")
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(
                f"singular separator submatrix: separator {si} "
                f"{list(sep)}") from None
        J[np.ix_(idx, idx)] -= inv
    J = (J + J.T) / 2.0
    if verify and forest.is_complete():
        if np.min(np.linalg.eigvalsh(J)) <= -1e-8:
            raise NotPositiveDefiniteError(
                "assembled precision is not positive definite")
    return J


def clique_tree_target(Sigma, forest: CliqueForest):
    """Per-clique and per-separator constant-correlation target blocks.

    Every clique gets the mean of its off-diagonal correlations; a pair
    covered by several cliques gets the mean of those clique averages.
    Size-1 cliques have no pairs and use 0.
    """
    values, _ = as_matrix(Sigma)
    p = forest.p
    rho_sum = np.zeros((p, p))
    rho_cnt = np.zeros((p, p))
    for clique in forest.cliques:
        idx = np.asarray(clique, dtype=np.intp)
        k = len(clique)
        if k < 2:
            rho = 0.0
        else:
            block = values[np.ix_(idx, idx)]
            rho = (block.sum() - np.trace(block)) / (k * (k - 1))
        rho_sum[np.ix_(idx, idx)] += rho
        rho_cnt[np.ix_(idx, idx)] += 1.0
    with np.errstate(invalid="ignore"):
        pair_mean = np.where(rho_cnt > 0, rho_sum / rho_cnt, 0.0)

    def block_for(index_set):
        idx = np.asarray(index_set, dtype=np.intp)
        T = pair_mean[np.ix_(idx, idx)].copy()
        np.fill_diagonal(T, 1.0)
        return T

    clique_targets = [block_for(c) for c in forest.cliques]
    sep_targets = [block_for(s) if s else np.zeros((0, 0))
                   for s in forest.separators]
    return clique_targets, sep_targets


@dataclass
class PrecisionEstimate:
    J: np.ndarray
    forest: CliqueForest
    theta: float
    target_kind: str
    epsilon_pre: float = 0.0


def shrunk_precision(Sigma, forest: CliqueForest, theta: float,
                     target_kind: str = "clique_tree",
                     epsilon_pre: float = 0.0,
                     verify: bool = True) -> PrecisionEstimate:
    """Precision assembled from shrunk clique and separator blocks.

    Each block is mixed as (1 - theta) * sample + theta * target before
    inversion; theta = 0 reproduces the plain assembly, and theta = 1 with
    the identity target gives the identity matrix on correlation input.
    """
    if target_kind not in TARGET_KINDS:
        raise ValueError(f"unknown target kind {target_kind!r}")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must be in [0, 1]")
    values, _ = as_matrix(Sigma)
    p = forest.p
    if target_kind == "identity":
        clique_targets = [np.eye(len(c)) for c in forest.cliques]
        sep_targets = [np.eye(len(s)) for s in forest.separators]
    else:
        clique_targets, sep_targets = clique_tree_target(values, forest)

    J = np.zeros((p, p))
    for ci, clique in enumerate(forest.cliques):
        idx = np.asarray(clique, dtype=np.intp)
        mixed = (1.0 - theta) * values[np.ix_(idx, idx)] \
            + theta * clique_targets[ci]
        try:
            inv = _block_inverse(mixed, "clique")
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(
                f"singular mixed clique submatrix: clique {ci} "
                f"{list(clique)}") from None
        J[np.ix_(idx, idx)] += inv
    for si, sep in enumerate(forest.separators):
        if not sep:
            continue
        idx = np.asarray(sep, dtype=np.intp)
        mixed = (1.0 - theta) * values[np.ix_(idx, idx)] \
            + theta * sep_targets[si]
        try:
            inv = _block_inverse(mixed, "separator")
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(
                f"singular mixed separator submatrix: separator {si} "
                f"{list(sep)}") from None
        J[np.ix_(idx, idx)] -= inv
    J = (J + J.T) / 2.0
    if verify and forest.is_complete():
        if np.min(np.linalg.eigvalsh(J)) <= -1e-8:
            raise NotPositiveDefiniteError(
                "assembled precision is not positive definite")
    return PrecisionEstimate(J=J, forest=forest, theta=theta,
                             target_kind=target_kind,
                             epsilon_pre=epsilon_pre)


def gaussian_loglik_score(J, Sigma_test) -> float:
    """(p/2) (log det J - trace(Sigma_test J)), the additive constant dropped."""
    J = np.asarray(J, dtype=float)
    values, _ = as_matrix(Sigma_test)
    p = J.shape[0]
    try:
        L = np.linalg.cholesky(J)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("precision matrix not PD") from None
    ld = 2.0 * float(np.sum(np.log(np.diag(L))))
    return (p / 2.0) * (ld - float(np.sum(values * J)))


def support_pattern(forest: CliqueForest) -> np.ndarray:
    """Boolean p-by-p adjacency (diagonal True) implied by the forest."""
    p = forest.p
    mask = np.eye(p, dtype=bool)
    for a, b in to_adjacency(forest).edges:
        mask[a, b] = mask[b, a] = True
    return mask
