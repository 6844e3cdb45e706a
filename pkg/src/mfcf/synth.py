"""Synthetic ground truths and a seeded multivariate normal sampler.

All generators take a ``numpy.random.Generator`` so that experiments can
split reproducible streams from one master seed with
``numpy.random.SeedSequence.spawn``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import CliqueForest, add_seed_clique, clique_expand
from .gaussian import assemble_precision


@dataclass
class GroundTruth:
    """Benchmark covariance/precision pair, plus the forest when sparse."""

    sigma_true: np.ndarray
    j_true: np.ndarray
    forest_true: CliqueForest | None = None


def random_clique_forest(p: int, rng, max_clique_size: int = 4,
                         empty_sep_prob: float = 0.0) -> CliqueForest:
    """Forest built by clique expansions with uniformly random choices.

    Vertices arrive in a random order; each one picks a uniform clique, a
    uniform separator size in [1, clique size] (capped so cliques never
    exceed ``max_clique_size``) and a uniform subset of that size.  With
    probability ``empty_sep_prob`` a vertex starts a new disconnected root
    instead.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    order = [int(v) for v in rng.permutation(p)]
    forest = CliqueForest(p=p)
    add_seed_clique(forest, [order[0]])
    for v in order[1:]:
        if empty_sep_prob > 0.0 and rng.random() < empty_sep_prob:
            clique_expand(forest, 0, v, ())
            continue
        ci = int(rng.integers(len(forest.cliques)))
        clique = forest.cliques[ci]
        k = len(clique)
        smax = k if k < max_clique_size else max_clique_size - 1
        s = int(rng.integers(1, smax + 1))
        if s == k:
            sep = clique
        else:
            pick = rng.choice(k, size=s, replace=False)
            sep = tuple(clique[i] for i in sorted(pick))
        clique_expand(forest, ci, v, sep)
    return forest


def chordal_precision(forest: CliqueForest, noise_var: float = 0.1
                      ) -> GroundTruth:
    """Sparse precision whose support is exactly the forest adjacency.

    Uses the per-clique factor construction in closed form: a unit-variance
    factor per clique shared by its members plus independent noise gives
    Var(X_i) = (#cliques containing i) + noise_var and
    Cov(X_i, X_j) = #cliques containing both.  The precision is then the
    clique/separator assembly of that covariance, and the benchmark
    covariance is its exact inverse.
    """
    p = forest.p
    m = len(forest.cliques)
    B = np.zeros((p, m))
    for ci, clique in enumerate(forest.cliques):
        B[list(clique), ci] = 1.0
    M = B @ B.T + noise_var * np.eye(p)
    J = assemble_precision(M, forest)
    sigma = np.linalg.inv(J)
    sigma = (sigma + sigma.T) / 2.0
    return GroundTruth(sigma_true=sigma, j_true=J, forest_true=forest)


def random_pd_matrix(p: int, rng, eig_range=(0.01, 100.0)) -> GroundTruth:
    """Dense PD covariance with uniform eigenvalues and a Haar rotation."""
    lo, hi = eig_range
    if not 0 < lo <= hi:
        raise ValueError("eigenvalue range must satisfy 0 < lo <= hi")
    eigs = rng.uniform(lo, hi, size=p)
    A = rng.standard_normal((p, p))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))  # sign-corrected: Haar-distributed
    sigma = (Q * eigs) @ Q.T
    sigma = (sigma + sigma.T) / 2.0
    j = (Q * (1.0 / eigs)) @ Q.T
    j = (j + j.T) / 2.0
    return GroundTruth(sigma_true=sigma, j_true=j, forest_true=None)


def factor_model_cov(p: int, f: int, rng,
                     omega_range=(0.5, 1.5)) -> GroundTruth:
    """Correlation matrix of a linear factor model with f factors.

    Loadings are iid standard normal, idiosyncratic variances uniform in
    ``omega_range``; the systematic-plus-idiosyncratic covariance is
    normalised to correlation form.  Dense: no forest.
    """
    if not 1 <= f < p:
        raise ValueError("need 1 <= f < p")
    lam = rng.standard_normal((p, f))
    omega = rng.uniform(omega_range[0], omega_range[1], size=p)
    sigma = lam @ lam.T + np.diag(omega)
    d = 1.0 / np.sqrt(np.diag(sigma))
    corr = sigma * np.outer(d, d)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    j = np.linalg.inv(corr)
    j = (j + j.T) / 2.0
    return GroundTruth(sigma_true=corr, j_true=j, forest_true=None)


def mvn_sample(sigma_true: np.ndarray, n: int, rng) -> np.ndarray:
    """n iid rows from N(0, sigma) via the Cholesky factor."""
    sigma = np.asarray(sigma_true, dtype=float)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is not positive definite") from None
    Z = rng.standard_normal((n, sigma.shape[0]))
    return Z @ L.T


def cov_to_corr(sigma: np.ndarray) -> np.ndarray:
    """Rescale a covariance matrix to unit diagonal."""
    d = 1.0 / np.sqrt(np.diag(sigma))
    corr = sigma * np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return (corr + corr.T) / 2.0
