"""Sparse decomposable structure learning via greedy clique expansion."""

from ._kernels import backend_name
from .algorithm import Expansion, MfcfConfig, first_clique, mfcf, \
    mfcf_with_report
from .forest import (AdjacencyView, CliqueForest, ForestError, clique_expand,
                     is_chordal, load_forest, perfect_elimination_order,
                     save_forest, to_adjacency, validate_perfect_sequence)
from .gains import (GainConfig, GainResult, NotPositiveDefiniteError,
                    gaussian_gain, logdet, lrt_statistic, similarity_gain,
                    validated_gaussian_gain)
from .gaussian import (CorrelationMatrix, PrecisionEstimate,
                       assemble_precision, clique_tree_target,
                       gaussian_loglik_score, pre_shrink, sample_correlation,
                       shrunk_precision)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyView", "CliqueForest", "CorrelationMatrix", "Expansion",
    "ForestError", "GainConfig", "GainResult", "MfcfConfig",
    "NotPositiveDefiniteError", "PrecisionEstimate", "assemble_precision",
    "backend_name", "clique_expand", "clique_tree_target", "first_clique",
    "gaussian_gain", "gaussian_loglik_score", "is_chordal", "load_forest",
    "logdet", "lrt_statistic", "mfcf", "mfcf_with_report",
    "perfect_elimination_order", "pre_shrink", "sample_correlation",
    "save_forest", "shrunk_precision", "similarity_gain", "to_adjacency",
    "validate_perfect_sequence", "validated_gaussian_gain",
]
