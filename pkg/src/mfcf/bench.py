"""Experiment harness: train/validation/test protocol and indicators.

Each method is fitted on a training set, its hyper-parameters picked by
validation log-likelihood over a grid, and the selected model scored on
held-out test sets with seven indicators.  Datasets are drawn from one
master seed through ``numpy.random.SeedSequence.spawn``, one child stream
per dataset, so runs are reproducible regardless of evaluation order.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import synth
from .algorithm import MfcfConfig, mfcf
from .forest import CliqueForest
from .gains import GainConfig, NotPositiveDefiniteError
from .gaussian import (CorrelationMatrix, gaussian_loglik_score, pre_shrink,
                       sample_correlation, shrunk_precision)

METHOD_NAMES = ("MFCF_FIX", "MFCF_FIX_ID", "MFCF_VAR", "MFCF_VAR_ID",
                "SHRINKAGE", "NULL", "EXTERNAL")

ZERO_TOL = 1e-10

DEFAULT_CLIQUE_SIZES = tuple(range(2, 21))
DEFAULT_THETAS = tuple(np.linspace(0.0, 1.0, 21))


# ---------------------------------------------------------------------------
# Performance indicators

def confusion_metrics(J_est, J_true, zero_tol: float = ZERO_TOL):
    """(accuracy, sensitivity, specificity) over off-diagonal entries."""
    A = np.asarray(J_est)
    B = np.asarray(J_true)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    off = ~np.eye(A.shape[0], dtype=bool)
    est_nz = np.abs(A[off]) > zero_tol
    true_nz = np.abs(B[off]) > zero_tol
    tp = int(np.sum(est_nz & true_nz))
    tn = int(np.sum(~est_nz & ~true_nz))
    fp = int(np.sum(est_nz & ~true_nz))
    fn = int(np.sum(~est_nz & true_nz))
    total = tp + tn + fp + fn
    accuracy = (tp + tn) / total if total else 1.0
    sensitivity = tp / (tp + fn) if (tp + fn) else 1.0
    specificity = tn / (tn + fp) if (tn + fp) else 1.0
    return accuracy, sensitivity, specificity


def matrix_correlation(J_est, J_true) -> float:
    """Pearson correlation of the two matrices flattened to p^2 vectors."""
    a = np.asarray(J_est, dtype=float).ravel()
    b = np.asarray(J_true, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    ac = a - a.mean()
    bc = b - b.mean()
    na = np.sqrt(ac @ ac)
    nb = np.sqrt(bc @ bc)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero variance in flattened matrix")
    return float((ac @ bc) / (na * nb))


def eig_distance(J_est, J_true, normalize: bool = False) -> float:
    """Euclidean distance between the sorted spectra.

    With ``normalize`` the distance is scaled so the identity matrix
    estimate scores exactly 1.
    """
    le = np.sort(np.linalg.eigvalsh(np.asarray(J_est, dtype=float)))[::-1]
    lt = np.sort(np.linalg.eigvalsh(np.asarray(J_true, dtype=float)))[::-1]
    d = float(np.sqrt(np.sum((le - lt) ** 2)))
    if normalize:
        li = np.ones_like(lt)
        ref = float(np.sqrt(np.sum((li - lt) ** 2)))
        return d / ref if ref > 0 else d
    return d


def inv_eig_distance(J_est, J_true, normalize: bool = False) -> float:
    """Euclidean distance between the sorted reciprocal spectra."""
    le = np.linalg.eigvalsh(np.asarray(J_est, dtype=float))
    lt = np.linalg.eigvalsh(np.asarray(J_true, dtype=float))
    if np.any(le == 0.0) or np.any(lt == 0.0):
        raise ValueError("zero eigenvalue in reciprocal spectrum")
    re = np.sort(1.0 / le)[::-1]
    rt = np.sort(1.0 / lt)[::-1]
    d = float(np.sqrt(np.sum((re - rt) ** 2)))
    if normalize:
        ref = float(np.sqrt(np.sum((1.0 - rt) ** 2)))
        return d / ref if ref > 0 else d
    return d


def nonzero_count(J, zero_tol: float = ZERO_TOL) -> int:
    """Number of nonzero off-diagonal entries in the upper triangle."""
    A = np.asarray(J)
    iu = np.triu_indices(A.shape[0], k=1)
    return int(np.sum(np.abs(A[iu]) > zero_tol))


# ---------------------------------------------------------------------------
# Methods and selection

@dataclass
class MethodSpec:
    name: str
    clique_sizes: tuple = DEFAULT_CLIQUE_SIZES
    thetas: tuple = DEFAULT_THETAS
    p_value: float = 0.05
    external_path: str | None = None
    external_matrix: np.ndarray | None = None
    label: str | None = None  # report name; lets several EXTERNALs coexist

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}")
        if not self.clique_sizes or not self.thetas:
            raise ValueError("grids must be non-empty")
        if self.label is None:
            self.label = self.name


@dataclass
class FittedModel:
    method: str
    J: np.ndarray
    val_loglik: float
    theta: float | None = None
    clique_size: int | None = None
    forest: CliqueForest | None = None
    per_size_hist: dict = field(default_factory=dict)

    @property
    def nonzeros(self) -> int:
        return nonzero_count(self.J)


def _dense_pd_inverse(M: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix not PD") from None
    inv = np.linalg.inv(L)
    return inv.T @ inv


def grid_search(train_data, validation_data, method: MethodSpec,
                epsilon: float = 0.05) -> FittedModel:
    """Fit one method, selecting hyper-parameters on validation likelihood."""
    corr_train = sample_correlation(train_data)
    corr_val = sample_correlation(validation_data)
    p = corr_train.values.shape[0]

    if method.name == "NULL":
        J = np.eye(p)
        return FittedModel(method=method.label, J=J,
                           val_loglik=gaussian_loglik_score(J, corr_val))
    if method.name == "EXTERNAL":
        J = method.external_matrix
        if J is None:
            raise ValueError("EXTERNAL method needs a matrix")
        J = np.asarray(J, dtype=float)
        if J.shape != (p, p):
            raise ValueError(f"external matrix shape {J.shape} != ({p},{p})")
        try:
            score = gaussian_loglik_score(J, corr_val)
        except NotPositiveDefiniteError:
            score = float("-inf")
        return FittedModel(method=method.label, J=J, val_loglik=score)
    if method.name == "SHRINKAGE":
        best = None
        for theta in method.thetas:
            M = (1.0 - theta) * corr_train.values + theta * np.eye(p)
            try:
                J = _dense_pd_inverse(M)
                score = gaussian_loglik_score(J, corr_val)
            except NotPositiveDefiniteError:
                continue
            if best is None or score > best.val_loglik:
                best = FittedModel(method=method.label, J=J, val_loglik=score,
                                   theta=float(theta))
        if best is None:
            raise NotPositiveDefiniteError(
                "no shrinkage grid point produced a PD matrix")
        return best

    # MFCF family: structure learned on the pre-shrunk train correlation.
    shrunk = pre_shrink(corr_train, epsilon)
    validated = method.name in ("MFCF_VAR", "MFCF_VAR_ID")
    target = "identity" if method.name.endswith("_ID") else "clique_tree"
    sizes = sorted({min(int(k), p) for k in method.clique_sizes})
    best = None
    hist: dict[int, Counter] = {}
    for k in sizes:
        if validated:
            gain = GainConfig(mode="gauss_loglik_validated",
                              min_clique_size=min(2, k), max_clique_size=k,
                              p_value=method.p_value)
            cfg = MfcfConfig(max_clique_size=k, min_clique_size=min(2, k),
                             gain=gain)
        else:
            gain = GainConfig(mode="gauss_loglik", min_clique_size=k,
                              max_clique_size=k)
            cfg = MfcfConfig(max_clique_size=k, min_clique_size=k, gain=gain)
        forest = mfcf(shrunk, cfg, input_kind="similarity")
        hist[k] = Counter(len(c) for c in forest.cliques)
        for theta in method.thetas:
            try:
                est = shrunk_precision(shrunk.values, forest, float(theta),
                                       target, epsilon_pre=epsilon)
                score = gaussian_loglik_score(est.J, corr_val)
            except (NotPositiveDefiniteError, ValueError):
                continue
            if best is None or score > best.val_loglik:
                best = FittedModel(method=method.label, J=est.J,
                                   val_loglik=score, theta=float(theta),
                                   clique_size=k, forest=forest)
    if best is None:
        raise NotPositiveDefiniteError(
            "no grid point produced a scorable model")
    best.per_size_hist = hist
    return best


# ---------------------------------------------------------------------------
# Experiment protocol

@dataclass
class ExperimentSpec:
    kind: str = "chordal"  # chordal | pd | factor | files
    p: int = 100
    n_values: tuple = (25, 50, 100, 300)
    n_train_pairs: int = 5
    n_test_sets: int = 10
    seed: int = 0
    epsilon: float = 0.05
    methods: list = field(default_factory=lambda: [
        MethodSpec("MFCF_FIX"), MethodSpec("MFCF_FIX_ID"),
        MethodSpec("MFCF_VAR"), MethodSpec("MFCF_VAR_ID"),
        MethodSpec("SHRINKAGE"), MethodSpec("NULL")])
    normalize_eig: bool = True
    # chordal ground truth
    truth_max_clique_size: int = 4
    noise_var: float = 0.1
    empty_sep_prob: float = 0.0
    # factor ground truth
    factors: int = 5
    # pd ground truth
    eig_range: tuple = (0.01, 100.0)
    # files kind: bootstrap resampling of the rows of one data file
    data_path: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        methods = []
        for m in d.pop("methods", []):
            if isinstance(m, str):
                methods.append(MethodSpec(m))
            else:
                m = dict(m)
                methods.append(MethodSpec(
                    m.pop("name"),
                    clique_sizes=tuple(m.pop("clique_sizes",
                                              DEFAULT_CLIQUE_SIZES)),
                    thetas=tuple(m.pop("thetas", DEFAULT_THETAS)),
                    p_value=m.pop("p_value", 0.05),
                    external_path=m.pop("external_path", None)))
        known = {f for f in cls.__dataclass_fields__}
        extra = {k for k in d if k not in known}
        if extra:
            raise ValueError(f"unknown experiment keys: {sorted(extra)}")
        spec = cls(**d)
        if methods:
            spec.methods = methods
        for key in ("n_values", "eig_range"):
            setattr(spec, key, tuple(getattr(spec, key)))
        return spec


@dataclass
class MetricRecord:
    method: str
    n: int
    pair: int
    test: int
    loglik: float
    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    correlation: float | None
    eig_distance: float | None
    inv_eig_distance: float | None
    nonzero_count: int
    theta_selected: float | None
    clique_size_selected: int | None


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: list = field(default_factory=list)
    selections: list = field(default_factory=list)
    hist_rows: list = field(default_factory=list)  # (method, n, k, size, cnt)
    errors: list = field(default_factory=list)

    def values(self, method: str, n: int, metric: str) -> list:
        out = [getattr(r, metric) for r in self.records
               if r.method == method and r.n == n]
        return [v for v in out if v is not None]


def _make_truth(spec: ExperimentSpec, rng) -> synth.GroundTruth:
    if spec.kind == "chordal":
        forest = synth.random_clique_forest(
            spec.p, rng, max_clique_size=spec.truth_max_clique_size,
            empty_sep_prob=spec.empty_sep_prob)
        return synth.chordal_precision(forest, noise_var=spec.noise_var)
    if spec.kind == "pd":
        return synth.random_pd_matrix(spec.p, rng, spec.eig_range)
    if spec.kind == "factor":
        return synth.factor_model_cov(spec.p, spec.factors, rng)
    raise ValueError(f"unknown data kind {spec.kind!r}")


def _truth_on_correlation_scale(truth: synth.GroundTruth):
    """Truth rescaled to the correlation scale the estimators work on."""
    d = np.sqrt(np.diag(truth.sigma_true))
    j_corr = truth.j_true * np.outer(d, d)
    return (j_corr + j_corr.T) / 2.0


def _load_rows(path) -> np.ndarray:
    from .io import read_matrix_csv

    data, _ = read_matrix_csv(path)
    return data


def run_experiment(spec: ExperimentSpec, threads: int = 1,
                   quiet: bool = True) -> ExperimentReport:
    """Run the full protocol; cells execute independently.

    The master seed spawns one stream for the ground truth and one stream
    per dataset, so outputs do not depend on thread count or evaluation
    order.
    """
    report = ExperimentReport(spec=spec)
    root = np.random.SeedSequence(spec.seed)
    truth_ss, data_ss = root.spawn(2)

    sparse_truth = False
    file_rows = None
    if spec.kind == "files":
        if not spec.data_path:
            raise ValueError("kind 'files' needs data_path")
        file_rows = _load_rows(spec.data_path)
        if file_rows.shape[1] != spec.p:
            spec.p = file_rows.shape[1]
        try:
            full_corr = sample_correlation(file_rows).values
            j_true = _dense_pd_inverse(full_corr)
        except (NotPositiveDefiniteError, ValueError):
            j_true = None
    else:
        truth = _make_truth(spec, np.random.default_rng(truth_ss))
        j_true = _truth_on_correlation_scale(truth)
        sparse_truth = truth.forest_true is not None

    # One child stream per dataset, spawned up front in a fixed order.
    datasets: dict[tuple, np.ndarray] = {}
    needed = []
    for n in spec.n_values:
        for pair in range(spec.n_train_pairs):
            needed.append((n, pair, "train"))
            needed.append((n, pair, "val"))
            for t in range(spec.n_test_sets):
                needed.append((n, pair, f"test{t}"))
    children = data_ss.spawn(len(needed))
    for key, child in zip(needed, children):
        n = key[0]
        rng = np.random.default_rng(child)
        if spec.kind == "files":
            idx = rng.integers(0, file_rows.shape[0], size=n)
            datasets[key] = file_rows[idx]
        else:
            datasets[key] = synth.mvn_sample(truth.sigma_true, n, rng)

    cells = [(m, n, pair) for m in spec.methods for n in spec.n_values
             for pair in range(spec.n_train_pairs)]

    def run_cell(cell):
        method, n, pair = cell
        out = {"records": [], "hist": [], "selection": None, "error": None}
        try:
            fit = grid_search(datasets[(n, pair, "train")],
                              datasets[(n, pair, "val")],
                              method, epsilon=spec.epsilon)
        except Exception as exc:  # recorded, run continues
            out["error"] = (method.label, n, pair, f"fit failed: {exc}")
            return out
        nz = fit.nonzeros
        out["selection"] = {
            "method": method.label, "n": n, "pair": pair,
            "theta": fit.theta, "clique_size": fit.clique_size,
            "val_loglik": fit.val_loglik, "nonzero_count": nz,
            "clique_sizes": sorted(len(c) for c in fit.forest.cliques)
            if fit.forest is not None else None,
        }
        for k, counter in fit.per_size_hist.items():
            for size, cnt in sorted(counter.items()):
                out["hist"].append((method.label, n, k, size, cnt))
        for t in range(spec.n_test_sets):
            try:
                corr_test = sample_correlation(
                    datasets[(n, pair, f"test{t}")])
                ll = gaussian_loglik_score(fit.J, corr_test)
                acc = sens = spc = None
                if sparse_truth and j_true is not None:
                    acc, sens, spc = confusion_metrics(fit.J, j_true)
                corr = ed = ied = None
                if j_true is not None:
                    corr = matrix_correlation(fit.J, j_true)
                    ed = eig_distance(fit.J, j_true,
                                      normalize=spec.normalize_eig)
                    ied = inv_eig_distance(fit.J, j_true,
                                           normalize=spec.normalize_eig)
                out["records"].append(MetricRecord(
                    method=method.label, n=n, pair=pair, test=t, loglik=ll,
                    accuracy=acc, sensitivity=sens, specificity=spc,
                    correlation=corr, eig_distance=ed, inv_eig_distance=ied,
                    nonzero_count=nz, theta_selected=fit.theta,
                    clique_size_selected=fit.clique_size))
            except Exception as exc:
                out["error"] = (method.label, n, pair,
                                f"test {t} failed: {exc}")
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]

    for out in results:  # cells order is fixed, so output is deterministic
        report.records.extend(out["records"])
        report.hist_rows.extend(out["hist"])
        if out["selection"] is not None:
            report.selections.append(out["selection"])
        if out["error"] is not None:
            report.errors.append(out["error"])
    return report


# ---------------------------------------------------------------------------
# Report emission

_METRICS = ("loglik", "accuracy", "sensitivity", "specificity", "correlation",
            "eig_distance", "inv_eig_distance", "nonzero_count")


def aggregate(report: ExperimentReport) -> dict:
    """Mean and quartiles per (method, n, metric); order-independent."""
    out: dict = {}
    methods = sorted({r.method for r in report.records})
    for method in methods:
        out[method] = {}
        for n in sorted({r.n for r in report.records if r.method == method}):
            out[method][str(n)] = {}
            for metric in _METRICS:
                vals = sorted(report.values(method, n, metric))
                if not vals:
                    continue
                arr = np.asarray(vals, dtype=float)
                q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
                out[method][str(n)][metric] = {
                    "mean": math.fsum(vals) / len(vals),
                    "q1": float(q1), "median": float(med), "q3": float(q3),
                    "count": len(vals),
                }
    return out


def write_report(report: ExperimentReport, outdir, plot: bool = False) -> None:
    import os

    os.makedirs(outdir, exist_ok=True)
    cells_path = os.path.join(outdir, "cells.csv")
    with open(cells_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "n", "pair", "test", "metric", "value"])
        for r in report.records:
            for metric in _METRICS:
                v = getattr(r, metric)
                w.writerow([r.method, r.n, r.pair, r.test, metric,
                            "n/a" if v is None else repr(float(v))])
    summary = {
        "spec": {
            "kind": report.spec.kind, "p": report.spec.p,
            "n_values": list(report.spec.n_values),
            "n_train_pairs": report.spec.n_train_pairs,
            "n_test_sets": report.spec.n_test_sets,
            "seed": report.spec.seed, "epsilon": report.spec.epsilon,
            "methods": [m.label for m in report.spec.methods],
        },
        "aggregates": aggregate(report),
        "selections": report.selections,
        "errors": [list(e) for e in report.errors],
    }
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    with open(os.path.join(outdir, "cliques_hist.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "n", "max_clique_size", "clique_size", "count"])
        agg: Counter = Counter()
        for method, n, k, size, cnt in report.hist_rows:
            agg[(method, n, k, size)] += cnt
        for key in sorted(agg):
            w.writerow(list(key) + [agg[key]])
    if plot:
        _write_plots(report, outdir)


def _write_plots(report: ExperimentReport, outdir) -> None:
    import os

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plotdir = os.path.join(outdir, "plots")
    os.makedirs(plotdir, exist_ok=True)
    methods = sorted({r.method for r in report.records})
    ns = sorted({r.n for r in report.records})
    for metric in _METRICS:
        fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(ns), 4.0))
        width = 0.8 / max(len(methods), 1)
        any_data = False
        for mi, method in enumerate(methods):
            data = [report.values(method, n, metric) for n in ns]
            if not any(data):
                continue
            any_data = True
            pos = [i + mi * width for i in range(len(ns))]
            ax.boxplot([d if d else [float("nan")] for d in data],
                       positions=pos, widths=width * 0.9,
                       tick_labels=[""] * len(ns), patch_artist=True,
                       boxprops={"facecolor": f"C{mi}", "alpha": 0.6},
                       medianprops={"color": "black"})
            ax.plot([], [], color=f"C{mi}", label=method)
        if not any_data:
            plt.close(fig)
            continue
        ax.set_xticks([i + width * (len(methods) - 1) / 2
                       for i in range(len(ns))])
        ax.set_xticklabels([str(n) for n in ns])
        ax.set_xlabel("series length n")
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(os.path.join(plotdir, f"{metric}.svg"))
        plt.close(fig)
