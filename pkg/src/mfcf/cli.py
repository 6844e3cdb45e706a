"""Command-line interface: learn, precision, generate, benchmark, validate.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or parse
failure.  Every subcommand taking ``--seed`` is deterministic for a given
seed and thread count.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io as mio
from .algorithm import MfcfConfig, mfcf_with_report
from .bench import ExperimentSpec, MethodSpec, run_experiment, write_report
from .forest import (ForestError, first_violation, forest_from_dict,
                     is_perfect_elimination, load_forest, save_forest,
                     to_adjacency)
from .gains import GainConfig, GainError, NotPositiveDefiniteError
from .gaussian import CorrelationMatrix, pre_shrink, sample_correlation, \
    shrunk_precision
from .synth import (chordal_precision, factor_model_cov, mvn_sample,
                    random_clique_forest, random_pd_matrix)

GAIN_FLAG_TO_MODE = {
    "similarity": "similarity",
    "loglik": "gauss_loglik",
    "loglik-val": "gauss_loglik_validated",
}


class InputFailure(Exception):
    """I/O or parse problem: maps to exit code 2."""


def _read_matrix(path):
    try:
        return mio.read_matrix_csv(path)
    except OSError as exc:
        raise InputFailure(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise InputFailure(str(exc)) from None


def _read_forest(path):
    try:
        return load_forest(path)
    except OSError as exc:
        raise InputFailure(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputFailure(
            f"{path}: JSON parse error at line {exc.lineno}, "
            f"column {exc.colno}") from None
    except ForestError as exc:
        raise InputFailure(f"{path}: {exc}") from None


def _info(args, msg):
    if not getattr(args, "quiet", False):
        print(msg)


# ---------------------------------------------------------------------------
# learn

def _prepare_correlation(values, labels, args):
    """Input matrix -> (matrix for the gain, n_obs)."""
    kind = args.input_kind
    if kind == "auto":
        square = values.shape[0] == values.shape[1] and np.allclose(
            values, values.T, atol=1e-10, rtol=0.0)
        kind = "similarity" if square else "data"
    n_obs = None
    if kind == "data":
        corr = sample_correlation(values)
        values, n_obs = corr.values, corr.n_obs
    if args.n_obs is not None:
        n_obs = args.n_obs
    return values, n_obs, kind


def cmd_learn(args) -> int:
    values, labels = _read_matrix(args.input)
    mode = GAIN_FLAG_TO_MODE[args.gain]
    values, n_obs, kind = _prepare_correlation(values, labels, args)
    if mode.startswith("gauss") and args.epsilon > 0.0:
        values = pre_shrink(values, args.epsilon)
    gain = GainConfig(mode=mode, min_clique_size=args.min_clique_size,
                      max_clique_size=args.max_clique_size,
                      p_value=args.pvalue, threshold=args.sim_threshold)
    cfg = MfcfConfig(max_clique_size=args.max_clique_size,
                     min_clique_size=args.min_clique_size,
                     reuse_separators=not args.no_reuse_separators,
                     gain=gain, n_obs=n_obs)
    if args.seed_cliques:
        seed_forest = _read_forest(args.seed_cliques)
        if seed_forest.p != values.shape[0]:
            raise ForestError(
                f"seed forest has p={seed_forest.p}, input has "
                f"p={values.shape[0]}")
        cfg.initial_cliques = [list(c) for c in seed_forest.cliques]
        cfg.initial_separators = [list(s) for s in seed_forest.separators] \
            if seed_forest.separators else None
    W = CorrelationMatrix(values, n_obs) if n_obs else values
    forest, log = mfcf_with_report(W, cfg, input_kind="similarity")
    forest.labels = labels
    save_forest(forest, args.output)
    if args.log:
        with open(args.log, "w") as fh:
            for e in log:
                fh.write(json.dumps({
                    "step": e.step, "clique": e.source_clique,
                    "vertex": e.vertex, "separator": list(e.separator),
                    "gain": e.gain, "case": e.case}) + "\n")
    _info(args, f"learned forest: {len(forest.cliques)} cliques, "
          f"{len(forest.separators)} separators -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# precision

def cmd_precision(args) -> int:
    forest = _read_forest(args.forest)
    values, _labels = _read_matrix(args.input)
    kind = args.input_kind
    if kind == "auto":
        square = values.shape[0] == values.shape[1] and np.allclose(
            values, values.T, atol=1e-10, rtol=0.0)
        kind = "similarity" if square else "data"
    if kind == "data":
        values = sample_correlation(values).values
    if args.epsilon > 0.0:
        values = pre_shrink(values, args.epsilon)
    target = args.target.replace("-", "_")
    est = shrunk_precision(values, forest, args.theta, target,
                           epsilon_pre=args.epsilon)
    if args.format == "dense":
        mio.write_matrix_csv(args.output, est.J)
    else:
        mio.write_triplets_csv(args.output, est.J, zero_tol=1e-10)
    _info(args, f"precision matrix ({args.format}) -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# generate

def cmd_generate(args) -> int:
    root = np.random.SeedSequence(args.seed)
    truth_ss, data_ss = root.spawn(2)
    truth_rng = np.random.default_rng(truth_ss)
    if args.kind == "chordal":
        forest = random_clique_forest(
            args.p, truth_rng, max_clique_size=args.truth_max_clique_size,
            empty_sep_prob=args.empty_sep_prob)
        truth = chordal_precision(forest, noise_var=args.noise_var)
    elif args.kind == "pd":
        truth = random_pd_matrix(args.p, truth_rng,
                                 (args.eig_lo, args.eig_hi))
    else:
        truth = factor_model_cov(args.p, args.factors, truth_rng)
    data = mvn_sample(truth.sigma_true, args.n, np.random.default_rng(data_ss))
    prefix = args.out_prefix
    mio.write_matrix_csv(f"{prefix}.data.csv", data)
    mio.write_matrix_csv(f"{prefix}.sigma.csv", truth.sigma_true)
    mio.write_matrix_csv(f"{prefix}.jtrue.csv", truth.j_true)
    if truth.forest_true is not None:
        save_forest(truth.forest_true, f"{prefix}.forest.json")
    _info(args, f"wrote {prefix}.data.csv ({args.n} x {args.p})")
    return 0


# ---------------------------------------------------------------------------
# benchmark

def cmd_benchmark(args) -> int:
    try:
        with open(args.spec) as fh:
            spec_dict = json.load(fh)
    except OSError as exc:
        raise InputFailure(f"cannot read {args.spec}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputFailure(
            f"{args.spec}: JSON parse error at line {exc.lineno}") from None
    spec = ExperimentSpec.from_dict(spec_dict)
    if args.seed is not None:
        spec.seed = args.seed
    for item in args.external or []:
        if "=" not in item:
            raise InputFailure(
                f"--external expects name=J.csv, got {item!r}")
        name, path = item.split("=", 1)
        J, _ = _read_matrix(path)
        spec.methods.append(MethodSpec("EXTERNAL", external_path=path,
                                       external_matrix=J, label=name))
    for m in spec.methods:
        if m.name == "EXTERNAL" and m.external_matrix is None:
            if not m.external_path:
                raise InputFailure(
                    f"EXTERNAL method {m.label} has no matrix path")
            m.external_matrix, _ = _read_matrix(m.external_path)
    report = run_experiment(spec, threads=args.threads)
    write_report(report, args.out, plot=args.plot)
    _info(args, f"report -> {args.out} ({len(report.records)} cells, "
          f"{len(report.errors)} errors)")
    return 0


# ---------------------------------------------------------------------------
# validate

def cmd_validate(args) -> int:
    try:
        with open(args.forest) as fh:
            payload = json.load(fh)
        forest = forest_from_dict(payload)
    except OSError as exc:
        print(f"ERROR: cannot read {args.forest}: {exc}")
        return 2
    except json.JSONDecodeError as exc:
        print(f"ERROR: {args.forest}: JSON parse error at line {exc.lineno}, "
              f"column {exc.colno}")
        return 2
    except ForestError as exc:
        print(f"ERROR: {args.forest}: {exc}")
        return 2
    problem = first_violation(forest)
    if problem is None and not forest.is_complete():
        problem = (f"forest incomplete: {len(forest.vertex_order)} of "
                   f"{forest.p} vertices placed")
    if problem is None:
        adj = to_adjacency(forest)
        if not is_perfect_elimination(adj, list(reversed(forest.vertex_order))):
            problem = "reversed vertex_order is not a perfect elimination order"
    if problem is not None:
        print(f"INVALID: {problem}")
        return 1
    sizes = {}
    for c in forest.cliques:
        sizes[len(c)] = sizes.get(len(c), 0) + 1
    hist = ", ".join(f"{k}:{v}" for k, v in sorted(sizes.items()))
    print(f"VALID: p={forest.p}, cliques={len(forest.cliques)}, "
          f"separators={len(forest.separators)}, "
          f"edges={len(to_adjacency(forest).edges)}, clique sizes {{{hist}}}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mfcf",
        description="Clique-forest structure learning, precision estimation "
                    "and benchmarking.")
    ap.add_argument("--quiet", action="store_true",
                    help="suppress progress messages")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a clique forest from data")
    p.add_argument("--input", required=True, help="CSV data or matrix")
    p.add_argument("--input-kind", choices=["auto", "data", "similarity"],
                   default="auto")
    p.add_argument("--gain", choices=list(GAIN_FLAG_TO_MODE), default="loglik")
    p.add_argument("--max-clique-size", type=int, default=4)
    p.add_argument("--min-clique-size", type=int, default=4)
    p.add_argument("--no-reuse-separators", action="store_true",
                   help="each separator may be used only once")
    p.add_argument("--pvalue", type=float, default=0.05)
    p.add_argument("--sim-threshold", type=float, default=None,
                   help="similarity gain: drop edges with weight <= threshold")
    p.add_argument("--epsilon", type=float, default=0.05,
                   help="pre-shrink towards identity before Gaussian gains")
    p.add_argument("--n-obs", type=int, default=None,
                   help="sample size for the validated gain when the input "
                        "is already a similarity matrix")
    p.add_argument("--seed-cliques", default=None,
                   help="forest.json with initial cliques")
    p.add_argument("--output", required=True, help="forest.json to write")
    p.add_argument("--log", default=None, help="expansion log (JSONL)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("precision", help="assemble a shrunk precision matrix")
    p.add_argument("--forest", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--input-kind", choices=["auto", "data", "similarity"],
                   default="auto")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--target", choices=["identity", "clique-tree"],
                   default="clique-tree")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--format", choices=["dense", "triplet"], default="dense")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_precision)

    p = sub.add_parser("generate", help="generate synthetic data + truth")
    p.add_argument("--kind", choices=["chordal", "pd", "factor"],
                   required=True)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--truth-max-clique-size", type=int, default=4)
    p.add_argument("--noise-var", type=float, default=0.1)
    p.add_argument("--empty-sep-prob", type=float, default=0.0)
    p.add_argument("--factors", type=int, default=5)
    p.add_argument("--eig-lo", type=float, default=0.01)
    p.add_argument("--eig-hi", type=float, default=100.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", help="run the experiment harness")
    p.add_argument("--spec", required=True, help="experiment.json")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--external", action="append", default=[],
                   metavar="NAME=J.csv",
                   help="register a precomputed precision matrix")
    p.add_argument("--plot", action="store_true", help="emit SVG boxplots")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None,
                   help="override the seed in the spec file")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("validate", help="check a forest file")
    p.add_argument("forest", help="forest.json")
    p.set_defaults(func=cmd_validate)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputFailure as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2
    except (ForestError, GainError, NotPositiveDefiniteError,
            ValueError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
