"""Command-line interface: generate, fit, select, evaluate, predict, sweep."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .data import SyntheticConfig, Dataset, generate_synthetic, load_dataset, read_matrix, \
    read_labels, read_node_list, save_dataset
from .metrics import cross_validate, n_workers, rank_features, roc_points
from .optimizer import ConvergenceOpts, DivergenceError, DslModel, Hyperparams, fit as dsl_fit, \
    objective_terms
from .svm import predict as predict_labels

logger = logging.getLogger("dslearn")

EXIT_USAGE, EXIT_IO, EXIT_DIVERGENCE = 2, 3, 4

# (lambda1, lambda2, pi) selected by cross-validation per dataset
PRESETS = {
    "synthetic": (0.1, 0.3, 1.0),
    "bike": (0.5, 0.08, 1.0),
    "cct": (0.1, 0.1, 1.0),
    "adni": (0.1, 0.01, 1.0),
    "liver": (0.05, 0.1, 1.0),
    "embryo": (0.1, 0.05, 1.0),
}

DEFAULT_GRID = {"lambda1": [0.01, 0.05, 0.1, 0.5], "lambda2": [0.01, 0.05, 0.1, 0.3], "pi": [1.0]}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_data_args(p):
    p.add_argument("--data", help="directory with data.csv, labels.csv, edges.csv")
    p.add_argument("--matrix", help="data CSV (overrides --data)")
    p.add_argument("--labels", help="labels CSV (overrides --data)")
    p.add_argument("--edges", help="edge-list CSV (overrides --data)")


def _add_hyper_args(p):
    p.add_argument("--preset", choices=sorted(PRESETS), help="named (lambda1, lambda2, pi) preset")
    p.add_argument("--lambda1", type=float, default=0.1, help="l2,1 sparsity weight")
    p.add_argument("--lambda2", type=float, default=0.3, help="graph smoothness weight")
    p.add_argument("--pi", type=float, default=1.0, help="margin term weight")
    p.add_argument("--C", type=float, default=1.0, help="hinge loss weight")
    p.add_argument("--flavor", type=int, choices=(1, 2), default=2, help="margin norm of w")


def _add_opts_args(p):
    d = ConvergenceOpts()
    p.add_argument("--outer-tol", type=float, default=d.outer_tol)
    p.add_argument("--inner-tol", type=float, default=d.inner_tol)
    p.add_argument("--max-outer", type=int, default=d.max_outer)
    p.add_argument("--max-inner", type=int, default=d.max_inner)
    p.add_argument("--no-inverse-update", action="store_true",
                   help="refactorize the system matrix on every inner step")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="dslearn", formatter_class=fmt,
                                     description="Discriminative subgraph learning")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", formatter_class=fmt, help="write a synthetic dataset")
    p.add_argument("--nodes", type=int, help="number of nodes (required)")
    p.add_argument("--tau", type=float, default=0.2, help="distance threshold")
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--gt-size", type=int, default=15)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--sigma", type=float, help="noise standard deviation (default sqrt(40))")
    noise.add_argument("--sigma2", type=float, help="noise variance")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", formatter_class=fmt, help="fit a DSL model")
    _add_data_args(p)
    _add_hyper_args(p)
    _add_opts_args(p)
    p.add_argument("--trace-csv", help="write per-iteration objective terms here")
    p.add_argument("--dump-dual", help="directory for K.csv, q.csv, alpha.csv of the last dual")

    p = sub.add_parser("select", formatter_class=fmt, help="rank nodes of a fitted model")
    p.add_argument("--model", help="model.json (required)")
    p.add_argument("--k", type=int, help="number of nodes to report (default: all)")

    p = sub.add_parser("evaluate", formatter_class=fmt, help="cross-validated evaluation")
    _add_data_args(p)
    _add_hyper_args(p)
    _add_opts_args(p)
    p.add_argument("--k", type=int, default=15, help="features kept per fold")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gt", help="ground-truth node list (default: gt_nodes.csv in --data if present)")
    p.add_argument("--roc-csv", help="write fpr,tpr points of ground-truth recovery")

    p = sub.add_parser("predict", formatter_class=fmt, help="predict labels with a fitted model")
    p.add_argument("--model", help="model.json (required)")
    p.add_argument("--matrix", help="data CSV (required unless --data)")
    p.add_argument("--data", help="directory with data.csv (and optionally labels.csv)")
    p.add_argument("--labels", help="optional labels CSV for an agreement score")

    p = sub.add_parser("sweep", formatter_class=fmt, help="grid search by cross-validation")
    _add_data_args(p)
    _add_hyper_args(p)
    _add_opts_args(p)
    p.add_argument("--lambda1-grid", type=_floats, default=DEFAULT_GRID["lambda1"])
    p.add_argument("--lambda2-grid", type=_floats, default=DEFAULT_GRID["lambda2"])
    p.add_argument("--pi-grid", type=_floats, default=DEFAULT_GRID["pi"])
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    for name, action in sub.choices.items():
        action.add_argument("--out", default=".", help="output directory")
        action.add_argument("--config", help="JSON file of defaults; flags override it")
    return parser


REQUIRED = {"generate": ["nodes"], "select": ["model"], "predict": ["model"]}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            subparser.error(f"cannot read --config: {exc}")
        known = {a.dest for a in subparser._actions}
        unknown = set(cfg) - known
        if unknown:
            subparser.error(f"unknown keys in --config: {', '.join(sorted(unknown))}")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    for dest in REQUIRED.get(args.command, []):
        if getattr(args, dest) is None:
            subparser.error(f"the following arguments are required: --{dest.replace('_', '-')}")
    return args


def _hyperparams(args) -> Hyperparams:
    l1, l2, pi = (args.lambda1, args.lambda2, args.pi)
    if args.preset:
        l1, l2, pi = PRESETS[args.preset]
    return Hyperparams(l1, l2, pi, args.C, args.flavor)


def _opts(args) -> ConvergenceOpts:
    return ConvergenceOpts(outer_tol=args.outer_tol, inner_tol=args.inner_tol,
                           max_outer=args.max_outer, max_inner=args.max_inner,
                           inverse_update=not args.no_inverse_update)


def _load(args) -> Dataset:
    base = Path(args.data) if args.data else None
    paths = {}
    for key, default in (("matrix", "data.csv"), ("labels", "labels.csv"), ("edges", "edges.csv")):
        value = getattr(args, key, None)
        if value is None and base is not None:
            value = base / default
        if value is None:
            raise CliError(f"missing input: pass --data or --{key}")
        paths[key] = value
    try:
        return load_dataset(paths["matrix"], paths["labels"], paths["edges"])
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _echo_config(out: Path, args, extra: dict | None = None) -> None:
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    if extra:
        cfg.update(extra)
    _write_json(out / "config.json", cfg)


def cmd_generate(args, out: Path) -> None:
    if args.sigma2 is not None:
        if args.sigma2 < 0:
            raise CliError("--sigma2 must be nonnegative")
        sigma = math.sqrt(args.sigma2)
    else:
        sigma = math.sqrt(40.0) if args.sigma is None else args.sigma
    try:
        config = SyntheticConfig(n_nodes=args.nodes, tau=args.tau, gt_size=args.gt_size,
                                 n_samples=args.samples, sigma=sigma, seed=args.seed)
        data, gt = generate_synthetic(config)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    save_dataset(data, out, gt)
    _echo_config(out, args, {"sigma_std": sigma, "sigma_variance": sigma ** 2,
                             "n_edges": data.graph.n_edges})


def _load_model(path) -> tuple[DslModel, list]:
    try:
        raw = json.loads(Path(path).read_text())
        model = DslModel.from_dict(raw)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot read model {path}: {exc}", EXIT_IO) from exc
    names = raw.get("node_names") or list(range(model.phi.shape[0]))
    return model, names


def cmd_fit(args, out: Path) -> None:
    data = _load(args)
    hp, opts = _hyperparams(args), _opts(args)
    last = {}

    def keep_last(problem, solution):
        last["problem"], last["solution"] = problem, solution

    model = dsl_fit(data.X, data.y, data.graph.laplacian, hp, opts,
                    on_dual=keep_last if args.dump_dual else None)
    payload = model.to_dict()
    payload["node_names"] = list(data.graph.node_names)
    _write_json(out / "model.json", payload)
    if args.trace_csv:
        with open(out / args.trace_csv if not Path(args.trace_csv).is_absolute() else args.trace_csv,
                  "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["outer_iter", "objective", "gap", "inner_iters"])
            for row in model.trace:
                w.writerow([row["outer_iter"], repr(row["objective"]), repr(row["gap"]),
                            row["inner_iters"]])
    if args.dump_dual and last:
        d = Path(args.dump_dual)
        d.mkdir(parents=True, exist_ok=True)
        np.savetxt(d / "K.csv", last["problem"].K, delimiter=",", fmt="%.17g")
        np.savetxt(d / "q.csv", last["problem"].q, delimiter=",", fmt="%.17g")
        np.savetxt(d / "alpha.csv", last["solution"].alpha, delimiter=",", fmt="%.17g")
    terms = objective_terms(model.phi_unconstrained, model.hyperplane, data.X, data.y,
                            data.graph.laplacian, hp)
    _echo_config(out, args, {"hyperparams": asdict(hp), "opts": asdict(opts),
                             "final_objective_terms": terms})


def cmd_select(args, out: Path) -> None:
    model, names = _load_model(args.model)
    ranking = rank_features(model.phi)
    k = len(ranking.order) if args.k is None else args.k
    if not 1 <= k <= len(ranking.order):
        raise CliError(f"--k must be in [1, {len(ranking.order)}]")
    with open(out / "selection.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "node", "score"])
        for r, idx in enumerate(ranking.top(k), start=1):
            w.writerow([r, names[idx], repr(float(ranking.scores[idx]))])
    _echo_config(out, args)


def cmd_evaluate(args, out: Path) -> None:
    data = _load(args)
    gt = None
    gt_path = args.gt or (Path(args.data) / "gt_nodes.csv" if args.data else None)
    if gt_path is not None and Path(gt_path).exists():
        gt = read_node_list(gt_path, data.graph)
    elif args.gt:
        raise CliError(f"ground-truth file {args.gt} not found", EXIT_IO)
    try:
        report = cross_validate(data, _hyperparams(args), args.k, args.folds, args.seed,
                                _opts(args), gt_nodes=gt, n_jobs=n_workers())
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    result = report.to_dict()
    result["selected"] = [data.graph.node_names[i] for i in report.selected]
    _write_json(out / "report.json", result)
    if args.roc_csv:
        if gt is None:
            raise CliError("--roc-csv needs ground-truth nodes")
        model = dsl_fit(data.X, data.y, data.graph.laplacian, _hyperparams(args), _opts(args))
        fpr, tpr = roc_points(rank_features(model.phi).scores, gt)
        with open(out / args.roc_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fpr", "tpr"])
            w.writerows([repr(float(a)), repr(float(b))] for a, b in zip(fpr, tpr))
    _echo_config(out, args)


def cmd_predict(args, out: Path) -> None:
    model, names = _load_model(args.model)
    matrix = args.matrix or (Path(args.data) / "data.csv" if args.data else None)
    if matrix is None:
        raise CliError("missing input: pass --matrix or --data")
    try:
        X, header = read_matrix(matrix)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    if [str(h) for h in header] != [str(n) for n in names]:
        raise CliError("data columns do not match the model's nodes")
    labels_path = args.labels or (Path(args.data) / "labels.csv" if args.data
                                  and (Path(args.data) / "labels.csv").exists() else None)
    y = None
    if labels_path is not None:
        try:
            y = read_labels(labels_path)
        except OSError as exc:
            raise CliError(str(exc), EXIT_IO) from exc
        if y.shape[0] != X.shape[1]:
            raise CliError(f"{labels_path} has {y.shape[0]} labels for {X.shape[1]} samples")
    pred = predict_labels(model.hyperplane, model.phi, X)
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "prediction"])
        w.writerows([i, int(p)] for i, p in enumerate(pred))
    extra = {}
    if y is not None:
        extra["agreement"] = float(np.mean(pred == y))
        print(f"agreement {extra['agreement']:.4f}")
    _echo_config(out, args, extra)


def _sweep_point(data, hp, opts, k, folds, seed):
    return cross_validate(data, hp, k, folds, seed, opts, n_jobs=1).accuracy


def cmd_sweep(args, out: Path) -> None:
    data = _load(args)
    opts = _opts(args)
    grid = list(itertools.product(args.lambda1_grid, args.lambda2_grid, args.pi_grid))
    hps = [Hyperparams(l1, l2, pi, args.C, args.flavor) for l1, l2, pi in grid]
    accs = Parallel(n_jobs=min(n_workers(), len(hps)))(
        delayed(_sweep_point)(data, hp, opts, args.k, args.folds, args.seed) for hp in hps)
    best = int(np.argmax(accs))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda1", "lambda2", "pi", "accuracy"])
        for (l1, l2, pi), acc in zip(grid, accs):
            w.writerow([l1, l2, pi, repr(float(acc))])
    l1, l2, pi = grid[best]
    print(f"best lambda1={l1} lambda2={l2} pi={pi} accuracy={accs[best]:.4f}")
    _echo_config(out, args, {"best": {"lambda1": l1, "lambda2": l2, "pi": pi,
                                      "accuracy": float(accs[best])}})


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "select": cmd_select,
            "evaluate": cmd_evaluate, "predict": cmd_predict, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
