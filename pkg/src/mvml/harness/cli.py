"""Command-line entry point: ``mvml {fit,predict,cv,toy,bound,report}``."""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import serialization
from ..evaluation import accuracy, bound_from_traces, nmse, r2
from ..exceptions import MVMLError
from ..model import METHODS, predict_classes, predict_scores, train
from ..multiview import build_gram_stack
from ..solver import SolverConfig
from .data import load_dataset, toy_generate, write_dataset, write_matrix
from .experiment import (ALL_METHODS, ExperimentConfig, cross_validate, emit_plot_data,
                         load_experiment_config, run_experiment, write_table)


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _add_solver_flags(p):
    p.add_argument("--method", choices=METHODS, default="mvml")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-2)
    p.add_argument("--eta", type=float, default=1e-2)
    p.add_argument("--mu", type=float, default=1e-2)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--learn-w", action="store_true")
    p.add_argument("--fraction", type=float, default=1.0,
                   help="Nystrom approximation level as a fraction of n (1.0 = full kernels)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nystrom-step", choices=("compressed", "lifted"), default="compressed")
    p.add_argument("--kernel", choices=("gaussian", "linear"), default=None,
                   help="override the manifest's kernel family for every view")
    p.add_argument("--bandwidth", default=None,
                   help="override bandwidth: mean_distance, inverse_features or a number")


def build_parser():
    parser = argparse.ArgumentParser(prog="mvml", description="Multi-view metric learning in kernel spaces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model and save it")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="output model file")
    _add_solver_flags(p)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="write predictions to this file")

    p = sub.add_parser("cv", help="cross-validate lambda and eta")
    p.add_argument("--manifest", required=True)
    _add_solver_flags(p)
    p.set_defaults(method="mvml")
    p.add_argument("--lambdas", type=_floats, default=None)
    p.add_argument("--etas", type=_floats, default=None)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--out", help="write the fold table here")

    p = sub.add_parser("toy", help="write the two-view toy dataset")
    p.add_argument("--n", type=int, default=50, help="samples per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shear", type=float, default=1.0)
    p.add_argument("--angle", type=float, default=float(np.pi / 6), help="rotation in radians")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bound", help="Rademacher complexity bound")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="compute tr(K_l^2) from a dataset")
    src.add_argument("--traces", type=_floats, help="comma-separated tr(K_l^2) values")
    p.add_argument("--n", type=int, help="sample count (with --traces)")

    p = sub.add_parser("report", help="run an experiment sweep and emit plot tables")
    p.add_argument("--config", help="INI file with an [experiment] section")
    p.add_argument("--manifest")
    p.add_argument("--test-manifest")
    p.add_argument("--methods", type=lambda s: tuple(s.split(",")))
    p.add_argument("--fractions", type=_floats)
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--lambdas", type=_floats)
    p.add_argument("--etas", type=_floats)
    p.add_argument("--folds", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--learn-w", action="store_true", default=None)
    p.add_argument("--out", dest="output_dir")
    return parser


def _solver(args):
    return SolverConfig(lam=args.lam, eta=args.eta, mu=args.mu, max_iters=args.max_iters,
                        tol=args.tol, learn_w=args.learn_w, nystrom_step=args.nystrom_step)


def cmd_fit(args):
    ds = load_dataset(args.manifest)
    configs = ds.kernel_configs(args.kernel, args.bandwidth)
    model, states = train(ds.views, ds.labels, configs, _solver(args), task=ds.task,
                          method=args.method, fraction=args.fraction, seed=args.seed)
    serialization.save(model, args.model)
    for k, st in enumerate(states):
        print(f"head {k}: iterations={st.iterations} converged={st.converged} "
              f"objective={st.objective_trace[-1]:.10g}")
    _print_scores(model, ds, "training")
    print(f"model written to {args.model}")
    return 0


def _print_scores(model, ds, split):
    if ds.labels is None:
        return
    if model.task == "regression":
        s = predict_scores(model, ds.views)[:, 0]
        print(f"{split} nmse: {nmse(s, ds.labels):.10g}")
        print(f"{split} r2: {r2(s, ds.labels):.10g}")
    else:
        print(f"{split} accuracy: {accuracy(predict_classes(model, ds.views), ds.labels)!r}")


def cmd_predict(args):
    model = serialization.load(args.model)
    ds = load_dataset(args.manifest, require_labels=False)
    scores = predict_scores(model, ds.views)
    cols = ["score"] if scores.shape[1] == 1 else [f"score_{c}" for c in model.classes]
    if model.task != "regression":
        labels = predict_classes(model, ds.views)
        table = np.column_stack([labels, scores])
        cols = ["label"] + cols
    else:
        table = scores
    if args.out:
        write_matrix(args.out, table, cols)
        print(f"predictions written to {args.out}")
    _print_scores(model, ds, "test")
    return 0


def cmd_cv(args):
    ds = load_dataset(args.manifest)
    exp = ExperimentConfig(manifest=args.manifest, mu=args.mu, max_iters=args.max_iters,
                           tol=args.tol, learn_w=args.learn_w, kernel=args.kernel,
                           bandwidth=args.bandwidth)
    res = cross_validate(ds, args.method, args.lambdas, args.etas, args.folds,
                         args.fraction, args.seed, cfg=exp)
    if args.out:
        write_table(args.out, res.table, ("lambda", "eta", "fold", "metric"))
    for row in res.table:
        if row["fold"] == "mean":
            print(f"lambda={row['lambda']:.3g} eta={row['eta']:.3g} mean={row['metric']:.6g}")
    print(f"best lambda: {res.best_lambda!r}")
    print(f"best eta: {res.best_eta!r}")
    return 0


def cmd_toy(args):
    ds = toy_generate(args.n, args.seed, args.shear, args.angle)
    path = write_dataset(ds, args.out)
    print(f"toy dataset ({ds.n} samples, {ds.v} views) written to {path}")
    return 0


def cmd_bound(args):
    if args.manifest:
        ds = load_dataset(args.manifest, require_labels=False)
        H = build_gram_stack(ds.views, ds.kernel_configs())
        traces, n = [float(np.sum(K * K)) for K in H.blocks], H.n
    else:
        if args.n is None:
            raise MVMLError("--n is required with --traces")
        traces, n = args.traces, args.n
    res = bound_from_traces(args.alpha, args.beta, traces, n)
    print(f"exact: {res.exact:.12g}")
    print(f"tau_form: {res.tau_form:.12g}")
    print(f"tau: {res.tau:.12g}")
    return 0


def cmd_report(args):
    if args.config:
        cfg = load_experiment_config(args.config)
    elif args.manifest:
        cfg = ExperimentConfig(manifest=args.manifest)
    else:
        raise MVMLError("report needs --config or --manifest")
    overrides = {k: getattr(args, k) for k in
                 ("manifest", "test_manifest", "methods", "fractions", "seeds", "lambdas",
                  "etas", "folds", "mu", "max_iters", "learn_w", "output_dir")
                 if getattr(args, k) is not None}
    for k, val in overrides.items():
        setattr(cfg, k, val)
    report = run_experiment(cfg)
    paths = emit_plot_data(report, cfg.output_dir)
    for row in report.summary:
        print(f"{row['method']:>12} fraction={row['fraction']:<6g} runs={row['runs']} "
              f"metric={row['metric_mean']:.6g} +- {row['metric_std']:.3g}")
    for p in paths:
        print(f"wrote {p}")
    return 0


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv, "toy": cmd_toy,
            "bound": cmd_bound, "report": cmd_report}


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (MVMLError, OSError) as exc:
        print(f"mvml {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())
