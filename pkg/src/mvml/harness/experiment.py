"""Cross-validation, repeated-Nystrom experiments and plot-table emission."""
import configparser
import csv
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..evaluation import accuracy, nmse, r2
from ..exceptions import ConfigError, InputError
from ..model import METHODS as MVML_METHODS, decide, predict_scores, train
from ..solver import SolverConfig
from .baselines import krr_baseline
from .data import MultiViewDataset, load_dataset

log = logging.getLogger(__name__)

KRR_METHODS = ("krr_early", "krr_late")
ALL_METHODS = MVML_METHODS + KRR_METHODS


def default_lambdas():
    return tuple(np.logspace(-8, 1, 7))


def default_etas(task):
    if task == "classification":
        return tuple(np.logspace(-3, 2, 6))
    return tuple(np.logspace(-4, 2, 7))


@dataclass
class ExperimentConfig:
    manifest: str
    methods: tuple = ("mvml",)
    fractions: tuple = (1.0,)
    seeds: tuple = (0, 1, 2, 3)
    lambdas: tuple = None
    etas: tuple = None
    folds: int = 3
    learn_w: bool = False
    output_dir: str = "report"
    test_manifest: str = None
    test_fraction: float = 0.3
    split_seed: int = 0
    kernel: str = None
    bandwidth: str = None
    mu: float = 1e-2
    max_iters: int = 200
    tol: float = 1e-6

    def validate(self):
        for m in self.methods:
            if m not in ALL_METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {ALL_METHODS}")
        if not self.fractions or any(not 0 < f <= 1 for f in self.fractions):
            raise ConfigError("fractions must be non-empty and lie in (0, 1]")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.lambdas is not None and not len(self.lambdas):
            raise ConfigError("lambda grid is empty")
        if self.etas is not None and not len(self.etas):
            raise ConfigError("eta grid is empty")
        return self


_LIST_KEYS = {"methods": str, "fractions": float, "seeds": int, "lambdas": float, "etas": float}
_SCALAR_KEYS = {"manifest": str, "test_manifest": str, "output_dir": str, "kernel": str,
                "bandwidth": str, "folds": int, "test_fraction": float, "split_seed": int,
                "mu": float, "max_iters": int, "tol": float}


def load_experiment_config(path):
    """Read an ``[experiment]`` INI section; list values are comma separated."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read experiment config {path}")
    if not cp.has_section("experiment"):
        raise ConfigError(f"{path}: missing [experiment] section")
    sec = cp["experiment"]
    kw = {}
    for key, raw in sec.items():
        if key in _LIST_KEYS:
            kw[key] = tuple(_LIST_KEYS[key](t.strip()) for t in raw.split(",") if t.strip())
        elif key in _SCALAR_KEYS:
            kw[key] = _SCALAR_KEYS[key](raw)
        elif key == "learn_w":
            kw[key] = sec.getboolean(key)
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")
    base = Path(path).parent
    for key in ("manifest", "test_manifest"):
        if kw.get(key) and not Path(kw[key]).is_absolute():
            kw[key] = str(base / kw[key])
    if "manifest" not in kw:
        raise ConfigError(f"{path}: 'manifest' is required")
    return ExperimentConfig(**kw)


# -- folds -----------------------------------------------------------------

def fold_assignment(labels, folds, stratified, seed=0):
    """Fold index per sample.

    Stratified: each class is shuffled and dealt round-robin over the folds.
    Otherwise the shuffled indices are cut into ``folds`` contiguous chunks.
    """
    labels = np.asarray(labels).ravel()
    n = labels.size
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=np.intp)
    if stratified:
        classes, counts = np.unique(labels, return_counts=True)
        if folds > counts.min():
            raise ConfigError(f"{folds} folds but class {classes[counts.argmin()]!r} "
                              f"has only {counts.min()} samples")
        for c in classes:
            idx = rng.permutation(np.flatnonzero(labels == c))
            assign[idx] = np.arange(idx.size) % folds
    else:
        if folds > n:
            raise ConfigError(f"{folds} folds for {n} samples")
        for k, chunk in enumerate(np.array_split(rng.permutation(n), folds)):
            assign[chunk] = k
    return assign


# -- fitting one method ----------------------------------------------------

def _solver_config(lam, eta, cfg):
    return SolverConfig(lam=lam, eta=eta, mu=cfg.mu, max_iters=cfg.max_iters, tol=cfg.tol,
                        learn_w=cfg.learn_w)


def _targets(y, classes):
    if classes.size == 2:
        return np.where(y == classes[1], 1.0, -1.0)
    return np.column_stack([np.where(y == c, 1.0, -1.0) for c in classes])


def fit_and_score(method, train_ds, test_ds, lam, eta, fraction, seed, cfg):
    """Fit one method and score it on ``test_ds``.

    Returns ``(scores, fit_seconds, solver_states)``; ``scores`` holds
    ``metric`` (accuracy or nMSE) and, for regression, ``r2``.
    """
    classification = train_ds.task == "classification"
    configs = train_ds.kernel_configs(cfg.kernel, cfg.bandwidth)
    if method in KRR_METHODS:
        classes = np.unique(train_ds.labels)
        y = _targets(train_ds.labels, classes) if classification else train_ds.labels.astype(float)
        mode = method.split("_")[1]
        families = [c.family for c in configs]
        t0 = time.perf_counter()
        if mode == "early":
            fam = families[0] if len(set(families)) == 1 else "gaussian"
            model = krr_baseline(train_ds.views, y, "early", lam, fam, cfg.bandwidth or train_ds.view_specs[0].bandwidth)
        else:
            model = krr_baseline(train_ds.views, y, "late", lam, families,
                                 cfg.bandwidth or train_ds.view_specs[0].bandwidth)
        seconds = time.perf_counter() - t0
        scores = model.predict(test_ds.views)
        states = []
    else:
        task = "classification" if classification else "regression"
        sc = _solver_config(lam, eta, cfg)
        mvml, states = train(train_ds.views, train_ds.labels, configs, sc, task=task,
                             method=method, fraction=fraction, seed=seed)
        seconds = mvml.metadata["fit_seconds"]
        scores = predict_scores(mvml, test_ds.views)
        classes = mvml.classes
    if classification:
        pred = decide(scores, classes)
        return {"metric": accuracy(pred, test_ds.labels)}, seconds, states
    scores = np.asarray(scores).ravel()
    return {"metric": nmse(scores, test_ds.labels), "r2": r2(scores, test_ds.labels)}, seconds, states


# -- cross-validation ------------------------------------------------------

@dataclass
class CVResult:
    best_lambda: float
    best_eta: float
    table: list = field(default_factory=list)


def cross_validate(dataset, method="mvml", lambdas=None, etas=None, folds=3, fraction=1.0,
                   seed=0, fold_seed=0, cfg=None):
    """Grid search over ``(lambda, eta)`` with k-fold validation.

    Accuracy is maximized for classification and nMSE minimized for
    regression; ties go to the smaller lambda, then the smaller eta.
    ``table`` has one row per grid cell and fold plus a ``fold = "mean"`` row.
    """
    cfg = cfg or ExperimentConfig(manifest="")
    classification = dataset.task == "classification"
    lambdas = sorted(set(float(x) for x in (lambdas if lambdas is not None else default_lambdas())))
    if method in KRR_METHODS:
        etas = [0.0]
    etas = sorted(set(float(x) for x in (etas if etas is not None else default_etas(dataset.task))))
    if not lambdas or not etas:
        raise ConfigError("grids must be non-empty")
    assign = fold_assignment(dataset.labels, folds, classification, fold_seed)

    table, best = [], None
    for lam in lambdas:
        for eta in etas:
            vals = []
            for k in range(folds):
                tr, va = np.flatnonzero(assign != k), np.flatnonzero(assign == k)
                scores, _, _ = fit_and_score(method, dataset.subset(tr), dataset.subset(va),
                                             lam, eta, fraction, seed, cfg)
                vals.append(scores["metric"])
                table.append({"lambda": lam, "eta": eta, "fold": k, "metric": scores["metric"]})
            mean = float(np.mean(vals))
            table.append({"lambda": lam, "eta": eta, "fold": "mean", "metric": mean})
            better = best is None or (mean > best[0] if classification else mean < best[0])
            if better:
                best = (mean, lam, eta)
    return CVResult(best_lambda=best[1], best_eta=best[2], table=table)


# -- experiment ------------------------------------------------------------

@dataclass
class Report:
    task: str
    runs: list
    summary: list
    metrics: dict = field(default_factory=dict)


def _holdout(dataset, test_fraction, seed):
    n = dataset.n
    n_test = max(1, int(round(test_fraction * n)))
    if n_test >= n:
        raise ConfigError("test fraction leaves no training samples")
    if dataset.task == "classification":
        # stratified: deal a proportional share of every class to the test split
        rng = np.random.default_rng(seed)
        test = []
        for c in np.unique(dataset.labels):
            idx = rng.permutation(np.flatnonzero(dataset.labels == c))
            test.extend(idx[:max(1, int(round(test_fraction * idx.size)))])
        test = np.sort(np.array(test))
    else:
        test = np.sort(np.random.default_rng(seed).permutation(n)[:n_test])
    train_idx = np.setdiff1d(np.arange(n), test)
    return dataset.subset(train_idx), dataset.subset(test)


def _pick(method, train_ds, fraction, cfg):
    lambdas = cfg.lambdas if cfg.lambdas is not None else default_lambdas()
    etas = cfg.etas if cfg.etas is not None else default_etas(train_ds.task)
    if method in KRR_METHODS:
        etas = (0.0,)
    if len(set(lambdas)) == 1 and len(set(etas)) == 1:
        return float(lambdas[0]), float(etas[0])
    res = cross_validate(train_ds, method, lambdas, etas, cfg.folds, fraction, cfg.seeds[0],
                         fold_seed=cfg.split_seed, cfg=cfg)
    return res.best_lambda, res.best_eta


def run_experiment(cfg, train_ds=None, test_ds=None):
    """Fit every method at every approximation level for every seed.

    KRR baselines do not use the approximation and run once per seed at
    fraction 1.0. A failing run is recorded with its error and the sweep goes
    on. The summary holds mean and (population) standard deviation per
    method and fraction; ``metrics`` keeps the learned metric of the first
    seed for each MVML method and fraction.
    """
    cfg.validate()
    if train_ds is None:
        dataset = load_dataset(cfg.manifest)
        if cfg.test_manifest:
            train_ds, test_ds = dataset, load_dataset(cfg.test_manifest)
        else:
            train_ds, test_ds = _holdout(dataset, cfg.test_fraction, cfg.split_seed)
    runs, metrics = [], {}
    for method in cfg.methods:
        fractions = (1.0,) if method in KRR_METHODS else tuple(cfg.fractions)
        for fraction in fractions:
            try:
                lam, eta = _pick(method, train_ds, fraction, cfg)
            except Exception as exc:  # noqa: BLE001 - recorded as a failed cell
                log.warning("model selection failed for %s at %g: %s", method, fraction, exc)
                for seed in cfg.seeds:
                    runs.append(_row(method, fraction, seed, np.nan, np.nan, f"failed: {exc}", {}, np.nan))
                continue
            for seed in cfg.seeds:
                try:
                    scores, seconds, states = fit_and_score(method, train_ds, test_ds, lam, eta,
                                                            fraction, seed, cfg)
                except Exception as exc:  # noqa: BLE001
                    log.warning("%s fraction=%g seed=%d failed: %s", method, fraction, seed, exc)
                    runs.append(_row(method, fraction, seed, lam, eta, f"failed: {exc}", {}, np.nan))
                    continue
                runs.append(_row(method, fraction, seed, lam, eta, "ok", scores, seconds))
                if states and (method, fraction) not in metrics:
                    metrics[(method, fraction)] = states[0].A
    return Report(train_ds.task, runs, summarize(runs, train_ds.task), metrics)


def _row(method, fraction, seed, lam, eta, status, scores, seconds):
    return {"method": method, "fraction": float(fraction), "seed": int(seed),
            "lambda": float(lam), "eta": float(eta), "status": status,
            "metric": float(scores.get("metric", np.nan)), "r2": float(scores.get("r2", np.nan)),
            "fit_seconds": float(seconds)}


def summarize(runs, task):
    out, keys = [], []
    for r in runs:
        key = (r["method"], r["fraction"])
        if key not in keys:
            keys.append(key)
    for method, fraction in keys:
        ok = [r for r in runs if r["method"] == method and r["fraction"] == fraction and r["status"] == "ok"]
        n_all = sum(1 for r in runs if r["method"] == method and r["fraction"] == fraction)
        col = lambda k: np.array([r[k] for r in ok], dtype=float)
        stats = lambda a: (float(a.mean()), float(a.std())) if a.size else (np.nan, np.nan)
        m_mean, m_std = stats(col("metric"))
        r_mean, r_std = stats(col("r2"))
        t_mean, t_std = stats(col("fit_seconds"))
        row = {"method": method, "fraction": fraction, "runs": len(ok), "failed": n_all - len(ok),
               "metric_mean": m_mean, "metric_std": m_std}
        if task == "regression":
            row.update(r2_mean=r_mean, r2_std=r_std)
        row.update(fit_seconds_mean=t_mean, fit_seconds_std=t_std)
        out.append(row)
    return out


# -- output tables ---------------------------------------------------------

RUN_COLUMNS = ("method", "fraction", "seed", "lambda", "eta", "status", "metric", "r2", "fit_seconds")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_table(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_table(path):
    """Read a table written by :func:`write_table`; numeric cells become floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    for r in rows:
        for k, val in r.items():
            try:
                r[k] = float(val)
            except ValueError:
                pass
    return rows


def write_metric_matrix(path, A):
    """Dense metric dump; the view of each row and column is spelled out so block boundaries are explicit."""
    A_arr = np.asarray(A, dtype=float)
    v = A.n_views if hasattr(A, "n_views") else 1
    b = A_arr.shape[0] // v
    cols = ["row_view", "row_index"] + [f"v{m + 1}_{j}" for m in range(v) for j in range(b)]
    with open(path, "w") as fh:
        fh.write("\t".join(cols) + "\n")
        for i, row in enumerate(A_arr):
            fh.write("\t".join([str(i // b + 1), str(i % b)] + [repr(float(x)) for x in row]) + "\n")


def read_metric_matrix(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    v = len({c.split("_")[0] for c in header[2:]})
    return np.array([[float(x) for x in r[2:]] for r in rows]), v


def emit_plot_data(report, output_dir):
    """Write ``summary.tsv`` (metric vs fraction per method), ``runs.tsv`` and one
    ``metric_<method>_<fraction>.tsv`` per learned metric. Returns the paths."""
    if not report.runs:
        raise InputError("report is empty")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    cols = list(report.summary[0].keys())
    write_table(out / "summary.tsv", report.summary, cols)
    write_table(out / "runs.tsv", report.runs, RUN_COLUMNS)
    paths += [out / "summary.tsv", out / "runs.tsv"]
    for (method, fraction), A in report.metrics.items():
        p = out / f"metric_{method}_{fraction:g}.tsv"
        write_metric_matrix(p, A)
        paths.append(p)
    return paths
