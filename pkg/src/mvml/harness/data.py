"""Dataset ingestion, toy data and dataset writing.

A dataset on disk is a small INI manifest plus one delimited text matrix per
view and a label file. Every data file starts with a header row naming its
columns; the delimiter is a tab, a comma or runs of whitespace, detected
from the header line. Example manifest::

    [dataset]
    task = classification
    labels = labels.tsv

    [view:first]
    file = view1.tsv
    kernel = gaussian
    bandwidth = mean_distance
"""
import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import InputError, IngestionError
from ..kernels import resolve_kernel

TASKS = ("regression", "classification")


@dataclass(frozen=True, eq=False)
class ViewSpec:
    name: str
    kernel: str = "gaussian"
    bandwidth: str = "mean_distance"


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    views: tuple
    labels: np.ndarray = None
    view_names: tuple = ()
    task: str = "regression"
    view_specs: tuple = field(default=())

    def __post_init__(self):
        views = tuple(np.atleast_2d(np.asarray(X, dtype=float)) for X in self.views)
        if not views:
            raise InputError("a dataset needs at least one view")
        n = views[0].shape[0]
        for l, X in enumerate(views):
            if X.shape[0] != n:
                raise InputError(f"view {l} has {X.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(X)):
                raise InputError(f"view {l} contains non-finite values")
        object.__setattr__(self, "views", views)
        if self.labels is not None:
            y = np.asarray(self.labels).ravel()
            if y.size != n:
                raise InputError(f"{y.size} labels for {n} samples")
            if y.dtype.kind == "f" and not np.all(np.isfinite(y)):
                raise InputError("labels contain non-finite values")
            object.__setattr__(self, "labels", y)
        if self.task not in TASKS:
            raise InputError(f"unknown task {self.task!r}; expected one of {TASKS}")
        names = tuple(self.view_names) or tuple(f"view{l + 1}" for l in range(len(views)))
        object.__setattr__(self, "view_names", names)
        if not self.view_specs:
            object.__setattr__(self, "view_specs", tuple(ViewSpec(nm) for nm in names))

    @property
    def n(self):
        return self.views[0].shape[0]

    @property
    def v(self):
        return len(self.views)

    def subset(self, idx):
        idx = np.asarray(idx)
        return MultiViewDataset(
            tuple(X[idx] for X in self.views),
            None if self.labels is None else self.labels[idx],
            self.view_names, self.task, self.view_specs)

    def kernel_configs(self, kernel=None, bandwidth=None):
        """Resolve each view's kernel policy on this dataset's samples."""
        return [resolve_kernel(kernel or s.kernel, bandwidth or s.bandwidth, X)
                for s, X in zip(self.view_specs, self.views)]


def _split(line, delim):
    if delim is None:
        return line.split()
    return [tok.strip() for tok in line.split(delim)]


def read_matrix(path):
    """Read a header-prefixed delimited numeric matrix; errors name file and line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestionError(path, f"cannot read file ({exc.strerror})") from None
    lines = text.splitlines()
    if not lines:
        raise IngestionError(path, "file is empty", line=1)
    header = lines[0]
    delim = "\t" if "\t" in header else ("," if "," in header else None)
    width = len(_split(header, delim))
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        toks = _split(line, delim)
        if len(toks) != width:
            raise IngestionError(path, f"expected {width} columns, found {len(toks)}", line=lineno)
        try:
            row = [float(t) for t in toks]
        except ValueError:
            bad = next(t for t in toks if not _is_float(t))
            raise IngestionError(path, f"cannot parse {bad!r} as a number", line=lineno) from None
        if not all(np.isfinite(row)):
            raise IngestionError(path, "non-finite value", line=lineno)
        rows.append(row)
    if not rows:
        raise IngestionError(path, "no data rows after the header")
    return np.array(rows, dtype=float), _split(header, delim)


def _is_float(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def write_matrix(path, M, columns=None, delimiter="\t"):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    columns = columns or [f"x{j + 1}" for j in range(M.shape[1])]
    with open(path, "w") as fh:
        fh.write(delimiter.join(columns) + "\n")
        for row in M:
            fh.write(delimiter.join(repr(float(x)) for x in row) + "\n")


_SECTION = re.compile(r"^view:(.+)$")


def load_dataset(manifest, require_labels=True):
    """Parse a manifest and the files it names into a :class:`MultiViewDataset`."""
    manifest = Path(manifest)
    if not manifest.is_file():
        raise IngestionError(manifest, "manifest not found")
    parser = configparser.ConfigParser()
    try:
        parser.read(manifest)
    except configparser.Error as exc:
        raise IngestionError(manifest, f"malformed manifest ({exc.message})") from None
    base = manifest.parent
    ds = parser["dataset"] if parser.has_section("dataset") else {}
    task = ds.get("task", "regression")
    if task not in TASKS:
        raise IngestionError(manifest, f"unknown task {task!r}")

    views, names, specs = [], [], []
    for section in parser.sections():
        m = _SECTION.match(section)
        if not m:
            continue
        sec = parser[section]
        if "file" not in sec:
            raise IngestionError(manifest, f"section [{section}] has no 'file' key")
        X, _ = read_matrix(base / sec["file"])
        views.append(X)
        names.append(m.group(1))
        specs.append(ViewSpec(m.group(1), sec.get("kernel", "gaussian"),
                              sec.get("bandwidth", "mean_distance")))
    if not views:
        raise IngestionError(manifest, "no [view:<name>] sections")
    n = views[0].shape[0]
    for nm, X in zip(names, views):
        if X.shape[0] != n:
            fname = parser[f"view:{nm}"]["file"]
            raise IngestionError(base / fname, f"has {X.shape[0]} rows but view "
                                 f"{names[0]!r} has {n}")

    labels = None
    if "labels" in ds:
        lab_path = base / ds["labels"]
        Y, _ = read_matrix(lab_path)
        if Y.shape[1] != 1:
            raise IngestionError(lab_path, f"expected one label column, found {Y.shape[1]}")
        if Y.shape[0] != n:
            raise IngestionError(lab_path, f"has {Y.shape[0]} labels for {n} samples")
        labels = Y[:, 0]
        if task == "classification":
            if not np.all(labels == np.round(labels)):
                raise IngestionError(lab_path, "class labels must be integers")
            labels = labels.astype(np.int64)
    elif require_labels:
        raise IngestionError(manifest, "no 'labels' entry in [dataset]")
    return MultiViewDataset(tuple(views), labels, tuple(names), task, tuple(specs))


def write_dataset(dataset, out_dir, manifest_name="manifest.ini"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cp = configparser.ConfigParser()
    cp["dataset"] = {"task": dataset.task}
    if dataset.labels is not None:
        lab = np.asarray(dataset.labels)
        with open(out / "labels.tsv", "w") as fh:
            fh.write("label\n")
            for y in lab:
                fh.write(f"{int(y)}\n" if lab.dtype.kind in "iu" else f"{float(y)!r}\n")
        cp["dataset"]["labels"] = "labels.tsv"
    for spec, X in zip(dataset.view_specs, dataset.views):
        fname = f"{spec.name}.tsv"
        write_matrix(out / fname, X, [f"{spec.name}_{j + 1}" for j in range(X.shape[1])])
        cp[f"view:{spec.name}"] = {"file": fname, "kernel": spec.kernel, "bandwidth": spec.bandwidth}
    path = out / manifest_name
    with open(path, "w") as fh:
        cp.write(fh)
    return path


def shear_rotation(shear, angle):
    S = np.array([[1.0, shear], [0.0, 1.0]])
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]]) @ S


def toy_generate(n_per_class=50, seed=0, shear=1.0, angle=np.pi / 6, spread=0.6):
    """Two Gaussian blobs in the plane; the second view is a sheared, rotated copy.

    Classes are 0 and 1, centred at -(2, 1) and +(2, 1). Both views use
    linear kernels.
    """
    if n_per_class < 1:
        raise InputError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    centre = np.array([2.0, 1.0])
    X = np.vstack([rng.normal(size=(n_per_class, 2)) * spread - centre,
                   rng.normal(size=(n_per_class, 2)) * spread + centre])
    y = np.repeat(np.array([0, 1], dtype=np.int64), n_per_class)
    X2 = X @ shear_rotation(shear, angle).T
    specs = (ViewSpec("view1", "linear", "none"), ViewSpec("view2", "linear", "none"))
    return MultiViewDataset((X, X2), y, ("view1", "view2"), "classification", specs)
