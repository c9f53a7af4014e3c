"""Command-line front end.

Commands: ``fit``, ``predict``, ``features``, ``cluster``, ``evaluate``,
``gradcheck``. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure.

Model files are versioned UTF-8 text, one record per line, fields
separated by tabs. The first line is the format version, then
``key<TAB>value`` lines, then array blocks introduced by
``field<TAB>name<TAB>ndim<TAB>dim1..`` followed by the rows flattened
to 2-d. Floats are written with ``repr`` (shortest round-trip), so
write -> read -> write is byte-identical. All writes go through a
temporary file and an atomic rename. Every artifact carries the
16-hex-digit id of the manifest that produced it; manifests themselves
contain only fields that are functions of the inputs, never wall-clock
time, so identical runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .classifier import LdaModel, OpgdModel, RdaModel, SaveModel, fit_opgd, \
    lda_fit, lda_predict, predict as opgd_predict, rda_fit, rda_predict, \
    save_fit, save_predict
from .clustering import ClusterConfig, GmmModel, enhance_gmm, fit_gmm_em, \
    hard_labels, pca_prefilter
from .core import ConfigError, DataError, Dataset, NumericalError, \
    estimate_class_model
from .evaluation import adjusted_rand_index, default_grid, grid_search, \
    make_folds, make_split, misclassification_error, \
    normalized_mutual_information
from .objective import classification_log_likelihood, grad_objective
from .clustering import cluster_objective, grad_cluster_objective
from .optimizer import OptimConfig

FORMAT_VERSION = "opgd-model-v1"
MANIFEST_VERSION = "opgd-manifest-v1"


def _fmt(x) -> str:
    return repr(float(x))


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".opgd-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Ingestion

@dataclass(frozen=True)
class IngestResult:
    dataset: Dataset
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]      # original names, index = class id - 1
    dropped_columns: tuple[str, ...]
    groups: np.ndarray | None         # raw group keys, aligned with rows


def _sniff_delimiter(header_line: str) -> str:
    counts = {d: header_line.count(d) for d in ("\t", ",", ";")}
    return max(counts, key=counts.get) if max(counts.values()) else ","


def ingest_csv(path: str, label_column: str | None = None,
               perturb_sd: float = 0.0, drop_constant: bool = False,
               seed: int = 0, group_column: str | None = None) -> IngestResult:
    """Load a delimited numeric table with a header row.

    The label column (when named) is mapped to contiguous class ids
    1..K, numerically when every value parses as a number, otherwise
    lexically; original names are kept. Constant feature columns are
    dropped when requested, then an optional i.i.d. Gaussian
    perturbation with per-column sd ``perturb_sd * column_sd`` is
    applied using ``seed``.
    """
    if perturb_sd < 0:
        raise ConfigError("perturb sd fraction must be non-negative")
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            first = fh.readline()
            if not first.strip():
                raise DataError(f"{path}: empty file")
            delim = _sniff_delimiter(first)
            fh.seek(0)
            rows = list(csv.reader(fh, delimiter=delim))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise DataError(f"{path}: no data rows")

    special = {}
    for role, name in (("label", label_column), ("group", group_column)):
        if name is None:
            continue
        if name not in header:
            raise ConfigError(f"{path}: no column named {name!r} "
                              f"(columns: {', '.join(header)})")
        special[role] = header.index(name)
    feature_idx = [j for j in range(len(header)) if j not in special.values()]

    X = np.empty((len(body), len(feature_idx)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, "
                            f"expected {len(header)}")
        for jj, j in enumerate(feature_idx):
            try:
                X[i, jj] = float(row[j])
            except ValueError:
                raise DataError(f"{path}: non-numeric value {row[j]!r} at "
                                f"row {i + 2}, column {header[j]!r}") from None

    feature_names = [header[j] for j in feature_idx]
    dropped: tuple[str, ...] = ()
    if drop_constant:
        keep = [j for j in range(X.shape[1])
                if X[:, j].max() > X[:, j].min()]
        dropped = tuple(feature_names[j] for j in range(X.shape[1])
                        if j not in keep)
        X = X[:, keep]
        feature_names = [feature_names[j] for j in keep]
    if X.shape[1] == 0:
        raise DataError(f"{path}: no feature columns remain")
    if perturb_sd > 0:
        rng = np.random.default_rng(seed)
        X = X + rng.standard_normal(X.shape) * (perturb_sd * X.std(axis=0))

    labels = None
    label_names: tuple[str, ...] = ()
    if "label" in special:
        raw = [row[special["label"]].strip() for row in body]
        try:
            numeric = [float(v) for v in raw]
            keys = sorted(set(numeric))
            first_name = {}
            for v, s in zip(numeric, raw):
                first_name.setdefault(v, s)
            label_names = tuple(first_name[k] for k in keys)
            ids = {k: c + 1 for c, k in enumerate(keys)}
            labels = np.array([ids[v] for v in numeric], dtype=int)
        except ValueError:
            keys = sorted(set(raw))
            label_names = tuple(keys)
            ids = {k: c + 1 for c, k in enumerate(keys)}
            labels = np.array([ids[v] for v in raw], dtype=int)

    groups = None
    if "group" in special:
        groups = np.array([row[special["group"]].strip() for row in body])

    return IngestResult(dataset=Dataset(X, labels),
                        feature_names=tuple(feature_names),
                        label_names=label_names,
                        dropped_columns=dropped,
                        groups=groups)


# ---------------------------------------------------------------------------
# Manifests

@dataclass(frozen=True)
class RunManifest:
    command: str
    data_path: str
    params: tuple          # ((key, value-string), ...) sorted by key
    seed: int
    version: str
    timestamp: float       # runtime only; never written to artifacts

    def semantic_lines(self) -> list[str]:
        lines = [MANIFEST_VERSION,
                 f"version\t{self.version}",
                 f"command\t{self.command}",
                 f"data\t{self.data_path}",
                 f"seed\t{self.seed}"]
        lines += [f"param\t{k}\t{v}" for k, v in self.params]
        return lines

    @property
    def manifest_id(self) -> str:
        text = "\n".join(self.semantic_lines())
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def make_manifest(command: str, data_path: str, seed: int,
                  **params) -> RunManifest:
    items = tuple(sorted((k, str(v)) for k, v in params.items()
                         if v is not None))
    return RunManifest(command=command, data_path=data_path, params=items,
                       seed=seed, version=f"opgd-{__version__}",
                       timestamp=time.time())


def write_manifest(manifest: RunManifest, path: str):
    lines = manifest.semantic_lines() + [f"id\t{manifest.manifest_id}"]
    _atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Model serialization

# type tag -> (class, scalar fields, array fields, has label names)
_MODEL_SPECS = {
    "opgd": (OpgdModel, (),
             ("projection", "projected_means", "projected_vars", "priors"),
             True),
    "lda": (LdaModel, (), ("projection", "means", "covariance", "priors"),
            True),
    "save": (SaveModel, (), ("projection", "means", "covariances", "priors"),
             True),
    "rda": (RdaModel, ("alpha",), ("means", "covariances", "priors"), True),
    "gmm": (GmmModel, (), ("weights", "means", "covariances"), False),
}
_TYPE_OF = {cls: tag for tag, (cls, *_rest) in _MODEL_SPECS.items()}


def serialize_model(model, manifest_id: str = "") -> str:
    tag = _TYPE_OF.get(type(model))
    if tag is None:
        raise ConfigError(f"cannot serialize {type(model).__name__}")
    _, scalars, arrays, has_labels = _MODEL_SPECS[tag]
    lines = [FORMAT_VERSION, f"type\t{tag}", f"manifest\t{manifest_id}"]
    if has_labels:
        lines.append("labels\t" + "\t".join(model.label_names))
    for name in scalars:
        lines.append(f"scalar\t{name}\t{_fmt(getattr(model, name))}")
    for name in arrays:
        A = np.asarray(getattr(model, name), dtype=float)
        dims = "\t".join(str(d) for d in A.shape)
        lines.append(f"field\t{name}\t{A.ndim}\t{dims}")
        flat = A.reshape(-1, A.shape[-1]) if A.ndim > 1 else A.reshape(1, -1)
        for row in flat:
            lines.append("\t".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_model(text: str):
    """Inverse of :func:`serialize_model`; returns (model, manifest id)."""
    lines = text.splitlines()
    if not lines or lines[0] != FORMAT_VERSION:
        raise DataError(f"not a {FORMAT_VERSION} model file")
    kv = {}
    label_names = None
    arrays = {}
    i = 1
    while i < len(lines):
        parts = lines[i].split("\t")
        key = parts[0]
        if key == "labels":
            label_names = tuple(parts[1:])
        elif key == "scalar":
            kv[parts[1]] = float(parts[2])
        elif key == "field":
            name, ndim = parts[1], int(parts[2])
            shape = tuple(int(d) for d in parts[3:3 + ndim])
            nrows = 1 if ndim == 1 else int(np.prod(shape[:-1]))
            block = lines[i + 1:i + 1 + nrows]
            if len(block) != nrows:
                raise DataError(f"truncated array block for {name!r}")
            A = np.array([[float(v) for v in r.split("\t")] for r in block])
            arrays[name] = A.reshape(shape)
            i += nrows
        else:
            kv[key] = parts[1] if len(parts) > 1 else ""
        i += 1
    tag = kv.pop("type", None)
    if tag not in _MODEL_SPECS:
        raise DataError(f"unknown model type {tag!r}")
    cls, scalars, array_names, has_labels = _MODEL_SPECS[tag]
    missing = [a for a in array_names if a not in arrays]
    if missing:
        raise DataError(f"model file is missing fields: {missing}")
    kwargs = {name: arrays[name] for name in array_names}
    for name in scalars:
        kwargs[name] = kv[name]
    if has_labels:
        if label_names is None:
            raise DataError("model file is missing the labels line")
        kwargs["label_names"] = label_names
    return cls(**kwargs), kv.get("manifest", "")


_PREDICTORS = {"opgd": opgd_predict, "lda": lda_predict,
               "rda": rda_predict, "save": save_predict}


def _model_predict(model, X):
    return _PREDICTORS[_TYPE_OF[type(model)]](model, X)


# ---------------------------------------------------------------------------
# Tables

def _write_table(path: str, manifest_id: str, header: list[str],
                 rows: list[list[str]]):
    lines = [f"# manifest\t{manifest_id}", "\t".join(header)]
    lines += ["\t".join(r) for r in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands

def _opt_config(args) -> OptimConfig:
    return OptimConfig(max_iters=args.max_iters,
                       epsilon_init=args.epsilon,
                       ridge_frac=args.ridge,
                       seed=args.seed)


def cmd_fit(args) -> int:
    ing = ingest_csv(args.data, label_column=args.labels,
                     perturb_sd=args.perturb, drop_constant=args.drop_constant,
                     seed=args.seed)
    if ing.dataset.labels is None:
        raise ConfigError("fit requires --labels")
    manifest = make_manifest(
        "fit", args.data, args.seed, method=args.method, dim=args.dim,
        alpha=args.alpha, epsilon=args.epsilon, ridge=args.ridge,
        max_iters=args.max_iters, perturb=args.perturb,
        drop_constant=args.drop_constant,
        dropped=",".join(ing.dropped_columns) or None)
    names = ing.label_names
    if args.method == "opgd":
        model = fit_opgd(ing.dataset, args.dim, _opt_config(args),
                         label_names=names)
    elif args.method == "lda":
        model = lda_fit(ing.dataset, args.dim, label_names=names)
    elif args.method == "save":
        model = save_fit(ing.dataset, args.dim, label_names=names)
    else:
        model = rda_fit(ing.dataset, args.alpha, label_names=names)
    pred, _ = _model_predict(model, ing.dataset.X)
    err = misclassification_error(pred, ing.dataset.labels)
    _atomic_write(args.out, serialize_model(model, manifest.manifest_id))
    write_manifest(manifest, args.out + ".manifest")
    print(f"manifest\t{manifest.manifest_id}")
    print(f"training_error\t{_fmt(err)}")
    return 0


def cmd_predict(args) -> int:
    with open(args.model, encoding="utf-8") as fh:
        model, _source_id = parse_model(fh.read())
    ing = ingest_csv(args.data, label_column=args.labels, seed=args.seed)
    manifest = make_manifest("predict", args.data, args.seed,
                             model=args.model)
    pred, post = _model_predict(model, ing.dataset.X)
    names = model.label_names
    header = ["label"] + [f"p_{nm}" for nm in names]
    rows = [[names[lab - 1]] + [_fmt(v) for v in prow]
            for lab, prow in zip(pred, post)]
    _write_table(args.out, manifest.manifest_id, header, rows)
    write_manifest(manifest, args.out + ".manifest")
    print(f"manifest\t{manifest.manifest_id}")
    if ing.dataset.labels is not None:
        truth = [ing.label_names[t - 1] for t in ing.dataset.labels]
        err = misclassification_error([names[lab - 1] for lab in pred], truth)
        print(f"test_error\t{_fmt(err)}")
    return 0


def cmd_features(args) -> int:
    ing = ingest_csv(args.data, label_column=args.labels,
                     perturb_sd=args.perturb, drop_constant=args.drop_constant,
                     seed=args.seed)
    if ing.dataset.labels is None:
        raise ConfigError("features requires --labels")
    manifest = make_manifest(
        "features", args.data, args.seed, method=args.method, dim=args.dim,
        epsilon=args.epsilon, ridge=args.ridge, max_iters=args.max_iters,
        perturb=args.perturb, drop_constant=args.drop_constant,
        dropped=",".join(ing.dropped_columns) or None)
    if args.method == "opgd":
        model = fit_opgd(ing.dataset, args.dim, _opt_config(args),
                         label_names=ing.label_names)
        V = model.projection
    elif args.method == "lda":
        V = lda_fit(ing.dataset, args.dim).projection
    elif args.method == "save":
        V = save_fit(ing.dataset, args.dim).projection
    else:
        raise ConfigError("features supports methods opgd, lda, save")
    Z = ing.dataset.X @ V
    vcols = [f"v{j + 1}" for j in range(V.shape[1])]
    rows = [[_fmt(v) for v in zrow] + [ing.label_names[t - 1]]
            for zrow, t in zip(Z, ing.dataset.labels)]
    _write_table(args.out, manifest.manifest_id, vcols + ["label"], rows)
    _write_table(args.out + ".projection", manifest.manifest_id,
                 ["feature"] + vcols,
                 [[ing.feature_names[i]] + [_fmt(v) for v in V[i]]
                  for i in range(V.shape[0])])
    write_manifest(manifest, args.out + ".manifest")
    print(f"manifest\t{manifest.manifest_id}")
    return 0


def cmd_cluster(args) -> int:
    ing = ingest_csv(args.data, label_column=args.labels,
                     perturb_sd=args.perturb, drop_constant=args.drop_constant,
                     seed=args.seed)
    manifest = make_manifest(
        "cluster", args.data, args.seed, clusters=args.clusters, dim=args.dim,
        lam=args.lam, pca_threshold=args.pca_threshold,
        epsilon=args.epsilon, ridge=args.ridge, max_iters=args.max_iters,
        init_gmm=args.init_gmm, perturb=args.perturb,
        drop_constant=args.drop_constant,
        dropped=",".join(ing.dropped_columns) or None)
    X = ing.dataset.X
    if args.pca_threshold is not None:
        X, _basis = pca_prefilter(X, args.pca_threshold)
    cc = ClusterConfig(lam=args.lam, seed=args.seed,
                       pca_threshold=args.pca_threshold)
    if args.init_gmm:
        with open(args.init_gmm, encoding="utf-8") as fh:
            gmm, _ = parse_model(fh.read())
        if not isinstance(gmm, GmmModel):
            raise ConfigError(f"{args.init_gmm} is not a gmm model file")
        if gmm.p != X.shape[1]:
            raise DataError(f"initial mixture has {gmm.p} dims, data has "
                            f"{X.shape[1]} (after any pre-filter)")
    else:
        gmm = fit_gmm_em(X, args.clusters, cc)
    initial_labels = hard_labels(X, gmm)
    V, labels, _projected = enhance_gmm(X, gmm, args.dim, cc,
                                        _opt_config(args))
    Z = X @ V
    vcols = [f"v{j + 1}" for j in range(V.shape[1])]
    _write_table(args.out, manifest.manifest_id, ["cluster"],
                 [[str(c)] for c in labels])
    _write_table(args.out + ".features", manifest.manifest_id,
                 vcols + ["cluster"],
                 [[_fmt(v) for v in zrow] + [str(c)]
                  for zrow, c in zip(Z, labels)])
    _write_table(args.out + ".projection", manifest.manifest_id,
                 vcols, [[_fmt(v) for v in row] for row in V])
    _atomic_write(args.out + ".gmm",
                  serialize_model(gmm, manifest.manifest_id))
    metric_rows = []
    if ing.dataset.labels is not None:
        truth = ing.dataset.labels
        for tag, lab in (("initial", initial_labels), ("enhanced", labels)):
            ari = adjusted_rand_index(lab, truth)
            nmi = normalized_mutual_information(lab, truth)
            metric_rows += [[f"ari_{tag}", _fmt(ari)],
                            [f"ari_{tag}_x100", _fmt(100 * ari)],
                            [f"nmi_{tag}", _fmt(nmi)],
                            [f"nmi_{tag}_x100", _fmt(100 * nmi)]]
        _write_table(args.out + ".metrics", manifest.manifest_id,
                     ["metric", "value"], metric_rows)
    write_manifest(manifest, args.out + ".manifest")
    print(f"manifest\t{manifest.manifest_id}")
    for name, value in metric_rows:
        print(f"{name}\t{value}")
    return 0


def _parse_grid(text: str, method: str):
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError("empty --grid")
    return vals if method == "rda" else [int(v) for v in vals]


def cmd_evaluate(args) -> int:
    ing = ingest_csv(args.data, label_column=args.labels,
                     perturb_sd=args.perturb, drop_constant=args.drop_constant,
                     seed=args.seed, group_column=args.group)
    if ing.dataset.labels is None:
        raise ConfigError("evaluate requires --labels")
    train = ing.dataset
    manifest = make_manifest(
        "evaluate", args.data, args.seed, methods=args.method,
        grid=args.grid, folds=args.folds, split=args.split, test=args.test,
        group=args.group, epsilon=args.epsilon, ridge=args.ridge,
        max_iters=args.max_iters, perturb=args.perturb,
        drop_constant=args.drop_constant,
        dropped=",".join(ing.dropped_columns) or None)

    test_X = test_labels = None
    if args.folds is not None:
        plan = make_folds(train.n, args.folds, grouping=ing.groups,
                          seed=args.seed)
        if args.test:
            test_ing = ingest_csv(args.test, label_column=args.labels,
                                  perturb_sd=args.perturb,
                                  drop_constant=False, seed=args.seed)
            if test_ing.label_names != ing.label_names:
                raise DataError("train and test label sets differ")
            test_X, test_labels = test_ing.dataset.X, test_ing.dataset.labels
    else:
        ratios = tuple(float(r) for r in args.split.split(","))
        plan = make_split(train.n, ratios, seed=args.seed)
        test_X, test_labels = train.X[plan.test], train.labels[plan.test]

    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    opt = _opt_config(args)
    model = estimate_class_model(train)
    rows = []
    for method in methods:
        grid = _parse_grid(args.grid, method) if args.grid \
            else default_grid(method, train.p, model.K)
        result = grid_search(method, grid, train, plan, opt_config=opt)
        chosen = [e for h, e in result.val_errors if h == result.best_hyper][0]
        test_err = ""
        if test_X is not None:
            pred = _PREDICTORS[method](result.model, test_X)[0]
            test_err = _fmt(misclassification_error(pred, test_labels))
        rows.append([method, str(result.best_hyper), _fmt(chosen), test_err])
        for h, msg in result.failures:
            print(f"note\t{method} grid point {h} failed: {msg}",
                  file=sys.stderr)
    _write_table(args.out, manifest.manifest_id,
                 ["method", "hyper", "val_error", "test_error"], rows)
    write_manifest(manifest, args.out + ".manifest")
    print(f"manifest\t{manifest.manifest_id}")
    for row in rows:
        print("\t".join(row))
    return 0


def _gradcheck_suite(trials: int, seed: int):
    """Random-instance finite-difference suites for both gradients."""
    rng = np.random.default_rng(seed)
    worst_sup = 0.0
    for _ in range(trials):
        n = int(rng.integers(15, 51))
        p = int(rng.integers(2, 9))
        K = int(rng.integers(2, 5))
        dim = int(rng.integers(1, min(p, 4) + 1))
        X = rng.standard_normal((n, p))
        y = np.r_[np.tile(np.arange(1, K + 1), 2),
                  rng.integers(1, K + 1, n - 2 * K)]
        ds = Dataset(X, y)
        model = estimate_class_model(ds)
        V = rng.standard_normal((p, dim))
        G = grad_objective(ds, V, model)
        FD = _central_diff(
            lambda M: classification_log_likelihood(ds, M, model), V)
        worst_sup = max(worst_sup, _rel_err(G, FD))

    worst_clu = 0.0
    done = 0
    while done < max(trials // 5, 10):
        n = int(rng.integers(20, 51))
        p = int(rng.integers(2, 7))
        K = int(rng.integers(1, 4))
        dim = int(rng.integers(1, min(p, 3) + 1))
        X = rng.standard_normal((n, p)) + 3.0 * rng.integers(0, K, (n, 1))
        cc = ClusterConfig(seed=int(rng.integers(1 << 31)))
        gmm = fit_gmm_em(X, K, cc)
        V = rng.standard_normal((p, dim))
        from scipy.special import logsumexp
        from .objective import log_densities
        joint = np.log(gmm.weights)[None, :] + \
            log_densities(X, V, gmm.means, gmm.covariances)
        top2 = np.sort(joint, axis=1)
        if K > 1 and np.min(top2[:, -1] - top2[:, -2]) < 1e-3:
            continue                     # too close to a switching boundary
        lam = float(n)
        G = grad_cluster_objective(X, V, gmm, lam)
        FD = _central_diff(lambda M: cluster_objective(X, M, gmm, lam), V)
        worst_clu = max(worst_clu, _rel_err(G, FD))
        done += 1
    return worst_sup, worst_clu


def _central_diff(fn, V, h: float = 1e-6):
    FD = np.zeros_like(V)
    for a in range(V.shape[0]):
        for b in range(V.shape[1]):
            Vp = V.copy()
            Vp[a, b] += h
            Vm = V.copy()
            Vm[a, b] -= h
            FD[a, b] = (fn(Vp) - fn(Vm)) / (2.0 * h)
    return FD


def _rel_err(G, FD):
    return float(np.linalg.norm(G - FD) /
                 max(np.linalg.norm(FD), 1e-12))


def cmd_gradcheck(args) -> int:
    worst_sup, worst_clu = _gradcheck_suite(args.trials, args.seed)
    lines = [f"supervised_max_rel_err\t{_fmt(worst_sup)}",
             f"clustering_max_rel_err\t{_fmt(worst_clu)}",
             f"tolerance\t{_fmt(1e-5)}"]
    report = "\n".join(lines)
    print(report)
    if args.out:
        manifest = make_manifest("gradcheck", "<builtin>", args.seed,
                                 trials=args.trials)
        _write_table(args.out, manifest.manifest_id, ["check", "value"],
                     [ln.split("\t") for ln in lines])
    if worst_sup >= 1e-5 or worst_clu >= 1e-5:
        raise NumericalError("gradient check failed: max relative error "
                             f"{max(worst_sup, worst_clu):.3e} >= 1e-5")
    return 0


# ---------------------------------------------------------------------------
# Parser

def _add_common(sp, *, data=True):
    if data:
        sp.add_argument("--data", required=True, help="input data file")
    sp.add_argument("--seed", type=int, default=0)


def _add_ingest(sp):
    sp.add_argument("--labels", default=None,
                    help="name of the label column")
    sp.add_argument("--perturb", type=float, default=0.0,
                    help="Gaussian perturbation sd as a fraction of each "
                         "column sd (0 disables; 1e-6 is conventional)")
    sp.add_argument("--drop-constant", action="store_true",
                    help="drop zero-variance feature columns")


def _add_opt(sp):
    sp.add_argument("--epsilon", type=float, default=1e-3,
                    help="warm-start perturbation weight")
    sp.add_argument("--ridge", type=float, default=1e-6,
                    help="within-scatter ridge fraction")
    sp.add_argument("--max-iters", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="opgd",
        description="Discriminative linear projections for Gaussian "
                    "classification and mixture-based clustering")
    sub = ap.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a classifier and write a model file")
    _add_common(fit)
    _add_ingest(fit)
    _add_opt(fit)
    fit.add_argument("--method", choices=("opgd", "lda", "rda", "save"),
                     default="opgd")
    fit.add_argument("--dim", type=int, default=2,
                     help="projection dimension (opgd/lda/save)")
    fit.add_argument("--alpha", type=float, default=1.0,
                     help="rda covariance blend in [0, 1]")
    fit.add_argument("--out", required=True, help="model file to write")
    fit.set_defaults(func=cmd_fit)

    pred = sub.add_parser("predict", help="label new data with a model file")
    _add_common(pred)
    pred.add_argument("--model", required=True)
    pred.add_argument("--labels", default=None,
                      help="label column for reporting the error")
    pred.add_argument("--out", required=True, help="labels/posteriors file")
    pred.set_defaults(func=cmd_predict)

    feat = sub.add_parser("features",
                          help="write projected coordinates for plotting")
    _add_common(feat)
    _add_ingest(feat)
    _add_opt(feat)
    feat.add_argument("--method", choices=("opgd", "lda", "save"),
                      default="opgd")
    feat.add_argument("--dim", type=int, default=2)
    feat.add_argument("--out", required=True)
    feat.set_defaults(func=cmd_features)

    clu = sub.add_parser("cluster", help="mixture fit plus projection "
                                         "enhancement")
    _add_common(clu)
    _add_ingest(clu)
    _add_opt(clu)
    clu.add_argument("--clusters", type=int, required=True,
                     help="number of mixture components")
    clu.add_argument("--dim", type=int, default=2)
    clu.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="orthonormality penalty weight (default: n)")
    clu.add_argument("--pca-threshold", type=float, default=None,
                     help="variance ratio for the collinearity pre-filter "
                          "(e.g. 0.999)")
    clu.add_argument("--init-gmm", default=None,
                     help="gmm model file to start from instead of EM")
    clu.add_argument("--out", required=True)
    clu.set_defaults(func=cmd_cluster)

    ev = sub.add_parser("evaluate", help="hyper-parameter search and test "
                                         "error for one or more methods")
    _add_common(ev)
    _add_ingest(ev)
    _add_opt(ev)
    ev.add_argument("--method", default="opgd",
                    help="comma list from opgd,lda,rda,save")
    ev.add_argument("--grid", default=None,
                    help="comma list of hyper-parameter values")
    ev.add_argument("--folds", type=int, default=None,
                    help="cross-validation fold count")
    ev.add_argument("--split", default="0.5,0.25,0.25",
                    help="train,val,test ratios when not using --folds")
    ev.add_argument("--group", default=None,
                    help="column whose groups must not span folds")
    ev.add_argument("--test", default=None,
                    help="separate test data file (with --folds)")
    ev.add_argument("--out", required=True, help="results table")
    ev.set_defaults(func=cmd_evaluate)

    gc = sub.add_parser("gradcheck", help="finite-difference self-test")
    _add_common(gc, data=False)
    gc.add_argument("--trials", type=int, default=100)
    gc.add_argument("--out", default=None, help="optional report file")
    gc.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
