"""Command-line driver: gen, train, eval, baseline, plot, sweep.

Configuration comes from an optional flat JSON file (``--config``); any long
flag given on the command line overrides the file. Unknown config keys are
rejected so typos surface early.
"""

from __future__ import annotations

import argparse
import functools
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import baselines, evalkit, headmap, learner, plotsvg, synthdata

log = logging.getLogger("valleyseek")


class CliError(Exception):
    pass


@dataclass
class ExperimentConfig:
    mixture: str = "paper2d"  # builtin name or path to a mixture JSON
    sigma: float = 1.0  # scale of builtin mixtures
    param_sigma: Optional[float] = None  # scale for epsilon/phi/beta; defaults to sigma
    epsilon: Optional[float] = None
    phi: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    warmup: int = 100
    decay: bool = False
    grid: Optional[int] = None  # planes per dimension
    random: Optional[int] = None  # random pool size, instead of a grid
    init_seed: int = 0
    domain_lo: Optional[float] = None
    domain_hi: Optional[float] = None
    auto_domain: bool = False
    train_size: int = 10000
    calib_size: int = 400
    test_size: int = 400
    seed: int = 0
    cadence: int = 500
    ns: list = field(default_factory=lambda: [1, 3, 5])
    weighting: str = "balanced"
    out: str = "run"
    backend: Optional[str] = None

    def validate(self):
        for name in ("train_size", "calib_size", "test_size", "cadence"):
            if getattr(self, name) < 0 or (name == "cadence" and self.cadence < 1):
                raise CliError(f"{name} must be positive")
        if self.grid is not None and self.random is not None:
            raise CliError("--grid and --random are mutually exclusive")
        if (self.domain_lo is None) != (self.domain_hi is None):
            raise CliError("--domain-lo and --domain-hi go together")
        if self.domain_lo is not None and not self.domain_hi > self.domain_lo:
            raise CliError("--domain-hi must exceed --domain-lo")
        if not self.ns or any(int(n) < 1 for n in self.ns):
            raise CliError("--ns needs positive integers")
        return self


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise CliError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**doc)


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    return cfg.validate()


def stream_seed(seed: int, role: int) -> int:
    """Independent integer seed for stream ``role`` of run ``seed``."""
    return int(np.random.SeedSequence([int(seed), role]).generate_state(1, np.uint64)[0])


def mixture_of(cfg: ExperimentConfig) -> synthdata.MixtureSpec:
    if cfg.mixture in synthdata.BUILTINS:
        return synthdata.builtin_spec(cfg.mixture, cfg.sigma)
    p = Path(cfg.mixture)
    if not p.exists():
        raise CliError(f"mixture {cfg.mixture!r} is neither a builtin "
                       f"({', '.join(synthdata.BUILTINS)}) nor an existing file")
    return synthdata.MixtureSpec.load(p)


def _read(path) -> synthdata.Samples:
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    try:
        return synthdata.read_samples(path)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _same_data(a, b) -> bool:
    try:
        if os.path.samefile(a, b):
            return True
    except OSError:
        return False
    return Path(a).read_bytes() == Path(b).read_bytes()


def _warn_leak(calib, test):
    if _same_data(calib, test):
        msg = "calibration and test data are identical; Top-n errors will be optimistic"
        log.warning(msg)
        return True
    return False


# --- gen ----------------------------------------------------------------------

def cmd_gen(cfg: ExperimentConfig) -> dict:
    spec = mixture_of(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for role, (name, n) in enumerate((("train", cfg.train_size), ("calib", cfg.calib_size),
                                      ("test", cfg.test_size))):
        s = synthdata.gen_mixture(spec, n, stream_seed(cfg.seed, role))
        paths[name] = out / f"{name}.csv"
        synthdata.write_samples(paths[name], s)
    spec.save(out / "mixture.json")
    return {k: str(v) for k, v in paths.items()}


# --- train --------------------------------------------------------------------

def _domain_and_scale(cfg: ExperimentConfig, X: np.ndarray, dim: int):
    """DomainBox plus the sigma used to scale learner parameters."""
    scale = cfg.param_sigma
    if cfg.domain_lo is not None:
        box = learner.DomainBox.cube(dim, cfg.domain_lo, cfg.domain_hi)
    elif cfg.auto_domain or cfg.mixture not in synthdata.BUILTINS and not Path(cfg.mixture).exists():
        if X.shape[0] < 2:
            raise CliError("--auto-domain needs at least two training samples")
        lo, hi = X.min(axis=0), X.max(axis=0)
        flat = hi - lo <= 0
        lo = np.where(flat, lo - 0.5, lo)
        hi = np.where(flat, hi + 0.5, hi)
        box = learner.DomainBox(lo, hi)
        if scale is None:
            scale = float(np.mean(X.std(axis=0)))
    else:
        spec = mixture_of(cfg)
        if spec.dim != dim:
            raise CliError(f"mixture {cfg.mixture} has dimension {spec.dim} but the data has {dim}; "
                           "pass --auto-domain or an explicit --domain-lo/--domain-hi")
        pad = synthdata.BUILTINS[cfg.mixture].grid_pad if cfg.mixture in synthdata.BUILTINS else 4.0
        box = learner.DomainBox.cube(dim, *synthdata.grid_cube(spec, pad))
    if scale is None:
        scale = cfg.sigma
    if not scale > 0:
        raise CliError("parameter scale sigma must be positive")
    return box, scale


def build_pool(cfg: ExperimentConfig, X: np.ndarray, dim: int):
    box, scale = _domain_and_scale(cfg, X, dim)
    over = {k: getattr(cfg, k) for k in ("epsilon", "phi", "alpha", "beta")
            if getattr(cfg, k) is not None}
    try:
        lc = learner.LearnerConfig.scaled(scale, warmup_shifts=cfg.warmup, decay=cfg.decay, **over)
    except ValueError as exc:
        raise CliError(f"learner config: {exc}") from None
    if cfg.random is not None:
        pool = learner.init_random(box, cfg.random, cfg.init_seed, lc)
    else:
        ppd = cfg.grid
        if ppd is None:
            ppd = synthdata.BUILTINS[cfg.mixture].planes_per_dim if cfg.mixture in synthdata.BUILTINS else 4
        pool = learner.init_grid(box, ppd, lc)
    return pool, box


def snapshot_doc(pool: learner.Pool, box: learner.DomainBox) -> dict:
    doc = pool.to_dict()
    doc["domain"] = {"lo": box.lo.tolist(), "hi": box.hi.tolist()}
    return doc


def _dump(path, doc):
    Path(path).write_text(json.dumps(doc) + "\n")


def cmd_train(cfg: ExperimentConfig, train_path, calib_path=None, test_path=None,
              include_wall=True) -> dict:
    data = _read(train_path)
    dim = data.X.shape[1]
    pool, box = build_pool(cfg, data.X, dim)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "initial.json", snapshot_doc(pool, box))

    probe = None
    if calib_path and test_path:
        _warn_leak(calib_path, test_path)
        calib, test = _read(calib_path), _read(test_path)
        for s, name in ((calib, "calibration"), (test, "test")):
            if s.X.shape[1] != dim:
                raise CliError(f"{name} data has dimension {s.X.shape[1]}, expected {dim}")

        probe = functools.partial(evalkit.probe_pool, calib_X=calib.X, calib_y=calib.y,
                                  test_X=test.X, test_y=test.y, ns=tuple(cfg.ns),
                                  weighting=cfg.weighting)

    pool, trace = learner.train(pool, data.X, probe=probe, cadence=cfg.cadence,
                                backend=cfg.backend)
    _dump(out / "snapshot.json", snapshot_doc(pool, box))
    (out / "trace.csv").write_text(trace.to_csv(tuple(cfg.ns), include_wall=include_wall))
    (out / "trace.json").write_text(trace.to_json(include_wall=include_wall))
    return {"snapshot": str(out / "snapshot.json"), "trace_rows": len(trace),
            "planes": len(pool), **pool.diagnostics}


# --- eval ---------------------------------------------------------------------

def load_snapshot(path) -> learner.Pool:
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    try:
        return learner.Pool.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"bad snapshot {path}: {exc}") from None


def evaluate(pool, calib, test, ns, weighting="balanced"):
    """(errors, heads, confusion matrix, labels) for one pool."""
    for s, name in ((calib, "calibration"), (test, "test")):
        if s.X.shape[1] != pool.dim:
            raise CliError(f"{name} data has dimension {s.X.shape[1]}, snapshot has {pool.dim}")
    try:
        heads = headmap.associate_labels(pool, calib.X, calib.y, weighting=weighting)
    except headmap.EmptyClass as exc:
        raise CliError(str(exc)) from None
    n_max = min(max(ns), len(heads))
    ranked = headmap.classify_topn_batch(heads, pool, test.X, n_max)
    truths = test.y.tolist()
    errors = {n: evalkit.topn_error(ranked, truths, min(n, n_max)) for n in ns}
    top1 = [r[0] for r in ranked]
    m, labels = evalkit.confusion(top1, truths, sorted(set(heads.labels()) | set(truths)))
    return errors, heads, m, labels


def cmd_eval(cfg: ExperimentConfig, snapshot, calib_path, test_path) -> dict:
    _warn_leak(calib_path, test_path)
    pool = load_snapshot(snapshot)
    errors, heads, m, labels = evaluate(pool, _read(calib_path), _read(test_path),
                                        [int(n) for n in cfg.ns], cfg.weighting)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = {"topn_error": {str(n): e for n, e in errors.items()}}
    _dump(out / "metrics.json", metrics)
    heads.save(out / "heads.json")
    (out / "confusion.tsv").write_text(evalkit.matrix_tsv(m, labels, labels))
    return {"errors": errors, "confusion": evalkit.matrix_tsv(m, labels, labels)}


# --- baseline -----------------------------------------------------------------

def cmd_baseline(cfg: ExperimentConfig, kind, train_path, test_path, k=None) -> dict:
    train = _read(train_path)
    test = _read(test_path) if test_path else None
    if test is not None and test.X.shape[1] != train.X.shape[1]:
        raise CliError("train and test dimensions differ")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "knn":
        if test is None:
            raise CliError("knn needs --test")
        try:
            model = baselines.KNN(5 if k is None else k).fit(train.X, train.y)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        ranked = model.rank(test.X)
        n_max = ranked.shape[1]
        errors = {int(n): evalkit.topn_error(ranked.tolist(), test.y.tolist(), min(int(n), n_max))
                  for n in cfg.ns}
        _dump(out / "knn.json", {"k": model.k, "topn_error": {str(n): e for n, e in errors.items()}})
        return {"errors": errors}
    if kind == "kmeans":
        n_classes = len(set(train.y.tolist()))
        k = n_classes if k is None else k
        try:
            res = baselines.kmeans(train.X, k, seed=cfg.seed)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        if test is None:
            rep = baselines.cluster_report(res.assign, train.y, k)
        else:
            rep = baselines.kmeans_confusion(res, test.X, test.y)
        (out / "kmeans_confusion.tsv").write_text(rep.to_tsv())
        _dump(out / "kmeans.json", {
            "k": k, "iterations": res.iterations, "converged": res.converged,
            "inertia_history": res.inertia_history,
            "split_classes": rep.split_classes,
            "merged_clusters": {str(j): cs for j, cs in rep.merged_clusters.items()}})
        return {"confusion": rep.to_tsv(), "summary": rep.summary()}
    raise CliError(f"unknown baseline {kind!r}")


# --- plot ---------------------------------------------------------------------

def cmd_plot(snapshots, samples_path, out_path, domain=None) -> str:
    if not snapshots:
        raise CliError("at least one --snapshot is needed")
    docs = []
    for p in snapshots:
        if not Path(p).exists():
            raise CliError(f"no such file: {p}")
        docs.append(json.loads(Path(p).read_text()))
    pools = [learner.Pool.from_dict(d) for d in docs]
    if any(p.dim != 2 for p in pools):
        raise CliError("plots are 2-d only")
    X = y = None
    if samples_path:
        s = _read(samples_path)
        if s.X.shape[1] != 2:
            raise CliError("plots are 2-d only")
        X, y = s
    if domain is not None:
        lo, hi = np.array([domain[0]] * 2), np.array([domain[1]] * 2)
    elif "domain" in docs[-1]:
        lo, hi = np.array(docs[-1]["domain"]["lo"]), np.array(docs[-1]["domain"]["hi"])
    elif X is not None and len(X):
        lo, hi = X.min(axis=0) - 1.0, X.max(axis=0) + 1.0
    else:
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    layers = [(p.W, p.theta, "before") for p in pools[:-1]] + [(pools[-1].W, pools[-1].theta, "after")]
    svg = plotsvg.render(lo, hi, X, y, layers)
    Path(out_path).write_text(svg)
    return str(out_path)


# --- sweep --------------------------------------------------------------------

SWEEP_COLUMNS = ("row", "d", "planes", "full_updates_per_sample", "work_per_sample",
                 "mean_updates_per_sample", "check_work_per_sample", "max_rotate_fraction",
                 "wall_ms")


def _slope(xs, ys):
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def sweep_rows(cfg: ExperimentConfig, dims, chunks: int = 10):
    """One measurement dict per dimension.

    work = d * (planes inside the phi band per sample): each such plane pays
    an O(d) shift and rotation. The beta-band mean updates and the N*d band
    test are reported beside it.
    """
    rows = []
    for d in dims:
        spec = synthdata.paper_2d_spec(cfg.sigma) if d == 2 else synthdata.paper_50d_spec(cfg.sigma, d)
        ppd = cfg.grid if cfg.grid is not None else synthdata.BUILTINS["paper50d"].planes_per_dim
        lo, hi = synthdata.grid_cube(spec, synthdata.BUILTINS["paper50d"].grid_pad)
        lc = learner.LearnerConfig.scaled(cfg.param_sigma or cfg.sigma, warmup_shifts=cfg.warmup)
        pool = learner.init_grid(learner.DomainBox.cube(d, lo, hi), ppd, lc)
        n = cfg.train_size
        X = synthdata.gen_mixture(spec, n, stream_seed(cfg.seed, 0)).X
        t0 = time.perf_counter()
        _, trace = learner.train(pool, X, cadence=max(1, -(-n // chunks)), backend=cfg.backend)
        wall = (time.perf_counter() - t0) * 1e3
        prev_i = prev_r = 0
        worst = 0.0
        for c in trace.checkpoints:
            m = c.sample_index - prev_i
            worst = max(worst, (c.rotations_fired - prev_r) / (m * len(pool)))
            prev_i, prev_r = c.sample_index, c.rotations_fired
        diag = pool.diagnostics
        full = diag["band_hits"] / max(n, 1)
        rows.append({"row": "measure", "d": d, "planes": len(pool),
                     "full_updates_per_sample": full, "work_per_sample": d * full,
                     "mean_updates_per_sample": diag["mean_updates"] / max(n, 1),
                     "check_work_per_sample": float(len(pool) * d),
                     "max_rotate_fraction": worst, "wall_ms": wall})
    return rows


def sweep_csv(rows, include_wall=True) -> str:
    cols = [c for c in SWEEP_COLUMNS if include_wall or c != "wall_ms"]
    ds = [r["d"] for r in rows]
    fit = {"row": "exponent", "d": "", "planes": _slope(ds, [r["planes"] for r in rows])}
    for c in ("full_updates_per_sample", "work_per_sample", "mean_updates_per_sample",
              "check_work_per_sample", "wall_ms"):
        fit[c] = _slope(ds, [r[c] for r in rows])
    fit["max_rotate_fraction"] = max(r["max_rotate_fraction"] for r in rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows + [fit]:
        w.writerow([r[c] if isinstance(r[c], str) else repr(float(r[c])) if isinstance(r[c], float)
                    else r[c] for c in cols])
    return buf.getvalue()


def cmd_sweep(cfg: ExperimentConfig, dims, include_wall=True) -> str:
    if len(dims) < 2:
        raise CliError("a sweep needs at least two dimensions")
    if any(d < 2 for d in dims):
        raise CliError("dimensions must be >= 2")
    text = sweep_csv(sweep_rows(cfg, dims), include_wall)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(text)
    return text


# --- argument parsing ---------------------------------------------------------

def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _common(p, data=True):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    if data:
        p.add_argument("--mixture", help="builtin name (paper2d, paper50d, kmeans-trap) or mixture JSON")
        p.add_argument("--sigma", type=float)


def _learner_flags(p):
    p.add_argument("--epsilon", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--warmup", type=int)
    p.add_argument("--decay", action="store_true", default=None)
    p.add_argument("--param-sigma", type=float, help="scale for epsilon, phi and beta")
    p.add_argument("--grid", type=int, help="planes per dimension")
    p.add_argument("--random", type=int, help="random pool of this many planes")
    p.add_argument("--init-seed", type=int)
    p.add_argument("--domain-lo", type=float)
    p.add_argument("--domain-hi", type=float)
    p.add_argument("--auto-domain", action="store_true", default=None,
                   help="domain box from per-coordinate min/max of the training data")
    p.add_argument("--backend", choices=("numba", "numpy"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="valleyseek", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write train/calib/test sample CSVs")
    _common(p)
    p.add_argument("--train-size", type=int)
    p.add_argument("--calib-size", type=int)
    p.add_argument("--test-size", type=int)

    p = sub.add_parser("train", help="train a pool on a sample CSV")
    _common(p)
    _learner_flags(p)
    p.add_argument("--train", help="training CSV (default: OUT/train.csv)")
    p.add_argument("--calib", help="calibration CSV for probing during training")
    p.add_argument("--test", help="test CSV for probing during training")
    p.add_argument("--cadence", type=int)
    p.add_argument("--ns", type=_int_list)
    p.add_argument("--no-wall", action="store_true", help="omit wall-clock columns")

    p = sub.add_parser("eval", help="associate labels and score a snapshot")
    _common(p, data=False)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--ns", type=_int_list)
    p.add_argument("--weighting", choices=("balanced", "counts"))

    p = sub.add_parser("baseline", help="kNN or k-means reference")
    _common(p, data=False)
    p.add_argument("kind", choices=("knn", "kmeans"))
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--k", type=int)
    p.add_argument("--ns", type=_int_list)

    p = sub.add_parser("plot", help="SVG of 2-d samples and planes")
    p.add_argument("--snapshot", action="append", required=True,
                   help="repeatable; earlier ones are drawn dashed as 'before'")
    p.add_argument("--samples")
    p.add_argument("--output", required=True, help="SVG path")
    p.add_argument("--domain-lo", type=float)
    p.add_argument("--domain-hi", type=float)

    p = sub.add_parser("sweep", help="per-sample work against dimension")
    _common(p)
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--grid", type=int)
    p.add_argument("--train-size", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--param-sigma", type=float)
    p.add_argument("--backend", choices=("numba", "numpy"))
    p.add_argument("--no-wall", action="store_true")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            dom = None
            if (args.domain_lo is None) != (args.domain_hi is None):
                raise CliError("--domain-lo and --domain-hi go together")
            if args.domain_lo is not None:
                dom = (args.domain_lo, args.domain_hi)
            print(cmd_plot(args.snapshot, args.samples, args.output, dom))
            return 0
        cfg = resolve_config(args)
        if args.command == "gen":
            for name, path in cmd_gen(cfg).items():
                print(f"{name}\t{path}")
        elif args.command == "train":
            train_path = args.train or str(Path(cfg.out) / "train.csv")
            res = cmd_train(cfg, train_path, args.calib, args.test, include_wall=not args.no_wall)
            for k, v in res.items():
                print(f"{k}\t{v}")
        elif args.command == "eval":
            res = cmd_eval(cfg, args.snapshot, args.calib, args.test)
            for n, e in res["errors"].items():
                print(f"top{n}\t{e!r}")
            sys.stdout.write(res["confusion"])
        elif args.command == "baseline":
            if args.k is not None and args.k < 1:
                raise CliError("k must be a positive integer")
            res = cmd_baseline(cfg, args.kind, args.train, args.test, args.k)
            if "errors" in res:
                for n, e in res["errors"].items():
                    print(f"top{n}\t{e!r}")
            else:
                sys.stdout.write(res["confusion"])
                print(res["summary"])
        elif args.command == "sweep":
            sys.stdout.write(cmd_sweep(cfg, args.dims, include_wall=not args.no_wall))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
