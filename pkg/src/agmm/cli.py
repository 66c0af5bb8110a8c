"""Command-line interface: ``agmm generate | fit | evaluate | benchmark``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as agmm_io
from .benchmark import METHODS, FitConfig, evaluate, fit_method, run_benchmark
from .datagen import EXAMPLE_IDS, Truth, gen_example
from .errors import AgmmError, InvalidArgumentError
from .gibbs import Priors

log = logging.getLogger("agmm")


class UsageError(Exception):
    pass


def _sidecar(path, suffix) -> Path:
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if np.isnan(v) else v
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1) + "\n"


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in _jsonable(r).items()})
    return buf.getvalue()


def _flat(d: dict) -> dict:
    return {k: (json.dumps(_jsonable(v)) if isinstance(v, (dict, list, tuple, np.ndarray)) else v)
            for k, v in d.items()}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    ex = gen_example(args.example, args.seed)
    agmm_io.write_dataset(ex.data, args.out)
    meta = {"example": args.example, "seed": args.seed, "n": ex.data.n,
            "sigma2_truth": ex.sigma2_truth}
    agmm_io.atomic_write(_sidecar(args.out, ".truth.json"), _dump_json(meta))
    print(f"wrote {ex.data.n} rows to {args.out}")
    return 0


def _parse_basis(spec: str):
    if spec in ("auto", "poly:auto"):
        return None
    if not spec.startswith("poly:"):
        raise UsageError(f"--basis must look like poly:D or poly:auto, got {spec!r}")
    try:
        return int(spec.split(":", 1)[1])
    except ValueError:
        raise UsageError(f"bad polynomial degree in {spec!r}") from None


def _parse_floats(spec: str):
    try:
        vals = tuple(float(v) for v in spec.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {spec!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise UsageError("bandwidths must be positive")
    return vals


def _config(args) -> FitConfig:
    K = None if args.K == "auto" else int(args.K)
    if K is not None and K < 1:
        raise UsageError("--K must be a positive integer or 'auto'")
    cfg = FitConfig(
        degree=_parse_basis(args.basis),
        K=K,
        K_max=args.K_max,
        init_eps=args.init_eps,
        init_min_pts=args.init_minpts,
        tol=args.tol,
        max_iter=args.max_iter,
        grid=args.grid,
        kernel=args.kernel,
        h=_parse_floats(args.h),
        folds=args.folds,
        iters=args.iters,
        burn_in=args.burnin,
        chains=args.chains,
        priors=Priors(args.prior_alpha0, args.prior_lambda0, args.prior_alpha, args.prior_lambda),
        smooth_kernel=args.smooth_kernel,
        cv_folds=args.cv_folds,
        degenerate=args.degenerate,
    )
    if args.smooth_h:
        cfg.smooth_h = _parse_floats(args.smooth_h)
    if args.method == "smoothing" and args.kernel_set:
        cfg.smooth_kernel = args.kernel
    return cfg


def cmd_fit(args) -> int:
    cfg = _config(args)
    data, n_wrapped = agmm_io.read_dataset(args.data)
    model, report, extras = fit_method(data, args.method, cfg, args.seed)
    report = dict(report, method=args.method, n=data.n, wrapped_thetas=n_wrapped, seed=args.seed)
    agmm_io.save_model(model, args.out)
    rep_path = _sidecar(args.out, ".report.json")
    agmm_io.atomic_write(rep_path, _dump_json(report))
    if args.format == "csv":
        agmm_io.atomic_write(_sidecar(args.out, ".report.csv"), _rows_to_csv([_flat(report)]))
    for c, trace in enumerate(extras.get("traces", [])):
        trace.to_csv(_sidecar(args.out, f".trace{c}.csv"))
    print(f"wrote model to {args.out} and report to {rep_path}")
    return 0


def cmd_evaluate(args) -> int:
    model = agmm_io.load_model(args.model)
    with open(args.truth) as fh:
        meta = json.load(fh)
    try:
        truth = Truth(int(meta["example"]))
    except (KeyError, ValueError, InvalidArgumentError) as exc:
        raise AgmmError(f"{args.truth}: not a truth metadata file ({exc})") from None
    p = getattr(model, "p", None) or getattr(getattr(model, "basis", None), "p", None) \
        or getattr(getattr(model, "data", None), "p", 1)
    if p != 1:
        raise AgmmError("model and truth are incompatible: examples have scalar predictors")
    metrics = evaluate(model, truth, meta.get("sigma2_truth"), args.T, args.seed)
    metrics.update(example=meta["example"], model=str(args.model))
    text = _dump_json(metrics) if args.format == "json" else _rows_to_csv([metrics])
    if args.out:
        agmm_io.atomic_write(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_benchmark(args) -> int:
    try:
        examples = tuple(int(e) for e in args.examples.split(","))
    except ValueError:
        raise UsageError("--examples must be a comma-separated list") from None
    methods = tuple(m.strip() for m in args.methods.split(","))
    if any(e not in EXAMPLE_IDS for e in examples):
        raise UsageError(f"examples must be drawn from {EXAMPLE_IDS}")
    if any(m not in METHODS for m in methods):
        raise UsageError(f"methods must be drawn from {METHODS}")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    cfg = FitConfig(iters=args.iters, burn_in=args.burnin, h=_parse_floats(args.h))
    summary, reps, plot = run_benchmark(examples, methods, args.reps, args.seed, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    agmm_io.atomic_write(out / "benchmark.json",
                         _dump_json({"seed": args.seed, "reps": args.reps, "summary": summary,
                                     "replications": reps}))
    agmm_io.atomic_write(out / "benchmark.csv", _rows_to_csv(summary))
    agmm_io.atomic_write(out / "replications.csv", _rows_to_csv(reps))
    for e, cols in plot.items():
        rows = [dict(zip(cols, vals)) for vals in zip(*cols.values())]
        agmm_io.atomic_write(out / f"plot_example{e}.csv", _rows_to_csv(rows))
    sys.stdout.write(_dump_json(summary) if args.format == "json" else _rows_to_csv(summary))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="agmm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="simulate one of Examples 2-5")
    g.add_argument("--example", type=int, choices=EXAMPLE_IDS, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", parents=[common], help="fit a model to a dataset CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--method", choices=METHODS, default="em")
    f.add_argument("--basis", default="poly:auto", help="poly:D or poly:auto")
    f.add_argument("--K", default="auto")
    f.add_argument("--K-max", dest="K_max", type=int, default=6)
    f.add_argument("--init-eps", type=float, default=0.3)
    f.add_argument("--init-minpts", type=int, default=4)
    f.add_argument("--tol", type=float, default=None)
    f.add_argument("--max-iter", type=int, default=500)
    f.add_argument("--grid", default="all", help="all or uniform:J")
    f.add_argument("--kernel", choices=("gaussian", "triangular"), default=None)
    f.add_argument("--h", default="0.01", help="bandwidth, or a comma list to tune by CV")
    f.add_argument("--folds", type=int, default=5)
    f.add_argument("--iters", type=int, default=30000)
    f.add_argument("--burnin", type=int, default=10000)
    f.add_argument("--chains", type=int, default=1)
    f.add_argument("--prior-alpha", type=float, default=1.0)
    f.add_argument("--prior-lambda", type=float, default=1.0)
    f.add_argument("--prior-alpha0", type=float, default=1.0)
    f.add_argument("--prior-lambda0", type=float, default=1.0)
    f.add_argument("--cv-folds", type=int, default=5)
    f.add_argument("--smooth-kernel", choices=("gaussian", "triangular"), default="triangular")
    f.add_argument("--smooth-h", default=None, help="comma list of candidate bandwidths")
    f.add_argument("--degenerate", choices=("error", "zero"), default="error",
                   help="smoothing: behaviour when sine and cosine estimates cancel")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", parents=[common], help="score a model against ground truth")
    e.add_argument("--model", required=True)
    e.add_argument("--truth", required=True, help="truth JSON written by 'generate'")
    e.add_argument("--T", type=int, default=200)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", parents=[common], help="replicated accuracy tables")
    b.add_argument("--examples", default="2,3,4,5")
    b.add_argument("--methods", default="em,smoothing")
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--iters", type=int, default=3000, help="Gibbs iterations per fit")
    b.add_argument("--burnin", type=int, default=1000)
    b.add_argument("--h", default="0.01", help="nonparametric bandwidth(s)")
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "fit":
        args.kernel_set = args.kernel is not None
        if args.kernel is None:
            args.kernel = "gaussian"
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"agmm: error: {exc}", file=sys.stderr)
        return 2
    except (AgmmError, OSError, ValueError) as exc:
        print(f"agmm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
