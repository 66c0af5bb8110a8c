"""Fitting front-ends, evaluation against ground truth and the replication benchmark."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baseline import DEFAULT_H_RANGE, CircularSmoother, smooth_cv, smooth_fit
from .core import Basis, Dataset, mean_circular_error
from .datagen import Truth, gen_example, truth_grid
from .em_nonparametric import Kernel, default_labels, select_K_local, tune
from .em_parametric import select_K, select_model
from .errors import AgmmError, InvalidArgumentError
from .gibbs import Priors, gibbs_sample, merge_chains, posterior_summary, summary_model
from .initialization import DEFAULT_EPS, DEFAULT_MIN_PTS, initial_labels

log = logging.getLogger(__name__)

METHODS = ("em", "npem", "gibbs", "smoothing")
_METHOD_CODE = {m: i + 1 for i, m in enumerate(METHODS)}


@dataclass
class FitConfig:
    """Knobs shared by the CLI and the benchmark; ``None`` means "select"."""

    degree: int | None = None
    degrees: tuple = (1, 2, 3, 4, 5)
    K: int | None = None
    K_max: int = 6
    init_eps: float = DEFAULT_EPS
    init_min_pts: int = DEFAULT_MIN_PTS
    tol: float | None = None
    max_iter: int = 500
    # nonparametric
    grid: str = "all"
    kernel: str = "gaussian"
    h: tuple = (0.01,)
    folds: int = 5
    # gibbs
    iters: int = 30000
    burn_in: int = 10000
    chains: int = 1
    priors: Priors = field(default_factory=Priors)
    # smoothing
    smooth_kernel: str = "triangular"
    smooth_h: tuple = DEFAULT_H_RANGE
    cv_folds: int = 5
    degenerate: str = "error"

    @property
    def K_range(self):
        return [self.K] if self.K is not None else list(range(1, self.K_max + 1))


def _labels(data: Dataset, cfg: FitConfig):
    try:
        return initial_labels(data, cfg.init_eps, cfg.init_min_pts)
    except AgmmError as exc:
        log.info("clustering init failed: %s", exc)
        return None


def _fit_parametric(data: Dataset, cfg: FitConfig):
    tol = cfg.tol if cfg.tol is not None else 1e-8
    z = _labels(data, cfg)
    if cfg.degree is None:
        return select_model(data, cfg.degrees, cfg.K_range, z, tol, cfg.max_iter)
    best_K, fits = select_K(data, Basis(cfg.degree, data.p), cfg.K_range, z, tol, cfg.max_iter)
    model, report = fits[best_K]
    report.extra["bic_table"] = {f"{cfg.degree},{k}": fits[k][1].bic for k in fits}
    report.extra["bic_per_K"] = {str(k): fits[k][1].bic for k in fits}
    report.extra["degree"] = cfg.degree
    return model, report


def fit_method(data: Dataset, method: str, cfg: FitConfig | None = None, seed=0):
    """Fit one method; returns ``(model, report_dict, extras)``.

    ``extras`` carries method-specific artefacts (the Gibbs traces).
    """
    cfg = cfg or FitConfig()
    if method == "em":
        model, report = _fit_parametric(data, cfg)
        return model, report.to_dict(), {}
    if method == "npem":
        if len(cfg.h) > 1:
            K, h = tune(data, cfg.K_range, cfg.h, cfg.folds, seed, cfg.kernel, cfg.grid,
                        cfg.tol, cfg.max_iter)
            K_range = [K]
        else:
            h, K_range = cfg.h[0], cfg.K_range
        z = default_labels(data, cfg.degrees, range(1, cfg.K_max + 1))
        best_K, fits = select_K_local(data, Kernel(cfg.kernel, h), K_range, cfg.grid, z,
                                      cfg.tol, cfg.max_iter)
        model, report = fits[best_K]
        d = report.to_dict()
        d["bic_per_K"] = {str(k): fits[k][1].bic for k in fits}
        return model, d, {}
    if method == "gibbs":
        # structure (degree, K) from BIC, then sample from the EM solution
        em_model, em_report = _fit_parametric(data, cfg)
        seeds = np.random.SeedSequence(seed).spawn(cfg.chains)
        traces = [gibbs_sample(data, em_model.basis, em_model.K, cfg.priors, cfg.iters,
                               cfg.burn_in, s, init=em_model) for s in seeds]
        merged = merge_chains(traces)
        summ = posterior_summary(merged)
        model = summary_model(merged)
        d = {
            "selected_K": model.K,
            "degree": model.basis.degree,
            "em_bic": em_report.bic,
            "iters": cfg.iters,
            "burn_in": cfg.burn_in,
            "chains": cfg.chains,
            "beta_sd": summ["beta_sd"].tolist(),
            "beta_ci": summ["beta_ci"].tolist(),
            "sigma2_ci": summ["sigma2_ci"].tolist(),
        }
        return model, d, {"traces": traces}
    if method == "smoothing":
        h = smooth_cv(data, cfg.smooth_h, cfg.cv_folds, seed, cfg.smooth_kernel)
        model = smooth_fit(data, Kernel(cfg.smooth_kernel, h), cfg.degenerate)
        return model, {"selected_h": h, "kernel": cfg.smooth_kernel}, {}
    raise InvalidArgumentError(f"unknown method {method!r}; choose from {METHODS}")


def predict(model, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    return np.asarray(model.predict(xs), dtype=float)


def variance(model, xs):
    """Variance estimate at ``xs``, or ``None`` for mean-only models."""
    if isinstance(model, CircularSmoother):
        return None
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    return np.asarray(model.variance(xs), dtype=float)


def evaluate(model, truth, sigma2_truth=None, T: int = 200, seed=0) -> dict:
    """MCE of the mean direction on ``T`` seeded test points, plus variance MSE."""
    xs, tt = truth_grid(truth, T, seed)
    out = {"T": T, "mce": mean_circular_error(tt, predict(model, xs))}
    v = variance(model, xs)
    if v is not None and sigma2_truth is not None:
        out["var_mse"] = float(np.mean((v - sigma2_truth) ** 2))
    return out


# ---------------------------------------------------------------------------
# replication benchmark
# ---------------------------------------------------------------------------

def _seed(base, *key):
    return np.random.SeedSequence(base, spawn_key=tuple(int(k) for k in key))


def run_cell(example: int, method: str, rep: int, seed: int, cfg: FitConfig, T: int = 200):
    """One (example, method, replication); failures come back as NaN metrics."""
    data, truth, s2 = gen_example(example, _seed(seed, example, rep))
    row = {"example": example, "method": method, "rep": rep, "mce": np.nan, "var_mse": np.nan,
           "error": ""}
    try:
        model, report, _ = fit_method(data, method, cfg, _seed(seed, example, rep,
                                                               _METHOD_CODE[method]))
        m = evaluate(model, truth, s2, T, _seed(seed, example, rep, 0))
        row.update(m)
        row["selected_K"] = report.get("selected_K")
    except AgmmError as exc:
        row["error"] = str(exc)
        return row, None
    return row, model


def _cell_job(args):
    example, method, rep, seed, cfg, T = args
    row, model = run_cell(example, method, rep, seed, cfg, T)
    return row, model if rep == 0 else None


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("AGMM_THREADS", "1")))
    except ValueError:
        return 1


def run_benchmark(examples=(2, 3, 4, 5), methods=("em", "smoothing"), reps: int = 20,
                  seed: int = 0, cfg: FitConfig | None = None, T: int = 200,
                  workers: int | None = None, plot_points: int = 200):
    """Run every (example, method, rep) cell.

    Returns ``(summary_rows, rep_rows, plot_data)`` in (example, method, rep)
    order.  ``plot_data[example]`` holds an x grid, the truth and the rep-0
    prediction of each method.  Each replication draws its data from a seed
    derived from ``(seed, example, rep)`` alone, so adding replications or
    methods never changes existing cells.
    """
    cfg = cfg or FitConfig()
    if reps < 1:
        raise InvalidArgumentError("reps must be >= 1")
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}")
    jobs = [(e, m, r, seed, cfg, T) for e in examples for m in methods for r in range(reps)]
    workers = workers or thread_cap()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]

    rep_rows = [row for row, _ in results]
    summary = []
    for e in examples:
        for m in methods:
            rows = [r for r in rep_rows if r["example"] == e and r["method"] == m]
            mce = np.array([r["mce"] for r in rows], dtype=float)
            vm = np.array([r["var_mse"] for r in rows], dtype=float)
            summary.append({
                "example": e, "method": m, "reps": len(rows),
                "failed": int(np.isnan(mce).sum()),
                "mce_mean": _nanstat(np.nanmean, mce), "mce_sd": _nanstat(_sd, mce),
                "var_mse_mean": _nanstat(np.nanmean, vm), "var_mse_sd": _nanstat(_sd, vm),
            })

    plot = {}
    grid = np.linspace(-1.0, 1.0, plot_points, endpoint=False) + 1.0 / plot_points
    for e in examples:
        cols = {"x": grid, "truth": np.asarray(Truth(e)(grid))}
        for (row, model) in results:
            if row["example"] == e and model is not None:
                cols[row["method"]] = predict(model, grid)
                v = variance(model, grid)
                if v is not None:
                    cols[f"{row['method']}_sigma2"] = v
        plot[e] = cols
    return summary, rep_rows, plot


def _sd(a):
    return np.std(a[~np.isnan(a)], ddof=1) if np.sum(~np.isnan(a)) > 1 else np.nan


def _nanstat(fn, a):
    if np.all(np.isnan(a)):
        return None
    v = float(fn(a))
    return None if np.isnan(v) else v
