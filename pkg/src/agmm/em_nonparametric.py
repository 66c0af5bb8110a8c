"""Kernel local-likelihood EM for the nonparametric AGMM.

The functions ``mu(x)``, ``sigma2(x)`` and ``r_k(x)`` are represented by
local constants at grid points and linearly interpolated in between.  Each
M-step maximises the kernel-weighted local log-likelihood at every grid
point; the E-step uses the interpolated functions at the observations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.spatial.distance import cdist

from .core import (
    SIGMA2_FLOOR,
    Dataset,
    FitReport,
    bic,
    check_responsibilities,
    hard_responsibilities,
    joint_log_density,
    mean_circular_error,
    responsibilities_from_log,
    wrap_to_circle,
)
from .em_parametric import (
    DEFAULT_MAX_ITER,
    candidate_labels,
    posterior_labels,
    select_model,
    unwrapped_targets,
)
from .errors import (
    AgmmError,
    InvalidArgumentError,
    InvalidStateError,
    IsolatedGridPointError,
)

log = logging.getLogger(__name__)

# convergence threshold on the log-likelihood change, per observation
DEFAULT_TOL_PER_OBS = 1e-3

KERNEL_SHAPES = ("gaussian", "triangular")
_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Kernel:
    """Scaled kernel ``K_h(d) = K(d / h) / h`` evaluated at distances ``d``."""

    shape: str = "gaussian"
    h: float = 0.1

    def __post_init__(self):
        if self.shape not in KERNEL_SHAPES:
            raise InvalidArgumentError(f"kernel shape must be one of {KERNEL_SHAPES}")
        if not self.h > 0:
            raise InvalidArgumentError("bandwidth h must be positive")

    def __call__(self, d):
        u = np.asarray(d, dtype=float) / self.h
        if self.shape == "triangular":
            return np.maximum(0.0, 1.0 - u) / self.h
        return np.exp(-0.5 * u * u) / (_SQRT_2PI * self.h)


def kernel_weight(kernel: Kernel, d):
    if np.any(np.asarray(d) < 0):
        raise InvalidArgumentError("distances must be non-negative")
    w = kernel(d)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class NonparametricAgmm:
    """Local constants ``(mu_j, sigma2_j, r_j)`` at grid points ``grid[j]``."""

    grid: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        mu = np.array(self.mu, dtype=float).ravel()
        sigma2 = np.array(self.sigma2, dtype=float).ravel()
        r = np.array(self.r, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        J = grid.shape[0]
        if J == 0:
            raise InvalidStateError("empty grid")
        if mu.shape[0] != J or sigma2.shape[0] != J or r.shape[0] != J:
            raise InvalidArgumentError("local constants do not match the grid size")
        if np.any(sigma2 <= 0):
            raise InvalidArgumentError("local variances must be positive")
        if np.any(r < 0) or np.any(np.abs(r.sum(axis=1) - 1) > 1e-10):
            raise InvalidArgumentError("each row of r must be a probability vector")
        if grid.shape[1] == 1:
            order = np.argsort(grid[:, 0], kind="stable")
            if np.any(np.diff(grid[order, 0]) == 0):
                raise InvalidArgumentError("grid points must be distinct")
        for name, a in (("grid", grid), ("mu", mu), ("sigma2", sigma2), ("r", r)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def K(self) -> int:
        return self.r.shape[1]

    @property
    def J(self) -> int:
        return self.grid.shape[0]

    @property
    def p(self) -> int:
        return self.grid.shape[1]

    def evaluate(self, xs):
        """Interpolated ``(mu, sigma2, r)`` at each row of ``xs``.

        One-dimensional grids use piecewise-linear interpolation with constant
        extrapolation; higher dimensions use inverse-distance weighting over
        the ``min(2p, J)`` nearest grid points.  ``r`` rows are renormalised.
        """
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None] if self.p == 1 else xs[None, :]
        if xs.shape[1] != self.p:
            raise InvalidArgumentError(f"expected {self.p}-dimensional inputs")
        if self.p == 1:
            order = np.argsort(self.grid[:, 0], kind="stable")
            g = self.grid[order, 0]
            x = xs[:, 0]
            mu = np.interp(x, g, self.mu[order])
            s2 = np.interp(x, g, self.sigma2[order])
            r = np.column_stack([np.interp(x, g, self.r[order, k]) for k in range(self.K)])
        else:
            mu, s2, r = self._idw(xs)
        r = r / r.sum(axis=1, keepdims=True)
        return mu, s2, r

    def _idw(self, xs):
        m = min(2 * self.p, self.J)
        d = cdist(xs, self.grid)
        idx = np.argsort(d, axis=1, kind="stable")[:, :m]
        dn = np.take_along_axis(d, idx, axis=1)
        with np.errstate(divide="ignore"):
            w = 1.0 / dn
        exact = dn[:, 0] == 0
        w[exact] = 0.0
        w[exact, 0] = 1.0
        w /= w.sum(axis=1, keepdims=True)
        mu = (w * self.mu[idx]).sum(axis=1)
        s2 = (w * self.sigma2[idx]).sum(axis=1)
        r = np.einsum("nm,nmk->nk", w, self.r[idx])
        return mu, s2, r

    def predict(self, xs) -> np.ndarray:
        return wrap_to_circle(self.evaluate(xs)[0])

    def variance(self, xs) -> np.ndarray:
        return self.evaluate(xs)[1]


def interpolate(model: NonparametricAgmm, x):
    """``(mu, sigma2, r)`` at a single p-vector ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu, s2, r = model.evaluate(x[None, :])
    return float(mu[0]), float(s2[0]), r[0]


def make_grid(data: Dataset, spec: str = "all") -> np.ndarray:
    """Grid locations: every distinct observation, or ``uniform:J`` (p == 1 only)."""
    if spec == "all":
        return np.unique(data.xs, axis=0)
    if spec.startswith("uniform:"):
        J = int(spec.split(":", 1)[1])
        if data.p != 1 or J < 1:
            raise InvalidArgumentError("uniform grids need p == 1 and J >= 1")
        lo, hi = data.xs.min(), data.xs.max()
        return np.linspace(lo, hi, J)[:, None] if J > 1 else np.array([[0.5 * (lo + hi)]])
    raise InvalidArgumentError(f"unknown grid spec {spec!r}")


def _log_joint(model: NonparametricAgmm, data: Dataset):
    mu, s2, r = model.evaluate(data.xs)
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    return joint_log_density(data.thetas, mu, s2, log_r)


def local_e_step(model: NonparametricAgmm, data: Dataset) -> np.ndarray:
    return responsibilities_from_log(_log_joint(model, data))


def local_loglik(model: NonparametricAgmm, data: Dataset) -> float:
    """Global mixture log-likelihood using the interpolated functions."""
    return float(logsumexp(_log_joint(model, data), axis=1).sum())


def local_m_step(data: Dataset, psi, grid, kernel: Kernel) -> NonparametricAgmm:
    """Kernel-weighted local-constant updates at every grid point."""
    psi = check_responsibilities(psi, data.n)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    W = kernel(cdist(data.xs, grid))                      # (n, J)
    mass = W.sum(axis=0)
    dead = np.flatnonzero(~(mass > 0))
    if dead.size:
        raise IsolatedGridPointError(int(dead[0]))
    targets = unwrapped_targets(data.thetas, psi.shape[1])  # (n, K)
    # rows of psi sum to one, so sum_k psi_ik W_ij = W_ij
    mu = W.T @ (psi * targets).sum(axis=1) / mass
    d = targets[:, :, None] - mu[None, None, :]            # (n, K, J)
    resid2 = np.einsum("nk,nkj,nj->j", psi, d * d, W) / mass
    sigma2 = np.maximum(resid2, SIGMA2_FLOOR)
    r = (W.T @ psi) / mass[:, None]
    r /= r.sum(axis=1, keepdims=True)
    return NonparametricAgmm(grid, mu, sigma2, r)


def fit_local_em(data: Dataset, K: int, kernel: Kernel, grid, init: NonparametricAgmm,
                 tol=None, max_iter: int = DEFAULT_MAX_ITER):
    """Alternate local E and M steps until the global log-likelihood settles.

    Stops when the absolute change of the global log-likelihood is below
    ``tol``; the default is ``1e-3 * n``.  The global likelihood is monitored,
    not guaranteed monotone: the interpolation step sits outside the local
    likelihoods being maximised.
    """
    if init.K != K:
        raise InvalidArgumentError(f"init has K={init.K}, requested K={K}")
    if tol is None:
        tol = DEFAULT_TOL_PER_OBS * data.n
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    model = init
    trace = [local_loglik(model, data)]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        model = local_m_step(data, local_e_step(model, data), grid, kernel)
        trace.append(local_loglik(model, data))
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    report = FitReport(
        loglik_trace=trace,
        iterations=it,
        converged=converged,
        bic=bic(trace[-1], model.J + K, data.n),
        selected_K=K,
        selected_h=kernel.h,
    )
    return model, report


# ---------------------------------------------------------------------------
# initialisation and tuning
# ---------------------------------------------------------------------------

def init_local(data: Dataset, z, K: int, grid, kernel: Kernel, floor: float = 1e-3):
    """Local M-step from hard labels, with mixture weights floored at ``floor``."""
    m = local_m_step(data, hard_responsibilities(z, K), grid, kernel)
    r = np.maximum(m.r, floor)
    return NonparametricAgmm(m.grid, m.mu, m.sigma2, r / r.sum(axis=1, keepdims=True))


def fit_local_best(data: Dataset, K: int, kernel: Kernel, grid, z_cluster=None,
                   tol=None, max_iter: int = DEFAULT_MAX_ITER):
    best = None
    for name, z in candidate_labels(data, K, z_cluster):
        init = init_local(data, z, K, grid, kernel)
        model, report = fit_local_em(data, K, kernel, grid, init, tol, max_iter)
        report.extra["init"] = name
        if best is None or report.loglik > best[1].loglik:
            best = (model, report)
    return best


def default_labels(data: Dataset, degrees=range(1, 6), K_range=range(1, 7)):
    """Initial turn counts for the local fit.

    Clustering labels are passed through a BIC-selected parametric fit and
    replaced by its most probable turn counts, which repairs pieces whose
    offset the boundary-pair rounding got wrong.  Falls back to the raw
    clustering labels, or ``None`` if clustering fails too.
    """
    from .initialization import initial_labels
    try:
        z = initial_labels(data)
    except AgmmError as exc:
        log.info("clustering init failed (%s); using quantile fallback", exc)
        z = None
    try:
        model, _ = select_model(data, degrees, K_range, z)
    except AgmmError as exc:
        log.info("parametric refinement failed (%s); keeping cluster labels", exc)
        return z
    return posterior_labels(model, data)


def select_K_local(data: Dataset, kernel: Kernel, K_range, grid_spec: str = "all",
                   z_cluster=None, tol=None, max_iter: int = DEFAULT_MAX_ITER):
    """BIC choice of K at a fixed kernel and grid; returns ``(best_K, fits)``."""
    grid = make_grid(data, grid_spec)
    if z_cluster is None:
        z_cluster = default_labels(data)
    fits = {}
    for K in sorted(set(int(k) for k in K_range)):
        try:
            fits[K] = fit_local_best(data, K, kernel, grid, z_cluster, tol, max_iter)
        except AgmmError as exc:
            log.warning("K=%d skipped: %s", K, exc)
    if not fits:
        raise InvalidStateError("no K could be fitted")
    return min(fits, key=lambda k: (fits[k][1].bic, k)), fits


def fold_assignment(n: int, folds: int, seed=0) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n) % folds


def cv_score(data: Dataset, K: int, kernel: Kernel, folds: int, seed=0,
             grid_spec: str = "all", tol=None, max_iter: int = DEFAULT_MAX_ITER,
             fold_labels=None) -> float:
    """Mean held-out MCE of the interpolated wrapped mean over ``folds`` folds.

    ``fold_labels`` optionally supplies precomputed initial labels for each
    training split, in fold order.
    """
    assign = fold_assignment(data.n, folds, seed)
    scores = []
    for f in range(folds):
        train, test = data.subset(assign != f), data.subset(assign == f)
        z = fold_labels[f] if fold_labels is not None else default_labels(train)
        model, _ = fit_local_best(train, K, kernel, make_grid(train, grid_spec), z, tol, max_iter)
        scores.append(mean_circular_error(test.thetas, model.predict(test.xs)))
    return float(np.mean(scores))


def tune(data: Dataset, K_range, h_range, folds: int = 5, seed=0, shape: str = "gaussian",
         grid_spec: str = "all", tol=None, max_iter: int = DEFAULT_MAX_ITER):
    """Two-stage tuning: K by minimum BIC over the (K, h) grid, then h by CV.

    Ties go to the smaller K, then the larger h.  Returns ``(K, h)``.
    """
    K_range = sorted(set(int(k) for k in K_range))
    h_range = sorted(set(float(h) for h in h_range))
    if not K_range or not h_range:
        raise InvalidArgumentError("K_range and h_range must be non-empty")
    if folds < 2:
        raise InvalidArgumentError("folds must be >= 2")
    z_cluster = default_labels(data)
    grid = make_grid(data, grid_spec)
    cells = []
    for h in h_range:
        for K in K_range:
            try:
                _, rep = fit_local_best(data, K, Kernel(shape, h), grid, z_cluster, tol, max_iter)
            except AgmmError as exc:
                log.warning("cell K=%d h=%g skipped: %s", K, h, exc)
                continue
            cells.append((rep.bic, K, -h))
    if not cells:
        raise InvalidStateError("no (K, h) cell could be fitted")
    K = min(cells)[1]
    if len(h_range) == 1:
        return K, h_range[0]
    assign = fold_assignment(data.n, folds, seed)
    fold_labels = [default_labels(data.subset(assign != f)) for f in range(folds)]
    scored = []
    for h in h_range:
        try:
            scored.append((cv_score(data, K, Kernel(shape, h), folds, seed, grid_spec,
                                    tol, max_iter, fold_labels), -h))
        except AgmmError as exc:
            log.warning("CV for h=%g skipped: %s", h, exc)
    if not scored:
        raise InvalidStateError("cross-validation failed for every bandwidth")
    return K, -min(scored)[1]
