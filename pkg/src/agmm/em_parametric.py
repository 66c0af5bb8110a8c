"""Maximum-likelihood fitting of the parametric AGMM by EM, and BIC selection of K."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
from scipy import linalg

from .core import (
    SIGMA2_FLOOR,
    Basis,
    Dataset,
    FitReport,
    ParametricAgmm,
    bic,
    check_responsibilities,
    joint_log_density,
    hard_responsibilities,
    mixture_loglik,
    predict_mean,  # noqa: F401  re-exported
    responsibilities_from_log,
)
from .errors import AgmmError, InvalidArgumentError, SingularDesignError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500


def unwrapped_targets(thetas, K) -> np.ndarray:
    """(n, K) matrix of ``theta_i + (2k + 1) pi`` for k = 1..K."""
    shifts = (2 * np.arange(1, K + 1) + 1) * np.pi
    return np.asarray(thetas, dtype=float)[:, None] + shifts[None, :]


def e_step(model: ParametricAgmm, data: Dataset) -> np.ndarray:
    """Posterior component memberships ``psi`` (n, K), computed in log space."""
    with np.errstate(divide="ignore"):
        log_r = np.log(model.r)
    lj = joint_log_density(data.thetas, model.latent_mean(data.xs), model.sigma2, log_r)
    return responsibilities_from_log(lj)


def m_step(data: Dataset, psi, basis: Basis) -> ParametricAgmm:
    """Closed-form maximiser of the expected complete-data log-likelihood.

    ``beta`` solves the psi-weighted least-squares problem over all (i, k)
    pairs.  Since the rows of ``psi`` sum to one, the normal equations reduce
    to ``Phi' Phi beta = Phi' ybar`` with ``ybar_i`` the psi-weighted average
    unwrapped response.
    """
    psi = check_responsibilities(psi, data.n)
    K = psi.shape[1]
    phi = basis.design(data.xs)
    targets = unwrapped_targets(data.thetas, K)
    w = psi.sum(axis=1)
    ybar = (psi * targets).sum(axis=1)
    gram = phi.T @ (w[:, None] * phi)
    rhs = phi.T @ ybar
    try:
        cho = linalg.cho_factor(gram, check_finite=True)
        beta = linalg.cho_solve(cho, rhs)
        if np.linalg.cond(gram) > 1e14:
            raise linalg.LinAlgError("ill-conditioned")
    except linalg.LinAlgError as exc:
        raise SingularDesignError(
            "weighted normal equations are rank deficient; lower the basis degree") from exc
    resid = targets - (phi @ beta)[:, None]
    sigma2 = max(float((psi * resid * resid).sum() / psi.sum()), SIGMA2_FLOOR)
    r = psi.sum(axis=0) / data.n
    return ParametricAgmm(basis, beta, sigma2, r / r.sum())


def fit_em(data: Dataset, K: int, basis: Basis, init: ParametricAgmm,
           tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Run EM from ``init`` until the log-likelihood change drops below ``tol``.

    Returns ``(model, report)``.  If ``max_iter`` is exhausted the report has
    ``converged=False`` and the last (highest-likelihood) model is returned.
    """
    if K < 1 or init.K != K:
        raise InvalidArgumentError(f"init has K={init.K}, requested K={K}")
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    model = init
    trace = [mixture_loglik(model, data)]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        psi = e_step(model, data)
        model = m_step(data, psi, basis)
        trace.append(mixture_loglik(model, data))
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    report = FitReport(
        loglik_trace=trace,
        iterations=it,
        converged=converged,
        bic=bic(trace[-1], basis.q + K, data.n),
        selected_K=K,
    )
    return model, report


def posterior_labels(model: ParametricAgmm, data: Dataset) -> np.ndarray:
    """Most probable turn count per observation, shifted so the smallest is 1."""
    z = e_step(model, data).argmax(axis=1) + 1
    return z - z.min() + 1


# ---------------------------------------------------------------------------
# initial values and model selection
# ---------------------------------------------------------------------------

def quantile_split(data: Dataset, K: int) -> np.ndarray:
    """Labels 1..K from equal-count quantile groups of theta (lowest first)."""
    order = np.argsort(data.thetas, kind="stable")
    z = np.empty(data.n, dtype=int)
    for k, chunk in enumerate(np.array_split(order, K), start=1):
        z[chunk] = k
    return z


def soft_init(data: Dataset, z, K: int, basis: Basis, floor: float = 1e-3) -> ParametricAgmm:
    """Hard-assignment M-step from labels ``z`` with weights kept off zero.

    Empty components get weight ``floor`` so EM can still move mass into
    them; the result is renormalised.
    """
    model = m_step(data, hard_responsibilities(z, K), basis)
    r = np.maximum(model.r, floor)
    return replace(model, r=r / r.sum())


def candidate_labels(data: Dataset, K: int, z_cluster=None):
    """Initial label vectors for a K-component fit, as ``(name, z)`` pairs.

    Uses the clustering labels directly when they have exactly K groups.
    Otherwise falls back to a theta-quantile split, plus every placement of
    the clustering labels inside the K available offsets when the clustering
    found fewer than K groups.
    """
    kc = None if z_cluster is None else int(np.max(z_cluster))
    if kc == K:
        return [("cluster", np.asarray(z_cluster))]
    cands = [("quantile", quantile_split(data, K))]
    if kc is not None and kc < K:
        for shift in range(K - kc + 1):
            cands.append((f"cluster+{shift}", np.asarray(z_cluster) + shift))
    return cands


def candidate_inits(data: Dataset, K: int, basis: Basis, z_cluster=None):
    out = []
    for name, z in candidate_labels(data, K, z_cluster):
        try:
            out.append((name, soft_init(data, z, K, basis)))
        except SingularDesignError as exc:
            log.debug("init %s for K=%d failed: %s", name, K, exc)
    return out


def fit_best(data: Dataset, K: int, basis: Basis, z_cluster=None,
             tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Fit K components from every candidate init and keep the best likelihood."""
    best = None
    for name, init in candidate_inits(data, K, basis, z_cluster):
        model, report = fit_em(data, K, basis, init, tol, max_iter)
        report.extra["init"] = name
        if best is None or report.loglik > best[1].loglik:
            best = (model, report)
    if best is None:
        raise SingularDesignError(f"no usable initialisation for K={K}")
    return best


def select_K(data: Dataset, basis: Basis, K_range, z_cluster=None,
             tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Fit each K in ``K_range`` and return ``(best_K, reports)``.

    ``reports`` maps K to ``(model, FitReport)`` for every K that fitted.
    ``z_cluster`` are initial labels from :mod:`agmm.initialization`; when
    omitted they are computed with the default clustering settings.  Ties in
    BIC go to the smaller K.
    """
    K_range = sorted(set(int(k) for k in K_range))
    if not K_range:
        raise InvalidArgumentError("K_range must be non-empty")
    if z_cluster is None:
        from .initialization import initial_labels
        try:
            z_cluster = initial_labels(data)
        except AgmmError as exc:
            log.info("clustering init failed (%s); using quantile fallback", exc)
    reports = {}
    for K in K_range:
        try:
            reports[K] = fit_best(data, K, basis, z_cluster, tol, max_iter)
        except AgmmError as exc:
            log.warning("K=%d skipped: %s", K, exc)
    if not reports:
        raise SingularDesignError("every K in K_range failed to fit")
    best_K = min(reports, key=lambda k: (reports[k][1].bic, k))
    return best_K, reports


def select_model(data: Dataset, degrees, K_range, z_cluster=None,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Joint BIC selection over polynomial degree and K.

    Returns ``(model, report)`` for the winner; ``report.extra`` records the
    BIC of every (degree, K) cell that fitted.
    """
    if z_cluster is None:
        from .initialization import initial_labels
        try:
            z_cluster = initial_labels(data)
        except AgmmError as exc:
            log.info("clustering init failed (%s); using quantile fallback", exc)
    best, table = None, {}
    for d in sorted(set(int(d) for d in degrees)):
        basis = Basis(degree=d, p=data.p)
        try:
            _, reports = select_K(data, basis, K_range, z_cluster, tol, max_iter)
        except AgmmError as exc:
            log.warning("degree %d skipped: %s", d, exc)
            continue
        for K, (model, report) in reports.items():
            table[f"{d},{K}"] = report.bic
            key = (report.bic, d, K)
            if best is None or key < best[0]:
                best = (key, model, report)
    if best is None:
        raise SingularDesignError("no (degree, K) combination could be fitted")
    _, model, report = best
    report.extra["bic_table"] = table
    report.extra["bic_per_K"] = bic_per_K(table)
    report.extra["degree"] = model.basis.degree
    return model, report


def bic_per_K(table: dict) -> dict:
    """Best BIC for each K over the degrees in a ``"degree,K"`` table."""
    out = {}
    for key, b in table.items():
        K = key.split(",")[1]
        out[K] = min(b, out.get(K, np.inf))
    return out
