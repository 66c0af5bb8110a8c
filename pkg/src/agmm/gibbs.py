"""Gibbs sampler for the parametric AGMM under conjugate priors.

Priors::

    beta     ~ N(0, sigma0_2 I)
    sigma2   ~ Inv-Gamma(alpha, lambda)
    r        ~ Dirichlet(gamma)
    sigma0_2 ~ Inv-Gamma(alpha0, lambda0)

The turn counts ``z_i`` are sampled explicitly, so every step is a draw from
a standard distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Basis, Dataset, ParametricAgmm, joint_log_density
from .em_parametric import unwrapped_targets
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Priors:
    alpha0: float = 1.0
    lambda0: float = 1.0
    alpha: float = 1.0
    lam: float = 1.0
    gamma: Optional[tuple] = None

    def __post_init__(self):
        vals = [self.alpha0, self.lambda0, self.alpha, self.lam]
        if self.gamma is not None:
            object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
            vals.extend(self.gamma)
        if not all(v > 0 for v in vals):
            raise InvalidArgumentError("all prior hyperparameters must be positive")

    def concentration(self, K: int) -> np.ndarray:
        if self.gamma is None:
            return np.ones(K)
        if len(self.gamma) != K:
            raise InvalidArgumentError(f"gamma has length {len(self.gamma)}, expected K={K}")
        return np.asarray(self.gamma)


@dataclass
class GibbsTrace:
    """Dense storage of every draw; the first ``burn_in`` rows are warm-up."""

    beta: np.ndarray        # (total, q)
    sigma2: np.ndarray      # (total,)
    r: np.ndarray           # (total, K)
    z: np.ndarray           # (total, n), int
    sigma0_2: np.ndarray    # (total,)
    burn_in: int
    basis: Basis = field(default_factory=Basis)

    @property
    def total(self) -> int:
        return self.sigma2.shape[0]

    def retained(self, name):
        return getattr(self, name)[self.burn_in:]

    def to_csv(self, path) -> None:
        """One row per retained draw; z vectors are omitted."""
        q, K = self.beta.shape[1], self.r.shape[1]
        header = ([f"beta{j}" for j in range(q)] + ["sigma2"]
                  + [f"r{k + 1}" for k in range(K)] + ["sigma0_2"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter"] + header)
            for t in range(self.burn_in, self.total):
                w.writerow([t] + [repr(float(v)) for v in self.beta[t]]
                           + [repr(float(self.sigma2[t]))]
                           + [repr(float(v)) for v in self.r[t]]
                           + [repr(float(self.sigma0_2[t]))])


def _inv_gamma(rng, shape, scale):
    return scale / rng.gamma(shape)


def gibbs_sample(data: Dataset, basis: Basis, K: int, priors: Priors = Priors(),
                 total: int = 30000, burn_in: int = 10000, seed=0,
                 init: Optional[ParametricAgmm] = None,
                 fixed_sigma2: Optional[float] = None) -> GibbsTrace:
    """Run one chain of the conjugate Gibbs sampler.

    ``init`` sets the starting state (default: the clustering-based initial
    model).  ``fixed_sigma2`` pins the observation variance instead of
    sampling it.  The chain is a deterministic function of ``seed``.
    """
    if K < 1:
        raise InvalidArgumentError("K must be >= 1")
    if not total > burn_in >= 0:
        raise InvalidArgumentError("need total > burn_in >= 0")
    if fixed_sigma2 is not None and not fixed_sigma2 > 0:
        raise InvalidArgumentError("fixed_sigma2 must be positive")
    gamma = priors.concentration(K)
    rng = np.random.default_rng(seed)

    if init is None:
        init = _default_init(data, K, basis)
    if init.K != K or init.basis.q != basis.q:
        raise InvalidArgumentError("init does not match K and the basis")
    beta = init.beta.copy()
    sigma2 = float(fixed_sigma2 if fixed_sigma2 is not None else init.sigma2)
    r = init.r.copy()
    sigma0_2 = max(float(beta @ beta) / basis.q, 1.0)

    phi = basis.design(data.xs)
    targets = unwrapped_targets(data.thetas, K)
    n, q = phi.shape
    rows = np.arange(n)

    out_beta = np.empty((total, q))
    out_s2 = np.empty(total)
    out_r = np.empty((total, K))
    out_z = np.empty((total, n), dtype=np.int16 if K < 32000 else np.int64)
    out_s02 = np.empty(total)

    for t in range(total):
        # z | rest: Gumbel-max over the unnormalised log posterior
        with np.errstate(divide="ignore"):
            lj = joint_log_density(data.thetas, phi @ beta, sigma2, np.log(r))
        z = np.argmax(lj + rng.gumbel(size=lj.shape), axis=1)
        y = targets[rows, z]

        # beta | rest: conjugate normal linear model
        prec = phi.T @ phi / sigma2 + np.eye(q) / sigma0_2
        chol = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, phi.T @ y / sigma2)
        beta = mean + np.linalg.solve(chol.T, rng.standard_normal(q))

        if fixed_sigma2 is None:
            resid = y - phi @ beta
            sigma2 = _inv_gamma(rng, priors.alpha + 0.5 * n, priors.lam + 0.5 * resid @ resid)

        counts = np.bincount(z, minlength=K)
        r = rng.dirichlet(gamma + counts)
        # rounding can leave exact zeros for tiny concentrations
        r = np.maximum(r, np.finfo(float).tiny)
        r /= r.sum()

        sigma0_2 = _inv_gamma(rng, priors.alpha0 + 0.5 * q, priors.lambda0 + 0.5 * beta @ beta)

        out_beta[t], out_s2[t], out_r[t], out_z[t], out_s02[t] = beta, sigma2, r, z + 1, sigma0_2

    return GibbsTrace(out_beta, out_s2, out_r, out_z, out_s02, burn_in, basis)


def _default_init(data: Dataset, K: int, basis: Basis) -> ParametricAgmm:
    from .em_parametric import candidate_inits
    from .initialization import initial_labels
    from .errors import AgmmError
    try:
        z = initial_labels(data)
    except AgmmError:
        z = None
    cands = candidate_inits(data, K, basis, z)
    if not cands:
        raise InvalidArgumentError("could not build a starting state for the sampler")
    return cands[0][1]


def posterior_summary(trace: GibbsTrace, level: float = 0.95) -> dict:
    """Posterior means and equal-tailed credible intervals of retained draws."""
    kept = trace.total - trace.burn_in
    if kept < 100:
        raise InvalidArgumentError(f"only {kept} retained draws; need at least 100")
    lo, hi = 0.5 * (1 - level), 0.5 * (1 + level)
    out = {}
    for name in ("beta", "sigma2", "r", "sigma0_2"):
        draws = trace.retained(name)
        out[f"{name}_mean"] = draws.mean(axis=0)
        out[f"{name}_sd"] = draws.std(axis=0, ddof=1)
        out[f"{name}_ci"] = np.quantile(draws, [lo, hi], axis=0)
    return out


def merge_chains(traces) -> GibbsTrace:
    """Concatenate the retained draws of several chains into one trace."""
    traces = list(traces)
    if not traces:
        raise InvalidArgumentError("no chains to merge")
    cat = {name: np.concatenate([t.retained(name) for t in traces])
           for name in ("beta", "sigma2", "r", "z", "sigma0_2")}
    return GibbsTrace(cat["beta"], cat["sigma2"], cat["r"], cat["z"], cat["sigma0_2"],
                      0, traces[0].basis)


def summary_model(trace: GibbsTrace) -> ParametricAgmm:
    """Plug-in model at the posterior means."""
    s = posterior_summary(trace)
    r = s["r_mean"] / s["r_mean"].sum()
    return ParametricAgmm(trace.basis, s["beta_mean"], float(s["sigma2_mean"]), r)
