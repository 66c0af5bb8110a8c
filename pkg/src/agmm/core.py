"""Angle arithmetic, domain types and likelihood primitives.

A circular response ``theta`` in ``[-pi, pi)`` is treated as the wrapped
image of a latent linear response ``y``::

    theta = (y mod 2pi) - pi          y = theta + 2 z pi + pi

so that, conditionally on the turn count ``z = k``, ``theta`` is Gaussian
around ``mu(x) - (2k + 1) pi``.  Everything in this module is a pure function
or an immutable container; the fitters build on top of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateVarianceError, InvalidArgumentError

TWO_PI = 2.0 * np.pi
LOG_2PI = np.log(TWO_PI)
SIGMA2_FLOOR = 1e-8
_DEGENERATE_SIGMA2 = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# angle arithmetic
# ---------------------------------------------------------------------------

def wrap_to_circle(y):
    """Map a linear response onto the circle as ``(y mod 2pi) - pi``.

    The modulo is floored, so the result lies in ``[-pi, pi)``.  Accepts
    scalars or arrays; raises for non-finite input.
    """
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise InvalidArgumentError("wrap_to_circle requires finite input")
    out = np.mod(y_arr, TWO_PI) - np.pi
    # np.mod can round up to exactly 2pi for tiny negative inputs
    out = np.where(out >= np.pi, -np.pi, out)
    return float(out) if out.ndim == 0 else out


def unwrap(theta, z):
    """Latent linear response ``theta + 2 z pi + pi`` for turn count ``z``."""
    out = np.asarray(theta, dtype=float) + TWO_PI * np.asarray(z) + np.pi
    return float(out) if out.ndim == 0 else out


def principal_angle(a):
    """Angle-preserving reduction of ``a`` to ``[-pi, pi)``.

    Unlike :func:`wrap_to_circle` this does not shift by ``pi``; it is the
    representative of the same direction on the circle.
    """
    return wrap_to_circle(np.asarray(a, dtype=float) + np.pi)


def angular_difference(a, b):
    """Signed difference ``a - b`` reduced to ``[-pi, pi)``."""
    return principal_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def component_mean(mu, k):
    """Mean of mixture component ``k``: ``mu - (2k + 1) pi``."""
    return mu - (2 * k + 1) * np.pi


def gaussian_pdf(theta, mu, sigma2):
    if np.any(np.asarray(sigma2) <= 0):
        raise InvalidArgumentError("sigma2 must be positive")
    theta = np.asarray(theta, dtype=float)
    d = theta - mu
    out = np.exp(-0.5 * d * d / sigma2) / np.sqrt(TWO_PI * sigma2)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_logpdf(theta, mu, sigma2):
    d = np.asarray(theta, dtype=float) - mu
    return -0.5 * (LOG_2PI + np.log(sigma2)) - 0.5 * d * d / sigma2


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Paired observations ``(x_i, theta_i)``.

    ``xs`` is stored as an ``(n, p)`` array even when ``p == 1``.  Thetas are
    expected in ``[-pi, pi)``; use :meth:`from_raw` to wrap arbitrary angles.
    """

    xs: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        thetas = np.array(self.thetas, dtype=float).ravel()
        if xs.ndim != 2:
            raise InvalidArgumentError("xs must be a vector or an (n, p) array")
        if xs.shape[0] != thetas.shape[0]:
            raise InvalidArgumentError(
                f"len(xs)={xs.shape[0]} differs from len(thetas)={thetas.shape[0]}")
        if thetas.shape[0] < 1:
            raise InvalidArgumentError("a dataset needs at least one observation")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(thetas))):
            raise InvalidArgumentError("dataset contains non-finite values")
        if np.any(thetas < -np.pi) or np.any(thetas >= np.pi):
            raise InvalidArgumentError("thetas must lie in [-pi, pi); use Dataset.from_raw")
        object.__setattr__(self, "xs", _frozen(xs))
        object.__setattr__(self, "thetas", _frozen(thetas))

    @classmethod
    def from_raw(cls, xs, thetas):
        """Build a dataset, reducing any out-of-range angle to ``[-pi, pi)``.

        Returns ``(dataset, n_wrapped)``.
        """
        thetas = np.array(thetas, dtype=float).ravel()
        bad = (thetas < -np.pi) | (thetas >= np.pi)
        if np.any(bad):
            thetas[bad] = principal_angle(thetas[bad])
        return cls(xs, thetas), int(bad.sum())

    @property
    def n(self) -> int:
        return self.thetas.shape[0]

    @property
    def p(self) -> int:
        return self.xs.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.xs[idx], self.thetas[idx])


@dataclass(frozen=True)
class Basis:
    """Feature map ``phi``.

    The default is a polynomial of the given degree applied coordinatewise:
    ``(1, x_1..x_p, x_1^2..x_p^2, ...)``, so ``q = 1 + p * degree``.  Passing
    ``functions`` (callables of a p-vector) replaces the polynomial.
    """

    degree: int = 1
    p: int = 1
    functions: Optional[Sequence[Callable]] = None

    def __post_init__(self):
        if self.functions is None:
            if self.degree < 0:
                raise InvalidArgumentError("polynomial degree must be >= 0")
        else:
            object.__setattr__(self, "functions", tuple(self.functions))
            if not self.functions:
                raise InvalidArgumentError("a basis needs at least one function")
        if self.p < 1:
            raise InvalidArgumentError("p must be >= 1")

    @property
    def kind(self) -> str:
        return "polynomial" if self.functions is None else "custom"

    @property
    def q(self) -> int:
        if self.functions is not None:
            return len(self.functions)
        return 1 + self.p * self.degree

    def design(self, xs) -> np.ndarray:
        """Stack ``phi(x_i)`` row-wise into an ``(n, q)`` matrix."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None] if self.p == 1 else xs[None, :]
        if xs.shape[1] != self.p:
            raise InvalidArgumentError(f"expected {self.p}-dimensional inputs, got {xs.shape[1]}")
        if self.functions is not None:
            return np.column_stack([[float(f(x)) for x in xs] for f in self.functions])
        cols = [np.ones(xs.shape[0])]
        for d in range(1, self.degree + 1):
            cols.extend(xs[:, j] ** d for j in range(self.p))
        return np.column_stack(cols)


def expand_basis(basis: Basis, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != basis.p:
        raise InvalidArgumentError(f"expected a {basis.p}-vector, got shape {x.shape}")
    return basis.design(x[None, :])[0]


@dataclass(frozen=True)
class ParametricAgmm:
    """Parametric AGMM: ``mu(x) = phi(x)' beta`` with tied variance ``sigma2``."""

    basis: Basis
    beta: np.ndarray
    sigma2: float
    r: np.ndarray

    def __post_init__(self):
        beta = _frozen(np.ravel(self.beta))
        r = _frozen(np.ravel(self.r))
        if beta.shape[0] != self.basis.q:
            raise InvalidArgumentError(f"beta has length {beta.shape[0]}, basis has q={self.basis.q}")
        if not self.sigma2 > 0:
            raise InvalidArgumentError("sigma2 must be positive")
        if r.shape[0] < 1:
            raise InvalidArgumentError("K must be >= 1")
        if np.any(r < 0) or np.any(r > 1) or abs(r.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("r must be a probability vector")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def K(self) -> int:
        return self.r.shape[0]

    def latent_mean(self, xs) -> np.ndarray:
        return self.basis.design(xs) @ self.beta

    def predict(self, xs) -> np.ndarray:
        """Wrapped mean direction at each row of ``xs``."""
        return wrap_to_circle(self.latent_mean(xs))

    def variance(self, xs) -> np.ndarray:
        return np.full(np.asarray(xs).shape[0], self.sigma2)


def predict_mean(model: ParametricAgmm, x) -> float:
    """Wrapped mean direction at a single p-vector ``x``."""
    return wrap_to_circle(float(expand_basis(model.basis, x) @ model.beta))


@dataclass
class FitReport:
    loglik_trace: list
    iterations: int
    converged: bool
    bic: float
    selected_K: int
    selected_h: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    def to_dict(self) -> dict:
        d = {
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "bic": float(self.bic),
            "selected_K": int(self.selected_K),
            "selected_h": None if self.selected_h is None else float(self.selected_h),
        }
        d.update(self.extra)
        return d


# ---------------------------------------------------------------------------
# likelihood primitives
# ---------------------------------------------------------------------------

def joint_log_density(thetas, mu, sigma2, log_r):
    """``log r_k + log f(theta_i | mu_i - (2k+1)pi, sigma2_i)`` as an (n, K) array.

    ``mu`` and ``sigma2`` broadcast against ``thetas``; ``log_r`` is either a
    K-vector or an (n, K) array of per-observation weights.
    """
    thetas = np.asarray(thetas, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 < _DEGENERATE_SIGMA2):
        raise DegenerateVarianceError("variance collapsed below 1e-12")
    log_r = np.asarray(log_r, dtype=float)
    K = log_r.shape[-1]
    shifts = (2 * np.arange(1, K + 1) + 1) * np.pi
    # residual of the unwrapped response against the latent mean
    resid = (thetas[:, None] + shifts[None, :]) - np.asarray(mu, dtype=float).reshape(-1, 1)
    s2 = np.broadcast_to(sigma2.reshape(-1, 1) if sigma2.ndim else sigma2, resid.shape)
    with np.errstate(divide="ignore"):
        return log_r + (-0.5 * (LOG_2PI + np.log(s2)) - 0.5 * resid * resid / s2)


def responsibilities_from_log(log_joint) -> np.ndarray:
    norm = logsumexp(log_joint, axis=1, keepdims=True)
    return np.exp(log_joint - norm)


def mixture_loglik(model: ParametricAgmm, data: Dataset) -> float:
    """Observed-data log-likelihood of a parametric model (log-sum-exp)."""
    with np.errstate(divide="ignore"):
        log_r = np.log(model.r)
    lj = joint_log_density(data.thetas, model.latent_mean(data.xs), model.sigma2, log_r)
    return float(logsumexp(lj, axis=1).sum())


def check_responsibilities(psi, n=None) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2:
        raise InvalidArgumentError("responsibilities must be an (n, K) matrix")
    if n is not None and psi.shape[0] != n:
        raise InvalidArgumentError("responsibilities do not match the dataset size")
    if np.any(psi < 0) or np.any(psi > 1) or np.any(np.abs(psi.sum(axis=1) - 1) > 1e-10):
        raise InvalidArgumentError("responsibility rows must lie on the simplex")
    return psi


def hard_responsibilities(z, K=None) -> np.ndarray:
    """One-hot (n, K) matrix for 1-based labels ``z``."""
    z = np.asarray(z, dtype=int)
    K = int(z.max()) if K is None else K
    psi = np.zeros((z.shape[0], K))
    psi[np.arange(z.shape[0]), z - 1] = 1.0
    return psi


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def mean_circular_error(truth, est) -> float:
    """Average of ``|sin((theta - theta_hat) / 2)|``; 0 is perfect, 1 antipodal."""
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    est = np.atleast_1d(np.asarray(est, dtype=float))
    if truth.shape != est.shape or truth.size < 1:
        raise InvalidArgumentError("MCE needs two non-empty sequences of equal length")
    return float(np.mean(np.abs(np.sin(0.5 * (truth - est)))))


def bic(loglik: float, df: int, n: int) -> float:
    return -2.0 * loglik + np.log(n) * df
