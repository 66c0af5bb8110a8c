"""Nonparametric circular smoothing baseline.

Kernel (Nadaraya-Watson) estimates of ``E[sin theta | x]`` and
``E[cos theta | x]`` are combined with ``atan2``, which minimises the
angular risk ``E[1 - cos(theta - mu(x)) | x]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import Dataset, mean_circular_error
from .em_nonparametric import Kernel, fold_assignment
from .errors import AgmmError, InvalidArgumentError, NoSupportError

log = logging.getLogger(__name__)

DEFAULT_H_RANGE = tuple(np.round(np.geomspace(0.01, 2.0, 20), 6))
_CANCEL_TOL = 1e-12


@dataclass(frozen=True)
class CircularSmoother:
    data: Dataset
    kernel: Kernel
    degenerate: str = "error"

    def components(self, xs):
        """``(s_hat, c_hat, mass)`` at each row of ``xs``."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None] if self.data.p == 1 else xs[None, :]
        W = self.kernel(cdist(xs, self.data.xs))
        mass = W.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = W @ np.sin(self.data.thetas) / mass
            c = W @ np.cos(self.data.thetas) / mass
        return s, c, mass

    def predict(self, xs) -> np.ndarray:
        s, c, mass = self.components(xs)
        if np.any(~(mass > 0)):
            raise NoSupportError("no kernel support at some query points; increase h")
        flat = np.hypot(s, c) < _CANCEL_TOL
        if np.any(flat):
            if self.degenerate != "zero":
                raise NoSupportError("sine and cosine estimates cancel; direction undefined")
            s, c = np.where(flat, 0.0, s), np.where(flat, 1.0, c)
        return np.arctan2(s, c)


def smooth_fit(data: Dataset, kernel: Kernel, degenerate: str = "error") -> CircularSmoother:
    """``degenerate='zero'`` maps an exactly cancelled direction to 0 instead of raising."""
    if data.n < 2:
        raise InvalidArgumentError("smoothing needs at least two observations")
    if degenerate not in ("error", "zero"):
        raise InvalidArgumentError("degenerate must be 'error' or 'zero'")
    return CircularSmoother(data, kernel, degenerate)


def smooth_predict(handle: CircularSmoother, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(handle.predict(x[None, :])[0])


def smooth_cv(data: Dataset, h_range=DEFAULT_H_RANGE, folds: int = 5, seed=0,
              shape: str = "triangular") -> float:
    """Bandwidth with the smallest mean held-out MCE; ties go to the larger h.

    A bandwidth that leaves any held-out point without kernel support is
    discarded.
    """
    if folds < 2:
        raise InvalidArgumentError("folds must be >= 2")
    h_range = sorted(set(float(h) for h in h_range))
    if not h_range:
        raise InvalidArgumentError("h_range must be non-empty")
    if len(h_range) == 1:
        return h_range[0]
    assign = fold_assignment(data.n, folds, seed)
    splits = [(data.subset(assign != f), data.subset(assign == f)) for f in range(folds)]
    best = None
    for h in h_range:
        kernel = Kernel(shape, h)
        try:
            scores = [mean_circular_error(test.thetas, smooth_fit(train, kernel).predict(test.xs))
                      for train, test in splits]
        except AgmmError as exc:
            log.debug("h=%g rejected: %s", h, exc)
            continue
        key = (float(np.mean(scores)), -h)
        if best is None or key < best:
            best = key
    if best is None:
        raise NoSupportError("no bandwidth in h_range supports every held-out point")
    return -best[1]
