"""Synthetic benchmark data: von Mises sampling and the four simulated examples."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .core import Dataset, principal_angle, wrap_to_circle
from .errors import InvalidArgumentError, OutOfRangeError

EXAMPLE_IDS = (2, 3, 4, 5)
EXAMPLE_N = {2: 80, 3: 160, 4: 300, 5: 160}
VM_KAPPA = 8.0
EX4_SIGMA2 = 0.7


def sample_von_mises(omega: float, kappa: float, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` angles from VM(omega, kappa) by Best and Fisher's rejection scheme.

    ``kappa == 0`` gives the uniform distribution.  Output lies in ``[-pi, pi)``.
    ``seed`` may be anything :func:`numpy.random.default_rng` accepts.
    """
    if kappa < 0:
        raise InvalidArgumentError("kappa must be non-negative")
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if kappa == 0:
        return principal_angle(omega + rng.uniform(-np.pi, np.pi, n))

    tau = 1.0 + np.sqrt(1.0 + 4.0 * kappa * kappa)
    rho = (tau - np.sqrt(2.0 * tau)) / (2.0 * kappa)
    r = (1.0 + rho * rho) / (2.0 * rho)

    out = np.empty(n)
    filled = 0
    proposals = 0
    while filled < n:
        m = max(2 * (n - filled), 16)
        proposals += m
        if proposals > 100 * n + 1000:
            raise RuntimeError("von Mises rejection sampler exceeded its proposal budget")
        u1, u2, u3 = rng.uniform(size=(3, m))
        zc = np.cos(np.pi * u1)
        f = (1.0 + r * zc) / (r + zc)
        c = kappa * (r - f)
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (c * (2.0 - c) - u2 > 0) | (np.log(c / u2) + 1.0 - c >= 0)
        draws = np.sign(u3[ok] - 0.5) * np.arccos(np.clip(f[ok], -1.0, 1.0))
        take = min(draws.size, n - filled)
        out[filled:filled + take] = draws[:take]
        filled += take
    return principal_angle(omega + out)


def _bessel_i(nu: int, kappa: float) -> float:
    half = 0.5 * kappa
    term = half ** nu
    for m in range(1, nu + 1):
        term /= m
    total = term
    m = 0
    while True:
        term *= half * half / ((m + 1) * (m + 1 + nu))
        total += term
        m += 1
        if term < 1e-16 * total and m > half:
            return total


def bessel_ratio(kappa: float) -> float:
    """``I_1(kappa) / I_0(kappa)`` from the power series of both functions."""
    if not kappa > 0:
        raise InvalidArgumentError("kappa must be positive")
    if kappa > 500:
        raise OutOfRangeError("bessel_ratio is limited to kappa <= 500")
    return _bessel_i(1, kappa) / _bessel_i(0, kappa)


def circular_variance(angles) -> float:
    """One minus the mean resultant length."""
    angles = np.asarray(angles, dtype=float)
    return float(1.0 - np.hypot(np.mean(np.cos(angles)), np.mean(np.sin(angles))))


# ---------------------------------------------------------------------------
# example generators
# ---------------------------------------------------------------------------

def ex4_latent_mean(x):
    x = np.asarray(x, dtype=float)
    inner = (np.arctan(2 * x) + np.arcsin(x / 2) - np.arcsin(x)
             + np.arccos(x / 3) - np.pi / 2)
    return inner * 7.85 + np.pi


_VM_MEANS: dict = {
    2: lambda x: 0.1 + np.arctan(5 * x),
    3: lambda x: 0.1 + 5 * x,
    5: lambda x: 0.1 + 8 * x,
}


class Truth:
    """Ground-truth mean direction of one example, callable on x-values."""

    def __init__(self, example: int):
        if example not in EXAMPLE_IDS:
            raise InvalidArgumentError(f"unknown example {example}; choose from {EXAMPLE_IDS}")
        self.example = example

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[:, 0]
        if self.example == 4:
            return wrap_to_circle(ex4_latent_mean(x))
        return principal_angle(_VM_MEANS[self.example](x))

    def __repr__(self):
        return f"Truth(example={self.example})"


class Example(NamedTuple):
    data: Dataset
    truth: Callable
    sigma2_truth: float


def example_sigma2(example: int) -> float:
    if example == 4:
        return EX4_SIGMA2
    return 1.0 - bessel_ratio(VM_KAPPA)


def gen_example(example: int, seed=None) -> Example:
    """Simulate one of Examples 2-5 with x ~ Unif(-1, 1)."""
    truth = Truth(example)
    rng = np.random.default_rng(seed)
    n = EXAMPLE_N[example]
    x = rng.uniform(-1.0, 1.0, n)
    if example == 4:
        y = ex4_latent_mean(x) + np.sqrt(EX4_SIGMA2) * rng.standard_normal(n)
        theta = wrap_to_circle(y)
    else:
        theta = principal_angle(_VM_MEANS[example](x) + sample_von_mises(0.0, VM_KAPPA, n, rng))
    return Example(Dataset(x, theta), truth, example_sigma2(example))


def truth_grid(truth: Callable, T: int = 200, seed=None):
    """``T`` seeded uniform test locations on (-1, 1) and the true mean there."""
    if T < 1:
        raise InvalidArgumentError("T must be >= 1")
    xs = np.random.default_rng(seed).uniform(-1.0, 1.0, T)
    return xs, np.asarray(truth(xs), dtype=float).reshape(T)
