"""Small data builders shared by the tests."""

import numpy as np

from agmm.core import Basis, Dataset, ParametricAgmm, wrap_to_circle


def make_wrapped_line(n, slope, intercept, noise=0.0, seed=0, lo=-1.0, hi=1.0):
    """Wrapped responses of a latent straight line plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(lo, hi, n))
    y = intercept + slope * x + noise * rng.standard_normal(n)
    return Dataset(x, wrap_to_circle(y)), y


def random_model(rng, K, degree, sigma2=None):
    basis = Basis(degree)
    beta = rng.normal(0, 3, basis.q)
    r = rng.dirichlet(np.ones(K))
    s2 = sigma2 if sigma2 is not None else rng.uniform(0.05, 2.0)
    return ParametricAgmm(basis, beta, s2, r)


def random_psi(rng, n, K):
    psi = rng.dirichlet(np.full(K, 0.7), size=n)
    return psi / psi.sum(axis=1, keepdims=True)
