import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agmm.core import Basis, Dataset, ParametricAgmm, hard_responsibilities
from agmm.datagen import gen_example
from agmm.em_nonparametric import (
    Kernel,
    NonparametricAgmm,
    cv_score,
    fit_local_em,
    fold_assignment,
    init_local,
    interpolate,
    kernel_weight,
    local_e_step,
    local_loglik,
    local_m_step,
    make_grid,
    select_K_local,
    tune,
)
from agmm.em_parametric import e_step, m_step
from agmm.errors import InvalidArgumentError, IsolatedGridPointError

from helpers import make_wrapped_line, random_psi

PI = math.pi


def toy_model():
    grid = [0.0, 1.0, 2.0]
    mu = [1.0, 3.0, 5.0]
    s2 = [0.1, 0.3, 0.2]
    r = [[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]]
    return NonparametricAgmm(grid, mu, s2, r)


class TestKernel:
    def test_triangular_values(self):
        assert kernel_weight(Kernel("triangular", 1.5), 1.5) == 0.0
        assert kernel_weight(Kernel("triangular", 2.0), 0.0) == 0.5

    def test_gaussian_value(self):
        assert kernel_weight(Kernel("gaussian", 1.0), 0.0) == pytest.approx(1 / math.sqrt(2 * PI))

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            Kernel("box", 1.0)
        with pytest.raises(InvalidArgumentError):
            Kernel("gaussian", 0.0)
        with pytest.raises(InvalidArgumentError):
            kernel_weight(Kernel(), -1.0)

    @given(st.sampled_from(["gaussian", "triangular"]), st.floats(0.01, 5),
           st.floats(0, 10), st.floats(0, 10))
    def test_non_increasing(self, shape, h, a, b):
        k = Kernel(shape, h)
        lo, hi = sorted((a, b))
        assert k(lo) >= k(hi) >= 0


class TestInterpolate:
    def test_grid_identity(self):
        m = toy_model()
        for j in range(3):
            mu, s2, r = interpolate(m, m.grid[j])
            assert mu == m.mu[j] and s2 == m.sigma2[j]
            np.testing.assert_array_equal(r, m.r[j])

    def test_midpoint(self):
        mu, s2, r = interpolate(toy_model(), 0.5)
        assert mu == pytest.approx(2.0) and s2 == pytest.approx(0.2)
        np.testing.assert_allclose(r, [0.4, 0.6])
        assert r.sum() == pytest.approx(1.0, abs=1e-15)

    def test_constant_extrapolation(self):
        m = toy_model()
        mu, s2, r = interpolate(m, 7.0)
        assert (mu, s2) == (5.0, 0.2)
        assert interpolate(m, -3.0)[0] == 1.0

    def test_unsorted_grid(self):
        m = NonparametricAgmm([2.0, 0.0], [5.0, 1.0], [1.0, 1.0], [[1.0], [1.0]])
        assert interpolate(m, 1.0)[0] == pytest.approx(3.0)

    def test_multivariate_grid_identity(self):
        grid = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        m = NonparametricAgmm(grid, [1.0, 2.0, 3.0, 4.0], np.ones(4), np.ones((4, 1)))
        for j in range(4):
            assert interpolate(m, grid[j])[0] == m.mu[j]
        mid = interpolate(m, [0.5, 0.5])[0]
        assert 1.0 < mid < 4.0

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            NonparametricAgmm([0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [[1.0], [1.0]])
        with pytest.raises(InvalidArgumentError):
            NonparametricAgmm([0.0], [1.0], [0.0], [[1.0]])
        with pytest.raises(InvalidArgumentError):
            NonparametricAgmm([0.0], [1.0], [1.0], [[0.3, 0.3]])


class TestLocalSteps:
    def test_e_step_single_component(self, rng):
        m = NonparametricAgmm([0.0, 1.0], [3.0, 4.0], [0.5, 0.5], [[1.0], [1.0]])
        ds = Dataset(rng.uniform(0, 1, 10), rng.uniform(-PI, PI, 10))
        np.testing.assert_array_equal(local_e_step(m, ds), np.ones((10, 1)))

    def test_e_step_matches_parametric_when_constant(self, rng):
        K = 3
        r = rng.dirichlet(np.ones(K))
        grid = np.linspace(-1, 1, 7)
        local = NonparametricAgmm(grid, np.full(7, 5.0), np.full(7, 0.4), np.tile(r, (7, 1)))
        par = ParametricAgmm(Basis(0), [5.0], 0.4, r)
        ds = Dataset(rng.uniform(-1, 1, 40), rng.uniform(-PI, PI, 40))
        np.testing.assert_allclose(local_e_step(local, ds), e_step(par, ds), atol=1e-12)
        from agmm.core import mixture_loglik
        assert local_loglik(local, ds) == pytest.approx(mixture_loglik(par, ds), abs=1e-9)

    def test_e_step_symmetric(self):
        m = NonparametricAgmm([0.0], [4 * PI], [0.3], [[0.5, 0.5]])
        np.testing.assert_allclose(local_e_step(m, Dataset([0.0], [0.0])), [[0.5, 0.5]])

    @pytest.mark.parametrize("K", [1, 2, 4])
    def test_equal_weights_limit(self, rng, K):
        n = 50
        ds = Dataset(rng.uniform(-1, 1, n), rng.uniform(-PI, PI, n))
        psi = random_psi(rng, n, K)
        grid = make_grid(ds)
        local = local_m_step(ds, psi, grid, Kernel("gaussian", 1e9))
        par = m_step(ds, psi, Basis(0))
        np.testing.assert_allclose(local.mu, par.beta[0], rtol=0, atol=1e-10)
        np.testing.assert_allclose(local.sigma2, par.sigma2, rtol=0, atol=1e-10)
        np.testing.assert_allclose(local.r, np.tile(par.r, (local.J, 1)), rtol=0, atol=1e-10)

    def test_single_point(self):
        ds = Dataset([0.3], [1.0])
        m = local_m_step(ds, [[0.0, 1.0]], [0.3], Kernel("triangular", 0.1))
        assert m.mu[0] == pytest.approx(1.0 + 5 * PI)
        assert m.sigma2[0] == 1e-8
        np.testing.assert_array_equal(m.r, [[0.0, 1.0]])

    def test_isolated_grid_point(self):
        ds = Dataset([0.0, 0.1], [0.0, 0.0])
        with pytest.raises(IsolatedGridPointError) as info:
            local_m_step(ds, np.ones((2, 1)), [0.05, 5.0], Kernel("triangular", 0.2))
        assert info.value.j == 1

    @given(st.integers(0, 10**6), st.integers(1, 4))
    def test_weights_on_simplex(self, seed, K):
        rng = np.random.default_rng(seed)
        n = 30
        ds = Dataset(rng.uniform(-1, 1, n), rng.uniform(-PI, PI, n))
        m = local_m_step(ds, random_psi(rng, n, K), make_grid(ds), Kernel("gaussian", 0.2))
        assert np.all(m.r >= 0)
        np.testing.assert_allclose(m.r.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(m.sigma2 > 0)


class TestGrid:
    def test_all_points(self):
        ds = Dataset([0.3, 0.1, 0.3], [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(make_grid(ds), [[0.1], [0.3]])

    def test_uniform(self):
        ds = Dataset([0.0, 1.0, 0.5], [0.0, 0.0, 0.0])
        np.testing.assert_allclose(make_grid(ds, "uniform:3")[:, 0], [0.0, 0.5, 1.0])

    def test_bad_spec(self):
        ds = Dataset([0.0, 1.0], [0.0, 0.0])
        with pytest.raises(InvalidArgumentError):
            make_grid(ds, "random:3")


class TestFitLocalEm:
    def test_noiseless_fixed_point(self):
        ds, y = make_wrapped_line(60, 9.0, 0.5, seed=2)
        k = np.round((y - ds.thetas - PI) / (2 * PI)).astype(int)
        z = k - k.min() + 1
        kern = Kernel("gaussian", 0.05)
        grid = make_grid(ds)
        init = local_m_step(ds, hard_responsibilities(z), grid, kern)
        _, rep = fit_local_em(ds, int(z.max()), kern, grid, init, tol=1e-6)
        assert rep.converged and rep.iterations <= 2

    def test_report(self):
        ds = gen_example(5, 0).data
        k, fits = select_K_local(ds, Kernel("gaussian", 0.01), [2, 3])
        model, rep = fits[k]
        assert rep.selected_h == 0.01 and rep.selected_K == k
        assert rep.bic == pytest.approx(-2 * rep.loglik + math.log(ds.n) * (model.J + k))

    @pytest.mark.parametrize("example", [5])
    def test_global_loglik_monotone(self, example):
        for seed in range(5):
            ds = gen_example(example, seed).data
            k, fits = select_K_local(ds, Kernel("gaussian", 0.01), range(1, 6))
            assert np.all(np.diff(fits[k][1].loglik_trace) >= -1e-6)

    @pytest.mark.xfail(strict=True, reason="interpolation step can lower the global likelihood")
    def test_global_loglik_monotone_example4(self):
        for seed in range(10):
            ds = gen_example(4, seed).data
            k, fits = select_K_local(ds, Kernel("gaussian", 0.01), range(1, 6))
            assert np.all(np.diff(fits[k][1].loglik_trace) >= -1e-6)

    def test_argument_checks(self):
        ds = Dataset([0.0, 1.0], [0.0, 0.5])
        grid = make_grid(ds)
        kern = Kernel("gaussian", 1.0)
        init = init_local(ds, np.ones(2, int), 1, grid, kern)
        with pytest.raises(InvalidArgumentError):
            fit_local_em(ds, 2, kern, grid, init)
        with pytest.raises(InvalidArgumentError):
            fit_local_em(ds, 1, kern, grid, init, tol=-1)


class TestTuning:
    def test_fold_assignment(self):
        a = fold_assignment(23, 5, 3)
        np.testing.assert_array_equal(a, fold_assignment(23, 5, 3))
        assert sorted(np.bincount(a)) == [4, 4, 5, 5, 5]

    def test_single_piece_picks_one(self):
        ds, _ = make_wrapped_line(60, 1.0, PI, noise=0.2, seed=1)
        K, h = tune(ds, [1, 2, 3], [0.3], folds=3)
        assert (K, h) == (1, 0.3)

    def test_two_stage(self):
        ds, _ = make_wrapped_line(60, 1.0, PI, noise=0.2, seed=1)
        K, h = tune(ds, [1, 2], [0.2, 0.5], folds=3)
        assert K == 1 and h in (0.2, 0.5)

    def test_cv_score_range(self):
        ds, _ = make_wrapped_line(50, 1.0, PI, noise=0.2, seed=2)
        s = cv_score(ds, 1, Kernel("gaussian", 0.3), folds=3)
        assert 0.0 <= s < 0.2

    def test_validation(self):
        ds, _ = make_wrapped_line(20, 1.0, PI, seed=0)
        with pytest.raises(InvalidArgumentError):
            tune(ds, [], [0.1])
        with pytest.raises(InvalidArgumentError):
            tune(ds, [1], [0.1], folds=1)
