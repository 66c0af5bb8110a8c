import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agmm.core import Basis, Dataset, ParametricAgmm, hard_responsibilities, wrap_to_circle
from agmm.em_parametric import (
    bic_per_K,
    candidate_labels,
    e_step,
    fit_best,
    fit_em,
    m_step,
    posterior_labels,
    quantile_split,
    select_K,
    select_model,
    soft_init,
    unwrapped_targets,
)
from agmm.errors import InvalidArgumentError, SingularDesignError
from agmm.initialization import initial_labels

from helpers import make_wrapped_line, random_psi
from oracles import m_step_oracle

PI = math.pi


def true_labels(y):
    """Component index k with y = theta + (2k + 1) pi, shifted so min is 1."""
    k = np.round((y - wrap_to_circle(y) - PI) / (2 * PI)).astype(int)
    return k - k.min() + 1, k


class TestEStep:
    def test_single_component(self, rng):
        m = ParametricAgmm(Basis(1), [1.0, 2.0], 0.5, [1.0])
        ds = Dataset(rng.uniform(-1, 1, 20), rng.uniform(-PI, PI, 20))
        np.testing.assert_array_equal(e_step(m, ds), np.ones((20, 1)))

    def test_equidistant_split(self):
        # components sit at 4pi - 3pi = pi and 4pi - 5pi = -pi; theta = 0 is halfway
        m = ParametricAgmm(Basis(0), [4 * PI], 0.7, [0.5, 0.5])
        psi = e_step(m, Dataset([0.0], [0.0]))
        np.testing.assert_allclose(psi, [[0.5, 0.5]], atol=1e-12)

    def test_rows_on_simplex(self, rng):
        m = ParametricAgmm(Basis(2), [3.0, 5.0, -2.0], 0.05, [0.2, 0.5, 0.3])
        ds = Dataset(rng.uniform(-1, 1, 50), rng.uniform(-PI, PI, 50))
        psi = e_step(m, ds)
        assert np.all(psi >= 0) and np.all(psi <= 1)
        np.testing.assert_allclose(psi.sum(axis=1), 1.0, atol=1e-12)


class TestMStep:
    def test_degree_zero_collapse(self, rng):
        th = rng.uniform(-PI, PI, 25)
        ds = Dataset(rng.uniform(-1, 1, 25), th)
        m = m_step(ds, np.ones((25, 1)), Basis(0))
        assert m.beta[0] == pytest.approx(np.mean(th + 3 * PI), abs=1e-12)
        assert m.sigma2 == pytest.approx(np.var(th), abs=1e-12)
        np.testing.assert_array_equal(m.r, [1.0])

    def test_noiseless_recovery(self):
        ds, y = make_wrapped_line(60, 9.0, 2.0, seed=3)
        z, _ = true_labels(y)
        m = m_step(ds, hard_responsibilities(z), Basis(1))
        # beta is identified up to the global shift of the labels
        shift = 2 * PI * round((m.beta[0] - 2.0) / (2 * PI))
        np.testing.assert_allclose(m.beta, [2.0 + shift, 9.0], atol=1e-8)
        assert m.sigma2 == 1e-8

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_double_loop_oracle(self, trial):
        rng = np.random.default_rng(100 + trial)
        n, K, d = int(rng.integers(10, 60)), int(rng.integers(1, 5)), int(rng.integers(0, 4))
        x = rng.uniform(-1, 1, n)
        th = rng.uniform(-PI, PI, n)
        psi = random_psi(rng, n, K)
        m = m_step(Dataset(x, th), psi, Basis(d))
        beta, s2, r = m_step_oracle(x.tolist(), th.tolist(), psi.tolist(), d)
        np.testing.assert_allclose(m.beta, beta, rtol=0, atol=1e-8)
        assert m.sigma2 == pytest.approx(s2, abs=1e-10)
        np.testing.assert_allclose(m.r, r, rtol=0, atol=1e-10)

    def test_beta_is_local_maximum(self, rng):
        n, K = 80, 3
        x = rng.uniform(-1, 1, n)
        ds = Dataset(x, rng.uniform(-PI, PI, n))
        psi = random_psi(rng, n, K)
        basis = Basis(2)
        m = m_step(ds, psi, basis)
        phi, tg = basis.design(ds.xs), unwrapped_targets(ds.thetas, K)

        def objective(beta):
            return -np.sum(psi * (tg - (phi @ beta)[:, None]) ** 2)

        base = objective(m.beta)
        for _ in range(20):
            u = rng.standard_normal(basis.q)
            u /= np.linalg.norm(u)
            for s in (1e-4, -1e-4):
                assert objective(m.beta + s * u) <= base

    def test_singular_design(self):
        ds = Dataset([0.5] * 10, np.linspace(-3, 3, 10))
        with pytest.raises(SingularDesignError):
            m_step(ds, np.ones((10, 1)), Basis(2))

    def test_rejects_bad_psi(self, rng):
        ds = Dataset(rng.uniform(-1, 1, 5), rng.uniform(-PI, PI, 5))
        with pytest.raises(InvalidArgumentError):
            m_step(ds, np.full((5, 2), 0.7), Basis(1))


class TestFitEm:
    @given(st.integers(20, 120), st.integers(1, 4), st.integers(0, 3), st.integers(0, 10**6))
    def test_monotone(self, n, K, d, seed):
        ds, _ = make_wrapped_line(n, 10.0, 1.0, noise=0.5, seed=seed)
        rng = np.random.default_rng(seed)
        init = soft_init(ds, rng.integers(1, K + 1, n), K, Basis(d))
        _, rep = fit_em(ds, K, Basis(d), init, tol=1e-10, max_iter=60)
        assert np.all(np.diff(rep.loglik_trace) >= -1e-8)

    def test_fixed_point_converges_fast(self):
        ds, y = make_wrapped_line(50, 7.0, 0.3, seed=1)
        z, _ = true_labels(y)
        K = int(z.max())
        init = m_step(ds, hard_responsibilities(z, K), Basis(1))
        _, rep = fit_em(ds, K, Basis(1), init)
        assert rep.converged and rep.iterations <= 2

    def test_fixed_point_of_e_and_m(self):
        ds, _ = make_wrapped_line(150, 8.0, 0.0, noise=0.4, seed=2)
        z = initial_labels(ds)
        K = int(z.max())
        m, rep = fit_em(ds, K, Basis(1), soft_init(ds, z, K, Basis(1)), tol=1e-13, max_iter=2000)
        psi = e_step(m, ds)
        np.testing.assert_allclose(e_step(m_step(ds, psi, Basis(1)), ds), psi, atol=1e-8)

    def test_report_contents(self):
        ds, _ = make_wrapped_line(40, 5.0, 0.0, noise=0.2, seed=4)
        init = soft_init(ds, quantile_split(ds, 2), 2, Basis(1))
        _, rep = fit_em(ds, 2, Basis(1), init)
        assert rep.iterations == len(rep.loglik_trace) - 1
        assert rep.bic == pytest.approx(-2 * rep.loglik + math.log(40) * (2 + 2))

    def test_max_iter_reports_not_converged(self):
        ds, _ = make_wrapped_line(60, 12.0, 0.0, noise=0.5, seed=5)
        init = soft_init(ds, quantile_split(ds, 3), 3, Basis(1))
        _, rep = fit_em(ds, 3, Basis(1), init, tol=1e-300, max_iter=3)
        assert not rep.converged and rep.iterations == 3

    def test_argument_checks(self):
        ds, _ = make_wrapped_line(20, 1.0, 0.0, seed=0)
        init = soft_init(ds, np.ones(20, int), 1, Basis(1))
        with pytest.raises(InvalidArgumentError):
            fit_em(ds, 2, Basis(1), init)
        with pytest.raises(InvalidArgumentError):
            fit_em(ds, 1, Basis(1), init, tol=0)


class TestInitHelpers:
    def test_quantile_split(self):
        ds = Dataset(np.zeros(6), [0.3, -1, 2, -3, 1, 0])
        np.testing.assert_array_equal(quantile_split(ds, 3), [2, 1, 3, 1, 3, 2])

    def test_candidate_labels(self):
        ds = Dataset(np.zeros(4), [0.0, 1, 2, 3])
        z = np.array([1, 1, 2, 2])
        assert [n for n, _ in candidate_labels(ds, 2, z)] == ["cluster"]
        assert [n for n, _ in candidate_labels(ds, 3, z)] == ["quantile", "cluster+0", "cluster+1"]
        assert [n for n, _ in candidate_labels(ds, 1, z)] == ["quantile"]
        assert [n for n, _ in candidate_labels(ds, 2, None)] == ["quantile"]

    def test_soft_init_floors_weights(self):
        ds = Dataset(np.linspace(-1, 1, 10), np.linspace(-3, 3, 10))
        m = soft_init(ds, np.ones(10, int), 3, Basis(1))
        assert np.all(m.r >= 1e-3 / (1 + 2e-3) - 1e-15)
        assert m.r.sum() == pytest.approx(1.0, abs=1e-12)

    def test_posterior_labels_normalised(self):
        ds, y = make_wrapped_line(40, 9.0, 0.0, noise=0.05, seed=6)
        z, _ = true_labels(y)
        m = m_step(ds, hard_responsibilities(z), Basis(1))
        zz = posterior_labels(m, ds)
        assert zz.min() == 1
        np.testing.assert_array_equal(zz, z)


class TestSelection:
    def test_single_piece_selects_one(self):
        for seed in range(3):
            ds, _ = make_wrapped_line(100, 1.0, PI, noise=0.3, seed=seed)
            best, _ = select_K(ds, Basis(1), range(1, 5))
            assert best == 1

    def test_singleton_range(self):
        ds, _ = make_wrapped_line(60, 9.0, 0.0, noise=0.3, seed=0)
        best, fits = select_K(ds, Basis(1), [2])
        assert best == 2 and list(fits) == [2]

    def test_order_invariant(self):
        ds, _ = make_wrapped_line(80, 12.0, 0.0, noise=0.3, seed=7)
        z = initial_labels(ds)
        a, fa = select_K(ds, Basis(1), [1, 2, 3, 4], z)
        b, fb = select_K(ds, Basis(1), [4, 2, 3, 1], z)
        assert a == b
        for k in fa:
            assert fa[k][1].bic == fb[k][1].bic

    def test_select_model_table(self):
        ds, _ = make_wrapped_line(120, 12.0, 0.5, noise=0.3, seed=8)
        m, rep = select_model(ds, [1, 2], [1, 2, 3])
        assert set(rep.extra["bic_table"]) == {f"{d},{k}" for d in (1, 2) for k in (1, 2, 3)}
        assert rep.bic == min(rep.extra["bic_table"].values())
        assert rep.extra["degree"] == m.basis.degree
        assert set(rep.extra["bic_per_K"]) == {"1", "2", "3"}

    def test_bic_per_K(self):
        assert bic_per_K({"1,2": 5.0, "2,2": 3.0, "1,1": 9.0}) == {"2": 3.0, "1": 9.0}

    def test_fit_best_prefers_highest_likelihood(self):
        ds, _ = make_wrapped_line(100, 12.0, 0.0, noise=0.3, seed=9)
        z = initial_labels(ds)
        m, rep = fit_best(ds, int(z.max()) + 1, Basis(1), z)
        assert rep.extra["init"] in {"quantile", "cluster+0", "cluster+1"}
