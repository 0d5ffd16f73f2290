import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spacescore.core import Dataset, SearchSpace, make_rng
from spacescore.errors import (
    DegenerateCovarianceError,
    DegenerateTargetsWarning,
    InsufficientDataError,
)
from spacescore.gp import (
    FitConfig,
    JointPosterior,
    KernelParams,
    condition,
    fit,
    jittered_cholesky,
    joint_posterior,
    kernel_eval,
    kernel_matrix,
    log_marginal_likelihood,
    sample_posterior,
)
from spacescore.bench.objectives import make_objective

UNIT = SearchSpace.box([0.0], [1.0])


def random_params(rng, d):
    return KernelParams(
        float(np.exp(rng.normal(0, 0.5))),
        np.exp(rng.normal(0, 0.7, size=d)),
        float(np.exp(rng.uniform(np.log(1e-3), np.log(0.5)))),
    )


def fd_gradient(params, x, y, h=1e-6):
    u0 = params.to_unconstrained()
    out = np.empty_like(u0)
    for i in range(len(u0)):
        up, dn = u0.copy(), u0.copy()
        up[i] += h
        dn[i] -= h
        fp = log_marginal_likelihood(KernelParams.from_unconstrained(up), x, y)[0]
        fm = log_marginal_likelihood(KernelParams.from_unconstrained(dn), x, y)[0]
        out[i] = (fp - fm) / (2 * h)
    return out


def gradient_matches(params, x, y, rtol=1e-4):
    analytic = log_marginal_likelihood(params, x, y)[1]
    numeric = fd_gradient(params, x, y)
    scale = np.maximum(np.abs(numeric), 1e-3)
    return bool(np.all(np.abs(analytic - numeric) <= rtol * scale)), analytic, numeric


class TestKernel:
    def test_zero_distance(self):
        p = KernelParams(1.7, np.array([2.0, 0.5]), 0.1)
        assert kernel_eval(p, [0.3, 0.4], [0.3, 0.4]) == pytest.approx(1.7**2, rel=1e-14)

    def test_unit_distance_closed_form(self):
        p = KernelParams(1.0, np.array([1.0]), 0.1)
        expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
        assert kernel_eval(p, [0.0], [1.0]) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.52399, abs=1e-5)

    @given(st.integers(0, 10**6))
    def test_symmetry(self, seed):
        rng = make_rng(seed)
        p = random_params(rng, 3)
        a, b = rng.random(3), rng.random(3)
        assert kernel_eval(p, a, b) == pytest.approx(kernel_eval(p, b, a), rel=1e-13)

    @given(st.integers(0, 10**6))
    def test_gram_is_psd(self, seed):
        rng = make_rng(seed)
        p = random_params(rng, 2)
        x = rng.random((12, 2))
        K = kernel_matrix(p, x, x)
        np.testing.assert_allclose(K, K.T, atol=1e-14)
        jittered_cholesky(K, scale=p.signal_var)

    def test_batch_broadcasting(self):
        p = KernelParams(1.0, np.ones(2), 0.1)
        a = make_rng(0).random((4, 3, 2))
        b = make_rng(1).random((5, 2))
        K = kernel_matrix(p, a, b)
        assert K.shape == (4, 3, 5)
        assert K[2, 1, 3] == pytest.approx(kernel_eval(p, a[2, 1], b[3]), rel=1e-12)


class TestLikelihood:
    def test_single_standardized_point(self):
        p = KernelParams(math.sqrt(0.9), np.ones(1), 0.1)
        value, _ = log_marginal_likelihood(p, [[0.5]], [0.0], with_prior=False)
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-9)

    def test_gradient_matches_finite_differences(self):
        rng = make_rng(7)
        for _ in range(20):
            n, d = rng.integers(1, 9), rng.integers(1, 5)
            ok, a, b = gradient_matches(random_params(rng, d), rng.random((n, d)), rng.normal(size=n))
            assert ok, (a, b)

    def test_unconstrained_noise_prior_gradient(self):
        rng = make_rng(3)
        p = random_params(rng, 2)
        x, y = rng.random((6, 2)), rng.normal(size=6)
        u0 = p.to_unconstrained()
        g = log_marginal_likelihood(p, x, y, noise_prior="unconstrained")[1]
        h = 1e-6
        up, dn = u0.copy(), u0.copy()
        up[-1] += h
        dn[-1] -= h
        f = lambda u: log_marginal_likelihood(  # noqa: E731
            KernelParams.from_unconstrained(u), x, y, noise_prior="unconstrained"
        )[0]
        assert g[-1] == pytest.approx((f(up) - f(dn)) / (2 * h), rel=1e-5)

    def test_insensitive_to_small_jitter(self):
        rng = make_rng(1)
        p = KernelParams(1.0, np.full(2, 3.0), 0.5)
        x, y = rng.random((8, 2)), rng.normal(size=8)
        a = log_marginal_likelihood(p, x, y, jitter=1e-10)[0]
        b = log_marginal_likelihood(p, x, y, jitter=1e-8)[0]
        assert abs(a - b) < 1e-6


def sin_data(n=8):
    x = np.linspace(0, 1, n)[:, None]
    return Dataset(UNIT, x, np.sin(6 * x[:, 0]))


class TestFit:
    def test_interpolates_smooth_function(self):
        model = fit(sin_data())
        post = joint_posterior(model, model.train_x)
        assert np.max(np.abs(post.mean - model.train_y)) < 1e-3

    def test_duplicate_inputs_with_conflicting_targets(self):
        x = np.array([[0.2], [0.2], [0.7], [0.9]])
        model = fit(Dataset(UNIT, x, [0.0, 1.0, 0.5, 0.3]))
        assert model.params.noise_var > 1e-3
        assert np.isfinite(model.fit_info["neg_log_posterior"])

    def test_branin_beats_constant_predictor(self, branin_data):
        model = fit(branin_data, seed=0)
        x, y = model.train_x, model.train_y
        loo = []
        for i in range(len(y)):
            keep = np.arange(len(y)) != i
            sub = Dataset(branin_data.space, branin_data.x[keep], branin_data.y[keep])
            m = condition(sub, model.params, y_mean=model.y_mean, y_std=model.y_std)
            loo.append(joint_posterior(m, x[i : i + 1]).mean[0] - y[i])
        loo_rmse = math.sqrt(np.mean(np.square(loo)))
        const_rmse = math.sqrt(np.mean([(y[i] - np.delete(y, i).mean()) ** 2 for i in range(len(y))]))
        assert loo_rmse < const_rmse

    def test_needs_two_points(self):
        with pytest.raises(InsufficientDataError):
            fit(Dataset(UNIT, [[0.5]], [1.0]))

    def test_constant_targets_are_flagged(self):
        with pytest.warns(DegenerateTargetsWarning):
            model = fit(Dataset(UNIT, [[0.1], [0.5], [0.9]], [2.0, 2.0, 2.0]))
        assert model.degenerate_targets
        assert model.y_std == 1.0

    def test_deterministic(self, branin_data):
        a, b = fit(branin_data, seed=5), fit(branin_data, seed=5)
        assert a.params.to_unconstrained().tobytes() == b.params.to_unconstrained().tobytes()

    def test_cholesky_reconstructs_gram(self, branin_data):
        m = fit(branin_data)
        A = kernel_matrix(m.params, m.train_x, m.train_x) + m.params.noise_var * np.eye(m.n)
        np.testing.assert_allclose(m.chol @ m.chol.T, A + m.jitter * np.eye(m.n), atol=1e-8)

    def test_single_start_config(self):
        model = fit(sin_data(), config=FitConfig(n_restarts=0))
        assert len(model.fit_info["iterations"]) == 1


def noiseless_model():
    data = sin_data(6)
    return condition(data, KernelParams(1.0, np.array([3.0]), 1e-9))


class TestPosterior:
    def test_training_point_interpolation(self):
        m = noiseless_model()
        post = joint_posterior(m, m.train_x[2:3])
        assert abs(post.mean[0] - m.train_y[2]) < 1e-6
        assert post.cov[0, 0] <= 1e-6

    def test_prior_reversion_far_away(self):
        data = Dataset(SearchSpace.box([0.0], [100.0]), [[0.0], [1.0]], [1.0, -1.0])
        m = condition(data, KernelParams(1.3, np.array([1.0]), 0.01))
        post = joint_posterior(m, [[90.0]])
        assert abs(post.mean[0]) < 1e-3
        assert post.cov[0, 0] == pytest.approx(1.3**2, abs=1e-3)

    def test_duplicated_query_is_rank_one(self):
        m = noiseless_model()
        post = joint_posterior(m, [[0.33], [0.33]])
        c = post.cov
        assert abs(c[0, 0] - c[0, 1]) < 1e-8 and abs(c[1, 1] - c[0, 1]) < 1e-8

    @given(st.integers(0, 10**6))
    def test_variance_bounded_by_prior(self, seed):
        rng = make_rng(seed)
        p = random_params(rng, 2)
        space = SearchSpace.box([0, 0], [1, 1])
        data = Dataset(space, rng.random((6, 2)), rng.normal(size=6))
        m = condition(data, p)
        post = joint_posterior(m, rng.random((5, 2)))
        assert np.all(np.diag(post.cov) <= p.signal_var + 1e-8)

    @given(st.integers(0, 10**6))
    def test_more_data_never_increases_variance(self, seed):
        rng = make_rng(seed)
        p = random_params(rng, 2)
        space = SearchSpace.box([0, 0], [1, 1])
        x, y = rng.random((7, 2)), rng.normal(size=7)
        q = rng.random((4, 2))
        small = condition(Dataset(space, x[:6], y[:6]), p, y_mean=0.0, y_std=1.0)
        large = condition(Dataset(space, x, y), p, y_mean=0.0, y_std=1.0)
        v_small = np.diag(joint_posterior(small, q).cov)
        v_large = np.diag(joint_posterior(large, q).cov)
        assert np.all(v_large <= v_small + 1e-9)

    def test_add_noise_flag(self):
        m = noiseless_model()
        a = joint_posterior(m, [[0.5]])
        b = joint_posterior(m, [[0.5]], add_noise=True)
        assert b.cov[0, 0] - a.cov[0, 0] == pytest.approx(m.params.noise_var)


class TestSampling:
    def test_deterministic_posterior(self):
        post = JointPosterior(np.array([0.3, -1.0]), np.zeros((2, 2)))
        s = sample_posterior(post, 50, seed=0)
        np.testing.assert_allclose(s, np.tile([0.3, -1.0], (50, 1)), atol=1e-4)

    def test_standard_normal_moments(self):
        s = sample_posterior(JointPosterior(np.zeros(1), np.ones((1, 1))), 10**6, seed=2)
        assert abs(s.mean()) < 4e-3
        assert s.var() == pytest.approx(1.0, rel=0.01)

    def test_cross_covariance(self):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        n = 10**5
        s = sample_posterior(JointPosterior(np.zeros(2), cov), n, seed=3)
        prod = s[:, 0] * s[:, 1]
        assert abs(prod.mean() - 0.6) < 3 * prod.std() / math.sqrt(n)

    def test_indefinite_covariance_fails(self):
        post = JointPosterior(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(DegenerateCovarianceError):
            sample_posterior(post, 3, seed=0)

    def test_seeded(self):
        post = JointPosterior(np.zeros(3), np.eye(3))
        assert sample_posterior(post, 4, 9).tobytes() == sample_posterior(post, 4, 9).tobytes()


def test_model_dump(tmp_path, branin_data):
    import json

    m = fit(branin_data)
    path = tmp_path / "model.json"
    m.dump(path)
    doc = json.loads(path.read_text())
    assert doc["params"]["amplitude"] == m.params.amplitude
    assert len(doc["train_y_standardized"]) == len(branin_data)


def test_objective_is_not_needed_for_conditioning():
    data = Dataset(UNIT, [[0.1], [0.9]], [0.0, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        condition(data, KernelParams(1.0, np.ones(1), 0.1))
    assert make_objective("sphere")(np.zeros((1, 2)))[0] == 0.0
