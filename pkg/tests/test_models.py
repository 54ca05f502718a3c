"""Score models: finite-difference oracles, closed-form cross-checks, validation."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from steinperturb import (GaussianMixtureParams, InputError, RBMParams,
                          SensorPosteriorParams, TBananaMixtureParams,
                          bimodal_gaussian_1d, gaussian_mixture_model,
                          model_from_spec, rbm_enumerated_mixture, rbm_model,
                          rbm_multimodal_params, sensor_posterior_model,
                          synthetic_sensor_data, t_banana_model)


def fd_score(model, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (model.log_density_unnorm(x + e) - model.log_density_unnorm(x - e)) / (2 * h)
    return g


def check_score_fd(model, points, rtol=1e-5, atol=1e-7, h=1e-5):
    for x in points:
        np.testing.assert_allclose(model.score(x), fd_score(model, x, h=h),
                                   rtol=rtol, atol=atol)


def _rand_spd(rng, d):
    A = rng.normal(size=(d, d))
    return A @ A.T + d * np.eye(d)


# ---------------------------------------------------------------------------
# Gaussian mixture


def test_gaussian_mixture_score_fd():
    rng = np.random.default_rng(0)
    d, M = 3, 4
    covs = np.stack([_rand_spd(rng, d) for _ in range(M)])
    w = rng.dirichlet(np.ones(M))
    params = GaussianMixtureParams(weights=w, means=rng.normal(0, 3, (M, d)),
                                   covariances=covs)
    model = gaussian_mixture_model(params)
    check_score_fd(model, rng.normal(0, 3, (200, d)))


def test_gaussian_mixture_logp_matches_scipy():
    rng = np.random.default_rng(1)
    d, M = 2, 3
    covs = np.stack([_rand_spd(rng, d) for _ in range(M)])
    means = rng.normal(0, 2, (M, d))
    w = rng.dirichlet(np.ones(M))
    params = GaussianMixtureParams(weights=w, means=means, covariances=covs)
    model = gaussian_mixture_model(params)
    X = rng.normal(0, 2, (50, d))
    dens = sum(wm * multivariate_normal(mm, cm).pdf(X)
               for wm, mm, cm in zip(w, means, covs))
    # model log density is unnormalised: differences must match exactly
    expect = np.log(dens)
    got = model.log_density_unnorm(X)
    np.testing.assert_allclose(got - got[0], expect - expect[0], rtol=0, atol=1e-9)


def test_bimodal_1d_symmetry():
    model = bimodal_gaussian_1d(6.0)
    x = np.linspace(-3, 9, 25)[:, None]
    lp = model.log_density_unnorm(x)
    np.testing.assert_allclose(lp, lp[::-1], atol=1e-10)  # symmetric about 3
    assert model.score(np.array([3.0])) == pytest.approx(0.0, abs=1e-12)


def test_mixture_validation():
    with pytest.raises(InputError):
        GaussianMixtureParams(weights=[0.5, 0.6], means=[[0.0], [1.0]])
    with pytest.raises(InputError):
        GaussianMixtureParams(weights=[-0.5, 1.5], means=[[0.0], [1.0]])
    with pytest.raises(InputError):
        GaussianMixtureParams(weights=[1.0], means=[[0.0], [1.0]])
    with pytest.raises(InputError):
        GaussianMixtureParams(weights=[1.0], means=[[0.0]],
                              covariances=[[[-1.0]]])


def test_batch_and_single_agree():
    model = bimodal_gaussian_1d(4.0)
    X = np.array([[0.5], [2.0], [3.7]])
    lp = model.log_density_unnorm(X)
    for i, x in enumerate(X):
        assert model.log_density_unnorm(x) == pytest.approx(lp[i], rel=1e-14)
    with pytest.raises(InputError):
        model.log_density_unnorm(np.zeros(2))


# ---------------------------------------------------------------------------
# t / banana mixture


def _tbanana_params(rng, d=4, num_t=2, num_banana=2):
    M = num_t + num_banana
    return TBananaMixtureParams(num_t=num_t, num_banana=num_banana,
                                centers=rng.normal(0, 5, (M, d)),
                                weights=rng.dirichlet(np.ones(M)))


def test_t_banana_score_fd():
    rng = np.random.default_rng(2)
    model = t_banana_model(_tbanana_params(rng))
    check_score_fd(model, rng.normal(0, 4, (200, 4)), rtol=1e-5, atol=1e-8)


def test_banana_b_zero_reduces_to_t():
    rng = np.random.default_rng(3)
    center = rng.normal(0, 2, 3)
    sheared = TBananaMixtureParams(num_t=0, num_banana=1, centers=[center],
                                   weights=[1.0], banana_b=0.0)
    plain = TBananaMixtureParams(num_t=0, num_banana=1, centers=[center],
                                 weights=[1.0])  # b = 0.003 reference shape
    m0 = t_banana_model(sheared)
    # with b = 0 the banana is an elliptic t with shape diag(100, 1, 1)
    X = rng.normal(0, 5, (40, 3))
    nu, dd = 7.0, 3
    diff = X - center
    inv_diag = np.array([0.01, 1.0, 1.0])
    maha = np.sum(diff**2 * inv_diag, axis=1)
    expect = -0.5 * (nu + dd) * np.log1p(maha / nu)
    got = m0.log_density_unnorm(X)
    np.testing.assert_allclose(got - got[0], expect - expect[0], atol=1e-10)
    del plain


def test_t_component_matches_scipy():
    pytest.importorskip("scipy.stats", reason="needs multivariate_t")
    from scipy.stats import multivariate_t

    rng = np.random.default_rng(4)
    d = 3
    center = rng.normal(size=d)
    params = TBananaMixtureParams(num_t=1, num_banana=0, centers=[center],
                                  weights=[1.0], t_scale=0.7)
    model = t_banana_model(params)
    X = rng.normal(0, 2, (30, d))
    expect = multivariate_t(loc=center, shape=0.7 * np.eye(d), df=7).logpdf(X)
    got = model.log_density_unnorm(X)
    np.testing.assert_allclose(got - got[0], expect - expect[0], atol=1e-9)


def test_t_banana_validation():
    with pytest.raises(InputError):
        TBananaMixtureParams(num_t=0, num_banana=1, centers=[[0.0]], weights=[1.0])
    with pytest.raises(InputError):
        TBananaMixtureParams(num_t=1, num_banana=0, centers=[[0.0, 0.0]],
                             weights=[1.0], dof=1.5)


# ---------------------------------------------------------------------------
# sensor posterior


def test_sensor_score_fd():
    params = synthetic_sensor_data(seed=11)
    model = sensor_posterior_model(params)
    rng = np.random.default_rng(12)
    # larger FD step: obs_sd = 0.02 makes the likelihood stiff
    check_score_fd(model, rng.uniform(-0.5, 1.5, (200, 8)), rtol=2e-4, atol=1e-4)


def test_sensor_coincidence_is_finite():
    # coincidence on an observed (w = 1) pair: the unit-vector convention
    # must keep the score finite (a w = 0 pair at distance zero has density
    # zero, so only detected pairs are placed on top of each other here)
    params = synthetic_sensor_data(seed=11)
    model = sensor_posterior_model(params)
    obs = [(i, j) for i in range(4) for j in range(i + 1, 4) if params.w[i, j] == 1]
    assert obs, "seed must produce at least one observed unknown-unknown pair"
    i, j = obs[0]
    x = np.arange(8, dtype=float) / 3.0
    x[2 * j:2 * j + 2] = x[2 * i:2 * i + 2]
    assert np.isfinite(model.log_density_unnorm(x))
    assert np.all(np.isfinite(model.score(x)))


def test_sensor_validation():
    good = synthetic_sensor_data(seed=11)
    w = good.w.copy()
    w[0, 1] = 1 - w[0, 1]  # break symmetry
    with pytest.raises(InputError):
        SensorPosteriorParams(known_sensor_locations=good.known_sensor_locations,
                              w=w, y=good.y)


# ---------------------------------------------------------------------------
# RBM marginal


def test_rbm_score_fd():
    rng = np.random.default_rng(13)
    params = RBMParams(B=rng.normal(size=(5, 3)), b=rng.normal(size=5),
                       c=rng.normal(size=3))
    model = rbm_model(params)
    check_score_fd(model, rng.normal(0, 3, (200, 5)), rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("d_h", [1, 2, 4])
def test_rbm_closed_form_matches_enumeration(d_h):
    rng = np.random.default_rng([14, d_h])
    d = 4
    params = RBMParams(B=rng.normal(size=(d, d_h)), b=rng.normal(size=d),
                       c=rng.normal(size=d_h))
    closed = rbm_model(params)
    mix = gaussian_mixture_model(rbm_enumerated_mixture(params))
    X = rng.normal(0, 2, (60, d))
    lp_c = closed.log_density_unnorm(X)
    lp_m = mix.log_density_unnorm(X)
    np.testing.assert_allclose(lp_c - lp_c[0], lp_m - lp_m[0], atol=1e-8)
    np.testing.assert_allclose(closed.score(X), mix.score(X), atol=1e-8)


def test_rbm_multimodal_preset_modes():
    params = rbm_multimodal_params(d=4, d_h=2, lam=6.0)
    mix = rbm_enumerated_mixture(params)
    # means are 3 * E h: (+-3, +-3, 0, 0), equal weights when c = 0
    assert sorted(map(tuple, mix.means.tolist())) == sorted(
        [(s1 * 3.0, s2 * 3.0, 0.0, 0.0) for s1 in (-1, 1) for s2 in (-1, 1)])
    np.testing.assert_allclose(mix.weights, 0.25)


def test_rbm_validation():
    with pytest.raises(InputError):
        RBMParams(B=np.ones((3, 2)), b=np.zeros(4), c=np.zeros(2))
    with pytest.raises(InputError):
        rbm_enumerated_mixture(RBMParams(B=np.ones((2, 13)), b=np.zeros(2),
                                         c=np.zeros(13)))


# ---------------------------------------------------------------------------
# spec loading


def test_model_from_spec_roundtrip():
    params, model = model_from_spec({
        "model": "gaussian_mixture",
        "params": {"weights": [0.5, 0.5], "means": [[0.0], [6.0]]},
    })
    assert model.dim == 1
    ref = bimodal_gaussian_1d(6.0)
    x = np.array([1.3])
    assert model.log_density_unnorm(x) == pytest.approx(ref.log_density_unnorm(x))


def test_model_from_spec_errors():
    with pytest.raises(InputError):
        model_from_spec({"model": "unknown", "params": {}})
    with pytest.raises(InputError):
        model_from_spec({"params": {}})
    with pytest.raises(InputError):
        model_from_spec({"model": "rbm", "params": {"bogus": 1}})
