"""Score-model abstraction and built-in target distributions.

A :class:`ScoreModel` bundles an unnormalised log-density and its analytic
gradient (the score). Built-in targets: Gaussian mixtures, mixtures of
multivariate-t and banana-shaped distributions, a sensor-localisation
posterior, and the Gaussian-Bernoulli RBM marginal.

All callables accept either a single vector of shape ``(d,)`` or a batch
``(n, d)``; batched input returns arrays of shape ``(n,)`` / ``(n, d)``.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .exceptions import InputError


@dataclass(frozen=True)
class ScoreModel:
    """A target distribution exposing log p* (normalizer-free) and its score."""

    dim: int
    log_density_unnorm: Callable
    score: Callable


def _batchify(dim, logp_2d, score_2d):
    """Wrap 2D-array implementations so callers may pass single vectors."""

    def logp(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != dim:
            raise InputError(f"expected points of dimension {dim}, got {x2.shape[1]}")
        out = logp_2d(x2)
        return float(out[0]) if single else out

    def score(x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != dim:
            raise InputError(f"expected points of dimension {dim}, got {x2.shape[1]}")
        out = score_2d(x2)
        return out[0] if single else out

    return logp, score


# ---------------------------------------------------------------------------
# Gaussian mixtures


@dataclass(frozen=True)
class GaussianMixtureParams:
    """Mixing weights, component means and (optional) covariances."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray | None = None  # (M, d, d); identity when None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("mixture weights must be a probability simplex")
        if w.shape[0] != mu.shape[0]:
            raise InputError("weights and means must have the same length")
        if self.covariances is not None:
            cov = np.asarray(self.covariances, dtype=float)
            object.__setattr__(self, "covariances", cov)
            if cov.shape != (mu.shape[0], mu.shape[1], mu.shape[1]):
                raise InputError("covariances must have shape (M, d, d)")
            for c in cov:
                if not np.allclose(c, c.T, atol=1e-10):
                    raise InputError("covariance matrices must be symmetric")
                if np.linalg.eigvalsh(c).min() <= 0:
                    raise InputError("covariance matrices must be positive definite")

    @property
    def dim(self):
        return self.means.shape[1]


def gaussian_mixture_model(params: GaussianMixtureParams) -> ScoreModel:
    """Mixture of Gaussians with responsibility-weighted analytic score."""
    w = params.weights
    mu = params.means
    d = params.dim
    logw = np.log(np.maximum(w, 1e-300))

    identity_cov = params.covariances is None
    if identity_cov:
        prec = None
        logdet = np.zeros(len(w))
    else:
        prec = np.linalg.inv(params.covariances)
        _, logdet = np.linalg.slogdet(params.covariances)

    def comp_logpdf(x2):
        # (n, M) unnormalised-in-common-constant component log densities
        diff = x2[:, None, :] - mu[None, :, :]  # (n, M, d)
        if identity_cov:
            maha = np.einsum("nmi,nmi->nm", diff, diff)
        else:
            maha = np.einsum("nmi,mij,nmj->nm", diff, prec, diff)
        return -0.5 * maha - 0.5 * logdet[None, :]

    def logp_2d(x2):
        return logsumexp(comp_logpdf(x2) + logw[None, :], axis=1)

    def score_2d(x2):
        lp = comp_logpdf(x2) + logw[None, :]
        resp = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))  # (n, M)
        diff = mu[None, :, :] - x2[:, None, :]  # (n, M, d)
        if identity_cov:
            comp_scores = diff
        else:
            comp_scores = np.einsum("mij,nmj->nmi", prec, diff)
        return np.einsum("nm,nmi->ni", resp, comp_scores)

    logp, score = _batchify(d, logp_2d, score_2d)
    return ScoreModel(dim=d, log_density_unnorm=logp, score=score)


def bimodal_gaussian_1d(delta: float, pi: float = 0.5) -> ScoreModel:
    """Two-component 1D Gaussian mixture with unit variances and modes 0, delta."""
    params = GaussianMixtureParams(weights=[pi, 1.0 - pi], means=[[0.0], [delta]])
    return gaussian_mixture_model(params)


# ---------------------------------------------------------------------------
# Mixture of multivariate-t and banana-shaped distributions


@dataclass(frozen=True)
class TBananaMixtureParams:
    """Mixture of t components and banana components (t density after a shear)."""

    num_t: int
    num_banana: int
    centers: np.ndarray  # (num_t + num_banana, d)
    weights: np.ndarray
    dof: float = 7.0
    t_scale: float | None = None  # scalar shape I_d multiplier; 0.1 * sqrt(d) when None
    banana_b: float = 0.003
    banana_first_axis_scale: float = 100.0  # shape matrix diag(100, 1, ..., 1)

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", w)
        if centers.shape[0] != self.num_t + self.num_banana:
            raise InputError("need one center per mixture component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("mixture weights must be a probability simplex")
        if self.dof <= 2:
            raise InputError("degrees of freedom must exceed 2")
        if self.num_banana > 0 and centers.shape[1] < 2:
            raise InputError("banana components require dimension >= 2")
        if self.t_scale is None:
            object.__setattr__(self, "t_scale", 0.1 * np.sqrt(centers.shape[1]))

    @property
    def dim(self):
        return self.centers.shape[1]


def _shear(x2, b):
    """phi_b(x) = (x1, x2 + b x1^2 - 100 b, x3, ...)."""
    z = x2.copy()
    z[:, 1] = z[:, 1] + b * z[:, 0] ** 2 - 100.0 * b
    return z


def _shear_inv(z2, b):
    x = z2.copy()
    x[:, 1] = x[:, 1] - b * x[:, 0] ** 2 + 100.0 * b
    return x


def t_banana_model(params: TBananaMixtureParams) -> ScoreModel:
    """Mixture of elliptic t and sheared-t (banana) components.

    The banana density is the t density composed with the unit-Jacobian
    shear phi_b; its score follows by the chain rule.
    """
    d = params.dim
    nu = params.dof
    b = params.banana_b
    centers = params.centers
    logw = np.log(np.maximum(params.weights, 1e-300))

    # inverse shape diagonals and log-dets per component
    inv_diag = np.empty((len(centers), d))
    logdets = np.empty(len(centers))
    inv_diag[: params.num_t] = 1.0 / params.t_scale
    logdets[: params.num_t] = d * np.log(params.t_scale)
    if params.num_banana:
        bd = np.ones(d)
        bd[0] = params.banana_first_axis_scale
        inv_diag[params.num_t :] = 1.0 / bd
        logdets[params.num_t :] = np.sum(np.log(bd))

    def comp_terms(x2):
        """Per-component log density and score, handling the banana shear."""
        n = x2.shape[0]
        lps = np.empty((n, len(centers)))
        scores = np.empty((n, len(centers), d))
        for m, mu in enumerate(centers):
            banana = m >= params.num_t
            z = _shear(x2, b) if banana else x2
            diff = z - mu[None, :]
            maha = np.sum(diff**2 * inv_diag[m][None, :], axis=1)
            lps[:, m] = -0.5 * (nu + d) * np.log1p(maha / nu) - 0.5 * logdets[m]
            s = -(nu + d) / (nu + maha)[:, None] * (diff * inv_diag[m][None, :])
            if banana:
                # chain rule through the shear: dz2/dx1 = 2 b x1
                s = s.copy()
                s[:, 0] += 2.0 * b * x2[:, 0] * s[:, 1]
            scores[:, m, :] = s
        return lps, scores

    def logp_2d(x2):
        lps, _ = comp_terms(x2)
        return logsumexp(lps + logw[None, :], axis=1)

    def score_2d(x2):
        lps, scores = comp_terms(x2)
        lp = lps + logw[None, :]
        resp = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
        return np.einsum("nm,nmi->ni", resp, scores)

    logp, score = _batchify(d, logp_2d, score_2d)
    return ScoreModel(dim=d, log_density_unnorm=logp, score=score)


# ---------------------------------------------------------------------------
# Sensor network localisation posterior


@dataclass(frozen=True)
class SensorPosteriorParams:
    """Posterior over four unknown 2D sensors given noisy pairwise distances.

    ``w`` is the 6x6 binary observation-indicator matrix over all sensors
    (last two known), and ``y`` holds the observed distances where w = 1.
    """

    known_sensor_locations: np.ndarray  # (2, 2)
    w: np.ndarray  # (6, 6) binary, symmetric, zero diagonal
    y: np.ndarray  # (6, 6) distances, used where w = 1
    prior_sd: float = 10.0
    obs_sd: float = 0.02
    detect_sd: float = 0.3

    def __post_init__(self):
        known = np.asarray(self.known_sensor_locations, dtype=float)
        w = np.asarray(self.w, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "known_sensor_locations", known)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "y", y)
        if known.shape != (2, 2):
            raise InputError("expected exactly two known sensor locations in R^2")
        if w.shape != (6, 6) or not np.array_equal(w, w.T) or np.any(np.diag(w) != 0):
            raise InputError("w must be a 6x6 symmetric binary matrix with zero diagonal")
        if y.shape != (6, 6):
            raise InputError("y must be a 6x6 matrix")
        if np.any((w == 1) & ~np.isfinite(y)):
            raise InputError("y must be finite wherever w = 1")


def sensor_posterior_model(params: SensorPosteriorParams) -> ScoreModel:
    """8-dimensional posterior for the four unknown sensors.

    The distance-gradient term is set to zero at exact sensor coincidence,
    which avoids NaN propagation at a measure-zero configuration.
    """
    d = 8
    w = params.w
    y = params.y
    known = params.known_sensor_locations
    two_obs = 2.0 * params.obs_sd**2
    two_det = 2.0 * params.detect_sd**2
    prior_var = params.prior_sd**2

    pairs = [(i, j) for i in range(6) for j in range(i + 1, 6) if i < 4 or j < 4]

    def positions(x2):
        n = x2.shape[0]
        pos = np.empty((n, 6, 2))
        pos[:, :4, :] = x2.reshape(n, 4, 2)
        pos[:, 4:, :] = known[None, :, :]
        return pos

    def logp_and_score(x2, want_score):
        n = x2.shape[0]
        pos = positions(x2)
        logp = -np.sum(x2**2, axis=1) / (2.0 * prior_var)
        grad = -x2 / prior_var if want_score else None
        grad3 = grad.reshape(n, 4, 2) if want_score else None
        for i, j in pairs:
            diff = pos[:, i, :] - pos[:, j, :]  # (n, 2)
            r2 = np.sum(diff**2, axis=1)
            r = np.sqrt(r2)
            if w[i, j] == 1:
                logp += -((y[i, j] - r) ** 2) / two_obs - r2 / two_det
                if want_score:
                    # d/dxi of -(y-r)^2/two_obs is 2(y-r)/two_obs * dr/dxi
                    with np.errstate(invalid="ignore", divide="ignore"):
                        unit = np.where(r[:, None] > 0, diff / np.maximum(r, 1e-300)[:, None], 0.0)
                    g = (2.0 * (y[i, j] - r) / two_obs)[:, None] * unit - (2.0 / two_det) * diff
            else:
                e = np.exp(-r2 / two_det)
                e = np.minimum(e, 1.0 - 1e-300)
                logp += np.log1p(-e)
                if want_score:
                    g = (e / (1.0 - e) / two_det * 2.0)[:, None] * diff
            if want_score:
                if i < 4:
                    grad3[:, i, :] += g
                if j < 4:
                    grad3[:, j, :] -= g
        return logp, (grad if want_score else None)

    def logp_2d(x2):
        return logp_and_score(x2, want_score=False)[0]

    def score_2d(x2):
        return logp_and_score(x2, want_score=True)[1]

    logp, score = _batchify(d, logp_2d, score_2d)
    return ScoreModel(dim=d, log_density_unnorm=logp, score=score)


def synthetic_sensor_data(seed: int) -> SensorPosteriorParams:
    """Generate a sensor dataset from known positions (for tests and demos)."""
    rng = np.random.default_rng(seed)
    truth = rng.uniform(0.0, 1.0, size=(6, 2))
    known = truth[4:]
    obs_sd = 0.02
    detect_sd = 0.3
    w = np.zeros((6, 6))
    y = np.zeros((6, 6))
    for i in range(6):
        for j in range(i + 1, 6):
            r = np.linalg.norm(truth[i] - truth[j])
            if rng.uniform() < np.exp(-(r**2) / (2 * detect_sd**2)):
                w[i, j] = w[j, i] = 1
                dist = r + obs_sd * rng.standard_normal()
                y[i, j] = y[j, i] = abs(dist)
    return SensorPosteriorParams(known_sensor_locations=known, w=w, y=y)


# ---------------------------------------------------------------------------
# Gaussian-Bernoulli RBM marginal


@dataclass(frozen=True)
class RBMParams:
    """Weights B (d x d_h), visible bias b (d,), latent bias c (d_h,)."""

    B: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        if B.shape[0] != b.shape[0] or B.shape[1] != c.shape[0]:
            raise InputError("inconsistent RBM parameter dimensions")

    @property
    def dim(self):
        return self.B.shape[0]

    @property
    def dim_hidden(self):
        return self.B.shape[1]


def rbm_multimodal_params(d: int, d_h: int, lam: float = 6.0, c=None) -> RBMParams:
    """The well-separated-modes preset: B = lam * E, b = 0."""
    e = np.eye(max(d, d_h))[:d, :d_h]
    c = np.zeros(d_h) if c is None else np.asarray(c, dtype=float)
    return RBMParams(B=lam * e, b=np.zeros(d), c=c)


def rbm_model(params: RBMParams) -> ScoreModel:
    """Closed-form marginal of the Gaussian-Bernoulli RBM.

    Marginalising the sign-valued latents gives
    ``log p*(x) = -||x||^2/2 + b.x + sum_j log(2 cosh((B^T x)_j / 2 + c_j))``
    and ``score(x) = b - x + B tanh(B^T x / 2 + c) / 2``.
    """
    B = params.B
    b = params.b
    c = params.c
    d = params.dim

    def logp_2d(x2):
        a = 0.5 * x2 @ B + c[None, :]
        # log(2 cosh a) = |a| + log(1 + exp(-2|a|)), overflow-free
        log2cosh = np.abs(a) + np.log1p(np.exp(-2.0 * np.abs(a)))
        return -0.5 * np.sum(x2**2, axis=1) + x2 @ b + np.sum(log2cosh, axis=1)

    def score_2d(x2):
        a = 0.5 * x2 @ B + c[None, :]
        return b[None, :] - x2 + 0.5 * np.tanh(a) @ B.T

    logp, score = _batchify(d, logp_2d, score_2d)
    return ScoreModel(dim=d, log_density_unnorm=logp, score=score)


def rbm_enumerated_mixture(params: RBMParams) -> GaussianMixtureParams:
    """Explicit Gaussian-mixture form of the RBM marginal (small d_h only)."""
    d_h = params.dim_hidden
    if d_h > 12:
        raise InputError("latent enumeration is limited to d_h <= 12")
    hs = np.array([[1 if (i >> j) & 1 else -1 for j in range(d_h)] for i in range(2**d_h)], dtype=float)
    means = 0.5 * hs @ params.B.T + params.b[None, :]
    logits = 0.5 * np.sum(means**2, axis=1) + hs @ params.c
    wts = np.exp(logits - logsumexp(logits))
    wts = wts / wts.sum()
    return GaussianMixtureParams(weights=wts, means=means)


# ---------------------------------------------------------------------------
# JSON model specification

MODEL_BUILDERS = {
    "gaussian_mixture": (GaussianMixtureParams, gaussian_mixture_model),
    "t_banana": (TBananaMixtureParams, t_banana_model),
    "sensor": (SensorPosteriorParams, sensor_posterior_model),
    "rbm": (RBMParams, rbm_model),
}


def model_from_spec(spec: dict):
    """Build (params, ScoreModel) from {"model": name, "params": {...}}."""
    if not isinstance(spec, dict) or "model" not in spec or "params" not in spec:
        raise InputError('model spec must be {"model": ..., "params": {...}}')
    name = spec["model"]
    if name not in MODEL_BUILDERS:
        raise InputError(f"unknown model {name!r}; expected one of {sorted(MODEL_BUILDERS)}")
    params_cls, builder = MODEL_BUILDERS[name]
    try:
        params = params_cls(**spec["params"])
    except TypeError as exc:
        raise InputError(f"bad parameters for model {name!r}: {exc}") from exc
    return params, builder(params)
