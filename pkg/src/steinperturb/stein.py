"""Stein kernel, KSD statistics, multinomial bootstrap, and the KSD test.

The Stein kernel for a target with score s and base kernel k is

    u(x, y) = s(x).k(x,y).s(y) + s(x).grad_y k + grad_x k.s(y)
              + sum_i d^2 k / dx_i dy_i

Its off-diagonal sample mean is the KSD U-statistic; the degenerate null
law is approximated with the multinomial weighted bootstrap.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import kernels
from .exceptions import InputError
from .kernels import KernelSpec
from .models import ScoreModel


def stein_gram(model: ScoreModel, k: KernelSpec, X, scores=None) -> np.ndarray:
    """Full n x n matrix of Stein kernel values u(x_i, x_j), diagonal included."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if d != model.dim:
        raise InputError(f"samples have dimension {d}, model expects {model.dim}")
    S = model.score(X) if scores is None else np.asarray(scores, dtype=float)
    # the Stein kernel is symmetric, so coefficients and the pair terms are
    # evaluated on the condensed i < j distances only
    iu, ju = np.triu_indices(n, k=1)
    r2c = pdist(X, metric="sqeuclidean") if n > 1 else np.zeros(0)
    Kc, gc, crossc = k._coeffs_r2(r2c, d)  # grad_x k = g * (x - y)
    sx = X @ S.T  # sx[i, j] = x_i . s_j
    row = np.einsum("ij,ij->i", X, S)  # x_i . s_i
    ss = S @ S.T
    # u_ij = s_i.s_j K + g * (s_i.(x_j - x_i) + (x_i - x_j).s_j) + cross,
    # and s_i.x_j + x_i.s_j - s_i.x_i - x_j.s_j = sx_ji + sx_ij - row_i - row_j
    upper = ss[iu, ju] * Kc \
        + gc * (sx[ju, iu] + sx[iu, ju] - row[iu] - row[ju]) \
        + crossc
    K0, _, cross0 = k._coeffs_r2(np.zeros(n), d)
    gram = np.empty((n, n))
    gram[iu, ju] = upper
    gram[ju, iu] = upper
    np.fill_diagonal(gram, np.einsum("ij,ij->i", S, S) * K0 + cross0)
    return gram


def stein_kernel_eval(model: ScoreModel, k: KernelSpec, x, y) -> float:
    """Single Stein kernel value u(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] != model.dim:
        raise InputError("x and y must be vectors matching the model dimension")
    sx = model.score(x)
    sy = model.score(y)
    return float(
        (sx @ sy) * kernels.eval(k, x, y)
        + sx @ kernels.grad_y(k, x, y)
        + kernels.grad_x(k, x, y) @ sy
        + kernels.cross_grad_trace(k, x, y)
    )


def ksd_ustat(samples, model: ScoreModel, k: KernelSpec, gram=None) -> float:
    """KSD U-statistic: off-diagonal mean of the Stein gram matrix."""
    if gram is None:
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[0] < 2:
            raise InputError("U-statistic needs at least 2 samples")
        gram = stein_gram(model, k, samples)
    n = gram.shape[0]
    if n < 2:
        raise InputError("U-statistic needs at least 2 samples")
    return float((gram.sum() - np.trace(gram)) / (n * (n - 1)))


def ksd_vstat(samples, model: ScoreModel, k: KernelSpec, gram=None) -> float:
    """KSD V-statistic: full mean of the Stein gram matrix (diagonal included)."""
    if gram is None:
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        gram = stein_gram(model, k, samples)
    n = gram.shape[0]
    return float(gram.sum() / n**2)


def bootstrap_stats(gram, num_bootstrap: int, seed) -> np.ndarray:
    """Multinomial weighted-bootstrap replicates of the U-statistic null law.

    Each replicate is (1/n^2) sum_{i != j} (w_i - 1)(w_j - 1) u_ij with
    w ~ Mult(n; 1/n, ..., 1/n). Deterministic given the seed.
    """
    gram = np.asarray(gram, dtype=float)
    n = gram.shape[0]
    if num_bootstrap < 1:
        raise InputError("need at least one bootstrap replicate")
    if n < 2:
        raise InputError("bootstrap needs a gram matrix from at least 2 points")
    rng = np.random.default_rng(seed)
    off = gram - np.diag(np.diag(gram))
    W = rng.multinomial(n, np.full(n, 1.0 / n), size=num_bootstrap).astype(float)
    V = W - 1.0
    return np.einsum("bi,ij,bj->b", V, off, V, optimize=True) / n**2


@dataclass
class TestResult:
    """Outcome of a bootstrap-calibrated goodness-of-fit test."""

    statistic: float
    bootstrap_quantile: float
    p_value: float
    reject: bool
    alpha: float
    num_bootstrap: int
    seed: int
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "bootstrap_quantile": self.bootstrap_quantile,
            "p_value": self.p_value,
            "reject": bool(self.reject),
            "alpha": self.alpha,
            "num_bootstrap": self.num_bootstrap,
            "seed": self.seed,
            "extras": self.extras,
        }


def _test_from_gram(gram, alpha, num_bootstrap, seed, extras=None) -> TestResult:
    n = gram.shape[0]
    stat = float((gram.sum() - np.trace(gram)) / (n * (n - 1)))
    reps = bootstrap_stats(gram, num_bootstrap, seed)
    quantile = float(np.quantile(reps, 1.0 - alpha))
    # (1 + count)/(B + 1) guarantees validity of the discrete bootstrap test
    p_value = float((1.0 + np.sum(reps >= stat)) / (num_bootstrap + 1.0))
    return TestResult(
        statistic=stat,
        bootstrap_quantile=quantile,
        p_value=p_value,
        reject=bool(p_value <= alpha),
        alpha=alpha,
        num_bootstrap=num_bootstrap,
        seed=seed,
        extras=extras or {},
    )


def ksd_test(samples, model: ScoreModel, k: KernelSpec, alpha: float = 0.05,
             num_bootstrap: int = 500, seed: int = 0) -> TestResult:
    """Plain KSD goodness-of-fit test with multinomial bootstrap calibration."""
    if not (0.0 < alpha < 1.0):
        raise InputError("alpha must lie in (0, 1)")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 2:
        raise InputError("test needs at least 2 samples")
    gram = stein_gram(model, k, samples)
    return _test_from_gram(gram, alpha, num_bootstrap, seed)


def fisher_divergence_mc(samples_from_q, score_p, score_q) -> float:
    """Monte Carlo estimate of E_Q ||s_p(x) - s_q(x)||^2."""
    X = np.atleast_2d(np.asarray(samples_from_q, dtype=float))
    dp = np.atleast_2d(score_p(X))
    dq = np.atleast_2d(score_q(X))
    if dp.shape != dq.shape:
        raise InputError("score functions disagree on output dimension")
    return float(np.mean(np.sum((dp - dq) ** 2, axis=1)))
