"""Base positive-definite kernels with analytic derivatives and bandwidth selection.

Two kernel families are supported: the inverse multiquadric (IMQ)
``k(x, y) = (1 + ||x - y||^2 / bw)^beta`` with ``beta`` in ``(-1, 0)``
(default ``-1/2``), and the Gaussian RBF
``k(x, y) = exp(-||x - y||^2 / (2 bw))``.

Besides pointwise evaluation, each kernel exposes the first derivatives
and the cross-derivative trace ``sum_i d^2 k / dx_i dy_i`` needed to
assemble Stein kernels.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import InputError

IMQ = "imq"
RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    """A base kernel: family name, squared-distance bandwidth, IMQ exponent."""

    family: str
    bandwidth: float
    imq_beta: float = -0.5

    def __post_init__(self):
        if self.family not in (IMQ, RBF):
            raise InputError(f"unknown kernel family {self.family!r}")
        if not (self.bandwidth > 0):
            raise InputError("kernel bandwidth must be positive")
        if self.family == IMQ and not (-1.0 < self.imq_beta < 0.0):
            raise InputError("IMQ exponent must lie in (-1, 0)")

    # Coefficient functions shared by the scalar and Gram-matrix paths.
    # For both families grad_x k(x, y) = gcoef(r2) * (x - y) with
    # r2 = ||x - y||^2, and the cross trace depends only on r2 and d.

    def _eval_r2(self, r2):
        lam = self.bandwidth
        if self.family == IMQ:
            return (1.0 + r2 / lam) ** self.imq_beta
        return np.exp(-r2 / (2.0 * lam))

    def _gcoef_r2(self, r2):
        lam = self.bandwidth
        if self.family == IMQ:
            beta = self.imq_beta
            return (2.0 * beta / lam) * (1.0 + r2 / lam) ** (beta - 1.0)
        return -self._eval_r2(r2) / lam

    def _cross_trace_r2(self, r2, d):
        lam = self.bandwidth
        if self.family == IMQ:
            beta = self.imq_beta
            c = 1.0 + r2 / lam
            return -(2.0 * beta / lam) * (
                d * c ** (beta - 1.0)
                + (2.0 * (beta - 1.0) / lam) * r2 * c ** (beta - 2.0)
            )
        return (d / lam - r2 / lam**2) * self._eval_r2(r2)

    def _coeffs_r2(self, r2, d):
        """All three coefficients at once, sharing the expensive powers.

        Returns ``(k, gcoef, cross_trace)`` evaluated elementwise on ``r2``.
        """
        lam = self.bandwidth
        if self.family == RBF:
            kval = np.exp(-r2 / (2.0 * lam))
            return kval, -kval / lam, (d / lam - r2 / lam**2) * kval
        beta = self.imq_beta
        c = 1.0 + r2 / lam
        if beta == -0.5:
            inv_sqrt = 1.0 / np.sqrt(c)
            kval = inv_sqrt
            cb1 = inv_sqrt / c          # c^(beta-1)
            cb2 = cb1 / c               # c^(beta-2)
        else:
            kval = c**beta
            cb1 = kval / c
            cb2 = cb1 / c
        gcoef = (2.0 * beta / lam) * cb1
        cross = -(2.0 * beta / lam) * (d * cb1 + (2.0 * (beta - 1.0) / lam) * r2 * cb2)
        return kval, gcoef, cross


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError(f"kernel arguments must be vectors of equal dimension, got {x.shape} and {y.shape}")
    return x, y


def eval(k: KernelSpec, x, y) -> float:
    """Evaluate ``k(x, y)``."""
    x, y = _check_pair(x, y)
    r2 = float(np.sum((x - y) ** 2))
    return float(k._eval_r2(r2))


def grad_x(k: KernelSpec, x, y) -> np.ndarray:
    """Gradient of ``k(x, y)`` with respect to the first argument."""
    x, y = _check_pair(x, y)
    r2 = float(np.sum((x - y) ** 2))
    return k._gcoef_r2(r2) * (x - y)


def grad_y(k: KernelSpec, x, y) -> np.ndarray:
    """Gradient of ``k(x, y)`` with respect to the second argument."""
    x, y = _check_pair(x, y)
    r2 = float(np.sum((x - y) ** 2))
    return -k._gcoef_r2(r2) * (x - y)


def cross_grad_trace(k: KernelSpec, x, y) -> float:
    """Trace of the mixed second derivative, ``sum_i d^2 k / dx_i dy_i``."""
    x, y = _check_pair(x, y)
    r2 = float(np.sum((x - y) ** 2))
    return float(k._cross_trace_r2(r2, x.shape[0]))


def median_heuristic(samples) -> float:
    """Median of the pairwise squared Euclidean distances over i < j.

    Returns 1.0 with a warning when all points coincide (zero median).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    if n < 2:
        raise InputError("median heuristic needs at least 2 samples")
    med = float(np.median(pdist(samples, metric="sqeuclidean")))
    if med == 0.0:
        warnings.warn("zero median pairwise distance; falling back to bandwidth 1.0")
        return 1.0
    return med
