"""Seeded samplers for the benchmark distributions.

Gaussian mixtures and t/banana mixtures are sampled directly; the
Gaussian-Bernoulli RBM uses a Gibbs chain, with an exact coupling-strength
shift available for the well-separated-modes preset where plain Gibbs
mixes too slowly.
"""

import numpy as np

from .exceptions import InputError
from .models import (GaussianMixtureParams, RBMParams, TBananaMixtureParams,
                     _shear_inv)


def sample_gaussian_mixture(params: GaussianMixtureParams, n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    comps = rng.choice(len(params.weights), size=n, p=params.weights)
    d = params.dim
    z = rng.standard_normal((n, d))
    if params.covariances is None:
        x = z
    else:
        chol = np.linalg.cholesky(params.covariances)
        x = np.einsum("nij,nj->ni", chol[comps], z)
    return x + params.means[comps]


def sample_t_banana(params: TBananaMixtureParams, n: int, seed) -> np.ndarray:
    """Categorical component choice, then a t draw; banana components apply
    the inverse shear to a t draw (the shear has unit Jacobian)."""
    rng = np.random.default_rng(seed)
    d = params.dim
    comps = rng.choice(len(params.weights), size=n, p=params.weights)
    z = rng.standard_normal((n, d))
    chi2 = rng.chisquare(params.dof, size=n)
    t = z * np.sqrt(params.dof / chi2)[:, None]
    out = np.empty((n, d))
    for m, mu in enumerate(params.centers):
        mask = comps == m
        if not np.any(mask):
            continue
        if m < params.num_t:
            scale_diag = np.full(d, params.t_scale)
        else:
            scale_diag = np.ones(d)
            scale_diag[0] = params.banana_first_axis_scale
        draws = mu[None, :] + t[mask] * np.sqrt(scale_diag)[None, :]
        if m >= params.num_t:
            draws = _shear_inv(draws, params.banana_b)
        out[mask] = draws
    return out


def _gibbs_chain(params: RBMParams, n: int, burnin: int, thin: int, seed):
    """Alternating Gibbs sweep; returns thinned (x, h) pairs after burn-in."""
    if burnin < 0 or thin < 1:
        raise InputError("burnin must be >= 0 and thin >= 1")
    rng = np.random.default_rng(seed)
    B, b, c = params.B, params.b, params.c
    d, d_h = params.dim, params.dim_hidden
    xs = np.empty((n, d))
    hs = np.empty((n, d_h))
    x = b + rng.standard_normal(d)
    total = burnin + n * thin
    kept = 0
    for it in range(total):
        # h_j | x is +-1 with P(+1) = sigmoid((B^T x)_j + 2 c_j)
        logits = B.T @ x + 2.0 * c
        p_up = 1.0 / (1.0 + np.exp(-logits))
        h = np.where(rng.uniform(size=d_h) < p_up, 1.0, -1.0)
        x = 0.5 * B @ h + b + rng.standard_normal(d)
        if it >= burnin and (it - burnin) % thin == 0:
            xs[kept] = x
            hs[kept] = h
            kept += 1
    return xs, hs


def sample_rbm_gibbs(params: RBMParams, n: int, burnin: int = 1000, thin: int = 1,
                     seed=0) -> np.ndarray:
    """Plain Gibbs draws from the RBM marginal."""
    xs, _ = _gibbs_chain(params, n, burnin, thin, seed)
    return xs


def _lambda_form(params: RBMParams):
    """Return lam if B = lam * E with E the top block of the identity, else None."""
    d, d_h = params.dim, params.dim_hidden
    e = np.eye(max(d, d_h))[:d, :d_h]
    lam = params.B[0, 0]
    if np.allclose(params.B, lam * e):
        return float(lam)
    return None


def sample_rbm_shifted(params: RBMParams, n: int, burnin: int = 1000, thin: int = 1,
                       seed=0, lambda_prime: float = 0.0) -> np.ndarray:
    """Sample the B = lam*E RBM by running Gibbs at coupling lambda_prime
    and shifting each draw by -(lambda_prime - lam)/2 * E h.

    The mixing weights do not depend on the coupling, so this is exact and
    sidesteps the poor mixing of Gibbs at large lam.
    """
    lam = _lambda_form(params)
    if lam is None:
        raise InputError("shifted sampling requires B of the lam * E form")
    d, d_h = params.dim, params.dim_hidden
    e = np.eye(max(d, d_h))[:d, :d_h]
    surrogate = RBMParams(B=lambda_prime * e, b=params.b, c=params.c)
    xs, hs = _gibbs_chain(surrogate, n, burnin, thin, seed)
    return xs - 0.5 * (lambda_prime - lam) * hs @ e.T
