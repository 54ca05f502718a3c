"""Mode estimation for multimodal targets.

Parallel-style quasi-Newton runs minimise -log p* from many starting
points; near-duplicate endpoints are merged sequentially by a
curvature-weighted Mahalanobis criterion, keeping the endpoint with the
larger density as the cluster representative.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .exceptions import InputError
from .models import ScoreModel


@dataclass
class Mode:
    """A mode location with local curvature metadata of -log p*."""

    mu: np.ndarray
    hessian: np.ndarray       # Hessian of -log p* at mu (SPD after repair)
    inv_hessian: np.ndarray   # A
    sqrt_inv_hessian: np.ndarray      # A^{1/2}, symmetric PSD root
    inv_sqrt_inv_hessian: np.ndarray  # A^{-1/2}
    log_det_inv_hessian: float
    repaired: bool = False    # True when a singular Hessian fell back to A = I


@dataclass
class ModeSet:
    modes: list

    def __len__(self):
        return len(self.modes)

    @property
    def mu(self):
        return np.stack([m.mu for m in self.modes])

    @property
    def sqrt_A(self):
        return np.stack([m.sqrt_inv_hessian for m in self.modes])

    @property
    def inv_sqrt_A(self):
        return np.stack([m.inv_sqrt_inv_hessian for m in self.modes])

    @property
    def log_det_A(self):
        return np.array([m.log_det_inv_hessian for m in self.modes])


def _spd_floor(H, floor_ratio=1e-8):
    """Symmetrize and floor eigenvalues at floor_ratio * max eigenvalue."""
    H = 0.5 * (H + H.T)
    vals, vecs = np.linalg.eigh(H)
    top = vals.max()
    if top <= 0:
        return None
    vals = np.maximum(vals, floor_ratio * top)
    return (vecs * vals) @ vecs.T


def bfgs_minimize(model: ScoreModel, x0, max_iter: int = 1000):
    """Minimise -log p* by BFGS from x0.

    Returns (x_star, hessian_estimate, converged). The Hessian estimate is
    the inverse of the final BFGS inverse-Hessian approximation,
    symmetrized and eigenvalue-floored to be SPD.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if max_iter < 1:
        raise InputError("max_iter must be at least 1")
    if not np.all(np.isfinite(x0)) or not np.isfinite(model.log_density_unnorm(x0)):
        raise InputError("objective is not finite at the starting point")

    res = minimize(
        lambda x: -model.log_density_unnorm(x),
        x0,
        jac=lambda x: -model.score(x),
        method="BFGS",
        options={"maxiter": max_iter, "gtol": 1e-8},
    )
    hess = _spd_floor(np.linalg.inv(res.hess_inv))
    if hess is None:
        hess = np.eye(x0.shape[0])
    converged = bool(np.linalg.norm(model.score(res.x)) <= 1e-3)
    return res.x, hess, converged


def _enrich(mu, hess, floor_ratio=1e-8):
    """Build a Mode with inverse, symmetric root, and log-determinant."""
    repaired = False
    H = _spd_floor(hess, floor_ratio)
    if H is None or not np.all(np.isfinite(H)):
        H = np.eye(len(mu))
        repaired = True
    vals, vecs = np.linalg.eigh(H)
    inv_vals = 1.0 / vals
    A = (vecs * inv_vals) @ vecs.T
    sqrt_A = (vecs * np.sqrt(inv_vals)) @ vecs.T
    inv_sqrt_A = (vecs * np.sqrt(vals)) @ vecs.T
    log_det_A = float(np.sum(np.log(inv_vals)))
    return Mode(
        mu=np.asarray(mu, dtype=float),
        hessian=H,
        inv_hessian=A,
        sqrt_inv_hessian=sqrt_A,
        inv_sqrt_inv_hessian=inv_sqrt_A,
        log_det_inv_hessian=log_det_A,
        repaired=repaired,
    )


def merge_modes(raw, model: ScoreModel, beta: float = 0.01) -> ModeSet:
    """Sequential merge of (location, hessian) candidates.

    Candidates within averaged Mahalanobis distance beta of an existing
    representative are absorbed; the representative keeps whichever point has
    the larger density. Order-dependent by design: input order is preserved.
    """
    if beta <= 0:
        raise InputError("merge threshold beta must be positive")
    raw = list(raw)
    if not raw:
        raise InputError("no mode candidates to merge")

    reps = []  # list of [mu, hess, logp]
    for m_i, h_i in raw:
        m_i = np.asarray(m_i, dtype=float)
        h_i = np.asarray(h_i, dtype=float)
        logp_i = model.log_density_unnorm(m_i)
        dists = []
        for mu_j, h_j, _ in reps:
            diff = mu_j - m_i
            dists.append(0.5 * (diff @ h_j @ diff + diff @ h_i @ diff))
        if dists and min(dists) < beta:
            j = int(np.argmin(dists))
            if reps[j][2] < logp_i:
                reps[j] = [m_i, h_i, logp_i]
        else:
            reps.append([m_i, h_i, logp_i])

    modes = []
    for mu, hess, _ in reps:
        mode = _enrich(mu, hess)
        if mode.repaired:
            warnings.warn("singular Hessian at a mode; using identity metric")
        modes.append(mode)
    return ModeSet(modes=modes)


def init_uniform(bounds, n_init: int, seed) -> np.ndarray:
    """n_init i.i.d. uniform draws from the box given by (low, high) pairs."""
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if n_init < 1:
        raise InputError("n_init must be at least 1")
    if bounds.shape[1] != 2 or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise InputError("bounds must be (low, high) pairs with low < high")
    rng = np.random.default_rng(seed)
    return rng.uniform(bounds[:, 0], bounds[:, 1], size=(n_init, bounds.shape[0]))


def init_mixed(train, bounds, n_init: int, seed) -> np.ndarray:
    """Half the starting points from the training set, half uniform in the box."""
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if train.shape[0] == 0:
        raise InputError("training set is empty")
    n_train = (n_init + 1) // 2
    n_unif = n_init - n_train
    rng = np.random.default_rng(seed)
    replace = train.shape[0] < n_train
    idx = rng.choice(train.shape[0], size=n_train, replace=replace)
    parts = [train[idx]]
    if n_unif > 0:
        parts.append(init_uniform(bounds, n_unif, rng.integers(2**63)))
    return np.vstack(parts)


def find_modes(model: ScoreModel, inits, beta: float = 0.01, max_iter: int = 1000) -> ModeSet:
    """Run BFGS from every starting point and merge the converged endpoints."""
    inits = np.atleast_2d(np.asarray(inits, dtype=float))
    raw = []
    for x0 in inits:
        try:
            x_star, hess, converged = bfgs_minimize(model, x0, max_iter=max_iter)
        except InputError:
            raise
        if converged and np.all(np.isfinite(x_star)):
            raw.append((x_star, hess))
    if not raw:
        raise InputError("no quasi-Newton run converged; widen bounds or add starting points")
    return merge_modes(raw, model, beta=beta)
