"""P-invariant Markov transition kernels for sample perturbation.

The jump kernel proposes deterministic inter-modal moves
``x' = A_{u2}^{1/2} A_{u1}^{-1/2} (x - theta mu_{u1}) + theta mu_{u2}``
for a uniformly drawn ordered mode pair ``u = (u1, u2)`` and accepts with
a Jacobian-corrected Metropolis-Hastings (or Barker) rule, so detailed
balance holds and the target stays invariant. The kernel is deliberately
non-irreducible: it transports mass between modes without mixing.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import InputError
from .modes import ModeSet
from .models import ScoreModel

MH = "mh"
BARKER = "barker"


@dataclass(frozen=True)
class JumpKernel:
    """Inter-modal jump proposal with scale theta over an estimated ModeSet."""

    modes: ModeSet
    theta: float
    model: ScoreModel
    accept_rule: str = MH

    def __post_init__(self):
        if len(self.modes) < 2:
            raise InputError("jump kernel needs at least 2 modes")
        if self.theta <= 0:
            raise InputError("jump scale theta must be positive")
        if self.accept_rule not in (MH, BARKER):
            raise InputError(f"unknown accept rule {self.accept_rule!r}")
        # cache the affine map x' = C x + t and its log-Jacobian per ordered
        # pair: C = A_{u2}^{1/2} A_{u1}^{-1/2}, t = theta (mu_{u2} - C mu_{u1})
        ms = self.modes
        m = len(ms)
        u1, u2 = np.divmod(np.arange(m * (m - 1)), m - 1)
        u2 = u2 + (u2 >= u1)
        C = np.einsum("pij,pjk->pik", ms.sqrt_A[u2], ms.inv_sqrt_A[u1])
        t = self.theta * (ms.mu[u2] - np.einsum("pij,pj->pi", C, ms.mu[u1]))
        lj = 0.5 * (ms.log_det_A[u2] - ms.log_det_A[u1])
        object.__setattr__(self, "_pair_mats", C)
        object.__setattr__(self, "_pair_offsets", t)
        object.__setattr__(self, "_pair_log_jacs", lj)

    @property
    def num_pairs(self):
        m = len(self.modes)
        return m * (m - 1)


@dataclass(frozen=True)
class PerturbationKernel:
    """Identity kernel or an iterated jump kernel run for `steps` transitions."""

    kind: str  # "identity" or "jump"
    steps: int = 0
    jump: JumpKernel | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "jump"):
            raise InputError(f"unknown kernel kind {self.kind!r}")
        if self.steps < 0:
            raise InputError("steps must be nonnegative")
        if self.kind == "jump" and self.jump is None:
            raise InputError("jump kernel requires a JumpKernel")


def identity_kernel() -> PerturbationKernel:
    return PerturbationKernel(kind="identity", steps=0)


def jump_perturbation(modes: ModeSet, theta: float, model: ScoreModel, steps: int,
                      accept_rule: str = MH) -> PerturbationKernel:
    jk = JumpKernel(modes=modes, theta=theta, model=model, accept_rule=accept_rule)
    return PerturbationKernel(kind="jump", steps=steps, jump=jk)


def _pair_from_index(r, m):
    """Map flat index in [0, m(m-1)) to an ordered pair (u1, u2), u1 != u2."""
    u1 = r // (m - 1)
    t = r % (m - 1)
    u2 = t + (t >= u1)
    return u1, u2


def propose(jk: JumpKernel, x, u):
    """Proposed point and log-Jacobian for mode pair u = (u1, u2)."""
    u1, u2 = u
    m = len(jk.modes)
    if not (0 <= u1 < m and 0 <= u2 < m) or u1 == u2:
        raise InputError("mode indices must be distinct and in range")
    x = np.asarray(x, dtype=float)
    ms = jk.modes
    y = ms.inv_sqrt_A[u1] @ (x - jk.theta * ms.mu[u1])
    x_new = ms.sqrt_A[u2] @ y + jk.theta * ms.mu[u2]
    log_jac = 0.5 * (ms.log_det_A[u2] - ms.log_det_A[u1])
    return x_new, float(log_jac)


def accept_prob(jk: JumpKernel, x, x_new, u, log_jac) -> float:
    """Acceptance probability of the proposed move under the configured rule."""
    lp_x = jk.model.log_density_unnorm(np.asarray(x, dtype=float))
    lp_new = jk.model.log_density_unnorm(np.asarray(x_new, dtype=float))
    if not np.isfinite(lp_new):
        return 0.0
    z = lp_new - lp_x + log_jac
    if jk.accept_rule == MH:
        return float(min(1.0, np.exp(min(z, 0.0)))) if z < 0 else 1.0
    # Barker: t|J| / (1 + t|J|) = sigmoid(z), computed in log space
    return float(expit(z))


def _batch_step(jk: JumpKernel, X, logp_cur, pair_idx, unif):
    """One vectorized jump transition for all rows at once."""
    num_pairs = jk.num_pairs
    if num_pairs <= 16:
        # few distinct maps: batch rows per pair through BLAS
        Xp = np.empty_like(X)
        for r in range(num_pairs):
            rows = pair_idx == r
            if np.any(rows):
                Xp[rows] = X[rows] @ jk._pair_mats[r].T + jk._pair_offsets[r]
    else:
        Xp = np.einsum("nij,nj->ni", jk._pair_mats[pair_idx], X) \
            + jk._pair_offsets[pair_idx]
    log_jac = jk._pair_log_jacs[pair_idx]
    logp_prop = jk.model.log_density_unnorm(Xp)
    z = logp_prop - logp_cur + log_jac
    with np.errstate(over="ignore"):
        if jk.accept_rule == MH:
            alpha = np.minimum(1.0, np.exp(np.minimum(z, 0.0)))
        else:
            alpha = expit(z)
    alpha = np.where(np.isfinite(logp_prop), alpha, 0.0)
    acc = unif < alpha
    X = np.where(acc[:, None], Xp, X)
    logp_cur = np.where(acc, logp_prop, logp_cur)
    return X, logp_cur


def step(pk: PerturbationKernel, x, rng) -> np.ndarray:
    """One transition from state x using draws from rng."""
    x = np.asarray(x, dtype=float)
    if pk.kind == "identity":
        return x.copy()
    jk = pk.jump
    r = int(rng.integers(jk.num_pairs))
    u = _pair_from_index(r, len(jk.modes))
    x_new, log_jac = propose(jk, x, u)
    alpha = accept_prob(jk, x, x_new, u, log_jac)
    return x_new if rng.uniform() < alpha else x.copy()


def perturb_sample(pk: PerturbationKernel, samples, seed) -> np.ndarray:
    """Evolve each row independently for pk.steps transitions.

    All randomness is pre-drawn as (steps, n) arrays from a single seeded
    generator, so row i always consumes column i: results are reproducible
    and independent of row iteration order.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float)).copy()
    if pk.kind == "identity" or pk.steps == 0:
        return X
    jk = pk.jump
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    pair_idx = rng.integers(jk.num_pairs, size=(pk.steps, n))
    unif = rng.uniform(size=(pk.steps, n))
    logp_cur = jk.model.log_density_unnorm(X)
    for t in range(pk.steps):
        X, logp_cur = _batch_step(jk, X, logp_cur, pair_idx[t], unif[t])
    return X


def limiting_density_1d(q_density, model: ScoreModel, nu: float, x, trunc: int = 10):
    """Unnormalised infinite-step limiting density of the 1D two-mode kernel.

    q_inf(x) = p(x) * sum_s q(x + s nu) / sum_k p(x + k nu), with both sums
    truncated to s, k in [-trunc, trunc]. Valid for the M = 2,
    identity-Hessian reduction where jumps move by +-nu.
    """
    if trunc < 1:
        raise InputError("truncation must be at least 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    shifts = nu * np.arange(-trunc, trunc + 1)
    grid = x[:, None] + shifts[None, :]  # (n, 2K+1)
    logp_grid = model.log_density_unnorm(grid.reshape(-1, 1)).reshape(grid.shape)
    q_grid = np.asarray(q_density(grid))
    denom = np.exp(logp_grid).sum(axis=1)
    if np.any(denom <= 0.0):
        raise InputError("target mass underflows on the truncated grid; "
                         "increase the truncation or move x toward the modes")
    logp_x = model.log_density_unnorm(x[:, None])
    out = np.exp(logp_x) * q_grid.sum(axis=1) / denom
    return out if out.shape[0] > 1 else float(out[0])
