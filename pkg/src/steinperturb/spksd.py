"""spKSD and ospKSD goodness-of-fit tests.

spKSD sums Stein-kernel evaluations over an ensemble of perturbed copies
of the sample, one per transition kernel in a collection that always
contains the identity. ospKSD tunes the jump scale on a held-out split by
maximising a normal-approximation power proxy, then tests on the rest.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError
from .kernels import KernelSpec
from .modes import find_modes, init_mixed
from .models import ScoreModel
from .perturb import (MH, JumpKernel, PerturbationKernel, identity_kernel,
                      jump_perturbation, perturb_sample)
from .stein import TestResult, _test_from_gram, ksd_ustat, stein_gram


@dataclass(frozen=True)
class KernelCollection:
    """Perturbation kernels to sum over; the first must be the identity."""

    kernels: tuple
    theta_grid: tuple = ()

    def __post_init__(self):
        kernels = tuple(self.kernels)
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "theta_grid", tuple(self.theta_grid))
        if not kernels:
            raise InputError("kernel collection must be nonempty")
        if kernels[0].kind != "identity":
            raise InputError("the first kernel in the collection must be the identity")

    def __len__(self):
        return len(self.kernels)


def grid_collection(modes, theta_grid, steps, model: ScoreModel,
                    accept_rule: str = MH) -> KernelCollection:
    """Identity plus one jump kernel per theta in the grid."""
    thetas = tuple(float(t) for t in theta_grid)
    kernels = [identity_kernel()]
    for theta in thetas:
        kernels.append(jump_perturbation(modes, theta, model, steps, accept_rule))
    return KernelCollection(kernels=tuple(kernels), theta_grid=thetas)


@dataclass
class PerturbedEnsemble:
    """Per-kernel perturbed copies of one base sample; index 0 is unperturbed."""

    matrices: list

    def __post_init__(self):
        n = self.matrices[0].shape[0]
        if any(m.shape[0] != n for m in self.matrices):
            raise InputError("ensemble matrices must share the sample size")

    @property
    def num_kernels(self):
        return len(self.matrices)


def build_ensemble(samples, collection: KernelCollection, seed) -> PerturbedEnsemble:
    """Perturb the sample under every kernel with independent seeded streams."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    mats = [perturb_sample(pk, X, seed=[seed, idx])
            for idx, pk in enumerate(collection.kernels)]
    return PerturbedEnsemble(matrices=mats)


def ensemble_gram(ensemble: PerturbedEnsemble, model: ScoreModel, k: KernelSpec) -> np.ndarray:
    """Summed Stein gram over the ensemble: the Gram matrix of u-tilde."""
    total = stein_gram(model, k, ensemble.matrices[0])
    for mat in ensemble.matrices[1:]:
        total += stein_gram(model, k, mat)
    return total


def tilde_u(ensemble: PerturbedEnsemble, model: ScoreModel, k: KernelSpec, i: int, j: int) -> float:
    """Summed Stein kernel over kernels: sum_s u(x_i^s, x_j^s)."""
    from .stein import stein_kernel_eval

    return float(sum(stein_kernel_eval(model, k, mat[i], mat[j])
                     for mat in ensemble.matrices))


def spksd_stat(ensemble: PerturbedEnsemble, model: ScoreModel, k: KernelSpec,
               gram=None) -> float:
    """spKSD U-statistic: off-diagonal mean of the summed gram."""
    if gram is None:
        gram = ensemble_gram(ensemble, model, k)
    n = gram.shape[0]
    if n < 2:
        raise InputError("U-statistic needs at least 2 samples")
    return float((gram.sum() - np.trace(gram)) / (n * (n - 1)))


def spksd_test(samples, model: ScoreModel, k: KernelSpec, collection: KernelCollection,
               alpha: float = 0.05, num_bootstrap: int = 500, seed: int = 0,
               extras: dict | None = None) -> TestResult:
    """spKSD test: perturb once per kernel, then bootstrap the summed gram."""
    if not (0.0 < alpha < 1.0):
        raise InputError("alpha must lie in (0, 1)")
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[0] < 2:
        raise InputError("test needs at least 2 samples")
    ensemble = build_ensemble(X, collection, seed)
    gram = ensemble_gram(ensemble, model, k)
    return _test_from_gram(gram, alpha, num_bootstrap, seed, extras=extras)


def power_proxy(samples, model: ScoreModel, k: KernelSpec, jk: JumpKernel,
                steps: int, seed, identity_gram=None) -> float:
    """Normal-approximation power proxy for a single jump kernel.

    Ratio of the two-kernel (identity + jump) spKSD statistic to the
    plug-in estimate of its asymptotic standard deviation.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise InputError("power proxy needs at least 2 samples")
    if identity_gram is None:
        identity_gram = stein_gram(model, k, X)
    pk = PerturbationKernel(kind="jump", steps=steps, jump=jk)
    Xp = perturb_sample(pk, X, seed=seed)
    H = identity_gram + stein_gram(model, k, Xp)
    stat = float((H.sum() - np.trace(H)) / (n * (n - 1)))
    row_sums = H.sum(axis=1)
    var = 4.0 / n**3 * np.sum(row_sums**2) - 4.0 / n**4 * H.sum() ** 2
    var = max(var, 1e-12)
    return stat / float(np.sqrt(var))


def ospksd_test(samples, model: ScoreModel, k: KernelSpec, theta_grid, steps: int,
                alpha: float = 0.05, num_bootstrap: int = 500, seed: int = 0,
                split_frac: float = 0.5, bounds=None, n_init: int = 20,
                merge_beta: float = 0.01, accept_rule: str = MH) -> TestResult:
    """ospKSD test: tune theta on a train split, test on the held-out split.

    Modes are estimated on the train split with mixed initialisation; the
    jump scale maximising the power proxy on the train split is used,
    together with the identity, in an spKSD test on the held-out half.
    Ties in the proxy break toward the smallest theta.
    """
    theta_grid = sorted(float(t) for t in theta_grid)
    if not theta_grid:
        raise InputError("theta grid must be nonempty")
    if not (0.0 < split_frac < 1.0):
        raise InputError("split_frac must lie in (0, 1)")
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    n = X.shape[0]
    n_train = int(round(split_frac * n))
    if n_train < 2 or n - n_train < 2:
        raise InputError("both data splits need at least 2 points")
    perm = np.random.default_rng([seed, 101]).permutation(n)
    train, test = X[perm[:n_train]], X[perm[n_train:]]

    if bounds is None:
        lo, hi = train.min(axis=0), train.max(axis=0)
        pad = 0.5 * (hi - lo) + 1.0
        bounds = np.stack([lo - pad, hi + pad], axis=1)
    inits = init_mixed(train, bounds, n_init, seed=[seed, 102])
    modes = find_modes(model, inits, beta=merge_beta)

    if len(modes) < 2:
        # no jump is possible; the test degenerates to plain KSD on the split
        collection = KernelCollection(kernels=(identity_kernel(),))
        extras = {"theta_selected": None, "num_modes": len(modes)}
        return spksd_test(test, model, k, collection, alpha, num_bootstrap, seed,
                          extras=extras)

    gram_train = stein_gram(model, k, train)
    proxies = []
    for i, theta in enumerate(theta_grid):
        jk = JumpKernel(modes=modes, theta=theta, model=model, accept_rule=accept_rule)
        proxies.append(power_proxy(train, model, k, jk, steps, seed=[seed, 200 + i],
                                   identity_gram=gram_train))
    best = int(np.argmax(proxies))  # first max: smallest theta wins ties
    theta_star = theta_grid[best]

    collection = grid_collection(modes, [theta_star], steps, model, accept_rule)
    extras = {"theta_selected": theta_star, "num_modes": len(modes),
              "power_proxy": float(proxies[best])}
    return spksd_test(test, model, k, collection, alpha, num_bootstrap, seed,
                      extras=extras)
