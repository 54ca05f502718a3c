"""Command-line entry point and benchmark harness.

Subcommands: ``test`` (one goodness-of-fit test on a sample file),
``sweep`` (seeded repetition studies writing a rates CSV), ``sample``
(draw from a built-in model), and ``modes`` (mode estimation report).
Exit codes: 0 success, 1 input error, 2 internal error.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io, modes as modes_mod, samplers
from .exceptions import InputError
from .kernels import IMQ, KernelSpec, median_heuristic
from .models import (GaussianMixtureParams, RBMParams, TBananaMixtureParams,
                     bimodal_gaussian_1d, gaussian_mixture_model, rbm_model,
                     rbm_multimodal_params, t_banana_model)
from .spksd import grid_collection, ospksd_test, spksd_test
from .stein import ksd_test

DEFAULT_THETA_GRID = tuple(np.linspace(0.5, 1.5, 51))


def parse_theta_grid(text):
    """Parse "start:stop:count" into an evenly spaced grid."""
    try:
        start, stop, count = text.split(":")
        grid = np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise InputError(f"bad theta grid {text!r}; expected start:stop:count")
    if len(grid) < 1:
        raise InputError("theta grid must have at least one value")
    return tuple(grid)


def parse_bounds(text):
    """Parse "lo:hi,lo:hi,..." into an array of (low, high) rows."""
    try:
        pairs = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
        bounds = np.array(pairs, dtype=float)
    except ValueError:
        raise InputError(f"bad bounds {text!r}; expected lo:hi,lo:hi,...")
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise InputError(f"bad bounds {text!r}; expected lo:hi,lo:hi,...")
    return bounds


def wilson_interval(successes, trials, z=1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def default_bounds(samples, pad_frac=0.5):
    lo, hi = samples.min(axis=0), samples.max(axis=0)
    pad = pad_frac * (hi - lo) + 1.0
    return np.stack([lo - pad, hi + pad], axis=1)


def run_method(method, samples, model, *, alpha=0.05, num_bootstrap=500, steps=10,
               theta_grid=DEFAULT_THETA_GRID, seed=0, bounds=None, n_init=20,
               merge_beta=0.01):
    """Dispatch one test. The IMQ bandwidth is the median heuristic of the sample."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    kernel = KernelSpec(family=IMQ, bandwidth=median_heuristic(samples))
    if bounds is None:
        bounds = default_bounds(samples)
    if method == "ksd":
        return ksd_test(samples, model, kernel, alpha, num_bootstrap, seed)
    if method == "spksd":
        inits = modes_mod.init_uniform(bounds, n_init, seed=[seed, 7])
        mode_set = modes_mod.find_modes(model, inits, beta=merge_beta)
        if len(mode_set) < 2:
            collection = grid_collection(None, [], steps, model)
            extras = {"num_modes": len(mode_set)}
        else:
            collection = grid_collection(mode_set, theta_grid, steps, model)
            extras = {"num_modes": len(mode_set)}
        return spksd_test(samples, model, kernel, collection, alpha, num_bootstrap,
                          seed, extras=extras)
    if method == "ospksd":
        return ospksd_test(samples, model, kernel, theta_grid, steps, alpha,
                           num_bootstrap, seed, bounds=bounds, n_init=n_init,
                           merge_beta=merge_beta)
    raise InputError(f"unknown method {method!r}; expected ksd, spksd, or ospksd")


# ---------------------------------------------------------------------------
# Experiment presets


@dataclass
class ExperimentConfig:
    experiment: str
    method: str = "ksd"
    n: int = 1000
    reps: int = 100
    alpha: float = 0.05
    num_bootstrap: int = 500
    steps: int | None = None
    theta_grid: tuple = DEFAULT_THETA_GRID
    seed: int = 0
    sweep_values: list | None = None
    n_init: int | None = None
    dim: int = 1
    dim_hidden: int = 5
    delta: float = 6.0
    num_t: int = 2
    num_banana: int = 2
    bounds: np.ndarray | None = None
    samples_file: str | None = None
    model_file: str | None = None
    out: str | None = None

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise InputError(f"unknown config fields: {sorted(bad)}")
        cfg = cls(**data)
        if cfg.reps < 1:
            raise InputError("reps must be at least 1")
        if isinstance(cfg.theta_grid, str):
            cfg.theta_grid = parse_theta_grid(cfg.theta_grid)
        if isinstance(cfg.bounds, str):
            cfg.bounds = parse_bounds(cfg.bounds)
        elif cfg.bounds is not None:
            cfg.bounds = np.asarray(cfg.bounds, dtype=float)
        return cfg


def _gm_bounds(dim, delta):
    bounds = np.tile([-8.0, 8.0], (dim, 1))
    bounds[0, 1] = delta + 8.0
    return bounds


def _experiment_setup(cfg: ExperimentConfig):
    """Return (sweep_values, per-value callable -> (model, sampler, bounds, steps))."""
    exp = cfg.experiment

    if exp == "gm_delta_sweep":
        values = cfg.sweep_values or [1, 2, 3, 4, 5, 6, 7, 8]
        steps = cfg.steps if cfg.steps is not None else 10

        def make(delta):
            model = bimodal_gaussian_1d(delta)
            left = GaussianMixtureParams(weights=[1.0], means=[[0.0]])

            def draw(rep_seed):
                return samplers.sample_gaussian_mixture(left, cfg.n, rep_seed)

            return model, draw, _gm_bounds(1, delta), steps

        return values, make, 2

    if exp == "gm_pi_sweep":
        values = cfg.sweep_values or [0.1, 0.3, 0.5, 0.7, 0.9]
        steps = cfg.steps if cfg.steps is not None else 10

        def make(pi):
            model = bimodal_gaussian_1d(cfg.delta)
            q = GaussianMixtureParams(weights=[pi, 1.0 - pi],
                                      means=[[0.0], [cfg.delta]])

            def draw(rep_seed):
                return samplers.sample_gaussian_mixture(q, cfg.n, rep_seed)

            return model, draw, _gm_bounds(1, cfg.delta), steps

        return values, make, 2

    if exp == "gm_level":
        values = cfg.sweep_values or [cfg.delta]
        steps = cfg.steps if cfg.steps is not None else 10

        def make(delta):
            d = cfg.dim
            means = np.zeros((2, d))
            means[1, 0] = delta
            params = GaussianMixtureParams(weights=[0.5, 0.5], means=means)
            model = gaussian_mixture_model(params)

            def draw(rep_seed):
                return samplers.sample_gaussian_mixture(params, cfg.n, rep_seed)

            return model, draw, _gm_bounds(d, delta), steps

        return values, make, 2

    if exp == "tbanana_sigma_sweep":
        values = cfg.sweep_values or [0.5, 1.5]
        steps = cfg.steps if cfg.steps is not None else 100
        d = cfg.dim
        n_comp = cfg.num_t + cfg.num_banana
        centers = np.random.default_rng([cfg.seed, 33]).uniform(-20, 20, size=(n_comp, d))

        def make(sigma_s):
            target = TBananaMixtureParams(
                num_t=cfg.num_t, num_banana=cfg.num_banana, centers=centers,
                weights=np.full(n_comp, 1.0 / n_comp))
            model = t_banana_model(target)

            def draw(rep_seed):
                rng = np.random.default_rng(rep_seed)
                logits = rng.normal(0.0, sigma_s, size=n_comp)
                w = np.exp(logits - logits.max())
                w /= w.sum()
                q = TBananaMixtureParams(num_t=cfg.num_t, num_banana=cfg.num_banana,
                                         centers=centers, weights=w)
                return samplers.sample_t_banana(q, cfg.n, rep_seed)

            bounds = np.tile([-25.0, 25.0], (d, 1))
            return model, draw, bounds, steps

        return values, make, n_comp

    if exp == "rbm_standard":
        values = cfg.sweep_values or [0.01, 0.02, 0.05, 0.1]
        steps = cfg.steps if cfg.steps is not None else 50
        d, d_h = cfg.dim, cfg.dim_hidden
        rng0 = np.random.default_rng([cfg.seed, 44])
        B = rng0.choice([-1.0, 1.0], size=(d, d_h))
        b = rng0.standard_normal(d)
        c = rng0.standard_normal(d_h)
        target = RBMParams(B=B, b=b, c=c)
        model = rbm_model(target)

        def make(sigma):
            def draw(rep_seed):
                noise = np.random.default_rng([rep_seed, 45]).normal(0, sigma, size=(d, d_h))
                q = RBMParams(B=B + noise, b=b, c=c)
                return samplers.sample_rbm_gibbs(q, cfg.n, burnin=1000, seed=rep_seed)

            return model, draw, None, steps

        return values, make, 1

    if exp == "rbm_multimodal":
        values = cfg.sweep_values or [1, 3, 5]
        steps = cfg.steps if cfg.steps is not None else 50
        d, d_h = cfg.dim, cfg.dim_hidden
        target = rbm_multimodal_params(d, d_h, lam=6.0)
        model = rbm_model(target)
        bounds = np.tile([-6.0, 6.0], (d, 1))

        def make(c0):
            c = np.zeros(d_h)
            c[: min(2, d_h)] = c0
            q = rbm_multimodal_params(d, d_h, lam=6.0, c=c)

            def draw(rep_seed):
                return samplers.sample_rbm_shifted(q, cfg.n, burnin=200, seed=rep_seed)

            return model, draw, bounds, steps

        return values, make, 2**d_h

    if exp == "sensors_from_file":
        if cfg.samples_file is None or cfg.model_file is None:
            raise InputError("sensors_from_file requires samples_file and model_file")
        steps = cfg.steps if cfg.steps is not None else 1000
        _, model = io.load_model_spec(cfg.model_file)
        samples = io.read_samples_csv(cfg.samples_file)

        def make(_value):
            def draw(rep_seed):
                return samples

            return model, draw, cfg.bounds, steps

        return [0.0], make, 8

    raise InputError(f"unknown experiment {cfg.experiment!r}")


def run_sweep(cfg: ExperimentConfig):
    """Run the configured sweep; returns the result rows.

    A failed repetition aborts the sweep: silent skips would bias rates.
    """
    values, make, expected_modes = _experiment_setup(cfg)
    n_init = cfg.n_init if cfg.n_init is not None else 10 * expected_modes
    max_workers = max(1, int(os.environ.get("STEIN_PERTURB_THREADS", "1")))
    rows = []
    for value in values:
        model, draw, preset_bounds, steps = make(value)
        bounds = cfg.bounds if cfg.bounds is not None else preset_bounds

        def one_rep(rep):
            rep_seed = cfg.seed + rep
            samples = draw(rep_seed)
            return run_method(cfg.method, samples, model, alpha=cfg.alpha,
                              num_bootstrap=cfg.num_bootstrap, steps=steps,
                              theta_grid=cfg.theta_grid, seed=rep_seed,
                              bounds=bounds, n_init=n_init)

        t0 = time.perf_counter()
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                results = list(pool.map(one_rep, range(cfg.reps)))
        else:
            results = [one_rep(rep) for rep in range(cfg.reps)]
        wall = time.perf_counter() - t0
        rejects = sum(r.reject for r in results)
        rate = rejects / cfg.reps
        lo, hi = wilson_interval(rejects, cfg.reps)
        rows.append({
            "sweep_value": float(value),
            "method": cfg.method,
            "rejection_rate": rate,
            "ci_low": lo,
            "ci_high": hi,
            "mean_statistic": float(np.mean([r.statistic for r in results])),
            "wall_time": wall,
        })
    return rows


SWEEP_COLUMNS = ["sweep_value", "method", "rejection_rate", "ci_low", "ci_high",
                 "mean_statistic", "wall_time"]


def write_sweep_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(
                row["method"] if col == "method" else repr(float(row[col]))
                for col in SWEEP_COLUMNS) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_test(args):
    _, model = io.load_model_spec(args.model)
    samples = io.read_samples_csv(args.samples)
    if samples.shape[1] != model.dim:
        raise InputError(f"samples have {samples.shape[1]} columns but the model "
                         f"dimension is {model.dim}")
    bounds = parse_bounds(args.bounds) if args.bounds else None
    result = run_method(args.method, samples, model, alpha=args.alpha,
                        num_bootstrap=args.bootstrap, steps=args.steps,
                        theta_grid=parse_theta_grid(args.theta_grid),
                        seed=args.seed, bounds=bounds, n_init=args.n_init)
    if args.out:
        io.write_result_json(args.out, result)
    else:
        json.dump(result.to_dict(), sys.stdout, indent=2)
        print()
    return 0


def cmd_sweep(args):
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON ({exc})")
    cfg = ExperimentConfig.from_dict(data)
    rows = run_sweep(cfg)
    write_sweep_csv(args.out, rows)
    return 0


def cmd_sample(args):
    params, _model = io.load_model_spec(args.model)
    if isinstance(params, GaussianMixtureParams):
        samples = samplers.sample_gaussian_mixture(params, args.n, args.seed)
    elif isinstance(params, TBananaMixtureParams):
        samples = samplers.sample_t_banana(params, args.n, args.seed)
    elif isinstance(params, RBMParams):
        samples = samplers.sample_rbm_gibbs(params, args.n, seed=args.seed)
    else:
        raise InputError("no built-in sampler for this model; supply samples from file")
    io.write_samples_csv(args.out, samples)
    return 0


def cmd_modes(args):
    _, model = io.load_model_spec(args.model)
    bounds = parse_bounds(args.bounds)
    inits = modes_mod.init_uniform(bounds, args.n_init, args.seed)
    mode_set = modes_mod.find_modes(model, inits)
    payload = [{
        "mu": m.mu.tolist(),
        "A": m.inv_hessian.tolist(),
        "log_det_A": m.log_det_inv_hessian,
    } for m in mode_set.modes]
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="stein-perturb",
                                     description="Goodness-of-fit tests with "
                                                 "perturbed kernelized Stein discrepancy")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run one goodness-of-fit test")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--method", choices=["ksd", "spksd", "ospksd"], default="ksd")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--theta-grid", default="0.5:1.5:51")
    p.add_argument("--bounds", default=None)
    p.add_argument("--n-init", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("sweep", help="run a repetition sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="draw samples from a built-in model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("modes", help="estimate and report target modes")
    p.add_argument("--model", required=True)
    p.add_argument("--n-init", type=int, default=50)
    p.add_argument("--bounds", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_modes)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - map anything else to exit code 2
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
