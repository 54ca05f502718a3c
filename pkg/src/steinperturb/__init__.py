"""Goodness-of-fit testing with perturbation-augmented kernelized Stein discrepancy."""

from .exceptions import InputError
from .kernels import IMQ, RBF, KernelSpec, median_heuristic
from .models import (GaussianMixtureParams, RBMParams, ScoreModel,
                     SensorPosteriorParams, TBananaMixtureParams,
                     bimodal_gaussian_1d, gaussian_mixture_model, model_from_spec,
                     rbm_enumerated_mixture, rbm_model, rbm_multimodal_params,
                     sensor_posterior_model, synthetic_sensor_data, t_banana_model)
from .modes import Mode, ModeSet, find_modes, init_mixed, init_uniform, merge_modes
from .perturb import (BARKER, MH, JumpKernel, PerturbationKernel, accept_prob,
                      identity_kernel, jump_perturbation, limiting_density_1d,
                      perturb_sample, propose)
from .samplers import (sample_gaussian_mixture, sample_rbm_gibbs,
                       sample_rbm_shifted, sample_t_banana)
from .spksd import (KernelCollection, PerturbedEnsemble, build_ensemble,
                    ensemble_gram, grid_collection, ospksd_test, power_proxy,
                    spksd_stat, spksd_test, tilde_u)
from .stein import (TestResult, bootstrap_stats, fisher_divergence_mc, ksd_test,
                    ksd_ustat, ksd_vstat, stein_gram, stein_kernel_eval)

__version__ = "0.1.0"
