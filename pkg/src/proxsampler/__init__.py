"""Proximal sampler with a rejection-sampling restricted Gaussian oracle.

Modules
-------
potential   target potentials and their regularity metadata
rgo         restricted Gaussian oracle (inner minimization + rejection)
sampler     the two-step Gibbs loop over chain ensembles
gaussian    exact Gaussian dynamics and closed-form divergences
density1d   deterministic 1-D density evolution on a grid
rates       convergence-rate bounds
proxopt     proximal map, proximal point method, Moreau envelope
config, experiments, cli
            experiment harness
"""
from .errors import (ConfigError, ConvergenceError, NumericError, ProxSamplerError,
                     ValidationError)
from .gaussian import (GaussianState, chi2_gauss, gaussian_forward, gaussian_step,
                       gaussian_trajectory, kl_gauss, renyi_gauss, w2_gauss)
from .potential import Potential, RegularityInfo, builtin, composite
from .proxopt import moreau_envelope, prox, prox_point_run
from .rates import RateBound, suggest_step_size
from .rgo import RgoStats, inner_minimize, rejection_sample, rgo_sample
from .sampler import ChainEnsemble, SamplerConfig, run

__version__ = "0.1.0"

__all__ = [
    "ChainEnsemble", "ConfigError", "ConvergenceError", "GaussianState", "NumericError",
    "Potential", "ProxSamplerError", "RateBound", "RegularityInfo", "RgoStats",
    "SamplerConfig", "ValidationError", "builtin", "chi2_gauss", "composite",
    "gaussian_forward", "gaussian_step", "gaussian_trajectory", "inner_minimize",
    "kl_gauss", "moreau_envelope", "prox", "prox_point_run", "rejection_sample",
    "renyi_gauss", "rgo_sample", "run", "suggest_step_size", "w2_gauss",
]
