"""Discrete kernel networks ("eignets") on the torus and the sphere."""

from .dataspace import DataSpace
from .errors import EignetError
from .filtered_ops import DEFAULT_FILTER, Multiplier, SpectralFunction, sigma, sobolev_norm, tau
from .harness import ExperimentConfig, fit_loglog_slope, make_sobolev_function, run_rate_experiment
from .kernels import (
    GTNKernel,
    ReLUKernel,
    SVDKernel,
    TwistedZonalKernel,
    kernel_from_config,
    validate_kernel,
)
from .synthesis import Network, RateSpec, build_nu, sample_network, synthesize

__version__ = "0.1.0"
