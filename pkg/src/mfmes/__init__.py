"""Multi-fidelity max-value entropy search.

Bayesian optimization that picks both where to query and at which fidelity,
by maximizing the information gained about the optimum value per unit query
cost.  Includes a pending-aware acquisition for asynchronous parallel
workers, analytic/quadrature entropy reductions, random-feature posterior
sampling, a multi-fidelity GP with the latent-factor kernel, seeded
benchmarks, and a discrete-event experiment harness with regret traces.
"""

from ._version import __version__
from .acquisition import (
    AcquisitionResult,
    CostVector,
    info_gain,
    run_sequential,
    score_candidates,
    select_next,
)
from .benchmarks import (
    MultiFidelityObjective,
    inference_regret,
    latin_hypercube_init,
    list_benchmarks,
    make_objective,
    simple_regret,
)
from .config import (
    ExperimentConfig,
    config_hash,
    load_config,
    serialize_config,
)
from .entropy import (
    QuadratureSpec,
    bounded_entropy_core,
    cross_fidelity_density,
    cross_fidelity_entropy,
    gaussian_entropy,
    truncnorm_entropy,
)
from .errors import ConfigError, InputError, ModelError
from .experiment import SummaryTable, run, summarize
from .gp import ConditionalMoments, JointMoments, MultiFidelityGP
from .hyperopt import HyperparamBounds, default_bounds, optimize_hyperparams
from .kernels import SlfmHyperparams, kernel_matrix
from .parallel import (
    PendingSet,
    eta_density,
    parallel_info_gain,
    select_next_parallel,
    simulate_async,
)
from .rfm import (
    RfmFeatureMap,
    build_feature_map,
    fit_gumbel_max,
    sample_max_value,
    sample_max_values_gumbel,
    sample_posterior_weights,
)
from .trace import FLAG_ERROR, FLAG_INIT, RegretTrace, trace_header
from .validation import augment, split_augmented

__all__ = [
    "__version__",
    "AcquisitionResult",
    "ConditionalMoments",
    "ConfigError",
    "CostVector",
    "ExperimentConfig",
    "FLAG_ERROR",
    "FLAG_INIT",
    "HyperparamBounds",
    "InputError",
    "JointMoments",
    "ModelError",
    "MultiFidelityGP",
    "MultiFidelityObjective",
    "PendingSet",
    "QuadratureSpec",
    "RegretTrace",
    "RfmFeatureMap",
    "SlfmHyperparams",
    "SummaryTable",
    "augment",
    "bounded_entropy_core",
    "build_feature_map",
    "config_hash",
    "cross_fidelity_density",
    "cross_fidelity_entropy",
    "default_bounds",
    "eta_density",
    "fit_gumbel_max",
    "gaussian_entropy",
    "info_gain",
    "inference_regret",
    "kernel_matrix",
    "latin_hypercube_init",
    "list_benchmarks",
    "load_config",
    "make_objective",
    "optimize_hyperparams",
    "parallel_info_gain",
    "run",
    "run_sequential",
    "sample_max_value",
    "sample_max_values_gumbel",
    "sample_posterior_weights",
    "score_candidates",
    "select_next",
    "select_next_parallel",
    "serialize_config",
    "simple_regret",
    "simulate_async",
    "split_augmented",
    "summarize",
    "trace_header",
    "truncnorm_entropy",
]
