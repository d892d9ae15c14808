"""Pool-based Bayesian optimization with a collision-free latent space.

A deep-kernel GP selects candidates from a fixed pool by UCB; the encoder is
trained on the marginal likelihood plus a penalty that keeps points with
different labels apart in latent space. Baselines (unregularized latent
optimization, GP on raw inputs, random search), synthetic benchmarks, and a
CLI experiment harness are included.
"""

__version__ = "0.1.0"

from .acquisition import BetaSchedule, PoolExhaustedError, beta, select, ucb_score
from .benchmarks import BenchmarkInstance, benchmark_names, make_pool
from .collision import (
    PenaltyConfig,
    calibrate_rho,
    collision_metric,
    estimate_lambda,
    pair_loss,
    penalty_term,
    point_lambda,
)
from .driver import STRATEGIES, RunConfig, RunResult, TraceRow, regret_summary, run
from .encoder import EncoderSpec, pretrain_autoencoder
from .estimators import CollisionFreeGPRegressor, LatentSpaceEncoder
from .experiment import (
    ConfigError,
    ExperimentError,
    dump_latent,
    load_config,
    run_experiment,
    sweep,
)
from .gp import DeepKernelModel, GPError, GPFitError, GPHyper, fit, posterior

__all__ = [
    "__version__",
    "BetaSchedule",
    "PoolExhaustedError",
    "beta",
    "select",
    "ucb_score",
    "BenchmarkInstance",
    "benchmark_names",
    "make_pool",
    "PenaltyConfig",
    "calibrate_rho",
    "collision_metric",
    "estimate_lambda",
    "pair_loss",
    "penalty_term",
    "point_lambda",
    "STRATEGIES",
    "RunConfig",
    "RunResult",
    "TraceRow",
    "regret_summary",
    "run",
    "EncoderSpec",
    "pretrain_autoencoder",
    "CollisionFreeGPRegressor",
    "LatentSpaceEncoder",
    "ConfigError",
    "ExperimentError",
    "dump_latent",
    "load_config",
    "run_experiment",
    "sweep",
    "DeepKernelModel",
    "GPError",
    "GPFitError",
    "GPHyper",
    "fit",
    "posterior",
]
