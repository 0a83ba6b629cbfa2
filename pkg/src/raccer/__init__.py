"""Counterfactual explanations for sequential decision policies.

Given a black-box policy, a state and a desired action, the engine searches
for a nearby, reachable situation in which the policy would pick that action,
scoring candidates on reachability, path cost and outcome certainty. Two
feature-based baselines (genetic and tree search on a latent-distance loss)
and a benchmark harness ship alongside.
"""

from .accel import NUMBA_ENABLED
from .autoencoder import MlpAutoencoder, gradient_check, train_autoencoder
from .benchmark import (BenchmarkRecord, BenchmarkResult, FactualQuery,
                        run_benchmark, sample_factual_dataset)
from .env import (ACTIONS, EnvAction, GridConfig, GridState, GridWorld,
                  Transition, action_by_label)
from .errors import ConfigError
from .genetic import GaConfig, run_genetic
from .policy import (PolicyOracle, QTable, collect_rollout_states,
                     evaluate_policy, load_policy, save_policy, train_policy)
from .properties import (ActionSequence, LossWeights, PropertyVector,
                         baseline_loss, raccer_loss, stochastic_certainty)
from .rng import RngStream, derive_seed
from .runconfig import RunConfig
from .search import Counterfactual, SearchConfig, TreeSearch, search

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "ActionSequence",
    "BenchmarkRecord",
    "BenchmarkResult",
    "ConfigError",
    "Counterfactual",
    "EnvAction",
    "FactualQuery",
    "GaConfig",
    "GridConfig",
    "GridState",
    "GridWorld",
    "LossWeights",
    "MlpAutoencoder",
    "NUMBA_ENABLED",
    "PolicyOracle",
    "PropertyVector",
    "QTable",
    "RngStream",
    "RunConfig",
    "SearchConfig",
    "Transition",
    "TreeSearch",
    "baseline_loss",
    "collect_rollout_states",
    "derive_seed",
    "evaluate_policy",
    "gradient_check",
    "load_policy",
    "raccer_loss",
    "run_benchmark",
    "run_genetic",
    "sample_factual_dataset",
    "save_policy",
    "search",
    "stochastic_certainty",
    "train_autoencoder",
    "train_policy",
    "action_by_label",
    "__version__",
]
