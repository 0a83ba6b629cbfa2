"""Counterfactual scoring: the sequence-based loss and the feature baselines.

All components are oriented so that 0 is best and losses are minimized with
positive weights. The sequence loss combines normalized path length, path
cost and outcome uncertainty; the baseline loss combines latent proximity,
feature sparsity and reconstruction error of the candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .env import ACTIONS, EnvAction, GridState, GridWorld
from .errors import ConfigError
from .policy import PolicyOracle
from .rng import RngStream


@dataclass(frozen=True)
class ActionSequence:
    """Ordered actions transforming a factual state, at most ``k`` of them."""

    actions: tuple[EnvAction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, i: int) -> EnvAction:
        return self.actions[i]

    def indices(self) -> np.ndarray:
        return np.array([a.index for a in self.actions], dtype=np.int64)

    def labels(self) -> list[str]:
        return [a.label for a in self.actions]

    @classmethod
    def from_indices(cls, indices) -> "ActionSequence":
        return cls(tuple(ACTIONS[int(i)] for i in indices))


@dataclass(frozen=True)
class PropertyVector:
    """Per-counterfactual measurements; the normalized trio lives in [0,1]."""

    reachability_hat: float
    cost_hat: float
    uncertainty: float
    proximity: float = 0.0
    sparsity: int = 0
    dmc: float = 0.0

    def __post_init__(self):
        for name in ("reachability_hat", "cost_hat", "uncertainty"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0,1], got {v}")
        for name in ("proximity", "sparsity", "dmc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")

    def to_dict(self) -> dict:
        return {"reachability_hat": self.reachability_hat,
                "cost_hat": self.cost_hat,
                "uncertainty": self.uncertainty,
                "proximity": self.proximity,
                "sparsity": int(self.sparsity),
                "dmc": self.dmc}


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    theta0: float = 1.0
    theta1: float = 1.0
    theta2: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "theta0", "theta1", "theta2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(
                    f"loss weight {name} must be finite and non-negative")


def _indices(actions) -> np.ndarray:
    if isinstance(actions, ActionSequence):
        return actions.indices()
    return np.array([a.index for a in actions], dtype=np.int64)


def reachability_hat(actions, k: int) -> float:
    """Sequence length normalized by the search budget."""
    if k < 1:
        raise ConfigError("budget k must be at least 1")
    n = len(actions)
    if n > k:
        raise ValueError(f"sequence of length {n} exceeds budget {k}")
    return n / k


def cost_hat(rewards, r_max: float) -> float:
    """Mean per-step cost along the path, clamped to [0,1].

    Empty sequences cost nothing. Dividing by len(A)·r_max rather than the
    budget keeps every constant-penalty path at magnitude 1 while leaving the
    length discrimination to reachability.
    """
    if r_max <= 0:
        raise ConfigError("r_max must be positive")
    rewards = list(rewards)
    if not rewards:
        return 0.0
    raw = -sum(rewards) / (len(rewards) * r_max)
    return min(1.0, max(0.0, raw))


def stochastic_certainty(env: GridWorld, oracle: PolicyOracle, state: GridState,
                         actions, a_prime: EnvAction, n_sims: int,
                         rng: RngStream) -> float:
    """Fraction of seeded unrollings of the sequence after which the oracle
    picks ``a_prime``.

    A simulation fails when any state along the way, including the final one,
    is terminal: the desired action cannot be taken there.
    """
    if n_sims < 1:
        raise ConfigError("n_sims must be at least 1")
    arr = env.state_to_array(state)
    successes = kernels.certainty_count(
        arr, _indices(actions), a_prime.index, n_sims, oracle.greedy,
        env.hp_base, env.max_hp, env.regrow, env.config.horizon,
        env.config.shoot_reward, env.config.step_penalty, rng.state)
    return successes / n_sims


def raccer_loss(pv: PropertyVector, w: LossWeights) -> float:
    """Weighted sum of the three normalized sequence properties; lower is better."""
    return (w.alpha * pv.reachability_hat + w.beta * pv.cost_hat
            + w.gamma * pv.uncertainty)


def validity(oracle: PolicyOracle, x_cf: GridState, a_prime: EnvAction) -> bool:
    """Whether the policy actually chooses the desired action in the candidate."""
    if x_cf.terminal:
        return False
    return oracle.predict(x_cf) == a_prime


def proximity(enc_x: np.ndarray, enc_xcf: np.ndarray) -> float:
    """Squared Euclidean distance between latent embeddings."""
    diff = np.asarray(enc_x, dtype=np.float64) - np.asarray(enc_xcf, dtype=np.float64)
    return float(np.dot(diff, diff))


def sparsity(fx: np.ndarray, fxcf: np.ndarray) -> int:
    """Number of feature components the counterfactual changed."""
    fx = np.asarray(fx)
    fxcf = np.asarray(fxcf)
    if fx.shape != fxcf.shape:
        raise ValueError("feature vectors must have the same shape")
    return int(np.count_nonzero(fx != fxcf))


def dmc(model, features: np.ndarray) -> float:
    """Data-manifold closeness: squared reconstruction error of the candidate."""
    return model.reconstruction_error(features)


def dmc_excess(model, fx: np.ndarray, fxcf: np.ndarray) -> float:
    """How much further off the data manifold the candidate sits than the
    factual state; zero when the candidate reconstructs at least as well.

    Losses use this relative form so that a candidate identical to the
    factual state scores a clean zero even under an imperfect model.
    """
    return max(0.0, model.reconstruction_error(fxcf)
               - model.reconstruction_error(fx))


def baseline_loss(d_p: float, d_s: float, d_dmc: float, w: LossWeights) -> float:
    """Weighted sum of the feature-based distances; lower is better."""
    return w.theta0 * d_p + w.theta1 * d_s + w.theta2 * d_dmc
