"""Tabular policy training and the oracle surface the explainers query.

The policy is a dense Q table over the enumerable grid state space. Unseen
states fall back to all-zero values, so the greedy choice there is action 0;
the fallback is logged once per process when hit through the oracle.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .env import ACTIONS, EnvAction, GridState, GridWorld
from .errors import ConfigError
from .rng import RngStream, derive_seed

logger = logging.getLogger(__name__)


@dataclass
class QTable:
    """Dense state-action values plus the provenance header that gets saved."""

    values: np.ndarray          # (n_states, n_actions) float64
    visited: np.ndarray         # (n_states,) uint8, 1 where training updated
    env_hash: str
    seed: int
    hyperparams: dict = field(default_factory=dict)
    _greedy: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def greedy(self) -> np.ndarray:
        """Greedy action per state index; ties resolve to the lowest index."""
        if self._greedy is None:
            self._greedy = np.argmax(self.values, axis=1).astype(np.int8)
        return self._greedy

    def invalidate(self) -> None:
        self._greedy = None


class PolicyOracle:
    """Deterministic action chooser over a trained table.

    Read-only after construction; safe to share across workers.
    """

    def __init__(self, env: GridWorld, table: QTable):
        if table.values.shape != (env.n_states, env.n_actions):
            raise ConfigError(
                f"policy table shape {table.values.shape} does not match the "
                f"environment ({env.n_states} states, {env.n_actions} actions)")
        self.env = env
        self.table = table
        self.greedy = table.greedy
        self._warned_fallback = False

    def predict(self, state: GridState) -> EnvAction:
        if state.terminal:
            raise ValueError("no action is defined for a terminal state")
        idx = self.env.state_index(state)
        if not self.table.visited[idx] and not self._warned_fallback:
            logger.debug("oracle queried at a state unseen during training; "
                         "falling back to zero values")
            self._warned_fallback = True
        return ACTIONS[int(self.greedy[idx])]

    def action_values(self, state: GridState) -> np.ndarray:
        return self.table.values[self.env.state_index(state)].copy()


def greedy_action(env: GridWorld, table: QTable, state: GridState) -> EnvAction:
    """Argmax over the state's action values, lowest index on ties."""
    if state.terminal:
        raise ValueError("no action is defined for a terminal state")
    return ACTIONS[int(table.greedy[env.state_index(state)])]


def train_policy(env: GridWorld, episodes: int = 50_000, alpha: float = 0.1,
                 gamma: float = 0.95, eps_start: float = 1.0,
                 eps_end: float = 0.05, replay_passes: int = 30, seed: int = 0
                 ) -> tuple[QTable, np.ndarray]:
    """Q-learning over sampled episodes.

    Each episode's transitions are replayed backwards ``replay_passes`` times,
    so a terminal reward reaches the whole trajectory instead of creeping one
    step per visit. Returns the trained table and the training curve (mean
    episode return per bucket of 100 episodes). Fully reproducible from
    (env config, seed).
    """
    if episodes < 0:
        raise ConfigError("episodes must be non-negative")
    if not 0.0 < alpha <= 1.0:
        raise ConfigError("alpha must lie in (0, 1]")
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must lie in (0, 1]")
    if not (0.0 <= eps_end <= eps_start <= 1.0):
        raise ConfigError("epsilon schedule must satisfy 0 <= eps_end <= eps_start <= 1")
    if replay_passes < 1:
        raise ConfigError("replay_passes must be at least 1")

    q = np.zeros((env.n_states, env.n_actions), dtype=np.float64)
    visited = np.zeros(env.n_states, dtype=np.uint8)
    curve = np.zeros(max(1, -(-episodes // 100)), dtype=np.float64)
    if episodes > 0:
        # lower bound on any return: an episode of nothing but step penalties
        if gamma < 1.0:
            init_value = env.config.step_penalty / (1.0 - gamma)
        else:
            init_value = env.config.step_penalty * env.config.horizon
        rng = RngStream(derive_seed(seed, "q-train"))
        kernels.train_q(env.size, env.hp_base, env.max_hp, env.regrow,
                        env.config.horizon, env.config.shoot_reward,
                        env.config.step_penalty, env.config.initial_tree_prob,
                        episodes, alpha, gamma, eps_start, eps_end,
                        replay_passes, init_value, rng.state, q, visited, curve)
    table = QTable(values=q, visited=visited, env_hash=env.config.config_hash(),
                   seed=seed, hyperparams={
                       "episodes": episodes, "alpha": alpha, "gamma": gamma,
                       "eps_start": eps_start, "eps_end": eps_end,
                       "replay_passes": replay_passes})
    logger.info("trained policy: %d episodes, %d states visited",
                episodes, int(visited.sum()))
    return table, curve


def evaluate_policy(env: GridWorld, table: QTable, n_episodes: int = 1000,
                    seed: int = 0) -> tuple[float, float]:
    """Greedy rollouts from fresh initial states.

    Returns (fraction of episodes where the dragon was shot, mean return).
    """
    rng = RngStream(derive_seed(seed, "policy-eval"))
    greedy = table.greedy
    successes = 0
    total = 0.0
    for _ in range(n_episodes):
        arr = np.zeros(env.feature_length + 2, dtype=np.int64)
        kernels.sample_initial_inplace(arr, env.config.initial_tree_prob,
                                       env.max_hp, rng.state)
        shot, ep_return, _ = kernels.greedy_rollout(
            arr, greedy, env.hp_base, env.max_hp, env.regrow,
            env.config.horizon, env.config.shoot_reward,
            env.config.step_penalty, rng.state)
        successes += int(shot)
        total += float(ep_return)
    return successes / n_episodes, total / n_episodes


def collect_rollout_states(env: GridWorld, table: QTable, n_states: int,
                           seed: int = 0, distinct: bool = False
                           ) -> list[GridState]:
    """Greedy-policy rollout states, used for training data and benchmarks.

    Rolls episodes from sampled initial states and gathers the non-terminal
    states visited, optionally deduplicated by feature content.
    """
    rng = RngStream(derive_seed(seed, "rollout-states"))
    out: list[GridState] = []
    seen: set[tuple] = set()
    oracle = PolicyOracle(env, table)
    guard = 0
    while len(out) < n_states:
        guard += 1
        if guard > 100 * n_states + 100:
            raise RuntimeError("rollout state collection failed to make progress")
        state = env.sample_initial_state(rng)
        while not state.terminal and len(out) < n_states:
            key = state.features_key()
            if not distinct or key not in seen:
                seen.add(key)
                out.append(state)
            state = env.step(state, oracle.predict(state), rng).next_state
    return out


def save_policy(table: QTable, env: GridWorld, path: str | Path) -> None:
    """JSON document: header plus one entry per visited state.

    Keys are the serialized feature vectors, values the action-value rows.
    """
    indices = np.flatnonzero(table.visited)
    feats = np.empty(env.feature_length + 2, dtype=np.int64)
    entries = {}
    for idx in indices:
        kernels.decode_index(int(idx), env.size, env.hp_base, 0, feats)
        key = ",".join(str(int(v)) for v in feats[:env.feature_length])
        entries[key] = [float(v) for v in table.values[idx]]
    doc = {
        "kind": "policy",
        "env_hash": table.env_hash,
        "grid_size": env.size,
        "hp_base": env.hp_base,
        "n_actions": env.n_actions,
        "seed": table.seed,
        "hyperparams": table.hyperparams,
        "entries": entries,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_policy(env: GridWorld, path: str | Path) -> QTable:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"policy file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"policy file is not valid JSON: {exc}") from exc
    if doc.get("kind") != "policy":
        raise ConfigError(f"{path} is not a policy file")
    if doc.get("grid_size") != env.size or doc.get("hp_base") != env.hp_base:
        raise ConfigError("policy file geometry does not match the environment")
    if doc.get("env_hash") != env.config.config_hash():
        logger.warning("policy was trained under a different environment config "
                       "(hash %s != %s)", doc.get("env_hash"), env.config.config_hash())
    q = np.zeros((env.n_states, env.n_actions), dtype=np.float64)
    visited = np.zeros(env.n_states, dtype=np.uint8)
    for key, row in doc["entries"].items():
        feats = np.array([int(v) for v in key.split(",")] + [0, 0], dtype=np.int64)
        idx = int(kernels.state_index(feats, env.hp_base))
        q[idx] = row
        visited[idx] = 1
    return QTable(values=q, visited=visited, env_hash=doc["env_hash"],
                  seed=doc["seed"], hyperparams=doc.get("hyperparams", {}))
