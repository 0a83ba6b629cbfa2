"""Heuristic tree search for action-path counterfactuals.

The engine grows a determinized tree of action sequences from the factual
state: UCT picks the branch to deepen, every legal action is expanded at once
with ``d`` sampled successors, and each new node is scored by the configured
loss. After the iteration budget, every evaluated non-terminal node is a
candidate; the best valid one (the policy picks the desired action there)
becomes the counterfactual. The same engine serves the sequence-based loss
("raccer") and the feature-distance baseline ("bo-ts").
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .env import ACTIONS, EnvAction, GridState, GridWorld
from .errors import ConfigError
from .policy import PolicyOracle
from .properties import (ActionSequence, LossWeights, PropertyVector,
                         baseline_loss, cost_hat, proximity, raccer_loss,
                         reachability_hat, sparsity)
from .rng import RngStream, derive_seed

LOSS_KINDS = ("raccer", "bo-ts")


@dataclass
class SearchConfig:
    """Budget and loss selection for one search query.

    T: iteration count; N: simulations per certainty estimate; k: maximum
    sequence length; d: determinization samples per (node, action).
    """

    T: int = 300
    N: int = 100
    k: int = 5
    d: int = 5
    c_explore: float = math.sqrt(2.0)
    loss: str = "raccer"
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    record_propagations: bool = False

    def validate(self) -> None:
        for name in ("T", "N", "k", "d"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"search parameter {name} must be at least 1")
        if not (math.isfinite(self.c_explore) and self.c_explore >= 0):
            raise ConfigError("c_explore must be a non-negative real")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSS_KINDS}")


class SearchNode:
    """One concrete state in the tree, reached by ``path`` from the root."""

    __slots__ = ("state", "arr", "path", "rewards", "depth", "uid",
                 "parent", "val", "visits", "buckets")

    def __init__(self, state: GridState, arr: np.ndarray, path: tuple,
                 rewards: tuple, uid: int, parent: "SearchNode | None"):
        self.state = state
        self.arr = arr
        self.path = path
        self.rewards = rewards
        self.depth = len(path)
        self.uid = uid
        self.parent = parent
        self.val: float | None = None
        self.visits = 0
        self.buckets: list[DeterminizationBucket] | None = None

    @property
    def expanded(self) -> bool:
        return self.buckets is not None

    def __repr__(self) -> str:
        return (f"SearchNode(depth={self.depth}, path={self.path}, "
                f"val={self.val}, visits={self.visits})")


class DeterminizationBucket:
    """Sampled successors of one action plus the edge statistics.

    ``edge_value`` is the running average of every val propagated through the
    edge; ``counts[i]`` is how often successor ``i`` was drawn at expansion.
    """

    __slots__ = ("action", "children", "counts", "edge_visits", "edge_sum")

    def __init__(self, action: EnvAction):
        self.action = action
        self.children: list[SearchNode] = []
        self.counts: list[int] = []
        self.edge_visits = 0
        self.edge_sum = 0.0

    @property
    def edge_value(self) -> float:
        return self.edge_sum / self.edge_visits if self.edge_visits else 0.0


@dataclass(frozen=True)
class Counterfactual:
    """A state where the policy picks the desired action, with its scores."""

    state: GridState
    actions: ActionSequence
    properties: PropertyVector
    loss: float
    method: str


def uct_score(edge_value: float, parent_visits: int, edge_visits: int,
              c_explore: float) -> float:
    """Selection score of a visited edge: negated loss plus exploration bonus.

    Loss is minimized, so the exploitation term enters negated; higher score
    means more attractive.
    """
    return -edge_value + c_explore * math.sqrt(
        math.log(parent_visits) / edge_visits)


def uct_select(node: SearchNode, c_explore: float) -> EnvAction:
    """Pick the action to follow from an expanded node.

    Unvisited edges first (lowest action index among them), then the highest
    scoring edge, ties again by action index.
    """
    if not node.expanded or node.visits < 1:
        raise ValueError("uct_select requires an expanded, visited node")
    for bucket in node.buckets:
        if bucket.edge_visits == 0:
            return bucket.action
    best = None
    best_score = -math.inf
    for bucket in node.buckets:
        score = uct_score(bucket.edge_value, node.visits, bucket.edge_visits,
                          c_explore)
        if score > best_score:
            best = bucket.action
            best_score = score
    return best


class TreeSearch:
    """Search state for one (factual state, desired action) query.

    Every random draw derives from the config seed: the selection walk uses
    one sequential stream, while expansion sampling and certainty estimates
    are seeded by the node's action path. Path-keyed seeding makes node
    values independent of iteration order, so a longer budget can only grow
    the candidate set without disturbing already-evaluated nodes.
    """

    def __init__(self, env: GridWorld, oracle: PolicyOracle, x: GridState,
                 a_prime: EnvAction, config: SearchConfig, autoencoder=None):
        config.validate()
        if x.terminal:
            raise ValueError("cannot explain a terminal state")
        if not 0 <= a_prime.index < env.n_actions:
            raise ValueError(f"action index {a_prime.index} out of range")
        if config.loss == "bo-ts" and autoencoder is None:
            raise ConfigError("bo-ts loss requires an autoencoder model")
        self.env = env
        self.oracle = oracle
        self.a_prime = a_prime
        self.config = config
        self.model = autoencoder
        self.weights = config.weights
        self.r_max = env.config.r_max
        self._walk_rng = RngStream(derive_seed(config.seed, "walk"))
        self._cert_cache: dict[tuple, float] = {}
        self.propagation_log: list[tuple] | None = (
            [] if config.record_propagations else None)

        self._root_features = env.encode_features(x)
        if self.model is not None:
            self._root_latent = self.model.encode(self._root_features)
            self._root_recon = self.model.reconstruction_error(self._root_features)

        self.nodes: list[SearchNode] = []
        self.root = self._new_node(x, env.state_to_array(x), (), (), None)
        self.root.val = self._evaluate(self.root)

    # -- node plumbing ---------------------------------------------------

    def _new_node(self, state: GridState, arr: np.ndarray, path: tuple,
                  rewards: tuple, parent: SearchNode | None) -> SearchNode:
        node = SearchNode(state, arr, path, rewards, len(self.nodes), parent)
        self.nodes.append(node)
        return node

    def _certainty(self, path: tuple) -> float:
        """Fraction of seeded unrollings of ``path`` from the root after which
        the oracle picks the desired action; cached per action path."""
        cached = self._cert_cache.get(path)
        if cached is not None:
            return cached
        cfg = self.config
        env = self.env
        rng = RngStream(derive_seed(cfg.seed, "cert", *path))
        successes = kernels.certainty_count(
            self.root.arr, np.array(path, dtype=np.int64), self.a_prime.index,
            cfg.N, self.oracle.greedy, env.hp_base, env.max_hp, env.regrow,
            env.config.horizon, env.config.shoot_reward,
            env.config.step_penalty, rng.state)
        value = successes / cfg.N
        self._cert_cache[path] = value
        return value

    def _evaluate(self, node: SearchNode) -> float:
        if self.config.loss == "raccer":
            pv = PropertyVector(
                reachability_hat=reachability_hat(node.path, self.config.k),
                cost_hat=cost_hat(node.rewards, self.r_max),
                uncertainty=1.0 - self._certainty(node.path))
            return raccer_loss(pv, self.weights)
        feats = self.env.encode_features(node.state)
        d_p = proximity(self._root_latent, self.model.encode(feats))
        d_s = sparsity(self._root_features, feats)
        d_dmc = max(0.0, self.model.reconstruction_error(feats) - self._root_recon)
        return baseline_loss(d_p, d_s, d_dmc, self.weights)

    # -- the four phases ---------------------------------------------------

    def select(self) -> SearchNode:
        """Walk expanded nodes by UCT, sampling a concrete successor from the
        chosen bucket in proportion to its recorded sample counts."""
        node = self.root
        while node.expanded:
            action = uct_select(node, self.config.c_explore)
            node = self._pick_child(node.buckets[action.index])
        return node

    def _pick_child(self, bucket: DeterminizationBucket) -> SearchNode:
        total = sum(bucket.counts)
        if len(bucket.children) == 1:
            return bucket.children[0]
        draw = self._walk_rng.randint(total)
        acc = 0
        for child, count in zip(bucket.children, bucket.counts):
            acc += count
            if draw < acc:
                return child
        return bucket.children[-1]

    def expand(self, node: SearchNode) -> list[SearchNode]:
        """Create every action's determinization bucket under ``node``.

        Terminal nodes and nodes at the depth budget are leaves; expanding
        them is a no-op returning no children.
        """
        if node.state.terminal or node.depth >= self.config.k:
            return []
        if node.expanded:
            raise ValueError("node already expanded")
        cfg = self.config
        env = self.env
        rng = RngStream(derive_seed(cfg.seed, "expand", *node.path))
        width = node.arr.shape[0]
        out_states = np.empty((cfg.d, width), dtype=np.int64)
        out_rewards = np.empty(cfg.d, dtype=np.float64)
        out_counts = np.empty(cfg.d, dtype=np.int64)
        node.buckets = []
        created: list[SearchNode] = []
        for action in ACTIONS:
            n_unique = kernels.expand_samples(
                node.arr, action.index, cfg.d, env.max_hp, env.regrow,
                env.config.horizon, env.config.shoot_reward,
                env.config.step_penalty, rng.state,
                out_states, out_rewards, out_counts)
            bucket = DeterminizationBucket(action)
            for j in range(n_unique):
                arr = out_states[j].copy()
                child = self._new_node(env.state_from_array(arr), arr,
                                       node.path + (action.index,),
                                       node.rewards + (float(out_rewards[j]),),
                                       node)
                bucket.children.append(child)
                bucket.counts.append(int(out_counts[j]))
            node.buckets.append(bucket)
            created.extend(bucket.children)
        return created

    def backpropagate(self, leaves: list[SearchNode]) -> None:
        """Push each leaf's val up to the root, updating visit counts and the
        running edge averages; vals of intermediate nodes are never touched."""
        for leaf in leaves:
            value = leaf.val
            node = leaf
            node.visits += 1
            while node.parent is not None:
                bucket = node.parent.buckets[node.path[-1]]
                bucket.edge_visits += 1
                bucket.edge_sum += value
                if self.propagation_log is not None:
                    self.propagation_log.append(
                        (node.parent.uid, bucket.action.index, value))
                node = node.parent
                node.visits += 1

    def iterate(self) -> None:
        node = self.select()
        children = self.expand(node)
        if not children:
            self.backpropagate([node])
            return
        for child in children:
            child.val = self._evaluate(child)
        self.backpropagate(children)

    def run(self, deadline: float | None = None) -> None:
        """Run the configured iteration budget; an optional monotonic-clock
        deadline cuts the loop short, keeping results found so far."""
        for _ in range(self.config.T):
            if deadline is not None and time.monotonic() >= deadline:
                break
            self.iterate()

    # -- result extraction -------------------------------------------------

    def candidates(self) -> list[SearchNode]:
        return [n for n in self.nodes
                if n.val is not None and not n.state.terminal]

    def result(self) -> Optional[Counterfactual]:
        """Best valid candidate as a counterfactual, or None."""
        valid = [n for n in self.candidates()
                 if self.oracle.predict(n.state) == self.a_prime]
        if not valid:
            return None
        winner = min(valid, key=lambda n: (n.val, n.uid))
        return self._to_counterfactual(winner)

    def _to_counterfactual(self, node: SearchNode) -> Counterfactual:
        feats = self.env.encode_features(node.state)
        if self.model is not None:
            d_p = proximity(self._root_latent, self.model.encode(feats))
            d_dmc = max(0.0, self.model.reconstruction_error(feats)
                        - self._root_recon)
        else:
            d_p = 0.0
            d_dmc = 0.0
        pv = PropertyVector(
            reachability_hat=reachability_hat(node.path, self.config.k),
            cost_hat=cost_hat(node.rewards, self.r_max),
            uncertainty=1.0 - self._certainty(node.path),
            proximity=d_p,
            sparsity=sparsity(self._root_features, feats),
            dmc=d_dmc)
        return Counterfactual(state=node.state,
                              actions=ActionSequence.from_indices(node.path),
                              properties=pv,
                              loss=float(node.val),
                              method=self.config.loss)


def search(env: GridWorld, oracle: PolicyOracle, x: GridState,
           a_prime: EnvAction, config: SearchConfig, autoencoder=None,
           deadline: float | None = None) -> Optional[Counterfactual]:
    """Search for the lowest-loss valid counterfactual of (x, a_prime)."""
    tree = TreeSearch(env, oracle, x, a_prime, config, autoencoder)
    tree.run(deadline)
    return tree.result()
