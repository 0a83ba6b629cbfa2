"""Feature-space counterfactual search with a (mu + lambda) genetic algorithm.

Candidates are raw feature vectors; the dragon's coordinates are pinned to
the factual state, everything else mutates within its domain. Fitness is the
feature-distance loss (latent proximity + sparsity + excess reconstruction
error); individuals breaking game fidelity keep their slot with infinite
fitness so the population size never shrinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .env import EnvAction, GridState, GridWorld
from .errors import ConfigError
from .policy import PolicyOracle
from .properties import (ActionSequence, LossWeights, PropertyVector,
                         baseline_loss, dmc_excess, proximity, sparsity)
from .rng import derive_seed
from .search import Counterfactual

DRAGON_SLOTS = (2, 3)


@dataclass
class Individual:
    """One candidate feature vector plus its evaluation flags."""

    features: np.ndarray
    fitness: float = math.inf
    feasible: bool = False
    valid: bool = False


@dataclass
class GaConfig:
    """Population sizing and operator rates; lam is the offspring count."""

    mu: int = 100
    lam: int = 900
    generations: int = 30
    mutation_prob: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.mu < 1 or self.lam < 1:
            raise ConfigError("mu and lambda must be at least 1")
        if self.generations < 1:
            raise ConfigError("generations must be at least 1")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError("mutation_prob must lie in [0,1]")


def _domain_high(env: GridWorld) -> np.ndarray:
    """Inclusive upper bound per feature component."""
    s = env.size
    high = np.empty(env.feature_length, dtype=np.int64)
    high[:4] = s - 1
    high[4:] = env.hp_max
    return high


def _mutable_slots(env: GridWorld) -> np.ndarray:
    return np.array([i for i in range(env.feature_length)
                     if i not in DRAGON_SLOTS], dtype=np.int64)


def init_population(env: GridWorld, x_features: np.ndarray, size: int,
                    rng: np.random.Generator) -> list[Individual]:
    """Seed the population around the factual vector.

    The factual vector itself always occupies slot zero; the rest of the
    first half are copies with 1-3 mutable components resampled, the second
    half uniform feasible draws. Dragon coordinates are copied throughout.
    """
    if size < 1:
        raise ConfigError("population size must be at least 1")
    base = np.rint(np.asarray(x_features, dtype=np.float64)).astype(np.int64)
    high = _domain_high(env)
    mutable = _mutable_slots(env)
    out = [Individual(features=base.copy())]
    n_copies = size // 2
    for _ in range(max(0, n_copies - 1)):
        feats = base.copy()
        n_mut = int(rng.integers(1, 4))
        slots = rng.choice(mutable, size=n_mut, replace=False)
        for slot in slots:
            feats[slot] = rng.integers(0, high[slot] + 1)
        out.append(Individual(features=feats))
    while len(out) < size:
        feats = base.copy()
        for slot in mutable:
            feats[slot] = rng.integers(0, high[slot] + 1)
        if env.check_game_fidelity(feats.astype(np.float64)):
            out.append(Individual(features=feats))
    return out


def mutate(env: GridWorld, ind: Individual, p: float,
           rng: np.random.Generator) -> Individual:
    """Resample each mutable component with probability p; dragon untouched."""
    high = _domain_high(env)
    feats = ind.features.copy()
    for slot in _mutable_slots(env):
        if rng.random() < p:
            feats[slot] = rng.integers(0, high[slot] + 1)
    return Individual(features=feats)


def crossover(env: GridWorld, a: Individual, b: Individual,
              rng: np.random.Generator) -> Individual:
    """Uniform crossover per component; dragon inherited from parent a."""
    take_b = rng.random(env.feature_length) < 0.5
    feats = np.where(take_b, b.features, a.features)
    feats[list(DRAGON_SLOTS)] = a.features[list(DRAGON_SLOTS)]
    return Individual(features=feats.astype(np.int64))


def _feasible_mask(env: GridWorld, feats: np.ndarray,
                   dragon: np.ndarray) -> np.ndarray:
    """Vectorized game-fidelity plus actionability check for integer rows."""
    s = env.size
    mid = env.mid
    ok = np.all(feats[:, :4] >= 0, axis=1) & np.all(feats[:, :4] < s, axis=1)
    hp = feats[:, 4:4 + s]
    ok &= np.all(hp >= 0, axis=1) & np.all(hp <= env.hp_max, axis=1)
    ok &= ~((feats[:, 0] == feats[:, 2]) & (feats[:, 1] == feats[:, 3]))
    rows = np.arange(feats.shape[0])
    agent_hp = feats[rows, 4 + np.clip(feats[:, 0], 0, s - 1)]
    dragon_hp = feats[rows, 4 + np.clip(feats[:, 2], 0, s - 1)]
    ok &= ~((feats[:, 1] == mid) & (agent_hp > 0))
    ok &= ~((feats[:, 3] == mid) & (dragon_hp > 0))
    ok &= np.all(feats[:, 2:4] == dragon[None, :], axis=1)
    return ok


def _state_indices(env: GridWorld, feats: np.ndarray) -> np.ndarray:
    """Row-wise policy-table indices, mirroring the kernel's packing."""
    s = env.size
    agent = feats[:, 0] * s + feats[:, 1]
    dragon = feats[:, 2] * s + feats[:, 3]
    idx = agent * (s * s) + dragon
    for r in range(s):
        idx = idx * env.hp_base + feats[:, 4 + r]
    return idx


def _sort_order(feats: np.ndarray, fitness: np.ndarray) -> np.ndarray:
    """Stable order by fitness, ties broken lexicographically by features."""
    keys = tuple(feats[:, i] for i in range(feats.shape[1] - 1, -1, -1))
    return np.lexsort(keys + (fitness,))


class _Evaluator:
    """Batched fitness scoring against one factual vector."""

    def __init__(self, env: GridWorld, oracle: PolicyOracle, model,
                 x_features: np.ndarray, a_prime: EnvAction,
                 weights: LossWeights):
        self.env = env
        self.oracle = oracle
        self.model = model
        self.weights = weights
        self.a_prime = a_prime
        self.x = np.rint(np.asarray(x_features, dtype=np.float64)).astype(np.int64)
        self.x_latent = model.encode(self.x.astype(np.float64))
        self.x_recon = model.reconstruction_error(self.x.astype(np.float64))

    def score(self, population: list[Individual]) -> None:
        feats = np.stack([ind.features for ind in population])
        feasible = _feasible_mask(self.env, feats, self.x[2:4])
        raw = feats.astype(np.float64)
        latents = self.model.encode(raw)
        d_p = np.sum((latents - self.x_latent[None, :]) ** 2, axis=1)
        d_s = np.sum(feats != self.x[None, :], axis=1)
        d_dmc = np.maximum(0.0, self.model.reconstruction_errors(raw) - self.x_recon)
        w = self.weights
        fitness = w.theta0 * d_p + w.theta1 * d_s + w.theta2 * d_dmc
        # All three terms are self-distances when the row equals x; force the
        # exact cancellation that batched float accumulation can miss.
        fitness[d_s == 0] = 0.0
        idx = _state_indices(self.env, feats)
        valid = self.oracle.greedy[idx] == self.a_prime.index
        for i, ind in enumerate(population):
            ind.feasible = bool(feasible[i])
            ind.fitness = float(fitness[i]) if feasible[i] else math.inf
            ind.valid = bool(valid[i]) and ind.feasible


def run_genetic(x: GridState, a_prime: EnvAction, oracle: PolicyOracle,
                autoencoder, cfg: GaConfig,
                weights: LossWeights | None = None
                ) -> tuple[Optional[Counterfactual], list[float]]:
    """Evolve feature vectors toward the lowest feature-distance loss.

    Returns the best individual that is both feasible and picked-as-desired
    by the policy, decoded into a counterfactual with an empty action
    sequence, plus the best feasible fitness after each selection round.
    """
    cfg.validate()
    if x.terminal:
        raise ValueError("cannot explain a terminal state")
    env = oracle.env
    weights = weights or LossWeights()
    rng = np.random.default_rng(derive_seed(cfg.seed, "ga"))
    x_features = env.encode_features(x)
    evaluator = _Evaluator(env, oracle, autoencoder, x_features, a_prime, weights)

    population = init_population(env, x_features, cfg.mu + cfg.lam, rng)
    evaluator.score(population)
    best: Individual | None = None
    history: list[float] = []

    def track(pop: list[Individual]) -> None:
        nonlocal best
        feasible_fits = [ind.fitness for ind in pop if ind.feasible]
        history.append(min(feasible_fits) if feasible_fits else math.inf)
        for ind in pop:
            if ind.valid and (best is None or ind.fitness < best.fitness):
                best = Individual(ind.features.copy(), ind.fitness,
                                  ind.feasible, ind.valid)

    def select(pop: list[Individual]) -> list[Individual]:
        feats = np.stack([ind.features for ind in pop])
        fitness = np.array([ind.fitness for ind in pop])
        order = _sort_order(feats, fitness)
        return [pop[i] for i in order[:cfg.mu]]

    track(population)
    parents = select(population)
    high = _domain_high(env)
    mutable = _mutable_slots(env)
    for _ in range(cfg.generations):
        pa = rng.integers(0, cfg.mu, size=cfg.lam)
        pb = rng.integers(0, cfg.mu, size=cfg.lam)
        feats_a = np.stack([parents[i].features for i in pa])
        feats_b = np.stack([parents[i].features for i in pb])
        take_b = rng.random((cfg.lam, env.feature_length)) < 0.5
        children = np.where(take_b, feats_b, feats_a)
        children[:, list(DRAGON_SLOTS)] = feats_a[:, list(DRAGON_SLOTS)]
        mut = rng.random((cfg.lam, env.feature_length)) < cfg.mutation_prob
        mut[:, list(DRAGON_SLOTS)] = False
        draws = np.empty_like(children)
        for slot in range(env.feature_length):
            draws[:, slot] = rng.integers(0, high[slot] + 1, size=cfg.lam)
        children = np.where(mut & np.isin(np.arange(env.feature_length), mutable)[None, :],
                            draws, children)
        offspring = [Individual(features=row) for row in children]
        evaluator.score(offspring)
        merged = parents + offspring
        track(merged)
        parents = select(merged)

    if best is None:
        return None, history
    state = env.decode_features(best.features.astype(np.float64))
    feats = best.features.astype(np.float64)
    pv = PropertyVector(
        reachability_hat=1.0, cost_hat=1.0, uncertainty=1.0,
        proximity=proximity(evaluator.x_latent, autoencoder.encode(feats)),
        sparsity=sparsity(x_features, feats),
        dmc=dmc_excess(autoencoder, x_features, feats))
    cf = Counterfactual(state=state, actions=ActionSequence(),
                        properties=pv, loss=best.fitness, method="bo-gen")
    return cf, history
