"""Evaluation protocol: sample factual queries from policy rollouts, explain
each with every configured method, score all six properties uniformly, and
aggregate per-method means.

Sequence properties of feature-only counterfactuals (the genetic method) are
recovered by locating the candidate inside a determinized execution tree of
depth k; candidates that cannot be found keep the worst normalized value for
the whole sequence triple. Wall-clock timings stay in memory; output files
contain no timestamps so reruns compare byte for byte.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import multiprocessing
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .env import ACTIONS, EnvAction, GridState, GridWorld
from .errors import ConfigError
from .genetic import GaConfig, run_genetic
from .policy import PolicyOracle
from .properties import (ActionSequence, LossWeights, baseline_loss, cost_hat,
                         dmc_excess, proximity, raccer_loss, reachability_hat,
                         sparsity, stochastic_certainty)
from .rng import RngStream, derive_seed
from .search import Counterfactual, SearchConfig, search

log = logging.getLogger(__name__)

METHODS = ("raccer", "bo-gen", "bo-ts")
WORST = 1.0

RECORD_COLUMNS = ("query_id", "method", "generated", "reachability_hat",
                  "cost_hat", "uncertainty", "proximity", "sparsity", "dmc",
                  "raccer_loss", "baseline_loss")

PROPERTY_KEYS = ("reachability_hat", "cost_hat", "uncertainty", "proximity",
                 "sparsity", "dmc", "raccer_loss", "baseline_loss")


@dataclass(frozen=True)
class FactualQuery:
    """One (state, alternative action) pair to explain."""

    query_id: str
    state: GridState
    desired_action: EnvAction


@dataclass
class BenchmarkRecord:
    """Scored outcome of one (query, method) cell.

    When nothing was generated every property field carries the worst-case
    placeholder; such rows never enter the aggregated means. ``wall_ms`` is
    runtime bookkeeping and never serialized.
    """

    query_id: str
    method: str
    generated: bool
    reachability_hat: float
    cost_hat: float
    uncertainty: float
    proximity: float
    sparsity: float
    dmc: float
    raccer_loss: float
    baseline_loss: float
    wall_ms: float = 0.0


@dataclass
class BenchmarkResult:
    queries: list
    records: list
    summary: dict
    ga_histories: dict = field(default_factory=dict)


def sample_factual_dataset(env: GridWorld, oracle: PolicyOracle,
                           n_states: int, seed: int) -> list[FactualQuery]:
    """Distinct non-terminal rollout states, one query per non-greedy action."""
    from .policy import collect_rollout_states
    states = collect_rollout_states(env, oracle.table, n_states, seed=seed,
                                    distinct=True)
    queries = []
    for si, state in enumerate(states):
        greedy = oracle.predict(state)
        for action in ACTIONS:
            if action == greedy:
                continue
            queries.append(FactualQuery(
                query_id=f"s{si:03d}-{action.label}",
                state=state, desired_action=action))
    return queries


def locate_in_execution_tree(env: GridWorld, x: GridState, x_cf_features,
                             k: int, d: int, rng: RngStream
                             ) -> Optional[ActionSequence]:
    """Shortest action sequence from x reaching the candidate's features.

    Breadth-first determinized expansion, width d per action, matching only
    non-terminal states. Fidelity-violating feature vectors are unreachable
    by construction.
    """
    if k < 1:
        raise ConfigError("tree depth k must be at least 1")
    feats = np.asarray(x_cf_features, dtype=np.float64)
    if not env.check_game_fidelity(feats):
        return None
    target = env.features_index(feats)
    n = env.n_states
    visited = np.zeros(n, dtype=np.uint8)
    parent = np.empty(n, dtype=np.int64)
    parent_act = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    out = np.empty(k, dtype=np.int64)
    length = kernels.bfs_locate(
        env.state_to_array(x), target, k, d, env.hp_base, env.max_hp,
        env.regrow, env.config.horizon, env.config.shoot_reward,
        env.config.step_penalty, rng.state, visited, parent, parent_act,
        queue, out)
    if length < 0:
        return None
    return ActionSequence.from_indices(out[:length])


def score_counterfactual(env: GridWorld, oracle: PolicyOracle, model,
                         weights: LossWeights, query: FactualQuery,
                         cf: Optional[Counterfactual], *, k: int, d: int,
                         n_sims: int, seed: int) -> BenchmarkRecord:
    """Uniformly score one outcome; the scoring rng is query-derived so the
    record does not depend on the generating method's internal draws."""
    if cf is None:
        pv = dict.fromkeys(PROPERTY_KEYS[:6], WORST)
        return BenchmarkRecord(
            query_id=query.query_id, method="", generated=False,
            raccer_loss=weights.alpha + weights.beta + weights.gamma,
            baseline_loss=weights.theta0 * WORST + weights.theta1 * WORST
            + weights.theta2 * WORST,
            **pv)

    fx = env.encode_features(query.state)
    fcf = env.encode_features(cf.state)
    d_p = proximity(model.encode(fx), model.encode(fcf))
    d_s = float(sparsity(fx, fcf))
    d_dmc = dmc_excess(model, fx, fcf)

    if cf.method == "bo-gen":
        sequence = locate_in_execution_tree(
            env, query.state, fcf, k, d,
            RngStream(derive_seed(seed, "locate", query.query_id)))
    else:
        sequence = cf.actions

    if sequence is None:
        reach = cost = unc = WORST
    else:
        reach = reachability_hat(sequence, k)
        # Every step of a non-terminal path pays the flat penalty.
        cost = cost_hat([env.config.step_penalty] * len(sequence),
                        env.config.r_max)
        certainty = stochastic_certainty(
            env, oracle, query.state, sequence, query.desired_action, n_sims,
            RngStream(derive_seed(seed, "score", query.query_id, cf.method)))
        unc = 1.0 - certainty

    return BenchmarkRecord(
        query_id=query.query_id, method=cf.method, generated=True,
        reachability_hat=reach, cost_hat=cost, uncertainty=unc,
        proximity=d_p, sparsity=d_s, dmc=d_dmc,
        raccer_loss=(weights.alpha * reach + weights.beta * cost
                     + weights.gamma * unc),
        baseline_loss=baseline_loss(d_p, d_s, d_dmc, weights))


def aggregate(records: list) -> dict:
    """Per-method generation rate and property means over generated rows."""
    if not records:
        raise ConfigError("cannot aggregate an empty record set")
    methods = []
    for rec in records:
        if rec.method and rec.method not in methods:
            methods.append(rec.method)
    out = {}
    for method in methods:
        rows = [r for r in records if r.method == method]
        done = [r for r in rows if r.generated]
        entry = {"n_queries": len(rows), "n_generated": len(done),
                 "generation_rate": 100.0 * len(done) / len(rows)}
        for key in PROPERTY_KEYS:
            vals = [getattr(r, key) for r in done]
            entry[key] = float(np.mean(vals)) if vals else float("nan")
        out[method] = entry
    return out


def format_summary(summary: dict) -> str:
    """Aligned per-method table, one metric per column."""
    cols = ["method", "generation_rate", "n_generated", "n_queries"] + list(PROPERTY_KEYS)
    lines = ["\t".join(cols)]
    for method, entry in summary.items():
        cells = [method]
        for col in cols[1:]:
            v = entry[col]
            cells.append(str(v) if isinstance(v, int) else f"{v:.6f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def write_records(records: list, path) -> None:
    lines = [",".join(RECORD_COLUMNS)]
    for r in records:
        cells = [r.query_id, r.method or "none",
                 "true" if r.generated else "false"]
        for key in PROPERTY_KEYS:
            cells.append(f"{getattr(r, key):.10g}")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_dataset(queries: list, path) -> None:
    lines = []
    for q in queries:
        lines.append(json.dumps({
            "query_id": q.query_id,
            "features": [int(v) for v in np.rint(
                q.state.agent + q.state.dragon + q.state.tree_hp)],
            "steps_elapsed": q.state.steps_elapsed,
            "desired_action": q.desired_action.index,
        }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


# ---- orchestration ---------------------------------------------------------

_CTX: dict = {}


def _generate_one(task):
    """Generate and score one (method, query) cell using the process context."""
    method, qi = task
    env = _CTX["env"]
    oracle = _CTX["oracle"]
    model = _CTX["model"]
    weights = _CTX["weights"]
    query = _CTX["queries"][qi]
    seed = _CTX["seed"]
    qseed = derive_seed(seed, "gen", method, query.query_id)
    t0 = time.perf_counter()
    history = None
    if method == "bo-gen":
        cf, history = run_genetic(query.state, query.desired_action, oracle,
                                  model, GaConfig(seed=qseed, **_CTX["ga_kw"]),
                                  weights)
    else:
        cfg = SearchConfig(loss=method, weights=weights, seed=qseed,
                           **_CTX["search_kw"])
        cf = search(env, oracle, query.state, query.desired_action, cfg, model)
    record = score_counterfactual(
        env, oracle, model, weights, query, cf,
        k=_CTX["search_kw"]["k"], d=_CTX["search_kw"]["d"],
        n_sims=_CTX["search_kw"]["N"], seed=seed)
    if cf is None:
        record.method = method
    record.wall_ms = (time.perf_counter() - t0) * 1000.0
    return record, history


def run_benchmark(env: GridWorld, oracle: PolicyOracle, model, *,
                  methods=METHODS, n_states: int = 100, seed: int = 0,
                  search_kw: dict | None = None, ga_kw: dict | None = None,
                  weights: LossWeights | None = None,
                  jobs: int = 1) -> BenchmarkResult:
    """Full protocol over every (method, query) cell.

    Per-cell seeds derive from (seed, method, query id), so results are
    independent of execution order and identical for any worker count.
    """
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; expected {METHODS}")
    if n_states < 1:
        raise ConfigError("n_states must be at least 1")
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    defaults = SearchConfig()
    search_kw = {"T": defaults.T, "N": defaults.N, "k": defaults.k,
                 "d": defaults.d, "c_explore": defaults.c_explore,
                 **(search_kw or {})}
    ga_defaults = GaConfig()
    ga_kw = {"mu": ga_defaults.mu, "lam": ga_defaults.lam,
             "generations": ga_defaults.generations,
             "mutation_prob": ga_defaults.mutation_prob, **(ga_kw or {})}
    weights = weights or LossWeights()

    queries = sample_factual_dataset(env, oracle, n_states, seed)
    log.info("benchmark: %d queries x %d methods", len(queries), len(methods))

    _CTX.clear()
    _CTX.update(env=env, oracle=oracle, model=model, weights=weights,
                queries=queries, seed=seed, search_kw=search_kw, ga_kw=ga_kw)
    tasks = [(method, qi) for method in methods for qi in range(len(queries))]

    t0 = time.perf_counter()
    if jobs == 1:
        outcomes = [_generate_one(task) for task in tasks]
    else:
        # Workers read the context via fork inheritance; results come back
        # in task order, so worker count never affects the output.
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=jobs,
                mp_context=multiprocessing.get_context("fork")) as pool:
            outcomes = list(pool.map(_generate_one, tasks, chunksize=8))
    log.info("benchmark: generated %d records in %.1f s",
             len(outcomes), time.perf_counter() - t0)

    records = [rec for rec, _ in outcomes]
    ga_histories = {rec.query_id: hist
                    for rec, hist in outcomes if hist is not None}
    return BenchmarkResult(queries=queries, records=records,
                           summary=aggregate(records),
                           ga_histories=ga_histories)
