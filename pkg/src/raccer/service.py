"""HTTP facade over the engine.

Endpoints cover everything the explorer UI needs: health/status, policy
predictions, synchronous explanations with a wall-clock budget, what-if
simulation of action sequences, and seeded state sampling. All handlers are
stateless between requests; the environment, oracle, and autoencoder are
shared read-only.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict, Field

from .env import ACTIONS, GridState, GridWorld, action_by_label
from .errors import ConfigError
from .genetic import run_genetic
from .rng import RngStream, derive_seed
from .runconfig import RunConfig
from .search import Counterfactual, TreeSearch

logger = logging.getLogger(__name__)

MAX_SAMPLE_COUNT = 1000
MAX_SIMULATIONS = 10_000


class WeightOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: Optional[float] = Field(None, ge=0)
    beta: Optional[float] = Field(None, ge=0)
    gamma: Optional[float] = Field(None, ge=0)
    theta0: Optional[float] = Field(None, ge=0)
    theta1: Optional[float] = Field(None, ge=0)
    theta2: Optional[float] = Field(None, ge=0)


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state: list[int]


class ExplainRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state: list[int]
    action: str
    method: Optional[Literal["raccer", "bo-gen", "bo-ts"]] = None
    T: Optional[int] = Field(None, ge=1)
    N: Optional[int] = Field(None, ge=1)
    k: Optional[int] = Field(None, ge=1)
    weights: Optional[WeightOverrides] = None
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state: list[int]
    actions: list[str] = Field(default_factory=list)
    n: int = Field(ge=1, le=MAX_SIMULATIONS)
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)


def _request_seed(payload: dict) -> int:
    """Default seed: a stable hash of the request body, so identical
    requests are reproducible without the client managing seeds."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canon.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def create_app(env: GridWorld, oracle=None, model=None,
               cfg: RunConfig | None = None, *,
               explain_budget_s: float = 30.0,
               static_dir: str | None = None) -> FastAPI:
    """Build the API around loaded artifacts.

    ``oracle``/``model`` may be None (health reports ready:false and the
    other endpoints answer 503) so a probe can run before training.
    """
    cfg = cfg or RunConfig()
    app = FastAPI(title="raccer", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    config_hash = hashlib.sha256(cfg.echo().encode()).hexdigest()[:16]

    def require_ready() -> None:
        if oracle is None or model is None:
            raise HTTPException(status_code=503, detail="artifacts not loaded")

    def parse_state(features: list[int]) -> GridState:
        if len(features) != env.feature_length:
            raise HTTPException(
                status_code=422,
                detail=f"state must have {env.feature_length} features")
        try:
            return env.decode_features(np.asarray(features, dtype=np.float64))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

    def parse_action(name: str):
        try:
            return action_by_label(name)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

    def feature_list(state: GridState) -> list[int]:
        return [int(v) for v in env.encode_features(state)]

    # -- endpoints -----------------------------------------------------------

    @app.get("/api/health")
    def health() -> dict:
        return {"ready": oracle is not None and model is not None,
                "policy_loaded": oracle is not None,
                "autoencoder_loaded": model is not None,
                "config_hash": config_hash,
                "actions": [a.label for a in ACTIONS],
                "feature_length": env.feature_length,
                "grid_size": env.size,
                "max_hp": env.hp_max}

    @app.post("/api/predict")
    def predict(req: PredictRequest) -> dict:
        require_ready()
        state = parse_state(req.state)
        values = oracle.action_values(state)
        return {"action": oracle.predict(state).label,
                "values": [float(v) for v in values]}

    @app.post("/api/explain")
    def explain(req: ExplainRequest) -> dict:
        require_ready()
        state = parse_state(req.state)
        action = parse_action(req.action)
        method = req.method or cfg.method
        seed = req.seed if req.seed is not None else _request_seed(
            req.model_dump(exclude={"seed"}, exclude_none=True))

        weights = cfg.loss_weights()
        if req.weights is not None:
            patch = req.weights.model_dump(exclude_none=True)
            weights = type(weights)(**{**weights.__dict__, **patch})

        started = time.monotonic()
        deadline = started + explain_budget_s
        diagnostics: dict = {"nodes_explored": 0, "valid_candidates": 0,
                             "timed_out": False}
        cf: Counterfactual | None
        if method == "bo-gen":
            ga_cfg = cfg.ga_config(seed)
            cf, history = run_genetic(state, action, oracle, model, ga_cfg,
                                      weights)
            diagnostics["nodes_explored"] = (
                ga_cfg.mu + ga_cfg.lam * (1 + ga_cfg.generations))
            diagnostics["generations"] = len(history) - 1
            diagnostics["valid_candidates"] = int(cf is not None)
        else:
            sc = cfg.search_config(seed, loss="bo-ts" if method == "bo-ts"
                                   else "raccer")
            overrides = {k: getattr(req, k) for k in ("T", "N", "k")
                         if getattr(req, k) is not None}
            sc = type(sc)(**{**sc.__dict__, **overrides, "weights": weights})
            try:
                tree = TreeSearch(env, oracle, state, action, sc,
                                  autoencoder=model)
            except ConfigError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            tree.run(deadline)
            cf = tree.result()
            valid = [n for n in tree.candidates()
                     if oracle.predict(n.state) == action]
            diagnostics["nodes_explored"] = len(tree.nodes)
            diagnostics["valid_candidates"] = len(valid)
            diagnostics["timed_out"] = time.monotonic() >= deadline

        if cf is not None and not _recheck_validity(env, oracle, state,
                                                    action, cf, cfg):
            logger.error("validity re-check rejected a candidate for %s",
                         action.label)
            cf = None
        diagnostics["elapsed_ms"] = (time.monotonic() - started) * 1000.0

        body: dict = {"found": cf is not None, "method": method,
                      "seed": seed, "diagnostics": diagnostics}
        if cf is None:
            body["counterfactual"] = None
        else:
            body["counterfactual"] = {
                "state": feature_list(cf.state),
                "render": env.render(cf.state),
                "actions": cf.actions.labels(),
                "properties": cf.properties.to_dict(),
                "loss": cf.loss,
                "success_rate": 1.0 - cf.properties.uncertainty,
            }
        return body

    @app.post("/api/simulate")
    def simulate(req: SimulateRequest) -> dict:
        require_ready()
        state = parse_state(req.state)
        actions = [parse_action(name) for name in req.actions]
        seed = req.seed if req.seed is not None else _request_seed(
            req.model_dump(exclude={"seed"}, exclude_none=True))

        counts: dict[tuple, int] = {}
        end_states: dict[tuple, GridState] = {}
        action_counts: dict[str, int] = {}
        for i in range(req.n):
            rng = RngStream(derive_seed(seed, "sim", i))
            current = state
            for act in actions:
                if current.terminal:
                    break
                current = env.step(current, act, rng).next_state
            key = current.features_key() + (current.terminal,)
            counts[key] = counts.get(key, 0) + 1
            end_states[key] = current
            if not current.terminal:
                label = oracle.predict(current).label
                action_counts[label] = action_counts.get(label, 0) + 1

        outcomes = []
        for key, n_hits in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            end = end_states[key]
            outcomes.append({"state": feature_list(end),
                             "render": env.render(end),
                             "terminal": end.terminal,
                             "count": n_hits,
                             "fraction": n_hits / req.n})
        frequencies = {label: c / req.n
                       for label, c in sorted(action_counts.items())}
        return {"n": req.n, "seed": seed, "outcomes": outcomes,
                "action_frequencies": frequencies}

    @app.get("/api/sample-states")
    def sample_states(count: int = Query(ge=0, le=MAX_SAMPLE_COUNT),
                      seed: int = Query(0, ge=0, lt=2 ** 64)) -> dict:
        require_ready()
        rng = RngStream(derive_seed(seed, "sample-states"))
        states = []
        for _ in range(count):
            state = env.sample_initial_state(rng)
            states.append({"state": feature_list(state),
                           "render": env.render(state),
                           "policy_action": oracle.predict(state).label})
        return {"states": states}

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")

    return app


def _recheck_validity(env: GridWorld, oracle, x: GridState, action,
                      cf: Counterfactual, cfg: RunConfig) -> bool:
    """Independent guard run on every success before it leaves the server."""
    feats = env.encode_features(cf.state)
    if not env.check_game_fidelity(feats):
        return False
    if not env.check_actionability(env.encode_features(x), feats):
        return False
    if cf.state.terminal:
        return False
    if len(cf.actions) > cfg.search["k"]:
        return False
    return oracle.predict(cf.state) == action
