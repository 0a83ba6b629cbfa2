"""Run configuration: one JSON document binding artifact paths, method
selection and every engine parameter, with CLI flags layered on top.

The effective configuration is echoed into output artifacts so any result
file names the exact parameters that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .genetic import GaConfig
from .properties import LossWeights
from .search import SearchConfig

METHOD_CHOICES = ("raccer", "bo-gen", "bo-ts")

_SECTION_KEYS = {
    "search": {"T", "N", "k", "d", "c_explore"},
    "weights": {"alpha", "beta", "gamma", "theta0", "theta1", "theta2"},
    "genetic": {"mu", "lambda", "generations", "mutation_prob"},
    "benchmark": {"n_states", "methods"},
    "training": {"episodes", "alpha", "gamma", "eps_start", "eps_end",
                 "replay_passes", "rollout_states", "ae_hidden", "ae_latent",
                 "ae_epochs", "ae_lr"},
}

_TOP_KEYS = {"env_config", "policy_path", "autoencoder_path", "method",
             "seed", "out_dir"} | set(_SECTION_KEYS)


def _default_search() -> dict:
    c = SearchConfig()
    return {"T": c.T, "N": c.N, "k": c.k, "d": c.d, "c_explore": c.c_explore}


def _default_genetic() -> dict:
    g = GaConfig()
    return {"mu": g.mu, "lambda": g.lam, "generations": g.generations,
            "mutation_prob": g.mutation_prob}


def _default_weights() -> dict:
    w = LossWeights()
    return {k: getattr(w, k) for k in _SECTION_KEYS["weights"]}


def _default_training() -> dict:
    return {"episodes": 50_000_000, "alpha": 0.1, "gamma": 0.95,
            "eps_start": 1.0, "eps_end": 0.05, "replay_passes": 30,
            "rollout_states": 500, "ae_hidden": 16, "ae_latent": 4,
            "ae_epochs": 2000, "ae_lr": 0.01}


@dataclass
class RunConfig:
    env_config: str | None = None
    policy_path: str = "artifacts/policy.json"
    autoencoder_path: str = "artifacts/autoencoder.json"
    method: str = "raccer"
    search: dict = field(default_factory=_default_search)
    weights: dict = field(default_factory=_default_weights)
    genetic: dict = field(default_factory=_default_genetic)
    benchmark: dict = field(default_factory=lambda: {
        "n_states": 100, "methods": list(METHOD_CHOICES)})
    training: dict = field(default_factory=_default_training)
    seed: int = 0
    out_dir: str = "results"

    # -- construction ------------------------------------------------------

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"run config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        cfg = cls()
        for key in ("env_config", "policy_path", "autoencoder_path",
                    "method", "seed", "out_dir"):
            if key in data:
                setattr(cfg, key, data[key])
        for section in _SECTION_KEYS:
            if section not in data:
                continue
            patch = data[section]
            if not isinstance(patch, dict):
                raise ConfigError(f"section {section!r} must be an object")
            bad = set(patch) - _SECTION_KEYS[section]
            if bad:
                raise ConfigError(
                    f"unknown keys in section {section!r}: {sorted(bad)}")
            getattr(cfg, section).update(patch)
        cfg.validate()
        return cfg

    def apply_flags(self, *, seed=None, method=None, out=None) -> "RunConfig":
        """Command-line overrides win over file values."""
        if seed is not None:
            self.seed = seed
        if method is not None:
            self.method = method
        if out is not None:
            self.out_dir = out
        self.validate()
        return self

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        if self.method not in METHOD_CHOICES:
            raise ConfigError(
                f"unknown method {self.method!r}; expected one of {METHOD_CHOICES}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        for method in self.benchmark.get("methods", []):
            if method not in METHOD_CHOICES:
                raise ConfigError(
                    f"unknown benchmark method {method!r}; expected subset of "
                    f"{METHOD_CHOICES}")
        if self.benchmark.get("n_states", 1) < 1:
            raise ConfigError("benchmark n_states must be at least 1")
        self.search_config(self.seed).validate()
        self.ga_config(self.seed).validate()
        self.loss_weights()
        tr = self.training
        if tr["episodes"] < 0:
            raise ConfigError("training episodes must be non-negative")
        if tr["rollout_states"] < 1 or tr["ae_epochs"] < 1:
            raise ConfigError("rollout_states and ae_epochs must be positive")

    # -- derived engine configs ----------------------------------------------

    def search_config(self, seed: int, loss: str | None = None) -> SearchConfig:
        s = self.search
        return SearchConfig(T=s["T"], N=s["N"], k=s["k"], d=s["d"],
                            c_explore=s["c_explore"],
                            loss=loss or ("bo-ts" if self.method == "bo-ts"
                                          else "raccer"),
                            weights=self.loss_weights(), seed=seed)

    def ga_config(self, seed: int) -> GaConfig:
        g = self.genetic
        return GaConfig(mu=g["mu"], lam=g["lambda"],
                        generations=g["generations"],
                        mutation_prob=g["mutation_prob"], seed=seed)

    def loss_weights(self) -> LossWeights:
        return LossWeights(**self.weights)

    # -- provenance ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "env_config": self.env_config,
            "policy_path": self.policy_path,
            "autoencoder_path": self.autoencoder_path,
            "method": self.method,
            "search": dict(self.search),
            "weights": dict(self.weights),
            "genetic": dict(self.genetic),
            "benchmark": dict(self.benchmark),
            "training": dict(self.training),
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    def echo(self) -> str:
        """Canonical JSON of the effective configuration."""
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"
