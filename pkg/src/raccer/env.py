"""Grid environment with a shootable dragon, choppable trees and stochastic
regrowth, behind the small oracle-friendly surface the search code consumes.

States are immutable values; ``step`` returns a fresh successor so callers can
clone and branch freely. All stochastic draws go through an explicit
:class:`~raccer.rng.RngStream`, which makes every simulation replayable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError
from .rng import RngStream


@dataclass(frozen=True)
class EnvAction:
    """One discrete environment action."""

    index: int
    label: str


ACTIONS = (
    EnvAction(kernels.A_UP, "UP"),
    EnvAction(kernels.A_DOWN, "DOWN"),
    EnvAction(kernels.A_LEFT, "LEFT"),
    EnvAction(kernels.A_RIGHT, "RIGHT"),
    EnvAction(kernels.A_SHOOT, "SHOOT"),
    EnvAction(kernels.A_CHOP, "CHOP"),
    EnvAction(kernels.A_WAIT, "WAIT"),
)

_ACTION_BY_LABEL = {a.label: a for a in ACTIONS}


def action_by_label(label: str) -> EnvAction:
    try:
        return _ACTION_BY_LABEL[label.upper()]
    except KeyError:
        raise ValueError(f"unknown action {label!r}; expected one of "
                         f"{[a.label for a in ACTIONS]}") from None


@dataclass(frozen=True)
class GridState:
    """Snapshot of the grid: agent cell, dragon cell, tree hit points by row
    of the middle column, plus episode bookkeeping."""

    agent: tuple[int, int]
    dragon: tuple[int, int]
    tree_hp: tuple[int, ...]
    steps_elapsed: int = 0
    terminal: bool = False

    def features_key(self) -> tuple:
        """Identity used for deduplication: feature content plus liveness."""
        return (self.agent, self.dragon, self.tree_hp, self.terminal)


@dataclass(frozen=True)
class Transition:
    next_state: GridState
    reward: float
    terminal: bool


@dataclass(frozen=True)
class TreeType:
    max_hp: int
    regrow_prob: float


@dataclass(frozen=True)
class GridConfig:
    grid_size: int = 5
    tree_types: tuple[TreeType, ...] = (
        TreeType(1, 0.10),
        TreeType(2, 0.05),
        TreeType(3, 0.02),
    )
    horizon: int = 50
    initial_tree_prob: float = 0.5
    shoot_reward: float = 10.0
    step_penalty: float = -1.0
    r_max: float = 1.0
    reset_on_interrupt: bool = False

    def validate(self) -> None:
        if self.grid_size < 3:
            raise ConfigError("grid_size must be at least 3")
        if not self.tree_types:
            raise ConfigError("at least one tree type is required")
        if any(t.max_hp < 1 for t in self.tree_types):
            raise ConfigError("tree max_hp must be >= 1")
        if any(not 0.0 <= t.regrow_prob <= 1.0 for t in self.tree_types):
            raise ConfigError("regrow_prob must lie in [0, 1]")
        if sum(t.regrow_prob for t in self.tree_types) > 1.0 + 1e-12:
            raise ConfigError("regrow probabilities must sum to at most 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 0.0 <= self.initial_tree_prob <= 1.0:
            raise ConfigError("initial_tree_prob must lie in [0, 1]")
        if self.shoot_reward <= 0:
            raise ConfigError("shoot_reward must be positive")
        if self.step_penalty >= 0:
            raise ConfigError("step_penalty must be negative")
        if self.r_max <= 0:
            raise ConfigError("r_max must be positive")
        if self.reset_on_interrupt:
            raise ConfigError(
                "reset_on_interrupt is not supported: the state tracks only "
                "remaining hit points, not the tree type they came from")

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "tree_types": [{"max_hp": t.max_hp, "regrow_prob": t.regrow_prob}
                           for t in self.tree_types],
            "horizon": self.horizon,
            "initial_tree_prob": self.initial_tree_prob,
            "shoot_reward": self.shoot_reward,
            "step_penalty": self.step_penalty,
            "r_max": self.r_max,
            "reset_on_interrupt": self.reset_on_interrupt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridConfig":
        known = {"grid_size", "tree_types", "horizon", "initial_tree_prob",
                 "shoot_reward", "step_penalty", "r_max", "reset_on_interrupt"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown environment config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "tree_types" in kwargs:
            try:
                kwargs["tree_types"] = tuple(
                    TreeType(int(t["max_hp"]), float(t["regrow_prob"]))
                    for t in kwargs["tree_types"])
            except (TypeError, KeyError) as exc:
                raise ConfigError(f"malformed tree_types entry: {exc}") from exc
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "GridConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"environment config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"environment config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


class GridWorld:
    """Bundles a :class:`GridConfig` with the compiled kernels.

    Instances are read-only after construction and safe to share; the only
    mutable object in any interaction is the caller's RngStream.
    """

    def __init__(self, config: GridConfig | None = None):
        self.config = config or GridConfig()
        self.config.validate()
        self.size = self.config.grid_size
        self.mid = self.size // 2
        self.max_hp = np.array([t.max_hp for t in self.config.tree_types], dtype=np.int64)
        self.regrow = np.array([t.regrow_prob for t in self.config.tree_types], dtype=np.float64)
        self.hp_max = int(self.max_hp.max())
        self.hp_base = self.hp_max + 1
        self.feature_length = 4 + self.size
        self.n_states = (self.size ** 4) * (self.hp_base ** self.size)
        self.n_actions = kernels.N_ACTIONS

    # -- state conversion ------------------------------------------------

    def state_to_array(self, state: GridState) -> np.ndarray:
        arr = np.empty(self.feature_length + 2, dtype=np.int64)
        arr[0], arr[1] = state.agent
        arr[2], arr[3] = state.dragon
        arr[4:4 + self.size] = state.tree_hp
        arr[4 + self.size] = state.steps_elapsed
        arr[5 + self.size] = 1 if state.terminal else 0
        return arr

    def state_from_array(self, arr: np.ndarray) -> GridState:
        s = self.size
        return GridState(agent=(int(arr[0]), int(arr[1])),
                         dragon=(int(arr[2]), int(arr[3])),
                         tree_hp=tuple(int(v) for v in arr[4:4 + s]),
                         steps_elapsed=int(arr[4 + s]),
                         terminal=bool(arr[5 + s]))

    def encode_features(self, state: GridState) -> np.ndarray:
        """Fixed layout: [agent_row, agent_col, dragon_row, dragon_col, hp...]."""
        return self.state_to_array(state)[:self.feature_length].astype(np.float64)

    def decode_features(self, features, steps_elapsed: int = 0) -> GridState:
        feats = np.asarray(features, dtype=np.float64)
        if not self.check_game_fidelity(feats):
            raise ValueError("feature vector does not describe a legal grid state")
        ints = np.rint(feats).astype(np.int64)
        s = self.size
        return GridState(agent=(int(ints[0]), int(ints[1])),
                         dragon=(int(ints[2]), int(ints[3])),
                         tree_hp=tuple(int(v) for v in ints[4:4 + s]),
                         steps_elapsed=steps_elapsed,
                         terminal=False)

    def state_index(self, state: GridState) -> int:
        return int(kernels.state_index(self.state_to_array(state), self.hp_base))

    def features_index(self, features) -> int:
        """State index straight from a feature vector (fidelity assumed)."""
        ints = np.rint(np.asarray(features, dtype=np.float64)).astype(np.int64)
        arr = np.concatenate([ints, np.zeros(2, dtype=np.int64)])
        return int(kernels.state_index(arr, self.hp_base))

    # -- core operations ---------------------------------------------------

    def legal_actions(self, state: GridState) -> list[EnvAction]:
        """All actions, every one a no-op at worst; empty for terminal states."""
        if state.terminal:
            return []
        return list(ACTIONS)

    def step(self, state: GridState, action: EnvAction, rng: RngStream) -> Transition:
        if state.terminal:
            raise ValueError("cannot step a terminal state")
        if not 0 <= action.index < self.n_actions:
            raise ValueError(f"action index {action.index} out of range")
        arr, reward = kernels.step_once(
            self.state_to_array(state), action.index, self.max_hp, self.regrow,
            self.config.horizon, self.config.shoot_reward,
            self.config.step_penalty, rng.state)
        nxt = self.state_from_array(arr)
        return Transition(next_state=nxt, reward=float(reward), terminal=nxt.terminal)

    def sample_initial_state(self, rng: RngStream) -> GridState:
        arr = np.zeros(self.feature_length + 2, dtype=np.int64)
        kernels.sample_initial_inplace(arr, self.config.initial_tree_prob,
                                       self.max_hp, rng.state)
        return self.state_from_array(arr)

    # -- constraint checks -------------------------------------------------

    def check_game_fidelity(self, features) -> bool:
        """True iff the vector decodes to a state obeying the grid's rules."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.shape != (self.feature_length,):
            return False
        if not np.all(np.isfinite(feats)):
            return False
        ints = np.rint(feats)
        if np.max(np.abs(feats - ints)) > 1e-9:
            return False
        ints = ints.astype(np.int64)
        ar, ac, dr, dc = ints[:4]
        hp = ints[4:4 + self.size]
        s = self.size
        if not (0 <= ar < s and 0 <= ac < s and 0 <= dr < s and 0 <= dc < s):
            return False
        if ar == dr and ac == dc:
            return False
        if np.any(hp < 0) or np.any(hp > self.hp_max):
            return False
        if ac == self.mid and hp[ar] > 0:
            return False
        if dc == self.mid and hp[dr] > 0:
            return False
        return True

    def check_actionability(self, original, candidate) -> bool:
        """The dragon cannot move: its coordinates must be preserved."""
        orig = np.asarray(original, dtype=np.float64)
        cand = np.asarray(candidate, dtype=np.float64)
        if orig.shape != (self.feature_length,) or cand.shape != (self.feature_length,):
            return False
        return bool(np.all(orig[2:4] == cand[2:4]))

    # -- presentation --------------------------------------------------------

    def render(self, state: GridState) -> str:
        """ASCII grid: A agent, D dragon, digits are tree hit points."""
        rows = []
        for r in range(self.size):
            cells = []
            for c in range(self.size):
                if (r, c) == state.agent:
                    cells.append("A")
                elif (r, c) == state.dragon:
                    cells.append("D")
                elif c == self.mid and state.tree_hp[r] > 0:
                    cells.append(str(state.tree_hp[r]))
                else:
                    cells.append(".")
            rows.append(" ".join(cells))
        return "\n".join(rows)
