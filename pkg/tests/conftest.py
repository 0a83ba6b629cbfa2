import numpy as np
import pytest

from raccer.autoencoder import train_autoencoder
from raccer.env import GridConfig, GridWorld, TreeType
from raccer.policy import PolicyOracle, QTable, collect_rollout_states, train_policy


DET_TREES = (TreeType(1, 0.0), TreeType(2, 0.0), TreeType(3, 0.0))


def make_row_shoot_oracle(env, row=0):
    """Synthetic policy: SHOOT is greedy exactly when the agent sits in
    ``row``, everything else falls back to UP (zero rows)."""
    values = np.zeros((env.n_states, env.n_actions))
    per_agent_cell = (env.size ** 2) * (env.hp_base ** env.size)
    agent_rows = (np.arange(env.n_states) // per_agent_cell) // env.size
    values[agent_rows == row, 4] = 1.0
    table = QTable(values=values, visited=np.zeros(env.n_states, dtype=np.uint8),
                   env_hash=env.config.config_hash(), seed=0, hyperparams={})
    return PolicyOracle(env, table)


def make_single_state_oracle(env, state, action):
    """Synthetic policy: ``action`` is greedy only at ``state`` (by feature
    identity), UP everywhere else."""
    values = np.zeros((env.n_states, env.n_actions))
    values[env.state_index(state), action.index] = 1.0
    table = QTable(values=values, visited=np.zeros(env.n_states, dtype=np.uint8),
                   env_hash=env.config.config_hash(), seed=0, hyperparams={})
    return PolicyOracle(env, table)


@pytest.fixture(scope="session")
def env():
    return GridWorld(GridConfig())


@pytest.fixture(scope="session")
def det_env():
    """Fully deterministic variant: nothing ever regrows."""
    return GridWorld(GridConfig(tree_types=DET_TREES))


@pytest.fixture(scope="session")
def trained(env):
    table, curve = train_policy(env, episodes=500_000, seed=7)
    return table, curve


@pytest.fixture(scope="session")
def table(trained):
    return trained[0]


@pytest.fixture(scope="session")
def det_trained(det_env):
    table, curve = train_policy(det_env, episodes=500_000, seed=7)
    return table, curve


@pytest.fixture(scope="session")
def rollout_features(env, table):
    states = collect_rollout_states(env, table, 500, seed=11)
    return np.array([env.encode_features(s) for s in states])


@pytest.fixture(scope="session")
def ae_model(rollout_features):
    model, _ = train_autoencoder(rollout_features, seed=3)
    return model
