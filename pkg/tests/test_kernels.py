"""Parity and low-level contracts for the hot-path kernels.

Every kernel keeps a ``.py_func`` handle, so the compiled and interpreted
implementations can be run side by side on identical inputs; they must agree
bit for bit or the accelerator flag would change results.
"""

import numpy as np

from raccer import kernels
from raccer.env import GridConfig, GridWorld
from raccer.rng import RngStream


ENV = GridWorld(GridConfig())


def _state(agent, dragon, hp, steps=0, terminal=0):
    return np.array(list(agent) + list(dragon) + list(hp) + [steps, terminal],
                    dtype=np.int64)


def test_step_parity():
    for seed in range(20):
        rng_c = RngStream(seed)
        rng_p = RngStream(seed)
        s_c = _state((1, 1), (3, 3), (0, 1, 0, 2, 0))
        s_p = s_c.copy()
        for action in range(7):
            r_c = kernels.step_inplace(s_c, action, ENV.max_hp, ENV.regrow, 50,
                                       10.0, -1.0, rng_c.state)
            r_p = kernels.step_inplace.py_func(s_p, action, ENV.max_hp, ENV.regrow,
                                               50, 10.0, -1.0, rng_p.state)
            assert r_c == r_p
            assert np.array_equal(s_c, s_p)
            assert np.array_equal(rng_c.state, rng_p.state)


def test_sample_initial_parity():
    for seed in range(20):
        a = np.zeros(11, dtype=np.int64)
        b = np.zeros(11, dtype=np.int64)
        kernels.sample_initial_inplace(a, 0.5, ENV.max_hp, RngStream(seed).state)
        kernels.sample_initial_inplace.py_func(b, 0.5, ENV.max_hp, RngStream(seed).state)
        assert np.array_equal(a, b)


def test_state_index_round_trip():
    rng = RngStream(0)
    out = np.empty(11, dtype=np.int64)
    for _ in range(300):
        arr = np.zeros(11, dtype=np.int64)
        kernels.sample_initial_inplace(arr, 0.5, ENV.max_hp, rng.state)
        idx = kernels.state_index(arr, ENV.hp_base)
        assert 0 <= idx < ENV.n_states
        kernels.decode_index(int(idx), ENV.size, ENV.hp_base, int(arr[9]), out)
        assert np.array_equal(out[:9], arr[:9])


def test_state_index_distinct_for_distinct_states():
    a = _state((0, 0), (0, 1), (0, 0, 0, 0, 0))
    b = _state((0, 0), (0, 1), (1, 0, 0, 0, 0))
    c = _state((0, 1), (0, 0), (0, 0, 0, 0, 0))
    idxs = {int(kernels.state_index(s, ENV.hp_base)) for s in (a, b, c)}
    assert len(idxs) == 3


def test_unroll_flags_mid_sequence_terminal():
    # SHOOT succeeds immediately; the trailing action can never be applied
    s = _state((2, 0), (2, 4), (0, 0, 0, 0, 0))
    actions = np.array([kernels.A_SHOOT, kernels.A_WAIT], dtype=np.int64)
    total, ok = kernels.unroll_inplace(s.copy(), actions, ENV.max_hp, ENV.regrow,
                                       50, 10.0, -1.0, RngStream(0).state)
    assert ok == 0
    assert total == 10.0
    # same shot as the final action still fails: the end state is terminal
    total, ok = kernels.unroll_inplace(s.copy(), actions[:1], ENV.max_hp, ENV.regrow,
                                       50, 10.0, -1.0, RngStream(0).state)
    assert ok == 0


def test_unroll_ok_counts_rewards():
    s = _state((0, 0), (4, 4), (0, 0, 0, 0, 0))
    actions = np.array([kernels.A_RIGHT, kernels.A_DOWN, kernels.A_WAIT],
                       dtype=np.int64)
    env = GridWorld(GridConfig())
    total, ok = kernels.unroll_inplace(s.copy(), actions, env.max_hp,
                                       np.zeros(3), 50, 10.0, -1.0,
                                       RngStream(0).state)
    assert ok == 1
    assert total == -3.0


def test_expand_samples_counts_sum_to_draws():
    s = _state((1, 1), (3, 3), (0, 0, 0, 0, 0))
    out_states = np.zeros((8, 11), dtype=np.int64)
    out_rewards = np.zeros(8)
    out_counts = np.zeros(8, dtype=np.int64)
    n = kernels.expand_samples(s, kernels.A_WAIT, 8, ENV.max_hp, ENV.regrow,
                               50, 10.0, -1.0, RngStream(2).state,
                               out_states, out_rewards, out_counts)
    assert 1 <= n <= 8
    assert out_counts[:n].sum() == 8
    # dedup key is the full state: rows must be pairwise distinct
    for i in range(n):
        for j in range(i + 1, n):
            assert not np.array_equal(out_states[i], out_states[j])


def test_expand_samples_deterministic_env_single_successor():
    s = _state((1, 1), (3, 3), (0, 0, 0, 0, 0))
    out_states = np.zeros((8, 11), dtype=np.int64)
    out_rewards = np.zeros(8)
    out_counts = np.zeros(8, dtype=np.int64)
    n = kernels.expand_samples(s, kernels.A_RIGHT, 8, ENV.max_hp,
                               np.zeros(3), 50, 10.0, -1.0, RngStream(2).state,
                               out_states, out_rewards, out_counts)
    assert n == 1
    assert out_counts[0] == 8


def test_certainty_count_parity():
    s = _state((2, 1), (2, 4), (0, 0, 0, 0, 0))
    actions = np.array([kernels.A_LEFT, kernels.A_WAIT], dtype=np.int64)
    greedy = np.zeros(ENV.n_states, dtype=np.int8)
    c = kernels.certainty_count(s, actions, 0, 50, greedy, ENV.hp_base,
                                ENV.max_hp, ENV.regrow, 50, 10.0, -1.0,
                                RngStream(7).state)
    p = kernels.certainty_count.py_func(s, actions, 0, 50, greedy, ENV.hp_base,
                                        ENV.max_hp, ENV.regrow, 50, 10.0, -1.0,
                                        RngStream(7).state)
    assert c == p
    assert 0 <= c <= 50


def test_greedy_rollout_terminates():
    greedy = np.zeros(ENV.n_states, dtype=np.int8)  # always UP: must time out
    s = _state((2, 1), (2, 4), (0, 0, 0, 0, 0))
    shot, total, steps = kernels.greedy_rollout(s, greedy, ENV.hp_base,
                                                ENV.max_hp, ENV.regrow, 50,
                                                10.0, -1.0, RngStream(0).state)
    assert shot == 0
    assert steps == 50
    assert total == -50.0
