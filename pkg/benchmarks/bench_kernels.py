"""Timing comparison of the hot kernels with and without compilation.

Runs itself twice as a subprocess, once with RACCER_NUMBA=1 and once with
RACCER_NUMBA=0 (the flag is read at import time), and prints per-kernel
timings plus the speedup factor.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _workload(repeats: int) -> dict[str, float]:
    """Mean milliseconds per call for each hot kernel in the current mode."""
    import numpy as np

    from raccer import kernels
    from raccer.env import GridConfig, GridWorld
    from raccer.rng import RngStream, derive_seed

    env = GridWorld(GridConfig())
    rng = RngStream(derive_seed(0, "bench"))
    state = env.sample_initial_state(rng)
    while state.terminal:
        state = env.sample_initial_state(rng)
    arr = env.state_to_array(state)
    greedy = np.zeros(env.n_states, dtype=np.int8)
    path = np.array([0, 0, 6], dtype=np.int64)

    def timed(fn, n) -> float:
        fn()  # warm-up: first call pays any compilation cost
        t0 = time.perf_counter()
        for _ in range(n):
            fn()
        return (time.perf_counter() - t0) * 1000.0 / n

    results = {}
    results["step_once"] = timed(
        lambda: kernels.step_once(arr, 6, env.max_hp, env.regrow,
                                  env.config.horizon,
                                  env.config.shoot_reward,
                                  env.config.step_penalty, rng.state),
        200 * repeats)
    results["certainty_count"] = timed(
        lambda: kernels.certainty_count(arr, path, 4, 100, greedy,
                                        env.hp_base, env.max_hp, env.regrow,
                                        env.config.horizon,
                                        env.config.shoot_reward,
                                        env.config.step_penalty, rng.state),
        2 * repeats)
    out_states = np.empty((5, arr.shape[0]), dtype=np.int64)
    out_rewards = np.empty(5, dtype=np.float64)
    out_counts = np.empty(5, dtype=np.int64)
    results["expand_samples"] = timed(
        lambda: kernels.expand_samples(arr, 2, 5, env.max_hp, env.regrow,
                                       env.config.horizon,
                                       env.config.shoot_reward,
                                       env.config.step_penalty, rng.state,
                                       out_states, out_rewards, out_counts),
        50 * repeats)
    results["greedy_rollout"] = timed(
        lambda: kernels.greedy_rollout(arr.copy(), greedy, env.hp_base,
                                       env.max_hp, env.regrow,
                                       env.config.horizon,
                                       env.config.shoot_reward,
                                       env.config.step_penalty, rng.state),
        20 * repeats)

    n = env.n_states
    visited = np.zeros(n, dtype=np.uint8)
    parent = np.empty(n, dtype=np.int64)
    parent_act = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    out = np.empty(3, dtype=np.int64)
    target = -1  # never matches: forces a full depth-3 exploration

    def locate():
        visited[:] = 0
        kernels.bfs_locate(arr, target, 3, 3, env.hp_base, env.max_hp,
                           env.regrow, env.config.horizon,
                           env.config.shoot_reward, env.config.step_penalty,
                           rng.state, visited, parent, parent_act, queue, out)

    results["bfs_locate"] = timed(locate, 2 * repeats)
    return results


def _run_mode(flag: str, repeats: int) -> dict[str, float]:
    env = {**os.environ, "RACCER_NUMBA": flag}
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--worker",
         "--repeats", str(repeats)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="workload multiplier (default 5)")
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        json.dump(_workload(args.repeats), sys.stdout)
        return 0

    compiled = _run_mode("1", args.repeats)
    fallback = _run_mode("0", args.repeats)
    width = max(len(k) for k in compiled)
    print(f"{'kernel':<{width}}  {'numba ms':>10}  {'python ms':>10}  "
          f"{'speedup':>8}")
    for name in compiled:
        ratio = fallback[name] / compiled[name] if compiled[name] else 0.0
        print(f"{name:<{width}}  {compiled[name]:>10.4f}  "
              f"{fallback[name]:>10.4f}  {ratio:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
