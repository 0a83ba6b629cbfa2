"""Hot numeric kernels: grid dynamics, rollouts, Q-training, BFS location.

Every function here is nopython-compatible and gets compiled with numba
unless ``RACCER_NUMBA=0`` (see :mod:`raccer.accel`). To keep the compiled and
interpreted paths bit-identical, all randomness comes from a combined
multiplicative LCG whose intermediates stay below 2**63, so plain int64
arithmetic never wraps in either mode.

State array layout (int64, length 4 + S + 2 for an S x S grid):

    [agent_row, agent_col, dragon_row, dragon_col,
     tree_hp[0] .. tree_hp[S-1],          # middle-column cells, by row
     steps_elapsed, terminal]

The first ``4 + S`` entries are the public feature vector; the trailing two
are bookkeeping. Trees exist only in the middle column (``col == S // 2``).
"""

import numpy as np

from .accel import njit

# Action indices. SHOOT must stay at 4 (the policy table and wire format
# depend on it); WAIT is the explicit do-nothing action.
A_UP = 0
A_DOWN = 1
A_LEFT = 2
A_RIGHT = 3
A_SHOOT = 4
A_CHOP = 5
A_WAIT = 6
N_ACTIONS = 7

# L'Ecuyer combined LCG constants. a * (m - 1) < 2**63 for both pairs.
_M1 = 2147483563
_A1 = 40014
_M2 = 2147483399
_A2 = 40692
_RANGE = _M1 - 1  # combined output is uniform over [0, _RANGE - 1]


@njit
def rng_raw(st):
    """Advance the two-component LCG state in place, return int in [0, 2147483561]."""
    s1 = (_A1 * st[0]) % _M1
    s2 = (_A2 * st[1]) % _M2
    st[0] = s1
    st[1] = s2
    return (s1 - s2) % _RANGE


@njit
def rng_uniform(st):
    """Uniform float64 in [0, 1)."""
    return rng_raw(st) * (1.0 / _RANGE)


@njit
def rng_randint(st, n):
    """Uniform integer in [0, n). Bias is negligible for the tiny n used here."""
    return rng_raw(st) % n


@njit
def state_index(state, hp_base):
    """Bijective index of the feature content (agent, dragon, tree hp)."""
    s = state.shape[0] - 6
    idx = state[0] * s + state[1]
    idx = idx * (s * s) + state[2] * s + state[3]
    for i in range(s):
        idx = idx * hp_base + state[4 + i]
    return idx


@njit
def decode_index(idx, s, hp_base, steps, out_state):
    """Inverse of :func:`state_index`; fills ``out_state`` as non-terminal."""
    for i in range(s - 1, -1, -1):
        out_state[4 + i] = idx % hp_base
        idx //= hp_base
    cell = idx % (s * s)
    out_state[2] = cell // s
    out_state[3] = cell % s
    idx //= s * s
    out_state[0] = idx // s
    out_state[1] = idx % s
    out_state[4 + s] = steps
    out_state[5 + s] = 0


@njit
def step_inplace(state, action, max_hp, regrow, horizon, shoot_reward, step_penalty, st):
    """Apply one action to ``state`` in place; returns the reward.

    Mechanics: blocked moves (off-grid, tree, dragon cell) are no-ops; CHOP
    hits the adjacent tree with the lowest row index; SHOOT wins iff agent and
    dragon share a row or column with no tree strictly between them. After a
    non-terminal action every empty middle-column cell not under the agent or
    dragon regrows a tree of type t with probability regrow[t]. Every action
    costs ``step_penalty`` except a winning SHOOT, which nets ``shoot_reward``.
    """
    s = state.shape[0] - 6
    mid = s // 2
    ar, ac = state[0], state[1]
    dr, dc = state[2], state[3]

    if action == A_SHOOT:
        clear = False
        if ar == dr:
            clear = True
            lo = min(ac, dc)
            hi = max(ac, dc)
            if lo < mid < hi and state[4 + ar] > 0:
                clear = False
        elif ac == dc:
            clear = True
            if ac == mid:
                lo = min(ar, dr)
                hi = max(ar, dr)
                for r in range(lo + 1, hi):
                    if state[4 + r] > 0:
                        clear = False
                        break
        if clear:
            state[4 + s] += 1
            state[5 + s] = 1
            return shoot_reward
    elif action == A_CHOP:
        # Orthogonal neighbours scanned by ascending row, then column.
        tr = -1
        if ar - 1 >= 0 and ac == mid and state[4 + ar - 1] > 0:
            tr = ar - 1
        elif ac - 1 == mid and state[4 + ar] > 0:
            tr = ar
        elif ac + 1 == mid and state[4 + ar] > 0:
            tr = ar
        elif ar + 1 < s and ac == mid and state[4 + ar + 1] > 0:
            tr = ar + 1
        if tr >= 0:
            state[4 + tr] -= 1
    elif action != A_WAIT:
        nr, nc = ar, ac
        if action == A_UP:
            nr -= 1
        elif action == A_DOWN:
            nr += 1
        elif action == A_LEFT:
            nc -= 1
        elif action == A_RIGHT:
            nc += 1
        if 0 <= nr < s and 0 <= nc < s:
            blocked = nr == dr and nc == dc
            if not blocked and nc == mid and state[4 + nr] > 0:
                blocked = True
            if not blocked:
                state[0] = nr
                state[1] = nc

    # Regrowth on empty fertile cells, in row order.
    ar, ac = state[0], state[1]
    for r in range(s):
        if state[4 + r] > 0:
            continue
        if ar == r and ac == mid:
            continue
        if dr == r and dc == mid:
            continue
        u = rng_uniform(st)
        acc = 0.0
        for t in range(regrow.shape[0]):
            acc += regrow[t]
            if u < acc:
                state[4 + r] = max_hp[t]
                break

    state[4 + s] += 1
    if state[4 + s] >= horizon:
        state[5 + s] = 1
    return step_penalty


@njit
def step_once(state_in, action, max_hp, regrow, horizon, shoot_reward, step_penalty, st):
    """Non-mutating step: returns (successor, reward)."""
    out = state_in.copy()
    r = step_inplace(out, action, max_hp, regrow, horizon, shoot_reward, step_penalty, st)
    return out, r


@njit
def sample_initial_inplace(state, init_tree_prob, max_hp, st):
    """Fill ``state`` with a fresh episode start; trees first, then placement."""
    s = state.shape[0] - 6
    mid = s // 2
    for r in range(s):
        state[4 + r] = 0
        if rng_uniform(st) < init_tree_prob:
            t = rng_randint(st, max_hp.shape[0])
            state[4 + r] = max_hp[t]
    n_free = 0
    for cell in range(s * s):
        r = cell // s
        c = cell % s
        if c == mid and state[4 + r] > 0:
            continue
        n_free += 1
    a_pick = rng_randint(st, n_free)
    d_pick = rng_randint(st, n_free - 1)
    if d_pick >= a_pick:
        d_pick += 1
    k = 0
    for cell in range(s * s):
        r = cell // s
        c = cell % s
        if c == mid and state[4 + r] > 0:
            continue
        if k == a_pick:
            state[0] = r
            state[1] = c
        if k == d_pick:
            state[2] = r
            state[3] = c
        k += 1
    state[4 + s] = 0
    state[5 + s] = 0


@njit
def unroll_inplace(state, actions, max_hp, regrow, horizon, shoot_reward, step_penalty, st):
    """Apply a whole action sequence in place.

    Returns (total_reward, ok) where ok == 1 iff every action was applied and
    the resulting state is non-terminal (a terminal state anywhere along the
    way, including after the last action, fails the unroll).
    """
    s = state.shape[0] - 6
    total = 0.0
    for i in range(actions.shape[0]):
        if state[5 + s] != 0:
            return total, 0
        total += step_inplace(state, actions[i], max_hp, regrow, horizon,
                              shoot_reward, step_penalty, st)
    if state[5 + s] != 0:
        return total, 0
    return total, 1


@njit
def certainty_count(state, actions, a_prime, n_sims, greedy, hp_base,
                    max_hp, regrow, horizon, shoot_reward, step_penalty, st):
    """Count unrollings of ``actions`` that end non-terminal with greedy == a_prime."""
    scratch = np.empty_like(state)
    successes = 0
    for _ in range(n_sims):
        scratch[:] = state
        _, ok = unroll_inplace(scratch, actions, max_hp, regrow, horizon,
                               shoot_reward, step_penalty, st)
        if ok == 1 and greedy[state_index(scratch, hp_base)] == a_prime:
            successes += 1
    return successes


@njit
def expand_samples(state, action, n_samples, max_hp, regrow, horizon,
                   shoot_reward, step_penalty, st, out_states, out_rewards, out_counts):
    """Draw ``n_samples`` successors for one action, deduplicated by state.

    Fills the out arrays and returns the number of distinct successors.
    ``out_counts[i]`` records how often successor ``i`` was drawn.
    """
    length = state.shape[0]
    n_unique = 0
    for _ in range(n_samples):
        nxt, rew = step_once(state, action, max_hp, regrow, horizon,
                             shoot_reward, step_penalty, st)
        found = -1
        for j in range(n_unique):
            same = True
            for i in range(length):
                if out_states[j, i] != nxt[i]:
                    same = False
                    break
            if same:
                found = j
                break
        if found >= 0:
            out_counts[found] += 1
        else:
            for i in range(length):
                out_states[n_unique, i] = nxt[i]
            out_rewards[n_unique] = rew
            out_counts[n_unique] = 1
            n_unique += 1
    return n_unique


@njit
def train_q(s, hp_base, max_hp, regrow, horizon, shoot_reward, step_penalty,
            init_tree_prob, episodes, alpha, gamma, eps_start, eps_end,
            replay_passes, init_value, st, q, visited, curve):
    """Tabular Q-learning over sampled episodes; fills q/visited/curve in place.

    Epsilon anneals linearly from eps_start to eps_end across episodes. Each
    finished episode is replayed backwards ``replay_passes`` times with the
    ordinary one-step update, which propagates terminal rewards along the
    whole trajectory instead of one cell per visit. Rows are set to
    ``init_value`` on first visit (a lower bound on returns), so an untried
    action never outranks one the agent has actually learned something about;
    unvisited rows keep their zeros. The curve receives the mean episode
    return per bucket of 100 episodes.
    """
    n_actions = q.shape[1]
    state = np.zeros(s + 6, dtype=np.int64)
    ep_idx = np.empty(horizon, dtype=np.int64)
    ep_act = np.empty(horizon, dtype=np.int64)
    ep_rew = np.empty(horizon, dtype=np.float64)
    ep_next = np.empty(horizon, dtype=np.int64)
    ep_term = np.empty(horizon, dtype=np.uint8)
    denom = episodes - 1 if episodes > 1 else 1
    bucket_sum = 0.0
    bucket_n = 0
    bucket = 0
    for ep in range(episodes):
        eps = eps_start + (eps_end - eps_start) * (ep / denom)
        sample_initial_inplace(state, init_tree_prob, max_hp, st)
        ep_return = 0.0
        length = 0
        while state[5 + s] == 0:
            idx = state_index(state, hp_base)
            if visited[idx] == 0:
                visited[idx] = 1
                for j in range(n_actions):
                    q[idx, j] = init_value
            if rng_uniform(st) < eps:
                a = rng_randint(st, n_actions)
            else:
                a = 0
                best = q[idx, 0]
                for j in range(1, n_actions):
                    if q[idx, j] > best:
                        best = q[idx, j]
                        a = j
            rew = step_inplace(state, a, max_hp, regrow, horizon,
                               shoot_reward, step_penalty, st)
            ep_return += rew
            ep_idx[length] = idx
            ep_act[length] = a
            ep_rew[length] = rew
            ep_term[length] = state[5 + s]
            ep_next[length] = state_index(state, hp_base)
            length += 1
        for _ in range(replay_passes):
            for t in range(length - 1, -1, -1):
                idx = ep_idx[t]
                a = ep_act[t]
                target = ep_rew[t]
                if ep_term[t] == 0:
                    idx2 = ep_next[t]
                    best2 = q[idx2, 0]
                    for j in range(1, n_actions):
                        if q[idx2, j] > best2:
                            best2 = q[idx2, j]
                    target = ep_rew[t] + gamma * best2
                q[idx, a] += alpha * (target - q[idx, a])
        bucket_sum += ep_return
        bucket_n += 1
        if bucket_n == 100:
            curve[bucket] = bucket_sum / 100.0
            bucket += 1
            bucket_sum = 0.0
            bucket_n = 0
    if bucket_n > 0 and bucket < curve.shape[0]:
        curve[bucket] = bucket_sum / bucket_n


@njit
def greedy_rollout(state_in, greedy, hp_base, max_hp, regrow, horizon,
                   shoot_reward, step_penalty, st):
    """Roll the greedy policy to termination; returns (shot, total_reward, steps)."""
    s = state_in.shape[0] - 6
    state = state_in.copy()
    total = 0.0
    steps = 0
    shot = 0
    while state[5 + s] == 0:
        a = greedy[state_index(state, hp_base)]
        rew = step_inplace(state, a, max_hp, regrow, horizon,
                           shoot_reward, step_penalty, st)
        total += rew
        steps += 1
        if rew == shoot_reward and state[5 + s] != 0:
            shot = 1
    return shot, total, steps


@njit
def bfs_locate(root_state, target_idx, k, n_samples, hp_base, max_hp, regrow,
               horizon, shoot_reward, step_penalty, st,
               visited, parent, parent_act, queue, out_actions):
    """Breadth-first determinized expansion up to depth k, looking for a state
    whose feature index equals ``target_idx``.

    Only non-terminal states are matched or expanded. Returns the length of
    the shortest sequence found (0 when the root itself matches) or -1. The
    sequence is written into ``out_actions``. The scratch arrays (visited,
    parent, parent_act, queue) must hold one slot per state index.
    """
    s = root_state.shape[0] - 6
    root_idx = state_index(root_state, hp_base)
    if root_state[5 + s] != 0:
        return -1
    if root_idx == target_idx:
        return 0
    visited[root_idx] = 1
    parent[root_idx] = -1
    queue[0] = root_idx
    lo = 0
    hi = 1
    scratch = np.empty_like(root_state)
    root_steps = root_state[4 + s]
    for depth in range(k):
        nxt_hi = hi
        for qi in range(lo, hi):
            cur = queue[qi]
            for a in range(N_ACTIONS):
                for _ in range(n_samples):
                    decode_index(cur, s, hp_base, root_steps + depth, scratch)
                    step_inplace(scratch, a, max_hp, regrow, horizon,
                                 shoot_reward, step_penalty, st)
                    if scratch[5 + s] != 0:
                        continue
                    idx = state_index(scratch, hp_base)
                    if visited[idx] != 0:
                        continue
                    visited[idx] = 1
                    parent[idx] = cur
                    parent_act[idx] = a
                    if idx == target_idx:
                        length = depth + 1
                        node = idx
                        for back in range(length - 1, -1, -1):
                            out_actions[back] = parent_act[node]
                            node = parent[node]
                        return length
                    queue[nxt_hi] = idx
                    nxt_hi += 1
        lo = hi
        hi = nxt_hi
        if lo == hi:
            break
    return -1
