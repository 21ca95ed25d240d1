"""Compiled sense-act-learn loop over all controllers of one chain.

Learner tables of the ``C`` controllers are stacked along a leading axis so
one call advances the whole experiment by a block of ticks. The per-controller
arithmetic is delegated to the kernels in :mod:`pimax.learner` and
:mod:`pimax.simworld`, so results are identical to driving the object API
tick by tick.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .learner import _learn, _pi, _sample
from .simworld import _step

OK = 0
NON_FINITE = 1


@njit(cache=True)
def _encode(x, lo, width, k):
    b = int(np.floor((x - lo) / width))
    if b < 0:
        return 0
    if b > k - 1:
        return k - 1
    return b


@njit(cache=True)
def run_block(pos, head, wheels, params, dt, split, k, lo, width, centers,
              p, scount, model, counters, policy, n, eps, rate_kind, rate_param,
              learn, uniforms, prev_s, prev_a, t0, pi_stride,
              log_pos, log_head, log_wheels, log_s, log_a, pi_log, pi_ticks, pi_next):
    """Run ``uniforms.shape[0]`` ticks starting at global tick ``t0``.

    Tick protocol: sense, learn from ``(prev_s, prev_a, s)`` when ``t > 0``,
    log, sample the action, step the world. PI samples are written from
    index ``pi_next``; the updated index is returned with a status code.
    """
    n_ticks = uniforms.shape[0]
    n_ctrl = p.shape[0]
    r = head.shape[0]
    n_s = policy.shape[1]
    n_a = policy.shape[2]
    grad = np.empty((n_s, n_a))
    increments = np.empty((n_s, n_a))
    desired = np.empty((r, 2))
    s = np.empty(n_ctrl, dtype=np.int64)
    a = np.empty(n_ctrl, dtype=np.int64)
    for t in range(n_ticks):
        g = t0 + t
        for i in range(r):
            bl = _encode(wheels[i, 0], lo, width, k)
            br = _encode(wheels[i, 1], lo, width, k)
            if split:
                s[2 * i] = bl
                s[2 * i + 1] = br
            else:
                s[i] = bl + k * br
        if learn and g > 0:
            for c in range(n_ctrl):
                scount[c] = _learn(p[c], scount[c], model[c], counters[c], policy[c], n[c],
                                   prev_s[c], prev_a[c], s[c], eps, rate_kind, rate_param,
                                   grad, increments)
                n[c] += 1
        if pi_stride > 0 and g % pi_stride == 0:
            for c in range(n_ctrl):
                pi_log[pi_next, c] = _pi(p[c], policy[c], model[c])
            pi_ticks[pi_next] = g
            pi_next += 1
        for c in range(n_ctrl):
            a[c] = _sample(policy[c, s[c]], uniforms[t, c])
        for i in range(r):
            if split:
                desired[i, 0] = centers[a[2 * i]]
                desired[i, 1] = centers[a[2 * i + 1]]
            else:
                desired[i, 0] = centers[a[i] % k]
                desired[i, 1] = centers[a[i] // k]
            log_pos[t, i, 0] = pos[i, 0]
            log_pos[t, i, 1] = pos[i, 1]
            log_head[t, i] = head[i]
            log_wheels[t, i, 0] = wheels[i, 0]
            log_wheels[t, i, 1] = wheels[i, 1]
        for c in range(n_ctrl):
            log_s[t, c] = s[c]
            log_a[t, c] = a[c]
            prev_s[c] = s[c]
            prev_a[c] = a[c]
        if not _step(pos, head, wheels, desired, params, dt):
            return NON_FINITE, pi_next
    return OK, pi_next
