"""Policy-space constructions: composing a combined (two-wheel) learner from
two single-wheel learners, refining the bin resolution of a policy, and the
L2 distance between tables.

Product indexing everywhere: a combined index ``c`` over ``n**2`` values
splits into ``(c % n, c // n)`` = (left, right), left being the low-order
digit. The control loop fuses wheel bins the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .learner import ConditionalTable, LearnerState


@dataclass
class SplitPair:
    left: ConditionalTable
    right: ConditionalTable

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise ConfigurationError(
                f"split policies differ in shape: {self.left.shape} vs {self.right.shape}"
            )


def split_index(c: int, n: int) -> tuple[int, int]:
    """Combined index -> (left, right) component indices."""
    return c % n, c // n


def combined_index_map(n_s: int, n_a: int, s_c: int, a_c: int) -> tuple[int, int, int, int]:
    """``(s_c, a_c) -> (s_left, a_left, s_right, a_right)``."""
    s_l, s_r = split_index(s_c, n_s)
    a_l, a_r = split_index(a_c, n_a)
    return s_l, a_l, s_r, a_r


def _product_rows(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    # out[(rl + R*rr), (cl + C*cr)] = left[rl, cl] * right[rr, cr]
    n_r, n_c = left.shape
    out = np.einsum("ab,cd->cadb", left, right)
    return out.reshape(n_r * n_r, n_c * n_c)


def combine_split_policies(pair: SplitPair) -> ConditionalTable:
    """Product policy over the combined sensor and action spaces.

    Row counters take the minimum of the two source counters.
    """
    rows = _product_rows(pair.left.rows, pair.right.rows)
    counters = np.minimum.outer(pair.right.counters, pair.left.counters).ravel()
    return ConditionalTable(rows, counters)


def combine_world_models(left: ConditionalTable, right: ConditionalTable,
                         n_s: int, n_a: int) -> ConditionalTable:
    """Product world model ``delta_c(s'_c | s_c, a_c)`` from per-wheel models.

    Source rows are indexed ``s*n_a + a``; the combined row for
    ``(s_c, a_c)`` is ``s_c * n_a**2 + a_c``.
    """
    if left.shape != (n_s * n_a, n_s) or right.shape != left.shape:
        raise ConfigurationError(
            f"world models must both be ({n_s * n_a}, {n_s}), got {left.shape} and {right.shape}"
        )
    l3 = left.rows.reshape(n_s, n_a, n_s)
    r3 = right.rows.reshape(n_s, n_a, n_s)
    # axes: s_r, s_l, a_r, a_l, t_r, t_l (each pair right-major, left low-order)
    rows = np.einsum("aec,bfd->bafedc", l3, r3).reshape(n_s * n_s * n_a * n_a, n_s * n_s)
    lc = left.counters.reshape(n_s, n_a)
    rc = right.counters.reshape(n_s, n_a)
    counters = np.minimum(lc[None, :, None, :], rc[:, None, :, None]).reshape(-1)
    return ConditionalTable(rows, counters)


def combine_sensor_distributions(left, right) -> np.ndarray:
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape or left.ndim != 1:
        raise ConfigurationError(f"sensor distributions differ in shape: {left.shape} vs {right.shape}")
    return np.outer(right, left).ravel()


def combine_learners(left: LearnerState, right: LearnerState) -> LearnerState:
    """Combined-controller learner whose ``p``, ``delta`` and ``alpha`` are the
    products of the two split learners' tables.
    """
    if left.policy.shape != right.policy.shape:
        raise ConfigurationError(
            f"split learners differ in shape: {left.policy.shape} vs {right.policy.shape}"
        )
    n_s, n_a = left.policy.shape
    policy = combine_split_policies(SplitPair(left.policy, right.policy))
    n = min(left.n, right.n)
    policy.counters[:] = n
    return LearnerState(
        sensor_dist=combine_sensor_distributions(left.sensor_dist, right.sensor_dist),
        world_model=combine_world_models(left.world_model, right.world_model, n_s, n_a),
        policy=policy,
        n=n,
        sensor_count=min(left.sensor_count, right.sensor_count),
        eps=left.eps,
        schedule=left.schedule,
    )


def upsample_policy(table: ConditionalTable, factor: int = 2) -> ConditionalTable:
    """Refine each bin into ``factor`` child bins.

    Every child sensor row copies its parent row, and each parent action's
    probability is split equally over its ``factor`` child actions, so rows
    stay normalized and summing children recovers the coarse policy.
    """
    if factor != 2:
        raise ConfigurationError("only factor 2 refinement is supported")
    rows = np.repeat(np.repeat(table.rows, factor, axis=0), factor, axis=1) / factor
    return ConditionalTable(rows, np.repeat(table.counters, factor))


def coarsen_policy(table: ConditionalTable, factor: int = 2) -> ConditionalTable:
    """Inverse of :func:`upsample_policy` for policies built by it."""
    n_s, n_a = table.shape
    if n_s % factor or n_a % factor:
        raise ConfigurationError(f"shape {table.shape} not divisible by {factor}")
    rows = table.rows[::factor].reshape(n_s // factor, n_a // factor, factor).sum(axis=2)
    return ConditionalTable(rows, table.counters[::factor])


def policy_distance(a, b) -> float:
    """Frobenius (L2) distance between two tables of equal shape."""
    x = a.rows if isinstance(a, ConditionalTable) else np.asarray(a, dtype=np.float64)
    y = b.rows if isinstance(b, ConditionalTable) else np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ConfigurationError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.sqrt(np.sum((x - y) ** 2)))
