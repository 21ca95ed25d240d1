"""Tabular learner: sensor distribution, world model and policy with their
incremental update rules, and the natural-gradient (replicator) policy step
that climbs the intrinsic predictive information.

The numerical kernels are numba-compiled and operate on plain arrays so the
batched control loop in :mod:`pimax.loop` can call exactly the same code as
the object-level API below.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ConfigurationError
from .infotheory import SUM_TOL

EPS = 1e-6

RATE_RECIPROCAL = 0
RATE_FLOOR = 1
RATE_WARMUP = 2


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _project(v, eps):
    """Raise entries below ``eps`` to ``eps`` and rescale the rest to sum 1."""
    k = v.shape[0]
    fixed = np.zeros(k, dtype=np.bool_)
    for _ in range(k):
        n_fixed = 0
        free_mass = 0.0
        changed = False
        for i in range(k):
            if fixed[i]:
                n_fixed += 1
            elif v[i] < eps:
                fixed[i] = True
                n_fixed += 1
                changed = True
            else:
                free_mass += v[i]
        if not changed and n_fixed == 0:
            break
        target = 1.0 - n_fixed * eps
        scale = target / free_mass if free_mass > 0.0 else 0.0
        for i in range(k):
            if fixed[i]:
                v[i] = eps
            else:
                v[i] *= scale
        if not changed:
            break
    # a plain renormalization keeps the sum exact to round-off
    total = 0.0
    for i in range(k):
        total += v[i]
    for i in range(k):
        v[i] /= total


@njit(cache=True)
def _update_sensor(p, count, s, eps):
    n = float(count)
    keep = n / (n + 1.0)
    for i in range(p.shape[0]):
        p[i] *= keep
    p[s] += 1.0 / (n + 1.0)
    _project(p, eps)
    return count + 1


@njit(cache=True)
def _update_model(model, counters, row, s_next, eps):
    counters[row] += 1
    n = float(counters[row])
    keep = n / (n + 1.0)
    r = model[row]
    for i in range(r.shape[0]):
        r[i] *= keep
    r[s_next] += 1.0 / (n + 1.0)
    _project(r, eps)


@njit(cache=True)
def _transition(policy, model, q):
    n_s, n_a = policy.shape
    for s in range(n_s):
        for t in range(n_s):
            q[s, t] = 0.0
        for a in range(n_a):
            w = policy[s, a]
            row = model[s * n_a + a]
            for t in range(n_s):
                q[s, t] += w * row[t]


@njit(cache=True)
def _gradient(p, policy, model, grad):
    n_s, n_a = policy.shape
    q = np.empty((n_s, n_s))
    _transition(policy, model, q)
    r = np.zeros(n_s)
    for s in range(n_s):
        for t in range(n_s):
            r[t] += p[s] * q[s, t]
    for s in range(n_s):
        for t in range(n_s):
            q[s, t] = np.log2(q[s, t] / r[t])
        for a in range(n_a):
            row = model[s * n_a + a]
            acc = 0.0
            for t in range(n_s):
                acc += row[t] * q[s, t]
            grad[s, a] = p[s] * acc


@njit(cache=True)
def _pi(p, policy, model):
    n_s = policy.shape[0]
    q = np.empty((n_s, n_s))
    _transition(policy, model, q)
    r = np.zeros(n_s)
    for s in range(n_s):
        for t in range(n_s):
            r[t] += p[s] * q[s, t]
    mi = 0.0
    for s in range(n_s):
        for t in range(n_s):
            j = p[s] * q[s, t]
            if j > 0.0:
                mi += j * np.log2(q[s, t] / r[t])
    return max(mi, 0.0)


@njit(cache=True)
def _rate(n, kind, param):
    base = 1.0 / (n + 1.0)
    if kind == 1:
        return max(base, param)
    if kind == 2:
        if n <= param:
            return 1.0 / (param + 1.0)
    return base


@njit(cache=True)
def _replicator(policy, grad, rate, eps, increments):
    n_s, n_a = policy.shape
    for s in range(n_s):
        mean = 0.0
        for a in range(n_a):
            mean += policy[s, a] * grad[s, a]
        for a in range(n_a):
            increments[s, a] = rate * policy[s, a] * (grad[s, a] - mean)
        for a in range(n_a):
            policy[s, a] += increments[s, a]
        _project(policy[s], eps)


@njit(cache=True)
def _sample(row, u):
    acc = 0.0
    last = row.shape[0] - 1
    for a in range(last):
        acc += row[a]
        if u < acc:
            return a
    return last


@njit(cache=True)
def _learn(p, sensor_count, model, counters, policy, n, s_prev, a_prev, s_now,
           eps, rate_kind, rate_param, grad, increments):
    n_a = policy.shape[1]
    sensor_count = _update_sensor(p, sensor_count, s_now, eps)
    _update_model(model, counters, s_prev * n_a + a_prev, s_now, eps)
    _gradient(p, policy, model, grad)
    _replicator(policy, grad, _rate(n + 1, rate_kind, rate_param), eps, increments)
    return sensor_count


# ---------------------------------------------------------------------------
# object-level API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateSchedule:
    """Policy learning-rate schedule ``a_n`` for update number ``n >= 1``.

    ``reciprocal``: ``1/(n+1)``. ``floor:F``: ``max(1/(n+1), F)``.
    ``warmup:K``: constant ``1/(K+1)`` for ``n <= K``, reciprocal after.
    """

    kind: int = RATE_RECIPROCAL
    param: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "RateSchedule":
        text = text.strip()
        if text == "reciprocal":
            return cls()
        name, _, value = text.partition(":")
        try:
            x = float(value)
        except ValueError:
            raise ConfigurationError(f"bad rate schedule {text!r}") from None
        if name == "floor" and 0.0 < x <= 1.0:
            return cls(RATE_FLOOR, x)
        if name == "warmup" and x >= 0 and x == int(x):
            return cls(RATE_WARMUP, x)
        raise ConfigurationError(
            f"bad rate schedule {text!r}; use reciprocal, floor:F (0<F<=1) or warmup:K"
        )

    def __str__(self) -> str:
        if self.kind == RATE_FLOOR:
            return f"floor:{self.param:g}"
        if self.kind == RATE_WARMUP:
            return f"warmup:{int(self.param)}"
        return "reciprocal"

    def rate(self, n: int) -> float:
        return _rate(n, self.kind, self.param)


@dataclass
class ConditionalTable:
    """Row-stochastic table with one sample counter per row."""

    rows: np.ndarray
    counters: np.ndarray

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        self.counters = np.ascontiguousarray(self.counters, dtype=np.int64)
        if self.rows.ndim != 2:
            raise ConfigurationError(f"table rows must be 2-d, got shape {self.rows.shape}")
        if self.counters.shape != (self.rows.shape[0],):
            raise ConfigurationError(
                f"need one counter per row: {self.rows.shape[0]} rows, "
                f"counters shape {self.counters.shape}"
            )

    @classmethod
    def uniform(cls, n_rows: int, n_cols: int) -> "ConditionalTable":
        return cls(np.full((n_rows, n_cols), 1.0 / n_cols), np.zeros(n_rows, dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    def copy(self) -> "ConditionalTable":
        return ConditionalTable(self.rows.copy(), self.counters.copy())

    def check(self, eps: float = 0.0) -> None:
        sums = self.rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            raise ConfigurationError(f"rows must sum to 1 (worst {sums[np.argmax(np.abs(sums - 1))]!r})")
        if self.rows.min() < eps * (1 - 1e-12):
            raise ConfigurationError(f"entries below floor {eps}")
        if np.any(self.counters < 0):
            raise ConfigurationError("negative counter")


@dataclass
class LearnerState:
    """Everything one controller knows: ``p(s)``, ``delta(s'|s,a)``, ``alpha(a|s)``.

    ``world_model`` has ``S*A`` rows (row ``s*A + a``) of width ``S``;
    ``policy`` has ``S`` rows of width ``A``. ``n`` counts completed learning
    steps and drives the policy rate; ``sensor_count`` counts sensor
    observations including the uniform prior as one pseudo-observation.
    """

    sensor_dist: np.ndarray
    world_model: ConditionalTable
    policy: ConditionalTable
    n: int = 0
    sensor_count: int = 1
    prev_sensor: int | None = None
    eps: float = EPS
    schedule: RateSchedule = field(default_factory=RateSchedule)

    def __post_init__(self):
        self.sensor_dist = np.ascontiguousarray(self.sensor_dist, dtype=np.float64)
        n_s, n_a = self.policy.shape
        if self.sensor_dist.shape != (n_s,):
            raise ConfigurationError(
                f"sensor distribution has {self.sensor_dist.size} states, policy has {n_s}"
            )
        if self.world_model.shape != (n_s * n_a, n_s):
            raise ConfigurationError(
                f"world model must be ({n_s * n_a}, {n_s}), got {self.world_model.shape}"
            )

    @property
    def num_sensors(self) -> int:
        return self.policy.shape[0]

    @property
    def num_actions(self) -> int:
        return self.policy.shape[1]

    def copy(self) -> "LearnerState":
        return LearnerState(
            self.sensor_dist.copy(), self.world_model.copy(), self.policy.copy(),
            self.n, self.sensor_count, self.prev_sensor, self.eps, self.schedule,
        )

    def model_3d(self) -> np.ndarray:
        """View of the world model indexed ``[s, a, s_next]``."""
        return self.world_model.rows.reshape(self.num_sensors, self.num_actions, self.num_sensors)


def init_uniform(num_sensors: int, num_actions: int, *, eps: float = EPS,
                 schedule: RateSchedule | None = None) -> LearnerState:
    """Fresh learner with uniform ``p``, ``delta`` and ``alpha``."""
    if num_sensors < 2 or num_actions < 2:
        raise ConfigurationError(
            f"need at least 2 sensor states and 2 actions, got {num_sensors}, {num_actions}"
        )
    return LearnerState(
        sensor_dist=np.full(num_sensors, 1.0 / num_sensors),
        world_model=ConditionalTable.uniform(num_sensors * num_actions, num_sensors),
        policy=ConditionalTable.uniform(num_sensors, num_actions),
        eps=eps,
        schedule=schedule or RateSchedule(),
    )


def _check_index(value: int, size: int, what: str) -> int:
    if not 0 <= value < size:
        raise ConfigurationError(f"{what} {value} outside 0..{size - 1}")
    return int(value)


def update_sensor_distribution(state: LearnerState, observed_s: int) -> LearnerState:
    """Running-mean update of ``p(s)`` with rate ``1/(count+1)``; in place."""
    s = _check_index(observed_s, state.num_sensors, "sensor state")
    state.sensor_count = int(_update_sensor(state.sensor_dist, state.sensor_count, s, state.eps))
    return state


def update_world_model(state: LearnerState, s: int, a: int, s_next: int) -> LearnerState:
    """Running-mean update of row ``(s, a)`` of the world model; in place."""
    s = _check_index(s, state.num_sensors, "sensor state")
    a = _check_index(a, state.num_actions, "action")
    s_next = _check_index(s_next, state.num_sensors, "next sensor state")
    _update_model(state.world_model.rows, state.world_model.counters,
                  s * state.num_actions + a, s_next, state.eps)
    return state


def policy_gradient(state: LearnerState) -> np.ndarray:
    """Partial derivatives of the intrinsic PI (bits) w.r.t. each ``alpha(a|s)``.

    ``p(s)`` is treated as fixed, i.e. its dependence on the policy through
    the stationary distribution is ignored.
    """
    grad = np.empty(state.policy.shape)
    _gradient(state.sensor_dist, state.policy.rows, state.world_model.rows, grad)
    return grad


def update_policy(state: LearnerState, *, return_increments: bool = False):
    """One replicator step on every policy row with the scheduled rate.

    The rate is taken for update number ``state.n + 1``. With
    ``return_increments=True`` the raw (pre-projection) increments are
    returned alongside the state.
    """
    grad = policy_gradient(state)
    increments = np.empty_like(grad)
    _replicator(state.policy.rows, grad, state.schedule.rate(state.n + 1), state.eps, increments)
    state.policy.counters += 1
    if return_increments:
        return state, increments
    return state


def sample_action(state: LearnerState, s: int, rng: np.random.Generator) -> int:
    """Draw an action from ``alpha(.|s)`` using one uniform from ``rng``."""
    s = _check_index(s, state.num_sensors, "sensor state")
    return int(_sample(state.policy.rows[s], rng.random()))


def learning_step(state: LearnerState, s_prev: int, a_prev: int, s_now: int) -> LearnerState:
    """One control-tick update: sensor distribution, world model, policy; in place."""
    _check_index(s_prev, state.num_sensors, "sensor state")
    _check_index(a_prev, state.num_actions, "action")
    _check_index(s_now, state.num_sensors, "sensor state")
    grad = np.empty(state.policy.shape)
    increments = np.empty_like(grad)
    state.sensor_count = int(_learn(
        state.sensor_dist, state.sensor_count, state.world_model.rows,
        state.world_model.counters, state.policy.rows, state.n, s_prev, a_prev, s_now,
        state.eps, state.schedule.kind, state.schedule.param, grad, increments,
    ))
    state.n += 1
    state.policy.counters[:] = state.n
    state.prev_sensor = int(s_now)
    return state


def intrinsic_pi(state: LearnerState) -> float:
    """Predictive information computed from the learner's own tables."""
    return float(_pi(state.sensor_dist, state.policy.rows, state.world_model.rows))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def write_table(path, table: ConditionalTable) -> None:
    """Write ``table <rows> <cols>``, the rows, then a ``counters <n>`` block."""
    n_rows, n_cols = table.shape
    lines = [f"table {n_rows} {n_cols}"]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in table.rows)
    lines.append(f"counters {n_rows}")
    lines.append(" ".join(str(int(c)) for c in table.counters))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path) -> ConditionalTable:
    try:
        lines = Path(path).read_text().split("\n")
    except OSError as exc:
        raise ConfigurationError(f"cannot read table {path}: {exc}") from exc
    try:
        tag, n_rows, n_cols = lines[0].split()
        n_rows, n_cols = int(n_rows), int(n_cols)
        if tag != "table":
            raise ValueError("missing 'table' header")
        rows = np.array([[float(x) for x in lines[1 + i].split()] for i in range(n_rows)])
        if rows.shape != (n_rows, n_cols):
            raise ValueError(f"expected {n_rows}x{n_cols} values")
        tag, n = lines[1 + n_rows].split()
        if tag != "counters" or int(n) != n_rows:
            raise ValueError("bad counters header")
        counters = np.array([int(x) for x in lines[2 + n_rows].split()], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"malformed table file {path}: {exc}") from exc
    return ConditionalTable(rows, counters)


def save_learner(directory, state: LearnerState) -> None:
    """Write ``sensor.tbl``, ``world_model.tbl`` and ``policy.tbl`` into ``directory``.

    The sensor distribution is stored as a one-row table whose counter is
    ``sensor_count``; the policy row counters carry ``n``.
    """
    d = Path(directory)
    os.makedirs(d, exist_ok=True)
    sensor = ConditionalTable(state.sensor_dist[None, :], np.array([state.sensor_count]))
    write_table(d / "sensor.tbl", sensor)
    write_table(d / "world_model.tbl", state.world_model)
    policy = state.policy.copy()
    policy.counters[:] = state.n
    write_table(d / "policy.tbl", policy)


def load_learner(directory, *, eps: float = EPS,
                 schedule: RateSchedule | None = None) -> LearnerState:
    d = Path(directory)
    for name in ("sensor.tbl", "world_model.tbl", "policy.tbl"):
        if not (d / name).is_file():
            raise ConfigurationError(f"learner file missing: {d / name}")
    sensor = read_table(d / "sensor.tbl")
    if sensor.shape[0] != 1:
        raise ConfigurationError(f"{d / 'sensor.tbl'}: expected a single row")
    policy = read_table(d / "policy.tbl")
    return LearnerState(
        sensor_dist=sensor.rows[0],
        world_model=read_table(d / "world_model.tbl"),
        policy=policy,
        n=int(policy.counters.max()) if policy.counters.size else 0,
        sensor_count=int(sensor.counters[0]),
        eps=eps,
        schedule=schedule or RateSchedule(),
    )
