"""Kinematic simulation of a chain of hinge-coupled differential-drive robots
in a bounded, featureless square arena.

Each tick:

1. wheel lag: each actual wheel velocity moves towards the desired one by at
   most ``wheel_lag`` per tick (slew-rate limit); with ``slew_limited=False``
   the first-order rule ``v += lag * (v_desired - v)`` is used instead;
2. neighbouring robots exchange ``coupling`` of their forward-speed mismatch
   along the link direction;
3. differential-drive kinematics move every robot;
4. link lengths and hinge angles are restored by iterative projection (equal
   split between the two linked bodies), followed by an exact pass from the
   centre robot outwards;
5. the chain is translated rigidly back into the arena if any body left it.

Position and heading corrections from steps 4-5 are fed back into the wheel
velocities as odometry, so a robot that is held back by its neighbours or by
a wall senses slower wheels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigurationError, SimulationError

DT = 0.1


@dataclass(frozen=True)
class ArenaConfig:
    """Arena geometry and the free physical constants of the robot model."""

    width: float = 8.0
    height: float = 8.0
    radius: float = 0.05
    link_gap: float = 0.02
    v_max: float = 0.6
    wheel_lag: float = 0.5
    hinge_limit: float = 0.9
    coupling: float = 0.3
    max_sweeps: int = 20
    slew_limited: bool = True

    @property
    def link_length(self) -> float:
        return 2.0 * self.radius + self.link_gap

    @property
    def axle(self) -> float:
        return 2.0 * self.radius

    def params(self) -> np.ndarray:
        return np.array([
            self.width, self.height, self.radius, self.link_length, self.v_max,
            self.wheel_lag, self.hinge_limit, self.coupling, float(self.max_sweeps), self.axle,
            float(self.slew_limited),
        ])


@dataclass
class ChainState:
    """Poses and actual wheel velocities of an ``r``-robot chain.

    ``positions`` is ``(r, 2)`` in metres, ``headings`` ``(r,)`` in radians,
    ``wheels`` ``(r, 2)`` holds the actual (left, right) wheel velocities in
    ``[-1, 1]``. Robot ``i`` is linked to robot ``i + 1``.
    """

    positions: np.ndarray
    headings: np.ndarray
    wheels: np.ndarray
    arena: ArenaConfig = field(default_factory=ArenaConfig)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.headings = np.ascontiguousarray(self.headings, dtype=np.float64)
        self.wheels = np.ascontiguousarray(self.wheels, dtype=np.float64)
        r = self.headings.shape[0]
        if self.positions.shape != (r, 2) or self.wheels.shape != (r, 2):
            raise ConfigurationError("positions, headings and wheels disagree on robot count")

    @property
    def size(self) -> int:
        return self.headings.shape[0]

    @property
    def center_index(self) -> int:
        return self.size // 2

    def copy(self) -> "ChainState":
        return ChainState(self.positions.copy(), self.headings.copy(), self.wheels.copy(), self.arena)


def init_chain(r: int, arena: ArenaConfig | None = None, heading: float = 0.0) -> ChainState:
    """Collinear chain along ``heading`` with its centre robot at the arena centre."""
    arena = arena or ArenaConfig()
    if r < 1:
        raise ConfigurationError(f"chain needs at least one robot, got {r}")
    extent = (r - 1) * arena.link_length + 2 * arena.radius
    if extent >= min(arena.width, arena.height):
        raise ConfigurationError(
            f"chain of {r} robots ({extent:.3f} m) does not fit the "
            f"{arena.width}x{arena.height} m arena"
        )
    offsets = (np.arange(r) - r // 2) * arena.link_length
    direction = np.array([math.cos(heading), math.sin(heading)])
    centre = np.array([arena.width / 2, arena.height / 2])
    positions = centre + offsets[:, None] * direction
    return ChainState(positions, np.full(r, float(heading)), np.zeros((r, 2)), arena)


def read_sensors(chain: ChainState) -> np.ndarray:
    """Actual wheel velocities, shape ``(r, 2)``; no noise is added."""
    return chain.wheels.copy()


def step(chain: ChainState, desired, dt: float = DT) -> ChainState:
    """Advance the chain one tick under the desired wheel velocities.

    Returns a new state; ``chain`` is left untouched.
    """
    desired = np.ascontiguousarray(desired, dtype=np.float64)
    if desired.shape != (chain.size, 2):
        raise ConfigurationError(f"need one desired wheel pair per robot, got shape {desired.shape}")
    if np.any(np.abs(desired) > 1.0):
        raise ConfigurationError("desired wheel velocities must lie in [-1, 1]")
    out = chain.copy()
    ok = _step(out.positions, out.headings, out.wheels, desired, chain.arena.params(), dt)
    if not ok:
        raise SimulationError("non-finite value in chain state after step")
    return out


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _wrap(angle):
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@njit(cache=True)
def _clip1(x):
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


@njit(cache=True)
def _step(pos, head, wheels, desired, params, dt):
    width = params[0]
    height = params[1]
    radius = params[2]
    link = params[3]
    v_max = params[4]
    lag = params[5]
    hinge = params[6]
    coupling = params[7]
    sweeps = int(params[8])
    axle = params[9]
    slew = params[10] != 0.0
    r = head.shape[0]

    for i in range(r):
        for w in range(2):
            gap = desired[i, w] - wheels[i, w]
            if slew:
                if gap > lag:
                    gap = lag
                elif gap < -lag:
                    gap = -lag
                wheels[i, w] += gap
            else:
                wheels[i, w] += lag * gap

    # forward-speed exchange along each link (normalized wheel units)
    for j in range(r - 1):
        dx = pos[j + 1, 0] - pos[j, 0]
        dy = pos[j + 1, 1] - pos[j, 1]
        d = math.sqrt(dx * dx + dy * dy)
        if d <= 0.0:
            continue
        ex = dx / d
        ey = dy / d
        ca = math.cos(head[j]) * ex + math.sin(head[j]) * ey
        cb = math.cos(head[j + 1]) * ex + math.sin(head[j + 1]) * ey
        ua = 0.5 * (wheels[j, 0] + wheels[j, 1])
        ub = 0.5 * (wheels[j + 1, 0] + wheels[j + 1, 1])
        mismatch = ua * ca - ub * cb
        da = -0.5 * coupling * mismatch * ca
        db = 0.5 * coupling * mismatch * cb
        for w in range(2):
            wheels[j, w] = _clip1(wheels[j, w] + da)
            wheels[j + 1, w] = _clip1(wheels[j + 1, w] + db)

    # differential-drive kinematics
    kin = np.empty((r, 2))
    kin_head = np.empty(r)
    heading_before = head.copy()
    for i in range(r):
        u = 0.5 * (wheels[i, 0] + wheels[i, 1]) * v_max
        omega = (wheels[i, 1] - wheels[i, 0]) * v_max / axle
        pos[i, 0] += u * dt * math.cos(head[i])
        pos[i, 1] += u * dt * math.sin(head[i])
        head[i] += omega * dt
        kin[i, 0] = pos[i, 0]
        kin[i, 1] = pos[i, 1]
        kin_head[i] = head[i]

    if r > 1:
        for _ in range(sweeps):
            worst = 0.0
            for j in range(r - 1):
                dx = pos[j + 1, 0] - pos[j, 0]
                dy = pos[j + 1, 1] - pos[j, 1]
                d = math.sqrt(dx * dx + dy * dy)
                err = d - link
                if abs(err) > worst:
                    worst = abs(err)
                if d > 0.0:
                    cx = 0.5 * err * dx / d
                    cy = 0.5 * err * dy / d
                    pos[j, 0] += cx
                    pos[j, 1] += cy
                    pos[j + 1, 0] -= cx
                    pos[j + 1, 1] -= cy
                rel = _wrap(head[j + 1] - head[j])
                if rel > hinge:
                    excess = rel - hinge
                    head[j] += 0.5 * excess
                    head[j + 1] -= 0.5 * excess
                    if excess > worst:
                        worst = excess
                elif rel < -hinge:
                    excess = -hinge - rel
                    head[j] -= 0.5 * excess
                    head[j + 1] += 0.5 * excess
                    if excess > worst:
                        worst = excess
            if worst < 1e-12:
                break
        # exact pass outwards from the centre robot
        c = r // 2
        for j in range(c, r - 1):
            _fix_link(pos, head, j, j + 1, link, hinge)
        for j in range(c, 0, -1):
            _fix_link(pos, head, j, j - 1, link, hinge)

    # rigid translation back into the arena
    shift_x = 0.0
    shift_y = 0.0
    for i in range(r):
        lo = radius - pos[i, 0]
        hi = width - radius - pos[i, 0]
        if lo > shift_x:
            shift_x = lo
        if hi < shift_x:
            shift_x = hi
        lo = radius - pos[i, 1]
        hi = height - radius - pos[i, 1]
        if lo > shift_y:
            shift_y = lo
        if hi < shift_y:
            shift_y = hi
    for i in range(r):
        pos[i, 0] += shift_x
        pos[i, 1] += shift_y

    # odometry feedback of the corrections into the sensed wheel velocities
    finite = True
    for i in range(r):
        cx = pos[i, 0] - kin[i, 0]
        cy = pos[i, 1] - kin[i, 1]
        ch = head[i] - kin_head[i]
        if cx != 0.0 or cy != 0.0 or ch != 0.0:
            du = (cx * math.cos(heading_before[i]) + cy * math.sin(heading_before[i])) / (dt * v_max)
            dw = ch * axle / (2.0 * dt * v_max)
            wheels[i, 0] = _clip1(wheels[i, 0] + du - dw)
            wheels[i, 1] = _clip1(wheels[i, 1] + du + dw)
        head[i] = _wrap(head[i])
        for k in range(2):
            if not (math.isfinite(pos[i, k]) and math.isfinite(wheels[i, k])):
                finite = False
        if not math.isfinite(head[i]):
            finite = False
    return finite


@njit(cache=True)
def _fix_link(pos, head, anchor, moved, link, hinge):
    dx = pos[moved, 0] - pos[anchor, 0]
    dy = pos[moved, 1] - pos[anchor, 1]
    d = math.sqrt(dx * dx + dy * dy)
    if d > 0.0:
        pos[moved, 0] = pos[anchor, 0] + dx * (link / d)
        pos[moved, 1] = pos[anchor, 1] + dy * (link / d)
    rel = _wrap(head[moved] - head[anchor])
    if rel > hinge:
        head[moved] -= rel - hinge
    elif rel < -hinge:
        head[moved] += -hinge - rel
