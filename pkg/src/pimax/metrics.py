"""Run logs and behaviour metrics: coverage entropy, sliding-window coverage
entropy, intrinsic-PI time series, and a-posteriori PI from recorded wheel
velocities.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .infotheory import Binner, empirical_mi_from_series

GRID = 20
CSV_FLOAT = "%.12g"


@dataclass
class RunLog:
    """Per-tick record of one experiment.

    Row ``t`` holds the world as sensed at tick ``t`` (before that tick's
    action was applied) together with the discrete sensor state and action
    of every controller. Intrinsic PI is sampled at ``pi_ticks``.
    """

    ticks: np.ndarray          # (T,)
    positions: np.ndarray      # (T, r, 2) metres
    headings: np.ndarray       # (T, r) radians
    wheels: np.ndarray         # (T, r, 2) actual wheel velocities
    sensors: np.ndarray        # (T, C) discrete sensor states
    actions: np.ndarray        # (T, C) discrete actions
    pi_ticks: np.ndarray       # (M,)
    pi: np.ndarray             # (M, C) bits
    arena_size: tuple[float, float] = (8.0, 8.0)

    def __post_init__(self):
        t = self.ticks.shape[0]
        if t and np.any(np.diff(self.ticks) <= 0):
            raise ConfigurationError("tick indices must be strictly increasing")
        for name in ("positions", "headings", "wheels", "sensors", "actions"):
            if getattr(self, name).shape[0] != t:
                raise ConfigurationError(f"{name} has {getattr(self, name).shape[0]} records, expected {t}")
        if self.pi.shape[0] != self.pi_ticks.shape[0]:
            raise ConfigurationError("pi samples and pi ticks disagree")

    def __len__(self) -> int:
        return self.ticks.shape[0]

    @property
    def num_robots(self) -> int:
        return self.headings.shape[1]

    @property
    def num_controllers(self) -> int:
        return self.sensors.shape[1]

    @property
    def center_positions(self) -> np.ndarray:
        return self.positions[:, self.num_robots // 2, :]

    def save(self, path) -> None:
        np.savez_compressed(
            path, ticks=self.ticks, positions=self.positions, headings=self.headings,
            wheels=self.wheels, sensors=self.sensors, actions=self.actions,
            pi_ticks=self.pi_ticks, pi=self.pi, arena_size=np.array(self.arena_size),
        )

    @classmethod
    def load(cls, path) -> "RunLog":
        try:
            with np.load(path) as z:
                fields = {k: z[k] for k in z.files}
        except OSError as exc:
            raise ConfigurationError(f"cannot read run log {path}: {exc}") from exc
        fields["arena_size"] = tuple(float(x) for x in fields["arena_size"])
        return cls(**fields)

    def equals(self, other: "RunLog") -> bool:
        return self.arena_size == other.arena_size and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("ticks", "positions", "headings", "wheels", "sensors", "actions", "pi_ticks", "pi")
        )


class CoverageGrid:
    """Visit counters over a ``GRID x GRID`` partition of the arena."""

    def __init__(self, width: float = 8.0, height: float = 8.0, cells: int = GRID):
        self.width = float(width)
        self.height = float(height)
        self.cells = int(cells)
        self.counts = np.zeros((self.cells, self.cells), dtype=np.int64)

    def patch_indices(self, xy) -> tuple[np.ndarray, np.ndarray]:
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        ix = np.clip(np.floor(xy[:, 0] / self.width * self.cells), 0, self.cells - 1).astype(np.int64)
        iy = np.clip(np.floor(xy[:, 1] / self.height * self.cells), 0, self.cells - 1).astype(np.int64)
        return ix, iy

    def add(self, xy) -> "CoverageGrid":
        ix, iy = self.patch_indices(xy)
        np.add.at(self.counts, (ix, iy), 1)
        return self

    @classmethod
    def from_positions(cls, xy, width: float = 8.0, height: float = 8.0) -> "CoverageGrid":
        return cls(width, height).add(xy)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _entropy_of_counts(counts) -> float:
    c = np.asarray(counts, dtype=np.float64).ravel()
    c = c[c > 0]
    q = c / c.sum()
    return float(max(-np.sum(q * np.log2(q)), 0.0))


def coverage_entropy(grid: CoverageGrid) -> float:
    """Entropy (bits) of the visit-frequency distribution over patches."""
    if grid.total <= 0:
        raise ConfigurationError("coverage grid is empty")
    return _entropy_of_counts(grid.counts)


def cumulative_coverage_entropy(log: RunLog, every: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Coverage entropy of the centre robot over ticks ``[0, t]`` sampled every ``every`` ticks."""
    w, h = log.arena_size
    grid = CoverageGrid(w, h)
    ix, iy = grid.patch_indices(log.center_positions)
    flat = ix * grid.cells + iy
    ends = np.arange(every, len(log) + 1, every)
    out = np.empty(ends.size)
    counts = np.zeros(grid.cells * grid.cells, dtype=np.int64)
    start = 0
    for i, end in enumerate(ends):
        counts += np.bincount(flat[start:end], minlength=counts.size)
        out[i] = _entropy_of_counts(counts)
        start = end
    return log.ticks[ends - 1], out


def sliding_coverage_entropy(log: RunLog, window: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Coverage entropy of the centre robot on consecutive non-overlapping windows.

    Returns ``(window_start_ticks, entropies)``; an incomplete trailing
    window is dropped.
    """
    window = int(window)
    if window < 1 or window > len(log):
        raise ConfigurationError(f"window {window} must lie in 1..{len(log)}")
    w, h = log.arena_size
    grid = CoverageGrid(w, h)
    ix, iy = grid.patch_indices(log.center_positions)
    n_win = len(log) // window
    flat = (ix * grid.cells + iy)[: n_win * window].reshape(n_win, window)
    out = np.empty(n_win)
    for i in range(n_win):
        out[i] = _entropy_of_counts(np.bincount(flat[i], minlength=grid.cells * grid.cells))
    return log.ticks[: n_win * window : window], out


def pi_timeseries(log: RunLog) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(ticks, per_controller, average)`` intrinsic-PI series."""
    if log.pi.shape[0] == 0:
        raise ConfigurationError("run log has no PI samples")
    return log.pi_ticks, log.pi, log.pi.mean(axis=1)


def aposteriori_pi(log: RunLog, bins: int = 30, window: int = 500_000) -> np.ndarray:
    """Per-robot PI of the recorded wheel velocities at ``bins`` bins per wheel."""
    binner = Binner(bins)
    window = min(int(window), len(log) - 1)
    return np.array([
        empirical_mi_from_series(log.wheels[:, i, :], binner, window)
        for i in range(log.num_robots)
    ])


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _write_csv(path, header: list[str], columns: list[np.ndarray], fmts: list[str]) -> None:
    data = np.column_stack(columns) if columns[0].size else np.empty((0, len(columns)))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if data.shape[0]:
            np.savetxt(fh, data, fmt=fmts, delimiter=",")


def write_csvs(directory, log: RunLog, sliding_window: int = 1000) -> list[Path]:
    """Write the trajectory, wheel, PI, coverage and sliding-entropy CSV files."""
    d = Path(directory)
    os.makedirs(d, exist_ok=True)
    t, r = len(log), log.num_robots
    tick = np.repeat(log.ticks, r)
    robot = np.tile(np.arange(r), t)
    written = []

    path = d / "trajectory.csv"
    _write_csv(path, ["tick", "robot_index", "x", "y", "heading"],
               [tick, robot, log.positions[:, :, 0].ravel(), log.positions[:, :, 1].ravel(),
                log.headings.ravel()],
               ["%d", "%d", CSV_FLOAT, CSV_FLOAT, CSV_FLOAT])
    written.append(path)

    path = d / "wheels.csv"
    _write_csv(path, ["tick", "robot_index", "v_left", "v_right"],
               [tick, robot, log.wheels[:, :, 0].ravel(), log.wheels[:, :, 1].ravel()],
               ["%d", "%d", CSV_FLOAT, CSV_FLOAT])
    written.append(path)

    m, c = log.pi.shape
    path = d / "pi.csv"
    _write_csv(path, ["tick", "controller_index", "pi_bits"],
               [np.repeat(log.pi_ticks, c), np.tile(np.arange(c), m), log.pi.ravel()],
               ["%d", "%d", CSV_FLOAT])
    written.append(path)

    w, h = log.arena_size
    grid = CoverageGrid.from_positions(log.center_positions, w, h)
    px, py = np.meshgrid(np.arange(grid.cells), np.arange(grid.cells), indexing="ij")
    path = d / "coverage.csv"
    _write_csv(path, ["patch_x", "patch_y", "count"],
               [px.ravel(), py.ravel(), grid.counts.ravel()], ["%d", "%d", "%d"])
    written.append(path)

    path = d / "sliding.csv"
    if len(log) >= sliding_window:
        starts, ent = sliding_coverage_entropy(log, sliding_window)
    else:
        starts, ent = np.empty(0), np.empty(0)
    _write_csv(path, ["window_start_tick", "entropy_bits"], [starts, ent], ["%d", CSV_FLOAT])
    written.append(path)
    return written


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
