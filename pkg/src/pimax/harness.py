"""Experiment orchestration: wires learners to the simulated chain, runs the
learning, fixed-policy and composition experiments, and writes artifacts.

Randomness: one ``numpy.random.Generator`` over the PCG64 bit generator per
experiment, seeded with ``cfg.seed``. Each tick consumes exactly one
``random()`` double per controller, in controller order; nothing else draws
from it. PCG64 output and ``Generator.random`` are stable across platforms.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .composer import combine_learners, policy_distance
from .errors import ConfigurationError, SimulationError
from .infotheory import Binner
from .learner import EPS, LearnerState, RateSchedule, init_uniform, load_learner, save_learner
from .loop import OK, run_block
from .metrics import (
    CoverageGrid,
    RunLog,
    aposteriori_pi,
    coverage_entropy,
    sliding_coverage_entropy,
    write_csvs,
)
from .simworld import DT, ArenaConfig, init_chain

log = logging.getLogger(__name__)

BLOCK = 100_000
CANONICAL = ((1, 1), (1, 2), (3, 3), (3, 6), (5, 5), (5, 10))


@dataclass
class ExperimentConfig:
    """Parameters of one run. ``controllers_per_robot`` is 1 (combined) or 2 (split)."""

    robots: int = 1
    controllers_per_robot: int = 2
    bins: int = 4
    steps: int = 200_000
    control_rate: float = 10.0
    seed: int = 0
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    rate_schedule: RateSchedule = field(default_factory=RateSchedule)
    output_dir: Path | None = None
    init_policy: Path | None = None
    analysis_bins: int = 30
    analysis_window: int = 500_000
    sliding_window: int = 1000
    pi_stride: int = 100
    eps: float = EPS

    def __post_init__(self):
        if self.robots < 1:
            raise ConfigurationError(f"robots must be >= 1, got {self.robots}")
        if self.controllers_per_robot not in (1, 2):
            raise ConfigurationError("controllers_per_robot must be 1 (combined) or 2 (split)")
        if self.bins < 2:
            raise ConfigurationError(f"bins must be >= 2, got {self.bins}")
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        if self.control_rate <= 0:
            raise ConfigurationError("control_rate must be positive")
        if self.pi_stride < 1:
            raise ConfigurationError("pi_stride must be >= 1")

    @property
    def split(self) -> bool:
        return self.controllers_per_robot == 2

    @property
    def controllers(self) -> int:
        return self.robots * self.controllers_per_robot

    @property
    def num_states(self) -> int:
        return self.bins if self.split else self.bins ** 2

    @property
    def label(self) -> str:
        return f"{self.robots}-{self.controllers}"

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate

    @property
    def simulated_hours(self) -> float:
        return self.steps * self.dt / 3600.0

    # key=value persistence -------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "arena":
                for af in fields(ArenaConfig):
                    lines.append(f"arena.{af.name}={getattr(value, af.name)!r}")
            elif value is not None:
                lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, items: dict[str, str]) -> "ExperimentConfig":
        kwargs, arena = {}, {}
        types = {f.name: f for f in fields(cls)}
        arena_types = {f.name: f for f in fields(ArenaConfig)}
        for key, raw in items.items():
            raw = str(raw).strip()
            if key.startswith("arena."):
                name = key[len("arena."):]
                if name not in arena_types:
                    raise ConfigurationError(f"unknown arena key {name!r}")
                arena[name] = _parse_arena_value(name, raw)
            elif key not in types:
                raise ConfigurationError(f"unknown config key {key!r}")
            elif key == "rate_schedule":
                kwargs[key] = RateSchedule.parse(raw)
            elif key in ("output_dir", "init_policy"):
                kwargs[key] = Path(raw) if raw else None
            elif key in ("control_rate", "eps"):
                kwargs[key] = float(raw)
            else:
                try:
                    kwargs[key] = int(raw)
                except ValueError:
                    raise ConfigurationError(f"{key} must be an integer, got {raw!r}") from None
        if arena:
            kwargs["arena"] = ArenaConfig(**arena)
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(parse_key_values(Path(path).read_text(), str(path)))


def _parse_arena_value(name: str, raw: str):
    try:
        if name == "max_sweeps":
            return int(raw)
        if name == "slew_limited":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return float(raw)
    except ValueError:
        raise ConfigurationError(f"bad value for arena.{name}: {raw!r}") from None


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    items = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{source}:{no}: expected key=value")
        items[key.strip()] = value.strip()
    return items


@dataclass
class RunResult:
    config: ExperimentConfig
    log: RunLog
    learners: list[LearnerState]

    @property
    def final_pi(self) -> np.ndarray:
        return self.log.pi[-1]


# ---------------------------------------------------------------------------
# learner stacking
# ---------------------------------------------------------------------------


def _stack(learners: list[LearnerState]) -> dict[str, np.ndarray]:
    return {
        "p": np.stack([l.sensor_dist for l in learners]),
        "scount": np.array([l.sensor_count for l in learners], dtype=np.int64),
        "model": np.stack([l.world_model.rows for l in learners]),
        "counters": np.stack([l.world_model.counters for l in learners]),
        "policy": np.stack([l.policy.rows for l in learners]),
        "n": np.array([l.n for l in learners], dtype=np.int64),
    }


def _unstack(stacked: dict[str, np.ndarray], learners: list[LearnerState]) -> None:
    for c, l in enumerate(learners):
        l.sensor_dist[:] = stacked["p"][c]
        l.sensor_count = int(stacked["scount"][c])
        l.world_model.rows[:] = stacked["model"][c]
        l.world_model.counters[:] = stacked["counters"][c]
        l.policy.rows[:] = stacked["policy"][c]
        l.n = int(stacked["n"][c])
        l.policy.counters[:] = l.n


def initial_learners(cfg: ExperimentConfig) -> list[LearnerState]:
    """Uniform learners, or learners loaded from ``cfg.init_policy``.

    ``init_policy`` is either a single learner directory (copied to every
    controller) or a run directory holding ``controller_XX`` subdirectories.
    """
    n_s = cfg.num_states
    if cfg.init_policy is None:
        return [init_uniform(n_s, n_s, eps=cfg.eps, schedule=cfg.rate_schedule)
                for _ in range(cfg.controllers)]
    root = Path(cfg.init_policy)
    if (root / "policy.tbl").is_file():
        base = load_learner(root, eps=cfg.eps, schedule=cfg.rate_schedule)
        learners = [base.copy() for _ in range(cfg.controllers)]
    else:
        learners = [load_learner(root / f"controller_{c:02d}", eps=cfg.eps, schedule=cfg.rate_schedule)
                    for c in range(cfg.controllers)]
    for l in learners:
        if l.policy.shape != (n_s, n_s):
            raise ConfigurationError(
                f"initial learner in {root} has policy shape {l.policy.shape}, "
                f"configuration {cfg.label} with {cfg.bins} bins needs ({n_s}, {n_s})"
            )
    return learners


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _simulate(cfg: ExperimentConfig, learners: list[LearnerState], learn: bool) -> RunLog:
    if len(learners) != cfg.controllers:
        raise ConfigurationError(f"{cfg.label} needs {cfg.controllers} learners, got {len(learners)}")
    chain = init_chain(cfg.robots, cfg.arena)
    binner = Binner(cfg.bins)
    rng = np.random.default_rng(cfg.seed)
    stacked = _stack(learners)
    steps, r, c = cfg.steps, cfg.robots, cfg.controllers

    positions = np.empty((steps, r, 2))
    headings = np.empty((steps, r))
    wheels = np.empty((steps, r, 2))
    sensors = np.empty((steps, c), dtype=np.int16)
    actions = np.empty((steps, c), dtype=np.int16)
    n_pi = (steps - 1) // cfg.pi_stride + 1
    pi = np.zeros((n_pi, c))
    pi_ticks = np.zeros(n_pi, dtype=np.int64)
    prev_s = np.zeros(c, dtype=np.int64)
    prev_a = np.zeros(c, dtype=np.int64)
    params = cfg.arena.params()
    pi_next = 0
    schedule = learners[0].schedule

    for t0 in range(0, steps, BLOCK):
        t1 = min(t0 + BLOCK, steps)
        uniforms = rng.random((t1 - t0, c))
        status, pi_next = run_block(
            chain.positions, chain.headings, chain.wheels, params, cfg.dt, cfg.split,
            binner.k, binner.lo, binner.width, binner.centers,
            stacked["p"], stacked["scount"], stacked["model"], stacked["counters"],
            stacked["policy"], stacked["n"], learners[0].eps, schedule.kind, schedule.param,
            learn, uniforms, prev_s, prev_a, t0, cfg.pi_stride,
            positions[t0:t1], headings[t0:t1], wheels[t0:t1], sensors[t0:t1], actions[t0:t1],
            pi, pi_ticks, pi_next,
        )
        if status != OK:
            raise SimulationError(
                f"{cfg.label} seed {cfg.seed}: non-finite chain state in ticks {t0}..{t1 - 1}; "
                f"positions={chain.positions.tolist()} wheels={chain.wheels.tolist()}"
            )
        if not all(np.all(np.isfinite(stacked[k])) for k in ("p", "model", "policy")):
            raise SimulationError(f"{cfg.label} seed {cfg.seed}: non-finite learner tables by tick {t1}")
        log.debug("%s seed %d: %d/%d ticks", cfg.label, cfg.seed, t1, steps)

    _unstack(stacked, learners)
    return RunLog(
        ticks=np.arange(steps, dtype=np.int64), positions=positions, headings=headings,
        wheels=wheels, sensors=sensors, actions=actions, pi_ticks=pi_ticks[:pi_next],
        pi=pi[:pi_next], arena_size=(cfg.arena.width, cfg.arena.height),
    )


def run_experiment(cfg: ExperimentConfig, learners: list[LearnerState] | None = None) -> RunResult:
    """Learn for ``cfg.steps`` ticks; write artifacts when ``cfg.output_dir`` is set."""
    learners = learners if learners is not None else initial_learners(cfg)
    run_log = _simulate(cfg, learners, learn=True)
    result = RunResult(cfg, run_log, learners)
    if cfg.output_dir is not None:
        write_run(cfg.output_dir, result)
    return result


def run_fixed_policy(cfg: ExperimentConfig, learners: list[LearnerState] | None = None,
                     learner_dir=None) -> RunResult:
    """Apply frozen learners without any updates.

    Learners are passed directly or loaded from ``learner_dir`` (a run
    directory with ``controller_XX`` subdirectories).
    """
    if learners is None:
        if learner_dir is None:
            raise ConfigurationError("run_fixed_policy needs learners or a learner directory")
        learners = initial_learners(replace(cfg, init_policy=Path(learner_dir)))
    frozen = [l.copy() for l in learners]
    run_log = _simulate(cfg, frozen, learn=False)
    result = RunResult(cfg, run_log, frozen)
    if cfg.output_dir is not None:
        write_run(cfg.output_dir, result)
    return result


@dataclass
class CompositionReport:
    distance: float
    initial_pi: float
    split_pi: tuple[float, float]
    result: RunResult
    initial: LearnerState

    def summary(self) -> dict[str, float]:
        ticks, _, avg = self.result.log.pi_ticks, None, self.result.log.pi.mean(axis=1)
        return {
            "policy_distance": self.distance,
            "initial_composed_pi": self.initial_pi,
            "split_pi_left": self.split_pi[0],
            "split_pi_right": self.split_pi[1],
            "final_pi": float(avg[-1]),
            "min_pi": float(avg.min()),
            "ticks": int(ticks[-1]) + 1,
        }


def run_composition_experiment(left: LearnerState, right: LearnerState, steps: int,
                               seed: int = 0, output_dir=None,
                               arena: ArenaConfig | None = None) -> CompositionReport:
    """Compose two split learners into one combined learner and keep learning on 1-1."""
    from .learner import intrinsic_pi

    initial = combine_learners(left, right)
    bins = left.num_sensors
    cfg = ExperimentConfig(robots=1, controllers_per_robot=1, bins=bins, steps=steps, seed=seed,
                           arena=arena or ArenaConfig(), rate_schedule=initial.schedule,
                           output_dir=Path(output_dir) if output_dir else None, eps=initial.eps)
    learner = initial.copy()
    result = run_experiment(cfg, [learner])
    report = CompositionReport(
        distance=policy_distance(initial.policy, learner.policy),
        initial_pi=intrinsic_pi(initial),
        split_pi=(intrinsic_pi(left), intrinsic_pi(right)),
        result=result,
        initial=initial,
    )
    if output_dir is not None:
        d = Path(output_dir)
        save_learner(d / "composed_initial", initial)
        (d / "composition.txt").write_text(
            "".join(f"{k}={v!r}\n" for k, v in report.summary().items())
        )
    return report


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def write_run(directory, result: RunResult) -> None:
    d = Path(directory)
    try:
        os.makedirs(d, exist_ok=True)
        cfg = replace(result.config, output_dir=None, init_policy=None)
        (d / "config.txt").write_text(cfg.to_text())
        for c, l in enumerate(result.learners):
            save_learner(d / f"controller_{c:02d}", l)
        result.log.save(d / "runlog.npz")
        write_csvs(d, result.log, min(result.config.sliding_window, len(result.log)))
    except OSError as exc:
        raise ConfigurationError(f"cannot write run artifacts to {d}: {exc}") from exc


def load_run(directory) -> tuple[ExperimentConfig, RunLog, list[LearnerState]]:
    d = Path(directory)
    if not (d / "config.txt").is_file():
        raise ConfigurationError(f"{d} is not a run directory (config.txt missing)")
    cfg = ExperimentConfig.load(d / "config.txt")
    run_log = RunLog.load(d / "runlog.npz")
    learners = [load_learner(d / f"controller_{c:02d}", eps=cfg.eps, schedule=cfg.rate_schedule)
                for c in range(cfg.controllers)]
    return cfg, run_log, learners


def analyze(run_log: RunLog, analysis_bins: int = 30, window: int = 500_000,
            sliding_window: int = 1000) -> dict[str, float]:
    """Scalar summary of a run: intrinsic, a-posteriori and coverage metrics."""
    out = {}
    if run_log.pi.shape[0]:
        avg = run_log.pi.mean(axis=1)
        out["final_intrinsic_pi"] = float(avg[-1])
    post = aposteriori_pi(run_log, analysis_bins, window)
    out["aposteriori_pi_mean"] = float(post.mean())
    for i, v in enumerate(post):
        out[f"aposteriori_pi_robot_{i}"] = float(v)
    w, h = run_log.arena_size
    out["coverage_entropy"] = coverage_entropy(CoverageGrid.from_positions(run_log.center_positions, w, h))
    if len(run_log) >= sliding_window:
        _, sl = sliding_coverage_entropy(run_log, sliding_window)
        out["sliding_entropy_mean"] = float(sl.mean())
    return out
