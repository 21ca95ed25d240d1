import math

import numpy as np
import pytest

from pimax import ConfigurationError
from pimax.metrics import (
    CoverageGrid,
    RunLog,
    aposteriori_pi,
    coverage_entropy,
    cumulative_coverage_entropy,
    pi_timeseries,
    read_csv,
    sliding_coverage_entropy,
    write_csvs,
)


def make_log(centre_xy, wheels=None, robots=1, pi=None):
    t = len(centre_xy)
    positions = np.repeat(np.asarray(centre_xy, dtype=float)[:, None, :], robots, axis=1)
    if wheels is None:
        wheels = np.zeros((t, robots, 2))
    if pi is None:
        pi_ticks, pi = np.arange(0, t, 10), np.zeros((len(range(0, t, 10)), 2))
    else:
        pi_ticks = np.arange(pi.shape[0]) * 10
    return RunLog(np.arange(t), positions, np.zeros((t, robots)), wheels,
                  np.zeros((t, 2), dtype=np.int16), np.zeros((t, 2), dtype=np.int16), pi_ticks, pi)


def grid_centres():
    c = (np.arange(20) + 0.5) * 0.4
    x, y = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel()])


class TestCoverage:
    def test_single_patch(self):
        assert coverage_entropy(CoverageGrid.from_positions([[1.0, 1.0]] * 50)) == 0.0

    def test_uniform_maximum(self):
        h = coverage_entropy(CoverageGrid.from_positions(grid_centres()))
        assert h == pytest.approx(math.log2(400), abs=1e-12)
        assert h == pytest.approx(8.64, abs=0.01)

    def test_two_patches(self):
        g = CoverageGrid.from_positions([[0.1, 0.1], [7.9, 7.9]])
        assert coverage_entropy(g) == pytest.approx(1.0)

    def test_boundary_positions_are_clipped(self):
        g = CoverageGrid.from_positions([[8.0, 8.0], [0.0, 0.0]])
        assert g.counts[19, 19] == 1 and g.counts[0, 0] == 1

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            coverage_entropy(CoverageGrid())

    def test_cumulative_is_nondecreasing_for_fresh_patches(self):
        log = make_log(np.repeat(grid_centres(), 10, axis=0))
        ticks, h = cumulative_coverage_entropy(log, every=10)
        assert h.size == 400
        assert np.all(np.diff(h) > 0)
        assert h[-1] == pytest.approx(math.log2(400))
        assert ticks[0] == 9


class TestSliding:
    def test_window_entropies(self):
        xy = np.vstack([np.full((100, 2), 1.0), grid_centres()[:100]])
        starts, h = sliding_coverage_entropy(make_log(xy), 100)
        np.testing.assert_array_equal(starts, [0, 100])
        assert h[0] == 0.0
        assert h[1] == pytest.approx(math.log2(100))

    def test_partial_tail_dropped(self):
        starts, _ = sliding_coverage_entropy(make_log(np.ones((250, 2))), 100)
        assert starts.size == 2

    def test_bad_window(self):
        with pytest.raises(ConfigurationError):
            sliding_coverage_entropy(make_log(np.ones((10, 2))), 11)


class TestPI:
    def test_timeseries_average(self):
        pi = np.array([[0.0, 1.0], [1.0, 2.0]])
        ticks, per, avg = pi_timeseries(make_log(np.ones((20, 2)), pi=pi))
        np.testing.assert_array_equal(avg, [0.5, 1.5])
        np.testing.assert_array_equal(ticks, [0, 10])

    def test_aposteriori_period_two(self):
        w = np.zeros((1001, 2, 2))
        w[::2, 0] = [0.9, -0.9]
        w[1::2, 0] = [-0.9, 0.9]
        log = make_log(np.ones((1001, 2)), wheels=w, robots=2)
        post = aposteriori_pi(log, bins=30, window=1000)
        assert post[0] == pytest.approx(1.0)
        assert post[1] == 0.0


class TestRunLog:
    def test_rejects_unordered_ticks(self):
        log = make_log(np.ones((5, 2)))
        with pytest.raises(ConfigurationError):
            RunLog(np.array([0, 2, 1, 3, 4]), log.positions, log.headings, log.wheels,
                   log.sensors, log.actions, log.pi_ticks, log.pi)

    def test_rejects_length_mismatch(self):
        log = make_log(np.ones((5, 2)))
        with pytest.raises(ConfigurationError):
            RunLog(log.ticks, log.positions[:4], log.headings, log.wheels,
                   log.sensors, log.actions, log.pi_ticks, log.pi)

    def test_save_load(self, tmp_path):
        log = make_log(np.random.default_rng(0).uniform(0, 8, (50, 2)))
        log.save(tmp_path / "log.npz")
        assert RunLog.load(tmp_path / "log.npz").equals(log)

    def test_load_missing(self, tmp_path):
        with pytest.raises(ConfigurationError):
            RunLog.load(tmp_path / "nope.npz")


def test_csv_files(tmp_path):
    log = make_log(grid_centres()[:30], robots=3)
    paths = write_csvs(tmp_path, log, sliding_window=10)
    assert sorted(p.name for p in paths) == ["coverage.csv", "pi.csv", "sliding.csv",
                                            "trajectory.csv", "wheels.csv"]
    traj = read_csv(tmp_path / "trajectory.csv")
    assert len(traj) == 90
    assert list(traj[0]) == ["tick", "robot_index", "x", "y", "heading"]
    assert float(traj[3]["x"]) == pytest.approx(log.positions[1, 0, 0])
    cov = read_csv(tmp_path / "coverage.csv")
    assert len(cov) == 400 and sum(int(r["count"]) for r in cov) == 30
    assert len(read_csv(tmp_path / "sliding.csv")) == 3
    assert list(read_csv(tmp_path / "pi.csv")[0]) == ["tick", "controller_index", "pi_bits"]
