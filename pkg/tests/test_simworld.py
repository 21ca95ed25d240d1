import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pimax import ConfigurationError, SimulationError
from pimax.simworld import ArenaConfig, ChainState, init_chain, read_sensors, step

SPEC_SPEED = ArenaConfig(v_max=0.3)


def link_errors(chain):
    d = np.linalg.norm(np.diff(chain.positions, axis=0), axis=1)
    return np.abs(d - chain.arena.link_length)


def hinge_angles(chain):
    return np.abs((np.diff(chain.headings) + math.pi) % (2 * math.pi) - math.pi)


class TestInit:
    def test_single_robot_at_centre(self):
        c = init_chain(1)
        np.testing.assert_array_equal(c.positions, [[4.0, 4.0]])
        np.testing.assert_array_equal(read_sensors(c), [[0.0, 0.0]])

    def test_five_collinear(self):
        c = init_chain(5)
        np.testing.assert_allclose(c.positions[2], [4.0, 4.0])
        np.testing.assert_allclose(c.positions[:, 1], 4.0)
        assert link_errors(c).max() < 1e-12

    def test_three_offsets(self):
        c = init_chain(3, heading=0.0)
        np.testing.assert_allclose(c.positions[:, 0] - 4.0, [-0.12, 0.0, 0.12], atol=1e-12)

    def test_too_long(self):
        with pytest.raises(ConfigurationError):
            init_chain(100, ArenaConfig(width=2.0, height=2.0))
        with pytest.raises(ConfigurationError):
            init_chain(0)


class TestSingleRobot:
    def test_straight_motion(self):
        c = init_chain(1, SPEC_SPEED)
        c.wheels[:] = 1.0
        out = step(c, [[1.0, 1.0]])
        assert out.positions[0, 0] - 4.0 == pytest.approx(0.03, abs=1e-12)
        assert out.positions[0, 1] == pytest.approx(4.0, abs=1e-12)
        assert out.headings[0] == 0.0

    def test_straight_motion_default_speed(self):
        c = init_chain(1)
        c.wheels[:] = 1.0
        out = step(c, [[1.0, 1.0]])
        assert out.positions[0, 0] - 4.0 == pytest.approx(c.arena.v_max * 0.1, abs=1e-12)

    def test_pure_rotation(self):
        out = step(init_chain(1), [[1.0, -1.0]])
        np.testing.assert_allclose(out.positions, [[4.0, 4.0]], atol=1e-9)
        assert out.headings[0] != 0.0

    def test_lag_from_rest(self):
        out = step(init_chain(1), [[1.0, 1.0]])
        np.testing.assert_allclose(read_sensors(out), [[0.5, 0.5]])

    def test_full_reversal_takes_four_ticks(self):
        c = init_chain(1)
        c.wheels[:] = 1.0
        seen = []
        for _ in range(4):
            c = step(c, [[-1.0, -1.0]])
            seen.append(c.wheels[0, 0])
        np.testing.assert_allclose(seen, [0.5, 0.0, -0.5, -1.0])

    def test_inertia_bin_example(self):
        # from the -3/4 bin any other desired value lands in the -1/2 bin
        for target in (-0.75, -0.25, 0.25, 0.75):
            c = init_chain(1)
            c.wheels[:] = -0.8
            out = step(c, [[target, target]])
            if target != -0.75:
                assert -0.5 <= out.wheels[0, 0] < 0.0

    def test_first_order_lag_option(self):
        c = init_chain(1, ArenaConfig(slew_limited=False))
        c.wheels[:] = 1.0
        out = step(c, [[-1.0, -1.0]])
        assert out.wheels[0, 0] == pytest.approx(0.0)

    def test_input_unchanged(self):
        c = init_chain(3)
        before = c.copy()
        step(c, np.ones((3, 2)))
        assert np.array_equal(c.positions, before.positions)

    def test_bad_inputs(self):
        with pytest.raises(ConfigurationError):
            step(init_chain(1), [[1.5, 0.0]])
        with pytest.raises(ConfigurationError):
            step(init_chain(3), [[1.0, 0.0]])

    def test_non_finite_is_fatal(self):
        c = init_chain(1)
        c.positions[0, 0] = np.nan
        with pytest.raises(SimulationError):
            step(c, [[0.0, 0.0]])


class TestWalls:
    def test_stays_inside(self):
        c = init_chain(1)
        for _ in range(2000):
            c = step(c, [[1.0, 1.0]])
        r = c.arena.radius
        assert r - 1e-12 <= c.positions[0, 0] <= 8.0 - r + 1e-12
        # pressed against the wall the robot senses that it cannot move
        np.testing.assert_allclose(read_sensors(c), 0.0, atol=1e-9)


def random_run(r, steps, seed):
    rng = np.random.default_rng(seed)
    c = init_chain(r)
    for _ in range(steps):
        c = step(c, rng.uniform(-1, 1, size=(r, 2)))
        yield c


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([1, 3, 5]), st.integers(0, 2**32 - 1))
def test_invariants_under_random_actions(r, seed):
    for c in random_run(r, 300, seed):
        assert np.all(np.abs(c.wheels) <= 1.0)
        assert np.all(c.positions >= c.arena.radius - 1e-9)
        assert np.all(c.positions <= 8.0 - c.arena.radius + 1e-9)
        if r > 1:
            assert link_errors(c).max() < 1e-6
            assert hinge_angles(c).max() <= c.arena.hinge_limit + 1e-9


def test_sensor_range_long_run():
    worst = 0.0
    for c in random_run(3, 100_000, 11):
        worst = max(worst, np.abs(c.wheels).max())
    assert worst <= 1.0


def test_bit_identical_replay():
    a = list(random_run(5, 500, 3))[-1]
    b = list(random_run(5, 500, 3))[-1]
    assert a.positions.tobytes() == b.positions.tobytes()
    assert a.wheels.tobytes() == b.wheels.tobytes()
    assert a.headings.tobytes() == b.headings.tobytes()


def test_uncoordinated_segment_is_dragged():
    # middle robot drives forward alone; its neighbours hold it back
    c = init_chain(3, heading=0.0)
    desired = np.array([[-1.0, -1.0], [1.0, 1.0], [-1.0, -1.0]])
    for _ in range(10):
        c = step(c, desired)
    assert c.wheels[1, 0] < 0.5
    alone = init_chain(1)
    for _ in range(10):
        alone = step(alone, [[1.0, 1.0]])
    assert alone.wheels[0, 0] == 1.0


def test_chainstate_shape_check():
    with pytest.raises(ConfigurationError):
        ChainState(np.zeros((3, 2)), np.zeros(2), np.zeros((3, 2)))
