import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_joint, plain_entropy, random_components, random_simplex
from pimax import (
    Binner,
    ConfigurationError,
    empirical_mi_from_series,
    entropy,
    joint_from_components,
    mutual_information,
    predictive_information,
)


@pytest.mark.parametrize(
    "probs, expected",
    [
        ([0.5, 0.5], 1.0),
        ([0.25, 0.25, 0.25, 0.25], 2.0),
        # direct evaluation of -sum p log2 p with the math module
        ([0.625, 0.125, 0.125, 0.125], 1.5487949406953985),
    ],
)
def test_entropy_examples(probs, expected):
    assert entropy(probs) == pytest.approx(expected, abs=1e-12)


def test_entropy_rejects_non_distribution():
    with pytest.raises(ConfigurationError):
        entropy([0.5, 0.6])


positive_vectors = arrays(np.float64, st.integers(2, 12),
                          elements=st.floats(1e-6, 1.0, allow_nan=False))


@given(positive_vectors)
def test_entropy_bounded_by_log_cardinality(x):
    p = x / x.sum()
    h = entropy(p)
    assert -1e-12 <= h <= math.log2(p.size) + 1e-9


@given(st.integers(2, 64))
def test_entropy_uniform_attains_bound(k):
    assert entropy(np.full(k, 1.0 / k)) == pytest.approx(math.log2(k), abs=1e-9)


def test_mi_of_product_joint_is_zero(rng):
    a = random_simplex(rng, (5,))
    b = random_simplex(rng, (4,))
    assert mutual_information(np.outer(a, b)) == pytest.approx(0.0, abs=1e-12)


def test_mi_of_identity_joint():
    assert mutual_information(np.eye(4) / 4) == pytest.approx(2.0, abs=1e-12)


def test_mi_matches_entropy_decomposition(rng):
    for _ in range(20):
        j = random_simplex(rng, (16,)).reshape(4, 4)
        oracle = plain_entropy(j.sum(0)) + plain_entropy(j.sum(1)) - plain_entropy(j)
        assert mutual_information(j) == pytest.approx(oracle, abs=1e-12)


def test_mi_skips_zero_cells():
    j = np.array([[0.5, 0.0], [0.0, 0.5]])
    assert mutual_information(j) == pytest.approx(1.0)


@settings(max_examples=50)
@given(arrays(np.float64, (5, 3), elements=st.floats(0.0, 1.0, allow_nan=False)))
def test_mi_symmetric_and_bounded(x):
    if x.sum() <= 1e-9:
        return
    j = x / x.sum()
    i = mutual_information(j)
    assert abs(i - mutual_information(j.T)) < 1e-12
    bound = min(plain_entropy(j.sum(0)), plain_entropy(j.sum(1)))
    assert -1e-12 <= i <= bound + 1e-9


def test_joint_uniform_components():
    j = joint_from_components(np.full(4, 0.25), np.full((4, 4), 0.25), np.full((16, 4), 0.25))
    np.testing.assert_allclose(j, np.full((4, 4), 1 / 16), atol=1e-15)


def test_joint_deterministic_components():
    perm_policy = np.eye(4)[[1, 2, 3, 0]]  # a = s + 1
    model = np.zeros((4, 4, 4))
    for s in range(4):
        for a in range(4):
            model[s, a, (s + a) % 4] = 1.0  # s' = s + a
    j = joint_from_components(np.full(4, 0.25), perm_policy, model.reshape(16, 4))
    expected = np.zeros((4, 4))
    for s in range(4):
        expected[(2 * s + 1) % 4, s] = 0.25
    np.testing.assert_array_equal(j, expected)
    assert predictive_information(np.full(4, 0.25), perm_policy, model.reshape(16, 4)) == pytest.approx(1.0)


def test_joint_matches_brute_force(rng):
    p, policy, model = random_components(rng)
    j = joint_from_components(p, policy, model)
    np.testing.assert_allclose(j, brute_joint(p, policy, model.reshape(4, 4, 4)), atol=1e-15)
    assert j.sum() == pytest.approx(1.0, abs=1e-12)


def test_joint_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        joint_from_components(np.full(4, 0.25), np.full((4, 4), 0.25), np.full((12, 4), 0.25))
    with pytest.raises(ConfigurationError):
        joint_from_components(np.full(3, 1 / 3), np.full((4, 4), 0.25), np.full((16, 4), 0.25))


def test_pi_uniform_is_zero():
    assert predictive_information(np.full(4, 0.25), np.full((4, 4), 0.25),
                                  np.full((16, 4), 0.25)) == pytest.approx(0.0, abs=1e-12)


class TestBinner:
    def test_centers_for_four_bins(self):
        np.testing.assert_allclose(Binner(4).centers, [-0.75, -0.25, 0.25, 0.75])

    @pytest.mark.parametrize("k", [2, 3, 4, 8, 30])
    def test_round_trips(self, k):
        b = Binner(k)
        for i in range(k):
            assert b.encode(b.decode(i)) == i
        xs = np.linspace(-1, 1, 1001)
        np.testing.assert_allclose(b.decode(b.encode(xs)), b.centers[b.encode(xs)])
        assert np.all(np.abs(b.decode(b.encode(xs)) - xs) <= b.width / 2 + 1e-12)

    def test_edges(self):
        b = Binner(4)
        assert b.encode(-1.0) == 0
        assert b.encode(1.0) == 3
        assert b.encode(-0.5) == 1
        assert b.encode(0.0) == 2
        assert b.encode(5.0) == 3

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            Binner(1)
        with pytest.raises(ConfigurationError):
            Binner(4).decode(4)


class TestEmpiricalMI:
    def test_constant_series(self):
        assert empirical_mi_from_series(np.full((100, 2), 0.3), Binner(30), 50) == 0.0

    def test_period_two(self):
        series = np.array([[0.9, 0.9], [-0.9, 0.1]] * 50)
        assert empirical_mi_from_series(series, Binner(30), 98) == pytest.approx(1.0)

    def test_window_too_large(self):
        with pytest.raises(ConfigurationError):
            empirical_mi_from_series(np.zeros((10, 2)), Binner(4), 10)

    def test_uses_only_last_window(self):
        head = np.array([[0.9, 0.9], [-0.9, -0.9]] * 50)
        tail = np.full((51, 2), 0.2)
        assert empirical_mi_from_series(np.vstack([head, tail]), Binner(4), 50) == 0.0
