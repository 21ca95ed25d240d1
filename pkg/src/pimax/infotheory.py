"""Entropy, mutual information and one-step predictive information over
discrete distributions, plus the uniform binner shared by the control loop
and the post-hoc analysis.

All quantities are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SUM_TOL = 1e-9


def _as_distribution(d) -> np.ndarray:
    p = np.asarray(d, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ConfigurationError(f"expected a non-empty probability vector, got shape {p.shape}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > SUM_TOL:
        raise ConfigurationError("probability vector must be non-negative and sum to 1")
    return p


def _as_joint(j) -> np.ndarray:
    q = np.asarray(j, dtype=np.float64)
    if q.ndim != 2:
        raise ConfigurationError(f"expected a 2-d joint table, got shape {q.shape}")
    if np.any(q < 0) or abs(q.sum() - 1.0) > SUM_TOL:
        raise ConfigurationError("joint table must be non-negative and sum to 1")
    return q


def entropy(d) -> float:
    """Shannon entropy ``-sum p log2 p`` of a probability vector.

    Zero entries are skipped (``0 log 0 := 0``) so that empirical
    frequency vectors can be passed directly.
    """
    p = _as_distribution(d)
    nz = p[p > 0]
    return float(max(-np.sum(nz * np.log2(nz)), 0.0))


def mutual_information(j) -> float:
    """Mutual information of a joint table indexed ``(s_next, s)``.

    Marginals are taken over both axes; cells with zero mass contribute
    nothing. The result is clipped at zero to absorb round-off.
    """
    q = _as_joint(j)
    row = q.sum(axis=1)
    col = q.sum(axis=0)
    si, ti = np.nonzero(q > 0)
    # log of the ratio taken as a difference so tiny marginals cannot underflow
    v = q[si, ti]
    mi = np.sum(v * (np.log2(v) - np.log2(row[si]) - np.log2(col[ti])))
    return float(max(mi, 0.0))


def joint_from_components(p, policy, model) -> np.ndarray:
    """Joint ``p(s', s) = sum_a p(s) alpha(a|s) delta(s'|s,a)``.

    Parameters
    ----------
    p : array (S,)
        Sensor distribution.
    policy : array (S, A)
        Row-stochastic policy ``alpha(a|s)``.
    model : array (S*A, S) or (S, A, S)
        World model ``delta(s'|s,a)``; in the 2-d layout row ``s*A + a``
        holds the distribution over ``s'``.

    Returns
    -------
    array (S, S)
        Joint indexed ``[s_next, s]``.
    """
    p = np.asarray(p, dtype=np.float64)
    policy = np.asarray(policy, dtype=np.float64)
    model = np.asarray(model, dtype=np.float64)
    if p.ndim != 1 or policy.ndim != 2 or policy.shape[0] != p.size:
        raise ConfigurationError(
            f"policy must have one row per sensor state: p {p.shape}, policy {policy.shape}"
        )
    n_s, n_a = policy.shape
    if model.ndim == 2:
        if model.shape != (n_s * n_a, n_s):
            raise ConfigurationError(
                f"world model must be ({n_s * n_a}, {n_s}), got {model.shape}"
            )
        model = model.reshape(n_s, n_a, n_s)
    elif model.shape != (n_s, n_a, n_s):
        raise ConfigurationError(f"world model must be ({n_s}, {n_a}, {n_s}), got {model.shape}")
    return (p[:, None] * _transition(policy, model)).T


def _transition(policy, model) -> np.ndarray:
    # transition[s, s'] = sum_a alpha(a|s) delta(s'|s,a)
    n_s, n_a = policy.shape
    return np.einsum("sa,sat->st", policy, model.reshape(n_s, n_a, n_s))


def predictive_information(p, policy, model) -> float:
    """Intrinsic one-step predictive information ``I(S';S)`` in bits.

    Evaluated as ``sum_s p(s) sum_s' q(s'|s) log2(q(s'|s) / r(s'))`` with
    ``q = alpha . delta`` and ``r = p . q``. On stochastic tables this is the
    mutual information of :func:`joint_from_components`; off the simplex it
    is the same expression with ``p`` held fixed, which is the function the
    policy gradient differentiates.
    """
    joint = joint_from_components(p, policy, model)
    p = np.asarray(p, dtype=np.float64)
    r = joint.sum(axis=1)
    t, s = np.nonzero(joint > 0)
    v = joint[t, s]
    mi = np.sum(v * (np.log2(v) - np.log2(p[s]) - np.log2(r[t])))
    return float(max(mi, 0.0))


@dataclass(frozen=True)
class Binner:
    """Uniform partition of ``[lo, hi]`` into ``k`` equal-width bins.

    ``encode`` maps values to bin indices (the upper bound belongs to the
    last bin, values outside the interval are clipped); ``decode`` returns
    bin centers.
    """

    k: int
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ConfigurationError(f"bin count must be an integer >= 2, got {self.k}")
        if not self.hi > self.lo:
            raise ConfigurationError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.k

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.k) + 0.5) * self.width

    def encode(self, x):
        idx = np.floor((np.asarray(x, dtype=np.float64) - self.lo) / self.width)
        idx = np.clip(idx, 0, self.k - 1).astype(np.int64)
        return int(idx) if idx.ndim == 0 else idx

    def decode(self, b):
        b = np.asarray(b)
        if np.any((b < 0) | (b >= self.k)):
            raise ConfigurationError(f"bin index out of range 0..{self.k - 1}")
        x = self.lo + (b + 0.5) * self.width
        return float(x) if x.ndim == 0 else x


def empirical_mi_from_series(series, binner: Binner, window: int) -> float:
    """Mutual information between consecutive binned wheel-velocity pairs.

    ``series`` is an ``(N, 2)`` array of (left, right) wheel velocities of
    one robot. Each wheel is binned with ``binner``; the product state
    ``left + k * right`` (``k**2`` states) is formed and the empirical
    joint of consecutive states over the last ``window`` transitions is
    evaluated.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ConfigurationError(f"series must have shape (N, 2), got {x.shape}")
    window = int(window)
    if window < 1 or x.shape[0] < window + 1:
        raise ConfigurationError(
            f"window {window} needs at least {window + 1} samples, series has {x.shape[0]}"
        )
    k = binner.k
    tail = x[-(window + 1):]
    states = binner.encode(tail[:, 0]) + k * binner.encode(tail[:, 1])
    n_states = k * k
    counts = np.bincount(states[1:] * n_states + states[:-1], minlength=n_states * n_states)
    joint = counts.reshape(n_states, n_states) / window
    return mutual_information(joint)
