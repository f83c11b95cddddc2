"""Seeded streams and exact samplers for stable, Mittag-Leffler and related laws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .specfun import MLLaw

_TWO53 = float(2 ** 53)


class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Child streams made by :meth:`substream` are statistically independent of
    the parent and of each other (numpy ``SeedSequence`` spawn keys).
    """

    def __init__(self, seed: int, stream_id: int = 0, _key: tuple = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._key = tuple(int(k) for k in _key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,) + self._key)
        self.gen = np.random.Generator(np.random.PCG64(ss))
        self.ties = 0  # floating point ties seen by sample_mml

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self._key + (int(index),))

    def fresh(self) -> "RngStream":
        """A new stream with the same identity, rewound to its start."""
        return RngStream(self.seed, self.stream_id, self._key)

    def open_uniform(self, size=None):
        """Uniforms on the open interval (0, 1)."""
        k = self.gen.integers(0, 2 ** 53, size=size)
        return (k + 0.5) / _TWO53

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, key={self._key})"


@dataclass(frozen=True)
class StablePathConfig:
    alpha: float
    horizon: float
    step: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("path order must lie in (0, 1)")
        if not (self.horizon > 0 and self.step > 0):
            raise ValueError("horizon and step must be positive")


def _standard_stable(alpha, rng: RngStream, size):
    """Kanter's form of the one-sided stable law with E exp(-zS) = exp(-z^alpha)."""
    u = math.pi * rng.open_uniform(size)
    w = rng.gen.standard_exponential(size)
    logs = (np.log(np.sin(alpha * u)) - np.log(np.sin(u)) / alpha
            + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * u)) - np.log(w)))
    return np.exp(logs)


def sample_stable_increment(alpha, dt, rng: RngStream, size=None):
    """Increment of the standard alpha-stable subordinator over argument length dt."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("stable increments need 0 < alpha < 1; alpha = 1 is the identity")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return dt ** (1.0 / alpha) * _standard_stable(alpha, rng, size)


def sample_ml(law: MLLaw, rng: RngStream, size=None):
    """ML_alpha(rate) draws as sigma_alpha evaluated at an independent Exp(rate) time."""
    t = rng.gen.standard_exponential(size) / law.rate
    if law.alpha == 1.0:
        return t
    return t ** (1.0 / law.alpha) * _standard_stable(law.alpha, rng, size)


class MinDraw(NamedTuple):
    value: np.ndarray
    winner_a: np.ndarray  # True where the first law attained the minimum
    ties: int


def sample_mml(law_a: MLLaw, law_b: MLLaw, rng: RngStream, size=None) -> MinDraw:
    """Minimum of independent ML draws together with which coordinate won."""
    a = sample_ml(law_a, rng, size)
    b = sample_ml(law_b, rng, size)
    ties = int(np.count_nonzero(np.asarray(a) == np.asarray(b)))
    rng.ties += ties
    return MinDraw(np.minimum(a, b), np.asarray(a) <= np.asarray(b), ties)


def sample_ge(law: MLLaw, k: int, rng: RngStream, size=None):
    """Generalized Erlang draw: sum of k independent ML draws."""
    if k < 1:
        raise ValueError("k must be positive")
    shape = (k,) if size is None else (np.atleast_1d(size).tolist() + [k])
    out = sample_ml(law, rng, tuple(shape)).sum(axis=-1)
    return float(out) if size is None else out


@dataclass
class SubordinatorPath:
    """A simulated sigma_alpha on the argument grid ``s_j = j * step``.

    The inverse ``L(t) = min{s : sigma(s) >= t}`` is known up to one grid step:
    with ``j`` the first index where ``sigma_j >= t`` it lies in
    ``(s_{j-1}, s_j]``. Evaluation interpolates linearly inside that cell,
    which gives a continuous nondecreasing envelope with error at most
    ``step``.
    """

    alpha: float
    step: float
    sigma: np.ndarray = field(repr=False)  # sigma at s_0 = 0, s_1, ...

    @property
    def reach(self) -> float:
        return float(self.sigma[-1])

    @property
    def max_jump(self) -> float:
        return float(np.max(np.diff(self.sigma))) if self.sigma.size > 1 else 0.0

    @property
    def error_bound(self) -> float:
        return self.step

    def sigma_at(self, s):
        """Right-continuous lookup of sigma at arguments s (grid value at or below s)."""
        s = np.asarray(s, dtype=float)
        j = np.floor(s / self.step + 1e-12).astype(np.int64)
        if np.any(j >= self.sigma.size):
            raise ValueError(f"argument {float(np.max(s))} beyond simulated range "
                             f"{(self.sigma.size - 1) * self.step}")
        return self.sigma[j]

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.reach):
            raise ValueError("time beyond the simulated range of sigma")
        j = np.searchsorted(self.sigma, t, side="left")
        j = np.maximum(j, 1)
        lo, hi = self.sigma[j - 1], self.sigma[j]
        frac = np.where(hi > lo, (t - lo) / np.where(hi > lo, hi - lo, 1.0), 1.0)
        val = (j - 1 + np.clip(frac, 0.0, 1.0)) * self.step
        return np.where(t <= 0, 0.0, val)

    __call__ = inverse

    def inverse_lower(self, t):
        """Lower envelope ``s_{j-1}`` of L(t): a step function, flat between grid values of sigma.

        Unlike the interpolated inverse it keeps the flat stretches of L (the
        jumps of sigma), at the same error bound ``step``.
        """
        t = np.asarray(t, dtype=float)
        if np.any(t > self.reach):
            raise ValueError("time beyond the simulated range of sigma")
        j = np.searchsorted(self.sigma, t, side="left")
        return np.maximum(j - 1, 0) * self.step


def simulate_subordinator(alpha, reach, step, rng: RngStream, min_argument=0.0) -> SubordinatorPath:
    """Simulate sigma_alpha on a grid until it exceeds ``reach``.

    ``min_argument`` additionally forces the argument grid to extend to at
    least that value, for callers that evaluate sigma itself there.
    """
    blocks = [np.zeros(1)]
    level, args = 0.0, 0
    need = int(math.ceil(min_argument / step)) if min_argument > 0 else 0
    # typical argument needed is reach^alpha; draw in blocks and extend as needed
    n = max(int(math.ceil(2.0 * max(reach, 1e-12) ** alpha / step)), need) + 16
    while level < reach or args < need:
        inc = sample_stable_increment(alpha, step, rng, n)
        c = level + np.cumsum(inc)
        blocks.append(c)
        level, args = float(c[-1]), args + n
        n *= 2
    return SubordinatorPath(alpha, step, np.concatenate(blocks))


def sample_inverse_subordinator_path(cfg: StablePathConfig, rng: RngStream) -> SubordinatorPath:
    """Path of the inverse subordinator on [0, horizon] by first passage."""
    return simulate_subordinator(cfg.alpha, cfg.horizon, cfg.step, rng)


def sample_inverse_subordinator(alpha, t, rng: RngStream, size=None):
    """Exact marginal draws of L_alpha(t), using L(t) = (t / sigma(1))^alpha."""
    if alpha == 1.0:
        return np.full(size, float(t)) if size is not None else float(t)
    s = _standard_stable(alpha, rng, size)
    return (t / s) ** alpha
