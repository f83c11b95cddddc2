"""Cadlag step paths and the deterministic maps acting on them.

A :class:`StepPath` is right-continuous and piecewise constant: it equals
``initial_value`` on ``[0, times[0])`` and ``values[i]`` on
``[times[i], times[i+1])``. Reflection and regulation are computed in one
left-to-right pass using the closed form of the one-sided regulator,
``Psi(f)(t) = sup_{s <= t} max(-f(s), 0)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class StepPath:
    times: np.ndarray
    values: np.ndarray
    initial_value: float = 0.0
    horizon: float = math.inf  # the path is only meaningful on [0, horizon]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values)
        if v.dtype.kind not in "iuf":
            v = v.astype(np.float64)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size and (t[0] < 0 or np.any(np.diff(t) <= 0)):
            raise ValueError("event times must be nonnegative and strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        i = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(i >= 0, self.values[np.maximum(i, 0)] if self.values.size else self.initial_value,
                       self.initial_value)
        return out if out.ndim else out[()]

    def left_limit(self, t):
        t = np.asarray(t, dtype=np.float64)
        i = np.searchsorted(self.times, t, side="left") - 1
        out = np.where(i >= 0, self.values[np.maximum(i, 0)] if self.values.size else self.initial_value,
                       self.initial_value)
        return out if out.ndim else out[()]

    @property
    def all_values(self):
        """Initial value followed by the values after each event."""
        return np.concatenate(([self.initial_value], self.values))

    def compress(self) -> "StepPath":
        """Drop events that do not change the value."""
        v = self.all_values
        keep = v[1:] != v[:-1]
        return StepPath(self.times[keep], self.values[keep], self.initial_value, self.horizon)

    def truncate(self, horizon) -> "StepPath":
        keep = self.times <= horizon
        return StepPath(self.times[keep], self.values[keep], self.initial_value, horizon)

    def __add__(self, other: "StepPath") -> "StepPath":
        return combine(self, other, np.add)

    def __sub__(self, other: "StepPath") -> "StepPath":
        return combine(self, other, np.subtract)

    def scale(self, c) -> "StepPath":
        return StepPath(self.times, self.values * c, self.initial_value * c, self.horizon)

    def to_csv(self, fh=None) -> str:
        """CSV with columns time,value; the first row carries the initial value at time 0."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "value"])
        w.writerow([_fmt(0.0), _fmt(self.initial_value)])
        for t, v in zip(self.times.tolist(), self.values.tolist()):
            w.writerow([_fmt(t), _fmt(v)])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str, horizon=math.inf) -> "StepPath":
        rows = list(csv.reader(l for l in text.splitlines() if not l.startswith("#")))
        if not rows or [c.strip() for c in rows[0]] != ["time", "value"]:
            raise ValueError("expected a time,value header")
        data = [(float(a), float(b)) for a, b in rows[1:] if a.strip()]
        if not data:
            raise ValueError("no initial row")
        init = data[0][1]
        t = np.array([d[0] for d in data[1:]], dtype=float)
        v = np.array([d[1] for d in data[1:]], dtype=float)
        if v.size and np.all(v == np.round(v)) and float(init) == round(init):
            v = v.astype(np.int64)
            init = int(round(init))
        return cls(t, v, init, horizon)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class GridPath:
    """Samples of a path on the uniform grid ``k * dt``; lookup is right-continuous."""

    dt: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))

    @property
    def grid(self):
        return self.dt * np.arange(self.samples.size)

    @property
    def horizon(self):
        return self.dt * (self.samples.size - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        k = np.floor(t / self.dt + 1e-12).astype(np.int64)
        if np.any(k >= self.samples.size) or np.any(k < 0):
            raise ValueError(f"time outside the grid [0, {self.horizon}]")
        out = self.samples[k]
        return out if out.ndim else out[()]

    def as_step(self) -> StepPath:
        return StepPath(self.grid[1:], self.samples[1:], float(self.samples[0]), self.horizon)


@dataclass(frozen=True)
class LinearPath:
    """Continuous piecewise-linear nondecreasing path through the given knots."""

    knots: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.levels, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(k) <= 0) or np.any(np.diff(v) < 0):
            raise ValueError("knots must increase and levels must not decrease")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "levels", v)

    @property
    def horizon(self):
        return float(self.knots[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.knots[-1] * (1 + 1e-15)) or np.any(t < self.knots[0]):
            raise ValueError("time outside the knot range")
        return np.interp(t, self.knots, self.levels)

    def first_passage(self, level):
        """min{t : g(t) >= level}; +inf where the level is never reached."""
        level = np.asarray(level, dtype=float)
        j = np.searchsorted(self.levels, level, side="left")
        out = np.full(level.shape, np.inf)
        inside = j < self.levels.size
        jj = np.clip(j, 1, self.levels.size - 1)
        lo_v, hi_v = self.levels[jj - 1], self.levels[jj]
        lo_t, hi_t = self.knots[jj - 1], self.knots[jj]
        frac = np.where(hi_v > lo_v, (level - lo_v) / np.where(hi_v > lo_v, hi_v - lo_v, 1.0), 1.0)
        val = lo_t + np.clip(frac, 0.0, 1.0) * (hi_t - lo_t)
        out[inside] = np.where(level[inside] <= self.levels[0], self.knots[0], val[inside])
        return out


def combine(f: StepPath, g: StepPath, op) -> StepPath:
    """Pointwise ``op(f, g)`` on the merged event grid."""
    t = np.union1d(f.times, g.times)
    return StepPath(t, op(f(t), g(t)), op(f.initial_value, g.initial_value),
                    min(f.horizon, g.horizon))


def regulator(f: StepPath) -> StepPath:
    """Psi(f)(t) = sup_{s <= t} max(-f(s), 0), on the event grid of f."""
    init = max(-float(f.initial_value), 0.0)
    vals = kernels.regulator_values(np.asarray(f.values, dtype=np.float64), float(f.initial_value))
    if np.asarray(f.values).dtype.kind in "iu":
        return StepPath(f.times, vals.astype(np.int64), int(init), f.horizon)
    return StepPath(f.times, vals, init, f.horizon)


def reflect(f: StepPath) -> StepPath:
    """Phi(f) = f + Psi(f)."""
    r = regulator(f)
    return StepPath(f.times, f.values + r.values, f.initial_value + r.initial_value, f.horizon)


def compose(f, g):
    """Pointwise ``f(g(t))`` evaluated right-continuously.

    * ``g`` a StepPath or GridPath: the result changes only where ``g`` does,
      so it lives on ``g``'s event grid (a StepPath, or a GridPath for grid ``g``).
    * ``g`` a continuous nondecreasing :class:`LinearPath`: the result is a
      StepPath jumping at the first passage of ``g`` over each event time of ``f``.
    """
    if isinstance(g, LinearPath):
        if not isinstance(f, StepPath):
            f = f.as_step()
        lo, hi = float(g.levels[0]), float(g.levels[-1])
        if hi > f.horizon:
            raise ValueError(f"outer path must be extended to time {hi} (known up to {f.horizon})")
        keep = (f.times > lo) & (f.times <= hi)
        start = f(lo)
        times = g.first_passage(f.times[keep])
        return StepPath(times, f.values[keep], start, g.horizon)
    if isinstance(g, GridPath):
        need = float(np.max(g.samples))
        if need > f.horizon:
            raise ValueError(f"outer path must be extended to time {need} (known up to {f.horizon})")
        return GridPath(g.dt, np.asarray(f(g.samples), dtype=float))
    if isinstance(g, StepPath):
        if g.values.size and np.any(np.diff(g.all_values) < 0):
            raise ValueError("inner path must be nondecreasing")
        need = float(np.max(g.all_values))
        if need > f.horizon:
            raise ValueError(f"outer path must be extended to time {need} (known up to {f.horizon})")
        return StepPath(g.times, f(g.values), f(g.initial_value), g.horizon)
    raise TypeError("unsupported inner path type")


def counting_path(partial_sums, horizon=None) -> StepPath:
    """N(t) = #{k : s_k <= t} for nondecreasing partial sums s_k."""
    s = np.asarray(partial_sums, dtype=np.float64)
    if s.size and np.any(np.diff(s) < 0):
        raise ValueError("partial sums must be nondecreasing")
    if horizon is not None and (s.size == 0 or s[-1] <= horizon):
        raise ValueError("partial sums end before the horizon; generate more increments")
    if s.size and s[0] < 0:
        raise ValueError("partial sums must be nonnegative")
    if horizon is not None:
        s = s[s <= horizon]
    t, counts = np.unique(s, return_counts=True)
    vals = np.cumsum(counts).astype(np.int64)
    h = math.inf if horizon is None else float(horizon)
    if t.size and t[0] == 0.0:
        return StepPath(t[1:], vals[1:], int(vals[0]), h)
    return StepPath(t, vals, 0, h)


def rescale(f: StepPath, time_factor, space_factor) -> StepPath:
    """t -> f(time_factor * t) / space_factor."""
    if time_factor <= 0 or space_factor <= 0:
        raise ValueError("factors must be positive")
    t = f.times / time_factor
    v = f.values / space_factor
    if t.size > 1:
        # distinct times may round to the same value; the right limit is the last one
        last = np.concatenate((t[1:] > t[:-1], [True]))
        t, v = t[last], v[last]
    return StepPath(t, v, f.initial_value / space_factor, f.horizon / time_factor)


def sup_on(f: StepPath, interval) -> float:
    """Exact supremum of f over the closed interval [a, b]."""
    a, b = interval
    if a > b:
        raise ValueError("empty interval")
    inside = (f.times > a) & (f.times <= b)
    start = float(f(a))
    return max(start, float(np.max(f.values[inside]))) if inside.any() else start
