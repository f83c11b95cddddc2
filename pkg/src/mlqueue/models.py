"""Trajectory simulators for the classical M/M/1 queue and the five
Mittag-Leffler generalizations, plus extraction of inter-arrival and
service sequences from a queue-length path.

All simulators start from an empty system, stop at the first event past
``horizon`` and return a trace truncated to ``[0, horizon]``.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .paths import LinearPath, StepPath, compose, counting_path
from .rng import RngStream, _standard_stable, sample_ml
from .specfun import MLLaw

MODEL_IDS = ("MM1", "M1", "M2", "M3", "M4", "M5")


@dataclass(frozen=True)
class QueueParams:
    alpha: float = 1.0
    beta: float = 1.0
    lambda_rate: float = 1.0
    mu_rate: float = 1.0
    model_id: str = "MM1"

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise ValueError(f"unknown model {self.model_id!r}; expected one of {MODEL_IDS}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        for name in ("lambda_rate", "mu_rate"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")


@dataclass
class QueueTrace:
    q_path: StepPath
    arrivals: np.ndarray
    departures: np.ndarray
    events: np.ndarray
    horizon: float
    params: dict = field(default_factory=dict)
    ties: int = 0

    def queue_at(self, t):
        return self.q_path(t)

    def to_files(self, stem, provenance=None):
        """Write ``stem.csv`` (time,value) and ``stem.json`` (arrays and parameters).

        ``provenance`` is echoed as a leading ``#`` JSON line of the CSV and
        under the same key in the JSON file.
        """
        with open(f"{stem}.csv", "w", newline="") as fh:
            if provenance is not None:
                fh.write("# " + json.dumps(provenance, sort_keys=True) + "\n")
            self.q_path.to_csv(fh)
        meta = {
            "provenance": provenance,
            "horizon": self.horizon,
            "params": self.params,
            "ties": self.ties,
            "arrivals": [float(x) for x in self.arrivals],
            "departures": [float(x) for x in self.departures],
        }
        with open(f"{stem}.json", "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_files(cls, stem) -> "QueueTrace":
        with open(f"{stem}.json") as fh:
            meta = json.load(fh)
        with open(f"{stem}.csv") as fh:
            q = StepPath.from_csv(fh.read(), horizon=meta["horizon"])
        return cls(q, np.array(meta["arrivals"], dtype=float), np.array(meta["departures"], dtype=float),
                   q.times.copy(), float(meta["horizon"]), meta.get("params", {}), int(meta.get("ties", 0)))


@dataclass
class ServerInternals:
    """Workload decomposition of a single-server FIFO queue.

    ``C`` is a step path; ``X = C - t`` and ``L = X + I`` have unit downward
    drift, so they are exposed as callables (``net_input``, ``workload``)
    together with their left limits. ``I`` and ``B = t - I`` are continuous
    piecewise-linear paths.
    """

    cumulative_input: StepPath
    idle_time: LinearPath
    busy_time: LinearPath
    departures_count: StepPath
    cumulative_services: np.ndarray

    def net_input(self, t):
        return self.cumulative_input(t) - np.asarray(t, dtype=float)

    def net_input_left(self, t):
        return self.cumulative_input.left_limit(t) - np.asarray(t, dtype=float)

    def workload(self, t):
        return self.net_input(t) + self.idle_time(t)

    def workload_left(self, t):
        return self.net_input_left(t) + self.idle_time(t)


# --------------------------------------------------------------------------
# helpers

def _trace(times, jumps, horizon, params, ties=0) -> QueueTrace:
    """Build a trace from merged event times and +-1 jumps (0 means no change)."""
    keep = (jumps != 0) & (times <= horizon)
    t, j = times[keep], jumps[keep]
    if t.size and np.any(np.diff(t) <= 0):
        # epochs closer than float resolution collapse: fold them into one net change
        ut, inv = np.unique(t, return_inverse=True)
        ties += int(t.size - ut.size)
        net = np.zeros(ut.size, np.int64)
        np.add.at(net, inv, j)
        t, j = ut[net != 0], net[net != 0]
    q = np.cumsum(j).astype(np.int64)
    path = StepPath(t, q, 0, horizon)
    return QueueTrace(path, t[j > 0], t[j < 0], t, float(horizon), params, ties)


def _ml_with_rates(alpha, rates, rng: RngStream):
    """ML_alpha(rate_i) draws for an array of rates."""
    t = rng.gen.standard_exponential(rates.shape) / rates
    if alpha == 1.0:
        return t
    return t ** (1.0 / alpha) * _standard_stable(alpha, rng, rates.shape)


def _renewal_epochs(draw, horizon, guess=64):
    """Partial sums of draw(n) blocks until they pass the horizon."""
    out, last, n = [], 0.0, max(int(guess), 16)
    while last <= horizon:
        c = last + np.cumsum(draw(n))
        out.append(c)
        last = float(c[-1])
        n *= 2
    return np.concatenate(out)


def _coin_steps(p, n, rng: RngStream):
    return np.where(rng.gen.random(n) < p, 1, -1).astype(np.int64)


def _mml_values(alpha, beta, lam, mu, n, rng: RngStream):
    a = sample_ml(MLLaw(alpha, lam), rng, n)
    b = sample_ml(MLLaw(beta, mu), rng, n)
    rng.ties += int(np.count_nonzero(a == b))
    return np.minimum(a, b)


def _params(model, alpha, beta, lam, mu):
    return {"model": model, "alpha": alpha, "beta": beta, "lambda": lam, "mu": mu}


@functools.lru_cache(maxsize=64)
def _win_prob(alpha, beta, lam, mu):
    from .dists import min_prob
    return min_prob(alpha, beta, lam, mu)


# --------------------------------------------------------------------------
# simulators

def simulate_mm1(lam, mu, horizon, rng: RngStream) -> QueueTrace:
    """Classical M/M/1 as the reflection of a compound Poisson +-1 walk."""
    QueueParams(1.0, 1.0, lam, mu, "MM1")
    rate = lam + mu
    times = _renewal_epochs(lambda n: rng.gen.standard_exponential(n) / rate, horizon, rate * horizon + 16)
    steps = _coin_steps(lam / rate, times.size, rng)
    walk = np.cumsum(steps)
    q = walk + kernels.regulator_values(walk.astype(float)).astype(np.int64)
    jumps = np.diff(np.concatenate(([0], q)))
    return _trace(times, jumps, horizon, _params("MM1", 1.0, 1.0, lam, mu))


def _semi_markov(hold, p, horizon, rng: RngStream, guess):
    """Jump chain 'from 0 always up, else up w.p. p' with state dependent holding.

    ``hold(states, rng)`` returns holding times for the states occupied
    before each jump.
    """
    times, states, last_t, last_q, n = [], [], 0.0, 0, max(int(guess), 16)
    while last_t <= horizon:
        steps = _coin_steps(p, n, rng)
        q = kernels.abs_walk(steps, last_q)
        prev = np.concatenate(([last_q], q[:-1]))
        t = last_t + np.cumsum(hold(prev, rng))
        times.append(t)
        states.append(q)
        last_t, last_q, n = float(t[-1]), int(q[-1]), n * 2
    t = np.concatenate(times)
    q = np.concatenate(states)
    jumps = np.diff(np.concatenate(([0], q)))
    return t, jumps


def simulate_model1(alpha, lam, mu, horizon, rng: RngStream) -> QueueTrace:
    """Fractional M/M/1: the M/M/1 jump chain with ML_alpha holding times.

    At state 0 the holding time is ML_alpha(lam); elsewhere ML_alpha(lam + mu).
    """
    QueueParams(alpha, 1.0, lam, mu, "M1")

    def hold(prev, r):
        return _ml_with_rates(alpha, np.where(prev == 0, lam, lam + mu).astype(float), r)

    t, j = _semi_markov(hold, lam / (lam + mu), horizon, rng, 64)
    return _trace(t, j, horizon, _params("M1", alpha, 1.0, lam, mu))


def simulate_model2(alpha, beta, lam, mu, horizon, rng: RngStream, p=None) -> QueueTrace:
    """Fast renewal queue: jump chain q independent of i.i.d. mML inter-event times."""
    QueueParams(alpha, beta, lam, mu, "M2")
    p = _win_prob(alpha, beta, lam, mu) if p is None else p
    times = _renewal_epochs(lambda n: _mml_values(alpha, beta, lam, mu, n, rng), horizon, 64)
    q = kernels.abs_walk(_coin_steps(p, times.size, rng))
    jumps = np.diff(np.concatenate(([0], q)))
    return _trace(times, jumps, horizon, _params("M2", alpha, beta, lam, mu), rng.ties)


def simulate_model3(alpha, beta, lam, mu, horizon, rng: RngStream, method="reflectedCTRW", p=None) -> QueueTrace:
    """Renewal queue Phi(R) with R a +-1 walk run on an mML renewal clock.

    ``method="semiMarkov"`` instead runs the jump chain q with mML holding
    times away from 0 and, at 0, a sum of a geometric(p) number of mML draws.
    """
    QueueParams(alpha, beta, lam, mu, "M3")
    p = _win_prob(alpha, beta, lam, mu) if p is None else p
    if method == "reflectedCTRW":
        times = _renewal_epochs(lambda n: _mml_values(alpha, beta, lam, mu, n, rng), horizon, 64)
        walk = np.cumsum(_coin_steps(p, times.size, rng))
        q = walk + kernels.regulator_values(walk.astype(float)).astype(np.int64)
        jumps = np.diff(np.concatenate(([0], q)))
        return _trace(times, jumps, horizon, _params("M3", alpha, beta, lam, mu), rng.ties)
    if method != "semiMarkov":
        raise ValueError("method must be 'reflectedCTRW' or 'semiMarkov'")

    def hold(prev, r):
        out = _mml_values(alpha, beta, lam, mu, prev.size, r)
        idle = np.nonzero(prev == 0)[0]
        if idle.size:
            g = r.gen.geometric(p, idle.size)
            draws = _mml_values(alpha, beta, lam, mu, int(g.sum()), r)
            starts = np.concatenate(([0], np.cumsum(g)[:-1]))
            out[idle] = np.add.reduceat(draws, starts)
        return out

    t, j = _semi_markov(hold, p, horizon, rng, 64)
    return _trace(t, j, horizon, _params("M3", alpha, beta, lam, mu), rng.ties)


def _merge_streams(a, d):
    """Merge arrival and service-clock epochs; ties put the arrival first."""
    times = np.concatenate((a, d))
    kind = np.concatenate((np.ones(a.size, np.int64), -np.ones(d.size, np.int64)))
    order = np.lexsort((-kind, times))
    return times[order], kind[order]


def simulate_model4(alpha, beta, lam, mu, horizon, rng: RngStream) -> QueueTrace:
    """Restless queue Phi(N^a - N^d) with two independent fractional Poisson streams.

    Service-clock ticks that find the system empty are absorbed.
    """
    QueueParams(alpha, beta, lam, mu, "M4")
    ra, rd = rng.substream(0), rng.substream(1)
    a = _renewal_epochs(lambda n: sample_ml(MLLaw(alpha, lam), ra, n), horizon)
    d = _renewal_epochs(lambda n: sample_ml(MLLaw(beta, mu), rd, n), horizon)
    a, d = a[a <= horizon], d[d <= horizon]
    times, kind = _merge_streams(a, d)
    ties = int(times.size - np.unique(times).size)
    walk = np.cumsum(kind)
    q = walk + kernels.regulator_values(walk.astype(float)).astype(np.int64)
    jumps = np.diff(np.concatenate(([0], q)))
    if ties:
        # equal times would give a non-strict event grid: fold them into one net change
        ut, inv = np.unique(times, return_inverse=True)
        net = np.zeros(ut.size, np.int64)
        np.add.at(net, inv, jumps)
        times, jumps = ut, net
    tr = _trace(times, jumps, horizon, _params("M4", alpha, beta, lam, mu), ties)
    return tr


def simulate_model5(alpha, beta, lam, mu, horizon, rng: RngStream, internals=True):
    """Mittag-Leffler GI/GI/1: i.i.d. ML_alpha(lam) inter-arrivals, ML_beta(mu) services.

    Returns ``(trace, internals)``; pass ``internals=False`` to skip building
    the workload decomposition.
    """
    QueueParams(alpha, beta, lam, mu, "M5")
    ra, rs = rng.substream(0), rng.substream(1)
    arr = _renewal_epochs(lambda n: sample_ml(MLLaw(alpha, lam), ra, n), horizon)
    arr = arr[arr <= horizon]
    serv = sample_ml(MLLaw(beta, mu), rs, arr.size) if arr.size else np.zeros(0)
    dep = kernels.lindley_departures(arr, serv)
    d_in = dep[dep <= horizon]
    times, kind = _merge_streams(arr, d_in)
    ties = int(times.size - np.unique(times).size)
    if ties:
        ut, inv = np.unique(times, return_inverse=True)
        net = np.zeros(ut.size, np.int64)
        np.add.at(net, inv, kind)
        times, kind = ut, net
    tr = _trace(times, kind, horizon, _params("M5", alpha, beta, lam, mu), ties)
    tr.services = serv
    tr.all_departures = dep
    if not internals:
        return tr, None
    return tr, _internals(arr, serv, dep, horizon)


def _internals(arr, serv, dep, horizon) -> ServerInternals:
    cs = np.cumsum(serv)
    c_path = StepPath(arr, cs, 0.0, horizon) if arr.size else StepPath(np.zeros(0), np.zeros(0), 0.0, horizon)
    # idle intervals are [D_{k-1}, A_k] whenever A_k > D_{k-1}, with D_0 = 0. The
    # busy time equals CS_{k-1} on such an interval, so B is built from the
    # cumulative services directly and D = N^d(B) jumps exactly where B hits CS_k.
    prev_dep = np.concatenate(([0.0], dep[:-1]))
    cs_prev = np.concatenate(([0.0], cs[:-1]))
    k = np.nonzero(arr > prev_dep)[0]
    last_dep = float(dep[-1]) if dep.size else 0.0
    total = float(cs[-1]) if cs.size else 0.0
    end = max(horizon, last_dep) + 1.0
    knots = np.concatenate(([0.0], np.column_stack((prev_dep[k], arr[k])).ravel(), [last_dep, end]))
    b_lev = np.concatenate(([0.0], np.column_stack((cs_prev[k], cs_prev[k])).ravel(), [total, total]))
    # an idle period starting at 0 repeats the first knot
    keep = np.concatenate((np.diff(knots) > 0, [True]))
    knots, b_lev = knots[keep], b_lev[keep]
    busy = LinearPath(knots, b_lev)
    # I = t - B; the running max only removes rounding noise of order 1e-16 t
    idle = LinearPath(knots, np.maximum.accumulate(knots - b_lev))
    n_d = counting_path(cs) if cs.size else StepPath(np.zeros(0), np.zeros(0, np.int64), 0)
    d_count = compose(n_d, busy).truncate(horizon)
    return ServerInternals(c_path, idle, busy, d_count, cs)


SIMULATORS = {
    "MM1": lambda p, h, r: simulate_mm1(p.lambda_rate, p.mu_rate, h, r),
    "M1": lambda p, h, r: simulate_model1(p.alpha, p.lambda_rate, p.mu_rate, h, r),
    "M2": lambda p, h, r: simulate_model2(p.alpha, p.beta, p.lambda_rate, p.mu_rate, h, r),
    "M3": lambda p, h, r: simulate_model3(p.alpha, p.beta, p.lambda_rate, p.mu_rate, h, r),
    "M4": lambda p, h, r: simulate_model4(p.alpha, p.beta, p.lambda_rate, p.mu_rate, h, r),
    "M5": lambda p, h, r: simulate_model5(p.alpha, p.beta, p.lambda_rate, p.mu_rate, h, r, internals=False)[0],
}


def simulate(params: QueueParams, horizon, rng: RngStream) -> QueueTrace:
    return SIMULATORS[params.model_id](params, horizon, rng)


# --------------------------------------------------------------------------
# extraction

def extract_times(trace: QueueTrace):
    """(inter_arrivals, services, inter_events) recovered from the queue path.

    Arrivals are the upward jumps, departures the downward ones; the n-th
    service is ``D_n - max(D_{n-1}, A_n)`` with ``D_0 = 0``.
    """
    q = trace.q_path
    jumps = np.diff(q.all_values)
    if np.any(np.abs(jumps) != 1):
        raise ValueError("malformed trace: queue jumps must be +1 or -1")
    a = q.times[jumps > 0]
    d = q.times[jumps < 0]
    inter_arrivals = np.diff(np.concatenate(([0.0], a)))
    prev = np.concatenate(([0.0], d[:-1]))
    services = d - np.maximum(prev, a[:d.size])
    inter_events = np.diff(np.concatenate(([0.0], q.times)))
    return inter_arrivals, services, inter_events
