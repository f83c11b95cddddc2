"""Fast numerical checks run by ``mlqueue selftest``.

Each check takes ``(seed, scale)`` and returns ``(passed, detail)``; ``scale``
in (0, 1] tightens every tolerance.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

from . import _kernels_py, kernels
from .dists import build_convolutions, min_prob, model2_interarrival_survival, model_service_survival
from .models import simulate_model5
from .paths import StepPath, reflect, regulator
from .rng import RngStream, sample_ml, sample_mml, sample_stable_increment
from .scaling import embedded_chain_harness
from .specfun import MLLaw, PrabhakarParams, mittag_leffler, ml_survival, prabhakar


def check_special_functions(seed, scale):
    x = np.linspace(-50.0, 0.0, 501)
    e1 = float(np.max(np.abs(mittag_leffler(1.0, x) - np.exp(x))))
    eh = abs(float(mittag_leffler(0.5, -1.0)) - math.e * special.erfc(1.0))
    z = np.linspace(-20.0, 0.0, 201)
    pr = max(float(np.max(np.abs(prabhakar(PrabhakarParams(a, 1.0, 1.0), z) - mittag_leffler(a, z))))
             for a in (0.3, 0.7, 1.0))
    ok = e1 < 1e-12 * scale and eh < 1e-9 * scale and pr < 1e-12 * scale
    return ok, f"exp {e1:.1e}, E_1/2(-1) {eh:.1e}, prabhakar {pr:.1e}"


def check_ml_sampler(seed, scale):
    worst = 0.0
    for i, a in enumerate((0.5, 0.8, 1.0)):
        law = MLLaw(a, 1.0)
        x = sample_ml(law, RngStream(seed, 11).substream(i), 100_000)
        worst = max(worst, stats.kstest(x, lambda t: 1.0 - ml_survival(law, t)).statistic)
    return bool(worst < 0.006 * scale), f"max KS {worst:.4f} at N=1e5"


def check_stable_laplace(seed, scale):
    worst = 0.0
    for i, a in enumerate((0.4, 0.7, 0.9)):
        d = sample_stable_increment(a, 0.5, RngStream(seed, 12).substream(i), 100_000)
        for z in (0.5, 1.0, 2.0):
            worst = max(worst, abs(float(np.mean(np.exp(-z * d))) - math.exp(-0.5 * z ** a)))
    return worst < 0.003 * scale, f"max Laplace error {worst:.4f}"


def check_min_prob(seed, scale):
    e1 = max(abs(min_prob(1.0, 1.0, lam, mu) - lam / (lam + mu)) for lam, mu in ((1, 2), (3, 0.5)))
    e2 = max(abs(min_prob(a, a, r, r) - 0.5) for a, r in ((0.5, 1.0), (0.8, 2.0)))
    n = 1_000_000
    w = sample_mml(MLLaw(0.5, 1.0), MLLaw(0.8, 1.0), RngStream(seed, 13), n)
    freq = float(np.mean(w.winner_a))
    p = min_prob(0.5, 0.8, 1.0, 1.0)
    z = abs(freq - p) / math.sqrt(p * (1 - p) / n)
    ok = e1 < 1e-8 * scale and e2 < 1e-8 * scale and z < 3.0 * scale
    return ok, f"exponential {e1:.1e}, symmetric {e2:.1e}, Monte Carlo {z:.2f} sd at N=1e6"


def check_exponential_mixtures(seed, scale):
    lam, mu = 1.0, 1.0
    table = build_convolutions(1.0, 1.0, lam, mu, (10.0, 0.002), 40)
    t = np.linspace(0.0, 10.0, 201)
    p = lam / (lam + mu)
    err = 0.0
    for n in (1, 2, 5):
        r = (lam + mu) * t
        exact = np.exp(-r) * sum(p * (1 - p) ** j * sum(r ** i / math.factorial(i) for i in range(j + 1))
                                 for j in range(n + 1))
        err = max(err, float(np.max(np.abs(model2_interarrival_survival(table, p, n, t) - exact))))
    serv = float(np.max(np.abs(model_service_survival(table, p, t) - np.exp(-mu * t))))
    return err < 1e-6 * scale and serv < 1e-6 * scale, f"inter-arrival {err:.1e}, service {serv:.1e}"


def _random_path(rng):
    n = int(rng.integers(1, 40))
    t = np.cumsum(rng.exponential(size=n))
    return StepPath(t, np.cumsum(rng.normal(size=n)) + rng.normal(), float(rng.normal()), float(t[-1]) + 1.0)


def check_reflection(seed, scale):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        f = _random_path(rng)
        phi, psi = reflect(f), regulator(f)
        v = phi.all_values
        worst = max(worst, float(np.max(np.abs(v - (f.all_values + psi.all_values)))))
        if np.min(v) < -1e-12 or np.any(np.diff(psi.all_values) < 0):
            return False, "reflected path negative or regulator decreasing"
        # the regulator only increases when the reflected path is at zero
        up = np.diff(psi.all_values) > 0
        if np.any(np.abs(v[1:][up]) > 1e-12):
            return False, "regulator increases away from zero"
        worst = max(worst, float(np.max(np.abs(reflect(phi).all_values - v))))
    return worst < 1e-12 * scale, f"1000 paths, max residual {worst:.1e}"


def check_backends(seed, scale):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.normal(size=5000))
    steps = np.where(rng.random(5000) < 0.45, 1, -1).astype(np.int64)
    a = np.cumsum(rng.exponential(size=2000))
    s = rng.exponential(size=2000)
    same = (np.array_equal(kernels.regulator_values(x, 0.3), _kernels_py.regulator_values(x, 0.3))
            and np.array_equal(kernels.abs_walk(steps), _kernels_py.abs_walk(steps))
            and np.array_equal(kernels.lindley_departures(a, s), _kernels_py.lindley_departures(a, s)))
    return same, f"backend {kernels.BACKEND} agrees with the numpy fallback" if same else "backends disagree"


def check_chains(seed, scale):
    r = embedded_chain_harness("r", 0.5, (10_000,), replications=10_000, seed=seed, threshold=0.02 * scale)
    d = embedded_chain_harness("q_bar", 0.7, (10_000,), replications=10_000, seed=seed)
    ks = r["rows"][-1]["ks"]
    row = d["rows"][-1]
    return bool(r["passed"] and d["passed"]), f"Donsker KS {ks:.4f}, drift {row['mean']:.4f} vs {row['target']:.1f}"


def check_determinism(seed, scale):
    out = []
    for _ in range(2):
        tr, _ = simulate_model5(0.7, 0.7, 1.0, 1.0, 100.0, RngStream(seed), internals=False)
        out.append(tr.q_path.to_csv())
    return out[0] == out[1], "repeated M5 simulation is byte-identical"


FAST_CHECKS = [
    ("special-functions", "E_alpha and Prabhakar reductions", check_special_functions),
    ("ml-sampler", "ML sampler KS against the analytic survival", check_ml_sampler),
    ("stable-increment", "stable increments against their Laplace transform", check_stable_laplace),
    ("min-prob", "P(X < Y) exact cases and Monte Carlo", check_min_prob),
    ("exponential-mixtures", "inter-arrival and service mixtures at alpha = beta = 1", check_exponential_mixtures),
    ("reflection", "reflection and regulator algebra on random paths", check_reflection),
    ("kernel-backends", "compiled and numpy kernels agree", check_backends),
    ("chains", "embedded chain Donsker marginal and drift", check_chains),
    ("determinism", "fixed seed gives identical traces", check_determinism),
]
