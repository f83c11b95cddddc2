import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mlqueue.dists import (ConvolutionTable, SurvivalCurve, build_convolutions, comparison_inequality,
                           last_jump_cdf, min_prob, mml_survival, model2_interarrival_survival,
                           model3_interarrival_survival, model_service_survival, restless_service_survival)
from mlqueue.models import simulate_model4
from mlqueue.rng import RngStream, sample_ml, sample_mml
from mlqueue.specfun import MLLaw, ml_survival


@pytest.fixture(scope="module")
def exp_table():
    return build_convolutions(1.0, 1.0, 1.0, 2.0, (8.0, 0.002), 64)


@pytest.fixture(scope="module")
def half_table():
    return build_convolutions(0.5, 0.5, 1.0, 1.0, (5.0, 0.01), 40)


def erlang_mixture(r, weights, t):
    """sum_j w_j P(Gamma(j+1, r) > t)."""
    return sum(w * stats.gamma.sf(t, j + 1, scale=1 / r) for j, w in enumerate(weights))


def renewal_residual(beta, mu, T, rng, size):
    """First renewal after T minus T, for an ML_beta(mu) renewal stream started at 0."""
    T = np.broadcast_to(np.asarray(T, dtype=float), (size,))
    pos, out = np.zeros(size), np.empty(size)
    alive = np.arange(size)
    while alive.size:
        pos[alive] += sample_ml(MLLaw(beta, mu), rng, alive.size)
        done = pos[alive] > T[alive]
        out[alive[done]] = pos[alive[done]] - T[alive[done]]
        alive = alive[~done]
    return out


def last_renewal_before(beta, mu, T, rng, size):
    pos, last = np.zeros(size), np.zeros(size)
    alive = np.arange(size)
    while alive.size:
        nxt = pos[alive] + sample_ml(MLLaw(beta, mu), rng, alive.size)
        inside = nxt <= T
        last[alive[inside]] = nxt[inside]
        pos[alive] = nxt
        alive = alive[inside]
    return last


def test_mml_survival_basics():
    t = np.linspace(0, 5, 11)
    assert mml_survival(0.4, 0.7, 1.0, 2.0, 0.0) == 1.0
    assert np.allclose(mml_survival(1.0, 1.0, 1.5, 2.0, t), np.exp(-3.5 * t), atol=1e-14)


def test_min_prob_closed_forms():
    assert abs(min_prob(1.0, 1.0, 2.0, 3.0) - 0.4) < 1e-8
    for a, r in ((0.3, 1.0), (0.7, 2.5), (0.95, 0.4)):
        assert abs(min_prob(a, a, r, r) - 0.5) < 1e-8


@pytest.mark.parametrize("a,b,lam,mu", [(0.5, 0.8, 1.0, 1.0), (0.3, 0.9, 2.0, 0.5), (0.7, 0.6, 0.2, 3.0)])
def test_min_prob_complements(a, b, lam, mu):
    # P(X < Y) + P(Y < X) = 1, each side integrating a different density
    assert abs(min_prob(a, b, lam, mu) + min_prob(b, a, mu, lam) - 1.0) < 1e-8


def test_min_prob_against_winner_frequency():
    n = 2_000_000
    w = sample_mml(MLLaw(0.5, 1.0), MLLaw(0.8, 1.0), RngStream(1), n)
    p = min_prob(0.5, 0.8, 1.0, 1.0)
    assert abs(w.winner_a.mean() - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_first_convolution_is_min_law(half_table):
    t = half_table.grid
    assert np.max(np.abs(half_table.cdf(1, t) - (1 - mml_survival(0.5, 0.5, 1.0, 1.0, t)))) < 1e-14


def test_convolutions_are_erlang_at_unit_orders(exp_table):
    t = exp_table.grid
    err = max(np.max(np.abs(exp_table.cdf(k, t) - stats.gamma.cdf(t, k, scale=1 / 3.0))) for k in range(1, 65))
    assert err < 1e-6


def test_second_convolution_against_monte_carlo(half_table):
    r = RngStream(2)
    a, b = MLLaw(0.5, 1.0), MLLaw(0.5, 1.0)
    x = sample_mml(a, b, r, 1_000_000).value + sample_mml(a, b, r, 1_000_000).value
    x.sort()
    t = np.linspace(0, 5, 201)
    emp = np.searchsorted(x, t, side="right") / x.size
    assert np.max(np.abs(emp - half_table.cdf(2, t))) < 0.005


def test_convolution_table_invariants(half_table):
    prev = None
    for k in range(1, half_table.k_max + 1):
        f = half_table.cdf_powers[k - 1]
        assert np.all((f >= 0) & (f <= 1)) and np.all(np.diff(f) >= -1e-15)
        if prev is not None:
            assert np.all(f <= prev)
        prev = f
    assert half_table.error_estimate < 1e-3


def test_convolution_errors_and_round_trip(half_table):
    with pytest.raises(ArithmeticError):
        build_convolutions(0.3, 0.3, 1.0, 1.0, (5.0, 1.0), 5)
    with pytest.raises(ValueError):
        build_convolutions(0.5, 0.5, 1.0, 1.0, (5.0, 0.3), 5)
    with pytest.raises(ValueError):
        half_table.cdf(0, 1.0)
    with pytest.raises(ValueError):
        half_table.cdf(1, 6.0)
    back = ConvolutionTable.from_csv(half_table.to_csv())
    assert back.k_max == half_table.k_max and back.meta["alpha"] == 0.5
    assert np.allclose(back.cdf_powers[3], half_table.cdf_powers[3], rtol=1e-15, atol=0)


def test_model2_interarrival_unit_orders(exp_table):
    lam, mu = 1.0, 2.0
    p, q, r = lam / (lam + mu), mu / (lam + mu), lam + mu
    t = np.linspace(0, 8, 161)
    for n in (1, 2, 5):
        # e^{-rt} sum_j (rt)^j / j! (q^j - q^{n+1})
        closed = np.exp(-r * t) * sum((r * t) ** j / math.factorial(j) * (q ** j - q ** (n + 1)) for j in range(n + 1))
        assert np.max(np.abs(model2_interarrival_survival(exp_table, p, n, t) - closed)) < 1e-6
        complete = np.exp(-r * t) * sum((r * t) ** j / math.factorial(j) * q ** j for j in range(n + 1))
        assert np.max(np.abs(model2_interarrival_survival(exp_table, p, n, t, True) - complete)) < 1e-6


def test_model2_interarrival_weights(half_table):
    for p in (0.2, 0.5, 0.9):
        for n in (1, 2, 6):
            assert abs(model2_interarrival_survival(half_table, p, n, 0.0) - (1 - (1 - p) ** (n + 1))) < 1e-14
            assert abs(model2_interarrival_survival(half_table, p, n, 0.0, True) - 1.0) < 1e-14
    t = np.linspace(0, 5, 21)
    single = 1 - half_table.cdf(1, t)
    assert np.allclose(model2_interarrival_survival(half_table, 1.0, 3, t), single, atol=1e-15)
    with pytest.raises(ValueError):
        model2_interarrival_survival(half_table, 0.5, 0, t)
    with pytest.raises(ValueError):
        model2_interarrival_survival(half_table, 0.5, 40, t)


def test_service_law(exp_table, half_table):
    t = np.linspace(0, 8, 161)
    p = 1 / 3
    assert np.max(np.abs(model_service_survival(exp_table, p, t) - np.exp(-2.0 * t))) < 1e-6
    assert abs(model_service_survival(half_table, 0.5, 0.0) - 1.0) < 1e-9
    s = model_service_survival(half_table, 0.5, np.linspace(0, 5, 51))
    assert np.all(np.diff(s) <= 1e-15)
    # inter-arrival law of the renewal queue is the service law with p and 1-p exchanged
    g = np.linspace(0, 5, 51)
    for p in (0.5, 0.6, 0.8):
        assert np.array_equal(model3_interarrival_survival(half_table, p, g), model_service_survival(half_table, 1 - p, g))
    with pytest.raises(ValueError):
        model_service_survival(half_table, 0.99, g)
    with pytest.raises(ValueError):
        model_service_survival(half_table, 1.0, g)


def test_renewal_interarrival_is_exponential_at_unit_orders(exp_table):
    t = np.linspace(0, 8, 161)
    assert np.max(np.abs(model3_interarrival_survival(exp_table, 1 / 3, t) - np.exp(-t))) < 1e-6


def test_comparison_cases():
    grid = np.linspace(0.0, 4.0, 41)
    eq = comparison_inequality(0.6, 0.6, 1.0, 1.0, grid)
    assert set(eq["labels"]) == {"EQ"} and eq["verdict"] and eq["consistent"]
    le = comparison_inequality(0.8, 0.8, 2.0, 1.0, grid)
    assert le["p"] > 0.5 and le["verdict"] and le["consistent"]
    assert set(le["labels"][1:]) == {"LE"}
    ge = comparison_inequality(0.8, 0.8, 1.0, 2.0, grid)
    assert ge["p"] < 0.5 and not ge["verdict"] and ge["consistent"]


@settings(max_examples=6, deadline=None)
@given(a=st.floats(0.4, 1.0), b=st.floats(0.4, 1.0), lam=st.floats(0.3, 3.0), mu=st.floats(0.3, 3.0))
def test_comparison_verdict_matches_min_prob(a, b, lam, mu):
    res = comparison_inequality(a, b, lam, mu, np.linspace(0.0, 3.0, 16))
    assert res["consistent"]


def test_last_jump_atom_and_range():
    beta, mu, T = 0.7, 1.0, 2.0
    atom = float(ml_survival(MLLaw(beta, mu), T))
    assert abs(last_jump_cdf(beta, mu, T, 0.0) - atom) < 1e-14
    assert last_jump_cdf(beta, mu, T, 2.5) == 1.0
    s = np.linspace(0, T, 41)
    f = last_jump_cdf(beta, mu, T, s)
    assert np.all(np.diff(f) >= -1e-12) and abs(f[-1] - 1.0) < 1e-6
    with pytest.raises(ValueError):
        last_jump_cdf(beta, mu, T, -1.0)
    with pytest.raises(ArithmeticError):
        last_jump_cdf(0.5, 10.0, 50.0, 1.0, n_max=5)


def test_last_jump_poisson_case():
    # no event in (s, T] for a rate-mu Poisson stream
    mu, T = 1.7, 2.0
    s = np.linspace(0, T, 21)
    assert np.max(np.abs(last_jump_cdf(1.0, mu, T, s) - np.exp(-mu * (T - s)))) < 1e-7


def test_last_jump_against_simulation():
    beta, mu, T = 0.7, 1.0, 2.0
    x = np.sort(last_renewal_before(beta, mu, T, RngStream(3), 1_000_000))
    s = np.linspace(0, T, 101)
    emp = np.searchsorted(x, s, side="right") / x.size
    assert np.max(np.abs(emp - last_jump_cdf(beta, mu, T, s))) < 0.005


def test_restless_service_special_cases():
    t = np.linspace(0, 5, 11)
    assert np.allclose(restless_service_survival(0.6, 1.0, 0.0, t), ml_survival(MLLaw(0.6, 1.0), t), atol=1e-15)
    assert np.max(np.abs(restless_service_survival(1.0, 1.3, 2.0, t) - np.exp(-1.3 * t))) < 1e-6


def test_restless_service_against_renewal_residual():
    beta, mu, T = 0.7, 1.0, 1.0
    x = np.sort(renewal_residual(beta, mu, T, RngStream(4), 400_000))
    t = np.linspace(0, 5, 51)
    emp = 1 - np.searchsorted(x, t, side="right") / x.size
    assert np.max(np.abs(emp - restless_service_survival(beta, mu, T, t))) < 0.005


def test_restless_service_depends_on_gap():
    t = np.linspace(0, 5, 26)
    s = restless_service_survival(0.7, 1.0, 2.0, t)
    assert np.all(np.diff(s) <= 1e-12)
    assert np.max(np.abs(s - ml_survival(MLLaw(0.7, 1.0), t))) > 0.01


def test_restless_service_against_model4():
    """Services of customers who arrive to an empty restless queue after an idle gap near 1."""
    beta, mu, H = 0.7, 1.0, 30.0
    out = []
    for i in range(40_000):
        tr = simulate_model4(0.9, beta, 0.5, mu, H, RngStream(5).substream(i))
        a, d = tr.arrivals, tr.departures
        k = np.arange(min(a.size, d.size + 1))
        gap = a[k] - np.concatenate(([0.0], d))[k]
        # keep arrivals early enough that a service longer than 5 is still visible as a missing departure
        sel = k[(gap >= 0) & (np.abs(gap - 1.0) <= 0.05) & (a[k] <= H - 5.0)]
        out.append(np.concatenate((d, [np.inf]))[sel] - a[sel])
    x = np.sort(np.concatenate(out))
    assert x.size > 2000
    t = np.linspace(0, 5, 51)
    emp = 1 - np.searchsorted(x, t, side="right") / x.size
    assert np.max(np.abs(emp - restless_service_survival(beta, mu, 1.0, t))) < 0.03


def test_survival_curve_round_trip():
    g = np.linspace(0, 2, 5)
    c = SurvivalCurve(g, np.exp(-g), {"kind": "test"})
    back = SurvivalCurve.from_csv(c.to_csv())
    assert np.array_equal(back.grid, g) and np.array_equal(back.survival, c.survival) and back.meta["kind"] == "test"
    with pytest.raises(ValueError):
        SurvivalCurve(g, np.exp(g), {})
