import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlqueue.paths import (GridPath, LinearPath, StepPath, combine, compose, counting_path, reflect, regulator,
                           rescale, sup_on)


@st.composite
def step_paths(draw, max_events=30):
    n = draw(st.integers(0, max_events))
    gaps = draw(st.lists(st.floats(1e-3, 5.0), min_size=n, max_size=n))
    vals = draw(st.lists(st.floats(-20, 20), min_size=n, max_size=n))
    init = draw(st.floats(-20, 20))
    t = np.cumsum(gaps) if n else np.zeros(0)
    return StepPath(t, np.array(vals, dtype=float), init, float(t[-1]) + 1.0 if n else 1.0)


def brute_regulator(f: StepPath):
    v = f.all_values
    return np.array([max(0.0, max(-v[: i + 1])) for i in range(v.size)])


def test_step_path_is_right_continuous():
    f = StepPath([1.0, 2.0], [5, 7], 3)
    assert f(0.5) == 3 and f(1.0) == 5 and f(1.5) == 5 and f(2.0) == 7
    assert f.left_limit(1.0) == 3 and f.left_limit(2.0) == 5
    assert np.array_equal(f([0, 1, 2, 3]), [3, 5, 7, 7])


def test_step_path_validation():
    with pytest.raises(ValueError):
        StepPath([1.0, 1.0], [1, 2])
    with pytest.raises(ValueError):
        StepPath([-1.0], [1])
    with pytest.raises(ValueError):
        StepPath([1.0, 2.0], [1])


def test_csv_round_trip_keeps_integers():
    f = StepPath([0.5, 1.25, 3.0], [1, 2, 1], 0, 4.0)
    g = StepPath.from_csv(f.to_csv(), horizon=4.0)
    assert g.values.dtype.kind == "i"
    assert np.array_equal(g.times, f.times) and np.array_equal(g.values, f.values)
    h = StepPath([0.1], [math.pi], -0.5)
    assert StepPath.from_csv("# comment\n" + h.to_csv()).values[0] == math.pi


def test_compress_and_truncate():
    f = StepPath([1, 2, 3, 4], [1, 1, 2, 2], 0, 5)
    c = f.compress()
    assert np.array_equal(c.times, [1, 3]) and np.array_equal(c.values, [1, 2])
    t = f.truncate(2.5)
    assert t.horizon == 2.5 and np.array_equal(t.times, [1, 2])


def test_combine_merges_grids():
    f = StepPath([1.0, 3.0], [1.0, 2.0], 0.0)
    g = StepPath([2.0], [10.0], 5.0)
    h = f + g
    assert np.array_equal(h.times, [1, 2, 3]) and np.array_equal(h.values, [6, 11, 12]) and h.initial_value == 5
    assert np.array_equal(combine(f, g, np.maximum).values, [5, 10, 10])
    assert np.array_equal((f - g).values, [-4, -9, -8])


@settings(max_examples=200, deadline=None)
@given(step_paths())
def test_regulator_matches_brute_force(f):
    assert np.allclose(regulator(f).all_values, brute_regulator(f), atol=0, rtol=0)


@settings(max_examples=200, deadline=None)
@given(step_paths())
def test_reflection_properties(f):
    phi, psi = reflect(f), regulator(f)
    v, r = phi.all_values, psi.all_values
    assert np.array_equal(v, f.all_values + r)
    assert np.all(v >= 0)
    assert np.all(np.diff(r) >= 0)
    # the regulator increases only at times where the reflected path sits at zero
    assert np.all(v[1:][np.diff(r) > 0] == 0)
    # reflecting a nonnegative path changes nothing
    assert np.array_equal(reflect(phi).all_values, v)


@settings(max_examples=100, deadline=None)
@given(step_paths(), st.floats(0.0, 10.0))
def test_regulator_shift_invariance(f, c):
    # Psi(f + c) = max(Psi(f) - c, 0) for c >= 0
    g = StepPath(f.times, f.values + c, f.initial_value + c, f.horizon)
    assert np.allclose(regulator(g).all_values, np.maximum(regulator(f).all_values - c, 0), atol=1e-12)


def test_integer_paths_stay_integer():
    f = StepPath([1.0, 2.0, 3.0], np.array([-1, 0, -2]), 0)
    r = reflect(f)
    assert r.values.dtype.kind == "i" and np.array_equal(r.values, [0, 1, 0])


def test_counting_path():
    n = counting_path([0.5, 0.5, 1.0, 2.0])
    assert np.array_equal(n.times, [0.5, 1.0, 2.0]) and np.array_equal(n.values, [2, 3, 4])
    assert counting_path([0.0, 1.0]).initial_value == 1
    with pytest.raises(ValueError):
        counting_path([1.0, 2.0], horizon=3.0)
    with pytest.raises(ValueError):
        counting_path([2.0, 1.0])


def test_linear_path_first_passage():
    g = LinearPath([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.0, 3.0])
    assert np.allclose(g.first_passage([0.0, 0.5, 1.0, 2.0, 3.0, 4.0]), [0.0, 0.5, 1.0, 2.5, 3.0, np.inf])
    assert np.isclose(g(2.5), 2.0)
    with pytest.raises(ValueError):
        LinearPath([0.0, 1.0], [1.0, 0.0])


def test_compose_with_linear_inner():
    f = StepPath([0.5, 1.5], [1, 2], 0, 10.0)
    g = LinearPath([0.0, 1.0, 2.0, 4.0], [0.0, 1.0, 1.0, 2.0])
    h = compose(f, g)
    # f(g(t)) jumps where g first passes 0.5 and 1.5
    assert np.allclose(h.times, [0.5, 3.0]) and np.array_equal(h.values, [1, 2])
    t = np.linspace(0, 4, 81)
    assert np.array_equal(h(t), f(g(t)))
    with pytest.raises(ValueError):
        compose(StepPath([0.5], [1], 0, 1.0), g)


def test_compose_with_step_and_grid_inner():
    f = StepPath([1.0, 2.0], [10.0, 20.0], 0.0, 5.0)
    g = StepPath([0.5, 0.7], [1.0, 2.5], 0.0, 3.0)
    h = compose(f, g)
    assert np.array_equal(h.values, [10.0, 20.0])
    grid = GridPath(0.5, [0.0, 1.0, 2.0, 2.0])
    assert np.array_equal(compose(f, grid).samples, [0.0, 10.0, 20.0, 20.0])
    with pytest.raises(ValueError):
        compose(f, StepPath([1.0], [-1.0], 0.0))


def test_grid_path():
    g = GridPath(0.25, [0.0, 1.0, 3.0])
    assert g.horizon == 0.5 and g(0.3) == 1.0 and g(0.5) == 3.0
    with pytest.raises(ValueError):
        g(0.75)
    s = g.as_step()
    assert s(0.3) == 1.0 and s.initial_value == 0.0


@settings(max_examples=100, deadline=None)
@given(step_paths(), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_rescale_is_exact(f, a, b):
    g = rescale(f, a, b)
    t = np.linspace(0, g.horizon, 37)
    assert np.array_equal(g(t), f(a * t) / b) or np.allclose(g(t), f(a * t) / b, rtol=1e-12, atol=0)


def test_rescale_keeps_right_limit_when_times_collide():
    # adjacent floats that underflow to the same subnormal after division
    t = np.array([1e-300, np.nextafter(1e-300, 1.0)])
    g = rescale(StepPath(t, [1.0, 2.0], 0.0), 1e16, 1.0)
    assert g.times.size == 1 and g(1e-316) == 2.0


def test_sup_on():
    f = StepPath([1.0, 2.0, 3.0], [5.0, -1.0, 2.0], 0.0)
    assert sup_on(f, (0.0, 0.5)) == 0.0
    assert sup_on(f, (1.5, 2.5)) == 5.0
    assert sup_on(f, (2.0, 4.0)) == 2.0
    with pytest.raises(ValueError):
        sup_on(f, (2.0, 1.0))


@st.composite
def increasing_linear(draw, horizon):
    """Strictly increasing piecewise-linear g with g(0) = 0 and g(T) >= horizon."""
    n = draw(st.integers(1, 8))
    dx = draw(st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
    dy = draw(st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
    x = np.concatenate(([0.0], np.cumsum(dx)))
    y = np.concatenate(([0.0], np.cumsum(dy)))
    y = y * (horizon / y[-1])
    y[-1] = horizon
    return LinearPath(x, y)


@settings(max_examples=150, deadline=None)
@given(st.data(), step_paths(), st.floats(0.1, 10.0))
def test_reflection_commutes_with_time_change_and_scale(data, f, lam):
    # lam Phi(f) o g = Phi(lam f o g) for a strictly increasing homeomorphism g
    g = data.draw(increasing_linear(f.horizon))
    lhs_phi, lhs_psi = compose(reflect(f), g), compose(regulator(f), g)
    inner = compose(f, g)
    scaled = StepPath(inner.times, lam * inner.values, lam * inner.initial_value, inner.horizon)
    t = np.linspace(0.0, g.knots[-1], 97)
    assert np.allclose(lam * lhs_phi(t), reflect(scaled)(t), rtol=1e-12, atol=1e-12)
    assert np.allclose(lam * lhs_psi(t), regulator(scaled)(t), rtol=1e-12, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.floats(0.5, 5.0),
       st.lists(st.floats(0.01, 2.0), min_size=1, max_size=30))
def test_reflection_commutes_with_step_time_change(a, lam, gaps):
    # a^lam(t) = a_floor(lam t); g a nondecreasing step path whose range holds every k / lam
    a = np.array(a)
    T = (a.size - 1) / lam
    ak = StepPath(np.arange(1, a.size) / lam, a[1:], a[0], T)
    # g visits each level k / lam, possibly jumping across several grid cells in between
    levels = np.arange(a.size) / lam
    t = np.cumsum(gaps)[: a.size - 1]
    if t.size < a.size - 1:
        t = np.concatenate((t, t[-1] + np.arange(1, a.size - t.size) * 0.5))
    g = StepPath(t, levels[1:], 0.0, float(t[-1]) + 1.0)
    lhs = compose(reflect(ak), g)
    rhs = reflect(compose(ak, g))
    s = np.linspace(0.0, g.horizon, 83)
    assert np.array_equal(lhs(s), rhs(s))
    assert np.array_equal(compose(regulator(ak), g)(s), regulator(compose(ak, g))(s))


@settings(max_examples=200, deadline=None)
@given(step_paths(), step_paths())
def test_reflection_is_lipschitz_with_constant_two(f, g):
    d_in = np.max(np.abs((f - g).all_values))
    d_phi = np.max(np.abs((reflect(f) - reflect(g)).all_values))
    d_psi = np.max(np.abs((regulator(f) - regulator(g)).all_values))
    assert d_psi <= d_in + 1e-12
    assert d_phi <= 2 * d_in + 1e-12
