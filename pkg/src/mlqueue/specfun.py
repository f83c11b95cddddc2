"""Mittag-Leffler and Prabhakar functions on the negative real axis.

Everything is reduced to one primitive, ``x**m * E^gamma_{alpha,beta}(-x)``
for ``x >= 0``, evaluated by one of three routes:

* the power series, where the largest term stays small enough that the
  alternating sum keeps its digits;
* the algebraic asymptotic expansion, where its optimally truncated error
  (and the exponentially small remainder) is below target;
* a trapezoid rule on the Hankel-cut representation, in logarithmic
  variables, for the band in between.

Points where the cut integral cannot certify the target (strong
cancellation for large gamma and alpha close to 1) are summed in
arbitrary precision with mpmath.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from . import kernels

TOL = 1e-10
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class MLLaw:
    """Mittag-Leffler law with order ``alpha`` in (0, 1] and generalized ``rate``."""

    alpha: float
    rate: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"order alpha must lie in (0, 1], got {self.alpha}")
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")


@dataclass(frozen=True)
class PrabhakarParams:
    alpha: float
    beta_p: float
    gamma_p: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (self.beta_p > 0.0 and self.gamma_p > 0.0):
            raise ValueError("beta_p and gamma_p must be positive")


def _check_order(alpha):
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"order alpha must lie in (0, 1], got {alpha}")


def _shape(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


# --------------------------------------------------------------------------
# power series

def _series_log_terms(alpha, beta, gamma, m, lx, k):
    coef = (special.gammaln(gamma + k) - special.gammaln(gamma)
            - special.gammaln(k + 1.0) - special.gammaln(alpha * k + beta))
    return coef + (k + m) * lx


@lru_cache(maxsize=512)
def _series_length(alpha, beta, gamma, m, xmax):
    """Number of terms so that the alternating tail is below 1e-17."""
    lx = math.log(xmax)
    kmax = 64
    while True:
        k = np.arange(kmax, dtype=float)
        lt = _series_log_terms(alpha, beta, gamma, m, lx, k)
        peak = int(np.argmax(lt))
        tail = np.nonzero((k > peak) & (lt < math.log(1e-17)))[0]
        if tail.size:
            return int(tail[0]) + 1
        kmax *= 2
        if kmax > 1 << 16:
            raise ArithmeticError("power series does not settle")


def _series_peak(alpha, beta, gamma, m, x):
    lx = math.log(x)
    try:
        n = _series_length(alpha, beta, gamma, m, x)
    except ArithmeticError:
        return math.inf
    k = np.arange(n, dtype=float)
    return float(np.max(_series_log_terms(alpha, beta, gamma, m, lx, k)))


@lru_cache(maxsize=512)
def _series_limit(alpha, beta, gamma, m):
    """Largest x whose biggest series term stays below 1e3."""
    target = math.log(1e3)
    lo, hi = math.log(1e-8), math.log(60.0)
    if _series_peak(alpha, beta, gamma, m, math.exp(lo)) > target:
        return 0.0
    if _series_peak(alpha, beta, gamma, m, math.exp(hi)) <= target:
        return math.exp(hi)
    for _ in range(45):
        mid = 0.5 * (lo + hi)
        if _series_peak(alpha, beta, gamma, m, math.exp(mid)) <= target:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def _series(alpha, beta, gamma, m, x):
    if x.size == 0:
        return x.copy()
    n = _series_length(alpha, beta, gamma, m, float(x.max()))
    k = np.arange(n, dtype=float)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    out = np.empty_like(x)
    chunk = max(1, 4_000_000 // n)
    for i in range(0, x.size, chunk):
        lx = np.log(x[i:i + chunk])[:, None]
        lt = _series_log_terms(alpha, beta, gamma, m, lx, k[None, :])
        out[i:i + chunk] = (sign * np.exp(lt)).sum(axis=1)
    return out


# --------------------------------------------------------------------------
# asymptotic expansion for large x

_ASY_TERMS = 80


def _asy_coefficients(alpha, beta, gamma):
    k = np.arange(_ASY_TERMS, dtype=float)
    lc = special.gammaln(gamma + k) - special.gammaln(gamma) - special.gammaln(k + 1.0)
    return k, np.where(k % 2 == 0, 1.0, -1.0) * np.exp(lc) * special.rgamma(beta - alpha * (gamma + k))


def _asy_eval(alpha, beta, gamma, m, x):
    """Optimally truncated expansion; returns (value, error estimate)."""
    k, a = _asy_coefficients(alpha, beta, gamma)
    lx = np.log(x)[:, None]
    terms = a[None, :] * np.exp((m - gamma - k[None, :]) * lx)
    mag = np.abs(terms)
    # error after keeping terms < K: the next two terms (zeros occur at poles of 1/Gamma)
    nxt = np.maximum(mag[:, 1:-1], mag[:, 2:])
    stop = np.argmin(nxt, axis=1) + 1
    csum = np.cumsum(terms, axis=1)
    val = csum[np.arange(x.size), stop - 1]
    err = nxt[np.arange(x.size), stop - 1]
    if alpha > 2.0 / 3.0:
        # exponentially small contributions that the algebraic series misses
        s = x ** (1.0 / alpha)
        with np.errstate(over="ignore"):  # an infinite estimate just rejects the point
            err = err + 10.0 * np.exp(s * math.cos(math.pi / alpha)
                                      + (abs(gamma - beta) / alpha + gamma + abs(m)) * np.log1p(x))
    return val, err


@lru_cache(maxsize=512)
def _asy_limit(alpha, beta, gamma, m):
    """Smallest x beyond which the expansion meets 1e-13."""
    def ok(v):
        _, e = _asy_eval(alpha, beta, gamma, m, np.array([v]))
        return bool(e[0] <= 1e-13)

    hi = 1.0
    while not ok(hi):
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    lo = hi / 2.0
    if ok(lo):
        return lo
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# Hankel-cut integral

def _cut_grid(alpha, beta, gamma, m, x):
    c = alpha * gamma - beta + 1.0
    d = min(math.pi * (1.0 - alpha) / alpha, math.pi / 2.0) * 0.9
    h = 2.0 * math.pi * d / 40.0
    # lower end: integrand behaves like exp(c w) times x^{m-gamma} prefactor
    lpref = float(np.max((m - gamma) * np.log(x)))
    w0 = -(math.log(1e17) + max(lpref, 0.0) + 5.0) / c
    w1 = 4.2
    nw = int(math.ceil((w1 - w0) / h)) + 1
    nw += nw % 2 == 0  # odd so that every other node forms the coarse rule
    return w0, h, nw


def _cut(alpha, beta, gamma, m, x):
    """Cut integral; returns (value, error estimate)."""
    w0, h, nw = _cut_grid(alpha, beta, gamma, m, x)
    S, A = kernels.spectral_sum(x, w0, h, nw, alpha, beta, gamma)
    S2, _ = kernels.spectral_sum(x, w0, 2 * h, (nw + 1) // 2, alpha, beta, gamma)
    pref = np.exp((m - gamma) * np.log(x)) / math.pi
    val = pref * S
    # geometric convergence: the fine rule error is about (coarse error)^2 / scale
    diff = np.abs(S - S2)
    err = pref * (diff * diff / np.maximum(A, 1e-300) + 64.0 * _EPS * A)
    return val, err


# --------------------------------------------------------------------------
# arbitrary precision fallback

def _mp_series(alpha, beta, gamma, m, x):
    import mpmath as mp

    out = np.empty_like(x)
    for i, xi in enumerate(x):
        peak = _series_peak(alpha, beta, gamma, m, float(xi)) / math.log(10.0)
        n = _series_length(alpha, beta, gamma, m, float(xi))
        with mp.workdps(int(25 + max(peak, 0.0))):
            a, b, g, X = mp.mpf(alpha), mp.mpf(beta), mp.mpf(gamma), mp.mpf(float(xi))
            tot = mp.mpf(0)
            for k in range(n + 20):
                tot += (-1) ** k * mp.exp(mp.loggamma(g + k) - mp.loggamma(g) - mp.loggamma(k + 1)
                                          - mp.loggamma(a * k + b)) * X ** (k + m)
            out[i] = float(tot)
    return out


# --------------------------------------------------------------------------
# dispatcher

def _scaled_prabhakar(alpha, beta, gamma, m, x):
    """x**m * E^gamma_{alpha,beta}(-x) for an array of x >= 0 (alpha < 1)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    zero = x == 0.0
    out[zero] = (1.0 / special.gamma(beta)) if m == 0 else 0.0
    xs = _series_limit(alpha, beta, gamma, m)
    xa = _asy_limit(alpha, beta, gamma, m)
    ser = (~zero) & (x <= xs)
    asy = (~zero) & (~ser) & (x >= xa)
    mid = (~zero) & (~ser) & (~asy)
    if ser.any():
        out[ser] = _series(alpha, beta, gamma, m, x[ser])
    if asy.any():
        out[asy] = _asy_eval(alpha, beta, gamma, m, x[asy])[0]
    if mid.any():
        idx = np.nonzero(mid)[0]
        if alpha * gamma - beta + 1.0 < 0.05 or _cut_grid(alpha, beta, gamma, m, x[idx])[2] > 100_000:
            # the cut integrand no longer decays at its lower end, or (alpha near 1)
            # the admissible contour strip is too thin for a practical node count
            out[idx] = _mp_series(alpha, beta, gamma, m, x[idx])
            return out
        val, err = _cut(alpha, beta, gamma, m, x[idx])
        out[idx] = val
        bad = err > 1e-12
        if bad.any():
            out[idx[bad]] = _mp_series(alpha, beta, gamma, m, x[idx[bad]])
    return out


def _poisson_like(n, x, beta, gamma):
    """alpha = 1: x**n * E^gamma_{1,beta}(-x) via Kummer's transformation."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        lx = np.where(x > 0, np.log(x), -np.inf)
    if gamma == beta:
        val = np.exp(n * lx - x - special.gammaln(beta)) if n else np.exp(-x - special.gammaln(beta))
        return np.where(x == 0, (1.0 / special.gamma(beta)) if n == 0 else 0.0, val)
    val = np.exp(-x) * special.hyp1f1(beta - gamma, beta, x) * special.rgamma(beta)
    return val * (np.exp(n * lx) if n else 1.0)


def mittag_leffler(alpha, x):
    """E_alpha(x) for x <= 0, absolute error below 1e-10."""
    _check_order(alpha)
    arr, scalar = _shape(x)
    if np.any(arr > 0) or np.any(np.isnan(arr)):
        raise ValueError("mittag_leffler is only provided on x <= 0")
    if alpha == 1.0:
        return _out(np.exp(arr), scalar)
    flat = arr.ravel()
    res = _scaled_prabhakar(float(alpha), 1.0, 1.0, 0, -flat)
    return _out(np.clip(res, 0.0, 1.0).reshape(arr.shape), scalar)


def prabhakar(params: PrabhakarParams, x):
    """Three-parameter Mittag-Leffler function E^gamma_{alpha,beta}(x), x <= 0."""
    arr, scalar = _shape(x)
    if np.any(arr > 0) or np.any(np.isnan(arr)):
        raise ValueError("prabhakar is only provided on x <= 0")
    a, b, g = float(params.alpha), float(params.beta_p), float(params.gamma_p)
    if a < 1.0 and b == 1.0 and g == 1.0:
        return mittag_leffler(a, x)
    flat = -arr.ravel()
    if a == 1.0:
        res = _poisson_like(0, flat, b, g)
    else:
        res = _scaled_prabhakar(a, b, g, 0, flat)
    return _out(res.reshape(arr.shape), scalar)


def _fpp_term(alpha, n, x):
    """x**n E^{n+1}_{alpha, n alpha + 1}(-x): probability of exactly n events."""
    if alpha == 1.0:
        return _poisson_like(n, x, n + 1.0, n + 1.0)
    return _scaled_prabhakar(float(alpha), n * alpha + 1.0, n + 1.0, n, x)


def _law_argument(law: MLLaw, t):
    arr, scalar = _shape(t)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("time must be nonnegative")
    return law.rate * arr ** law.alpha, arr, scalar


def ml_survival(law: MLLaw, t):
    """P(X > t) = E_alpha(-rate t^alpha) for X ~ ML_alpha(rate)."""
    x, arr, scalar = _law_argument(law, t)
    return mittag_leffler(law.alpha, -x)


def fpp_pmf(law: MLLaw, k: int, t):
    """P(N(t) = k) for the fractional Poisson process with ML_alpha(rate) gaps."""
    if k < 0 or int(k) != k:
        raise ValueError("k must be a nonnegative integer")
    x, arr, scalar = _law_argument(law, t)
    if k == 0:
        return ml_survival(law, t)
    res = _fpp_term(law.alpha, int(k), x.ravel()).reshape(arr.shape)
    return _out(np.clip(res, 0.0, 1.0), scalar)


def ge_survival(law: MLLaw, k: int, t):
    """Survival of a sum of k independent ML_alpha(rate) variables."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    x, arr, scalar = _law_argument(law, t)
    flat = x.ravel()
    tot = np.asarray(ml_survival(law, arr), dtype=float).ravel().copy()
    for n in range(1, int(k)):
        tot += _fpp_term(law.alpha, n, flat)
    return _out(np.clip(tot, 0.0, 1.0).reshape(arr.shape), scalar)


def ge_density(law: MLLaw, k: int, t):
    """Density of the generalized Erlang law of order k."""
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    arr, scalar = _shape(t)
    if np.any(arr < 0):
        raise ValueError("time must be nonnegative")
    ka = k * law.alpha
    if np.any(arr == 0) and ka < 1.0:
        raise ValueError("density is singular at t = 0 when k*alpha < 1")
    flat = arr.ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    x = law.rate * flat[pos] ** law.alpha
    out[pos] = ka / flat[pos] * _fpp_term(law.alpha, int(k), x)
    if np.any(~pos) and ka == 1.0:
        out[~pos] = law.rate ** k
    return _out(np.maximum(out, 0.0).reshape(arr.shape), scalar)
