"""Pure numpy implementations of the sequential kernels.

Every function here performs the same floating point operations, in the
same order, as its compiled twin in ``_ckernels.pyx``; results agree
bit for bit except for the spectral sum, which goes through libm.
"""
import numpy as np


def regulator_values(x, initial=0.0):
    """Running max of the negative part: max(0, -min(initial, x_0..x_k))."""
    x = np.asarray(x, dtype=np.float64)
    m = np.minimum.accumulate(np.concatenate(([initial], x)))
    return np.maximum(-m, 0.0)[1:]


def abs_walk(steps, start=0):
    """q_k = |q_{k-1} + s_k| with q_0 = start >= 0, for steps of size 1."""
    steps = np.asarray(steps, dtype=np.int64)
    r = int(start) + np.cumsum(steps)
    low = np.minimum(np.minimum.accumulate(r), 0) if r.size else r
    # each new level below zero reached by the free walk is one bounce;
    # only the parity of the depth matters for where the bounced walk sits
    return r + 2 * ((-low + 1) // 2)


def lindley_departures(arrivals, services):
    """Departure epochs of a FIFO single server started empty.

    D_k = max(D_{k-1}, A_k) + S_k written as CS_k + max_{j<=k}(A_j - CS_{j-1}).
    """
    a = np.asarray(arrivals, dtype=np.float64)
    s = np.asarray(services, dtype=np.float64)
    cs = np.cumsum(s)
    prev = np.concatenate(([0.0], cs[:-1]))
    return cs + np.maximum.accumulate(a - prev)


def spectral_sum(x, w0, h, nw, alpha, beta, gamma):
    """Trapezoid sums of the cut integrand of E^gamma_{alpha,beta}(-x).

    Returns (S, A) where S is the signed sum and A the sum of magnitudes,
    both already multiplied by the step h.
    """
    x = np.asarray(x, dtype=np.float64)
    w = w0 + h * np.arange(nw)
    c = alpha * gamma - beta + 1.0
    theta0 = -np.pi * (alpha * gamma - beta)
    ca, sa = np.cos(np.pi * alpha), np.sin(np.pi * alpha)
    base = -np.exp(w) + c * w
    ew = np.exp(alpha * w)
    S = np.empty(x.size)
    A = np.empty(x.size)
    chunk = max(1, 2_000_000 // max(nw, 1))
    for i in range(0, x.size, chunk):
        rho = ew[None, :] / x[i:i + chunk, None]
        re = 0.5 * np.log1p(2.0 * rho * ca + rho * rho)
        im = np.arctan2(-rho * sa, 1.0 + rho * ca)
        mag = np.exp(base[None, :] - gamma * re)
        S[i:i + chunk] = h * (mag * np.sin(theta0 - gamma * im)).sum(axis=1)
        A[i:i + chunk] = h * mag.sum(axis=1)
    return S, A
