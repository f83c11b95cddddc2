"""Distribution functions of inter-event, inter-arrival and service times of
the Mittag-Leffler queue models, computed by deterministic quadrature.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .specfun import MLLaw, _fpp_term, ge_survival, ml_survival

QUAD_TOL = 1e-10
LJ_TAIL_TOL = 1e-8


def _write_table(meta, header, columns, fh=None) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*[np.asarray(c, dtype=float).tolist() for c in columns]):
        w.writerow([repr(v) for v in row])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def _read_table(text):
    lines = text.splitlines()
    meta = json.loads(lines[0][1:]) if lines and lines[0].startswith("#") else {}
    rows = list(csv.reader(l for l in lines if l and not l.startswith("#")))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return meta, header, data


@dataclass
class SurvivalCurve:
    grid: np.ndarray
    survival: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.survival = np.asarray(self.survival, dtype=float)
        if self.grid.shape != self.survival.shape or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be increasing and match the survival values")
        s = self.survival
        if np.any((s < 0) | (s > 1)) or np.any(np.diff(s) > 1e-9):
            raise ValueError("survival values must lie in [0, 1] and be nonincreasing")

    def to_csv(self, fh=None) -> str:
        return _write_table(self.meta, ["t", "survival"], [self.grid, self.survival], fh)

    @classmethod
    def from_csv(cls, text) -> "SurvivalCurve":
        meta, _, data = _read_table(text)
        return cls(data[:, 0], data[:, 1], meta)


# --------------------------------------------------------------------------
# minimum of two ML variables

def mml_survival(alpha, beta, lam, mu, t):
    """P(min(X, Y) > t) for independent X ~ ML_alpha(lam), Y ~ ML_beta(mu)."""
    return ml_survival(MLLaw(alpha, lam), t) * ml_survival(MLLaw(beta, mu), t)


def min_prob(alpha, beta, lam, mu, tol=QUAD_TOL) -> float:
    """P(X < Y) for independent X ~ ML_alpha(lam), Y ~ ML_beta(mu).

    The density of X is integrated against the survival of Y in the
    variable v = log t, where the integrand is smooth and both tails decay
    exponentially:
    p = int alpha x E^2_{alpha,alpha+1}(-x) E_beta(-mu e^{beta v}) dv,  x = lam e^{alpha v}.
    """
    law_a, law_b = MLLaw(alpha, lam), MLLaw(beta, mu)
    if alpha == 1.0 and beta == 1.0:
        return lam / (lam + mu)

    def f(v):
        x = lam * math.exp(alpha * v)
        return alpha * float(_fpp_term(alpha, 1, np.array([x]))[0]) * float(ml_survival(law_b, math.exp(v)))

    ca, cb = -math.log(lam) / alpha, -math.log(mu) / beta
    m = min(alpha, beta)
    lo, hi = min(ca, cb) - 40.0 / m, max(ca, cb) + 80.0 / m
    edges = [lo] + sorted({ca, cb}) + [hi]
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, e = integrate.quad(f, a, b, epsabs=tol / 4, epsrel=tol, limit=400)
        total += val
        err += e
    # omitted tails: P(X < e^lo) on the left, P(X > e^hi) P(Y > e^hi) on the right
    err += 1.0 - float(ml_survival(law_a, math.exp(lo)))
    err += float(ml_survival(law_a, math.exp(hi))) * float(ml_survival(law_b, math.exp(hi)))
    if err > 1e-6:
        raise ArithmeticError(f"quadrature for P(X < Y) did not converge (error estimate {err:.2e})")
    return min(max(total, 0.0), 1.0)


# --------------------------------------------------------------------------
# k-fold convolutions of the mML distribution

@dataclass
class ConvolutionTable:
    """CDFs F^{*k}, k = 1..K_max, of sums of i.i.d. mML variables on a uniform grid."""

    grid: np.ndarray
    cdf_powers: list
    error_estimate: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return len(self.cdf_powers)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def cdf(self, k, t):
        if not 1 <= k <= self.k_max:
            raise ValueError(f"convolution order {k} outside 1..{self.k_max}")
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.grid[-1] * (1 + 1e-12)):
            raise ValueError(f"time outside the tabulated range [0, {self.grid[-1]}]")
        return np.interp(t, self.grid, self.cdf_powers[k - 1])

    def to_csv(self, fh=None) -> str:
        meta = {**self.meta, "error_estimate": self.error_estimate}
        header = ["t"] + [f"F{k}" for k in range(1, self.k_max + 1)]
        return _write_table(meta, header, [self.grid] + list(self.cdf_powers), fh)

    @classmethod
    def from_csv(cls, text) -> "ConvolutionTable":
        meta, _, data = _read_table(text)
        err = float(meta.pop("error_estimate", 0.0))
        return cls(data[:, 0], [data[:, j] for j in range(1, data.shape[1])], err, meta)


_GL6 = np.polynomial.legendre.leggauss(6)
_GL40 = np.polynomial.legendre.leggauss(40)
_LOCAL = 16  # refinement factor and width (in cells) of the window near the origin


def _cell_integrals(surv, h, n, order):
    """int_{u_m}^{u_{m+1}} S(u) du for the n cells of spacing h.

    Gauss-Legendre per cell; the first cell uses u = h w^(1/order), which
    absorbs the u^order behaviour of the distribution at the origin.
    """
    x, w = (_GL6[0] + 1.0) / 2.0, _GL6[1] / 2.0
    u = (np.arange(n)[:, None] + x[None, :]) * h
    out = h * (np.asarray(surv(u.ravel()), dtype=float).reshape(u.shape) @ w)
    x, w = (_GL40[0] + 1.0) / 2.0, _GL40[1] / 2.0
    out[0] = np.sum(w * np.asarray(surv(h * x ** (1.0 / order)), dtype=float) * (h / order) * x ** (1.0 / order - 1.0))
    return out


def _product_step(dF, moments, g, h):
    """int_0^{t_i} G(t_i - u) dF(u) with G linear on each cell, integrated exactly against dF.

    ``moments[m] = int_cell (u - u_m) dF(u)``; for t_i = i h the sum is
    sum_m dF_m G[i-m] - (moments_m / h) (G[i-m] - G[i-m-1]).
    """
    n = g.size
    c1 = np.convolve(dF, g[1:])[: n - 1]
    c2 = np.convolve(moments / h, np.diff(g))[: n - 1]
    return np.concatenate(([0.0], c1 - c2))


def _convolve_powers(surv, order, t_max, h, k_max, depth=3):
    """F^{*k}, k = 1..k_max, on the grid k h of [0, t_max], with F = 1 - surv.

    Product integration: G = F^{*(k-1)} is taken piecewise linear and
    integrated exactly against the cell masses and first moments of dF, which
    are computed from the analytic survival function. Near the origin both
    factors vary on scales below h, so the first ``_LOCAL`` cells are
    recomputed on a grid ``_LOCAL`` times finer (recursively, ``depth`` levels).
    """
    n = int(round(t_max / h))
    grid = np.linspace(0.0, t_max, n + 1)
    cdf = 1.0 - np.asarray(surv(grid), dtype=float)
    dF = np.diff(cdf)
    moments = h * cdf[1:] - (h - _cell_integrals(surv, h, n, order))
    local = None
    if depth > 0 and n > _LOCAL:
        local = _convolve_powers(surv, order, _LOCAL * h, h / _LOCAL, k_max, depth - 1)
    out = [cdf]
    for k in range(1, k_max):
        g = np.clip(_product_step(dF, moments, out[-1], h), 0.0, 1.0)
        if local is not None:
            g[: _LOCAL + 1] = local[k][::_LOCAL]
        # keep F^{*k} <= F^{*(k-1)} against rounding
        out.append(np.minimum(g, out[-1]))
    return out


def build_convolutions(alpha, beta, lam, mu, grid_spec, k_max, check_tol=1e-3) -> ConvolutionTable:
    """Tabulate (F^{lam,mu}_{alpha,beta})^{*k} for k = 1..k_max.

    ``grid_spec`` is ``(t_max, h)``. The table is computed at spacing h/2
    and reported on the h grid; the spacing-h computation serves as the
    refinement check, and a change larger than ``check_tol`` raises.
    """
    t_max, h = grid_spec
    if not (t_max > 0 and h > 0) or k_max < 1:
        raise ValueError("need t_max > 0, h > 0 and k_max >= 1")
    n = int(round(t_max / h))
    if n < 2 or abs(n * h - t_max) > 1e-9 * t_max:
        raise ValueError("t_max must be a multiple of h with at least two cells")

    def surv(u):
        return mml_survival(alpha, beta, lam, mu, u)

    order = min(alpha, beta)
    pf = _convolve_powers(surv, order, t_max, h / 2.0, k_max)
    pc = _convolve_powers(surv, order, t_max, h, k_max)
    fine = np.linspace(0.0, t_max, 2 * n + 1)
    err = max(float(np.max(np.abs(a[::2] - b))) for a, b in zip(pf, pc))
    if err > check_tol:
        raise ArithmeticError(f"grid too coarse: refinement changes the table by {err:.2e}; use a smaller h")
    meta = {"alpha": alpha, "beta": beta, "lambda": lam, "mu": mu, "t_max": t_max, "h": h, "k_max": k_max}
    return ConvolutionTable(fine[::2], [p[::2] for p in pf], err, meta)


# --------------------------------------------------------------------------
# inter-arrival and service laws of the renewal models

def model2_interarrival_survival(table: ConvolutionTable, p, n, t, with_empty_path=False):
    """P(T_k > t | Q(A_{k-1}) = n) for the fast renewal queue.

    The finite mixture sum_{j=0}^{n} (1 - F^{*(j+1)}(t)) (1-p)^j p, whose
    weights add up to 1 - (1-p)^{n+1}. The missing mass belongs to the path
    with n departures in a row: the chain then sits at 0, moves up for sure,
    and the next arrival comes after n+1 steps. ``with_empty_path=True``
    adds that term, (1-p)^{n+1} (1 - F^{*(n+1)}(t)), which makes the value
    at t = 0 equal to 1.
    """
    if n < 1:
        raise ValueError("the conditional law is given for n >= 1")
    if n + 1 > table.k_max:
        raise ValueError(f"need convolutions up to order {n + 1}, table has {table.k_max}")
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for j in range(n + 1):
        out = out + (1.0 - table.cdf(j + 1, t)) * (1.0 - p) ** j * p
    if with_empty_path:
        out = out + (1.0 - table.cdf(n + 1, t)) * (1.0 - p) ** (n + 1)
    return out if out.ndim else float(out)


def model_service_survival(table: ConvolutionTable, p, t, truncation_tol=1e-10):
    """sum_{j>=0} (1 - F^{*(j+1)}(t)) p^j (1-p), the service law of the renewal models.

    Truncated at the first J with p^{J+1} < truncation_tol, which bounds the
    omitted tail. With p replaced by 1-p it gives the inter-arrival law of
    the renewal queue.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("need 0 <= p < 1")
    n_terms = 1 if p == 0.0 else max(1, int(math.ceil(math.log(truncation_tol) / math.log(p))))
    if n_terms > table.k_max:
        raise ValueError(f"truncation needs {n_terms} convolution orders, table has {table.k_max}")
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for j in range(n_terms):
        out = out + (1.0 - table.cdf(j + 1, t)) * p ** j * (1.0 - p)
    return out if out.ndim else float(out)


def model3_interarrival_survival(table: ConvolutionTable, p, t, truncation_tol=1e-10):
    """Inter-arrival survival of the renewal queue: the service mixture with p and 1-p swapped."""
    return model_service_survival(table, 1.0 - p, t, truncation_tol)


def comparison_inequality(alpha, beta, lam, mu, grid, table: ConvolutionTable | None = None,
                          truncation_tol=1e-10, eq_tol=1e-8):
    """Evaluate both sides of the T_1 / S_1 survival comparison of the renewal queue.

    lhs = P(T_1 > t) - (1 - F(t)) p,  rhs = P(S_1 > t) - (1 - F(t)) (1 - p).
    Each grid point is labelled LE, EQ or GE; the verdict "p >= 1/2" holds
    when no point is GE, and is cross-checked against min_prob.
    """
    grid = np.asarray(grid, dtype=float)
    p = min_prob(alpha, beta, lam, mu)
    if table is None:
        q = max(p, 1.0 - p)
        k = max(2, int(math.ceil(math.log(truncation_tol) / math.log(q))) + 1) if q < 1 else 2
        t_max = float(np.max(grid)) if grid.size else 1.0
        h = t_max / max(200, int(math.ceil(t_max / 0.01)))
        table = build_convolutions(alpha, beta, lam, mu, (t_max, h), k)
    surv1 = 1.0 - table.cdf(1, grid)
    lhs = model3_interarrival_survival(table, p, grid, truncation_tol) - surv1 * p
    rhs = model_service_survival(table, p, grid, truncation_tol) - surv1 * (1.0 - p)
    diff = lhs - rhs
    labels = np.where(np.abs(diff) <= eq_tol, "EQ", np.where(diff < 0, "LE", "GE"))
    holds = bool(np.all(labels != "GE"))
    return {
        "grid": grid, "lhs": lhs, "rhs": rhs, "labels": labels.tolist(),
        "p": p, "verdict": holds, "consistent": holds == (p >= 0.5 - eq_tol),
    }


# --------------------------------------------------------------------------
# last renewal before a fixed time, and the restless service law

def _lj_terms_needed(beta, mu, T, tail_tol, n_max):
    """Smallest N with P(N(T) >= N + 1) < tail_tol; bounds the omitted series tail."""
    law = MLLaw(beta, mu)
    n = 1
    while True:
        bound = 1.0 - float(ge_survival(law, n + 1, T))
        if bound < tail_tol:
            return n, bound
        if n >= n_max:
            raise ArithmeticError(f"last-jump series not truncated within {n_max} terms "
                                  f"(tail bound {bound:.2e})")
        n += 1


def _renewal_term_y(beta, mu, n, y):
    """n-th renewal density in the variable y = z^beta, including the Jacobian.

    f_{S_n}(z) dz = n mu^n y^{n-1} E^{n+1}_{beta, n beta + 1}(-mu y) dy.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    small = y <= 0
    out[small] = mu if n == 1 else 0.0
    ys = y[~small]
    out[~small] = n * _fpp_term(beta, n, mu * ys) / ys
    return out


def _lj_density_y(beta, mu, T, n_terms, y):
    """Density of the last jump time before T in the variable y = z^beta (z < T)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = y ** (1.0 / beta)
    surv = np.asarray(ml_survival(MLLaw(beta, mu), np.maximum(T - z, 0.0)), dtype=float)
    tot = np.zeros_like(y)
    for n in range(1, n_terms + 1):
        tot += _renewal_term_y(beta, mu, n, y)
    return tot * surv


def last_jump_cdf(beta, mu, T, s, tail_tol=LJ_TAIL_TOL, n_max=2000):
    """F_LJ(s) = P(tau[T] <= s), tau[T] the last event time of a fractional Poisson process before T.

    F_LJ(s) = E_beta(-mu T^beta)
              + sum_n int_0^s f_{S_n}(z) E_beta(-mu (T - z)^beta) dz,
    with f_{S_n} the generalized Erlang densities. The series is cut once the
    probability of N(T) > N drops below ``tail_tol``; each term is integrated
    in y = z^beta, which removes the z^(beta-1) singularity at the origin.
    """
    T = float(T)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0) or T < 0:
        raise ValueError("need s >= 0 and T >= 0")
    atom = float(ml_survival(MLLaw(beta, mu), T))
    if T == 0:
        out = np.ones_like(s_arr)
        return out if np.ndim(s) else float(out[0])
    n_terms, _ = _lj_terms_needed(beta, mu, T, tail_tol, n_max)
    order = np.argsort(s_arr)
    targets = np.minimum(s_arr[order], T) ** beta
    vals = np.empty_like(targets)
    acc, prev, err = atom, 0.0, 0.0
    for i, yt in enumerate(targets):
        if yt > prev:
            for n in range(1, n_terms + 1):
                def f(y, n=n):
                    z = y ** (1.0 / beta)
                    return float(_renewal_term_y(beta, mu, n, y)[0]) * float(ml_survival(MLLaw(beta, mu), max(T - z, 0.0)))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", integrate.IntegrationWarning)
                    v, e = integrate.quad(f, prev, yt, epsabs=1e-12, epsrel=1e-10, limit=200)
                acc += v
                err += e
            prev = yt
        vals[i] = acc
    if err > 1e-6:
        raise ArithmeticError(f"last-jump quadrature error estimate {err:.2e}")
    out = np.empty_like(vals)
    out[order] = np.clip(vals, 0.0, 1.0)
    out[s_arr >= T] = 1.0
    return out if np.ndim(s) else float(out[0])


def restless_service_survival(beta, mu, T_gap, t, tail_tol=LJ_TAIL_TOL, n_max=2000):
    """P(S_n > t | A_n - D_{n-1} = T_gap) in the restless queue when the server was idle.

    The service clock last ticked at D_{n-1}; the service ends at its first
    tick after A_n, so the service time is the residual life of the clock at
    age T_gap:
    F_t(T) = int_{[0,T]} E_beta(-mu (T-s+t)^beta) / E_beta(-mu (T-s)^beta) dF_LJ(s; beta, mu, T),
    integrated against the atom of F_LJ at 0 and its density on (0, T).
    """
    law = MLLaw(beta, mu)
    T = float(T_gap)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if T < 0 or np.any(t_arr < 0):
        raise ValueError("need T_gap >= 0 and t >= 0")
    if T == 0:
        out = np.asarray(ml_survival(law, t_arr), dtype=float)
        return out if np.ndim(t) else float(out[0])
    atom_w = float(ml_survival(law, T))
    n_terms, _ = _lj_terms_needed(beta, mu, T, tail_tol, n_max)
    out = np.empty_like(t_arr)
    yT = T ** beta
    for i, tt in enumerate(t_arr):
        def f(y):
            z = y ** (1.0 / beta)
            r = max(T - z, 0.0)
            ratio = float(ml_survival(law, r + tt)) / max(float(ml_survival(law, r)), 1e-300)
            return float(_lj_density_y(beta, mu, T, n_terms, y)[0]) * ratio
        v, e = integrate.quad(f, 0.0, yT, epsabs=1e-9, epsrel=1e-8, limit=200)
        if e > 1e-4:
            raise ArithmeticError(f"restless service quadrature failed (error {e:.2e})")
        out[i] = float(ml_survival(law, T + tt)) / max(atom_w, 1e-300) * atom_w + v
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(t) else float(out[0])
