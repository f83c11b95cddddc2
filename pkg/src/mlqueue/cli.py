"""Command-line front end.

    mlqueue simulate --model M5 --alpha 0.7 --beta 0.7 --horizon 100 --out run/
    mlqueue dist --kind mml --alpha 0.5 --beta 0.8 --t-max 5 --out run/
    mlqueue scaling --model M1 --alpha 0.7 --lambda 2 --n-ladder 100,1000 --out run/
    mlqueue regime --model M2 --alpha 0.4 --beta 0.6
    mlqueue chains --chain q_bar --p 0.7 --out run/
    mlqueue selftest [--list]

A config file (INI, section [run], keys named like the long flags with
dashes replaced by underscores) overrides flags; flags override defaults.
Exit codes: 0 ok, 1 a check failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__, kernels
from . import dists, scaling
from .models import MODEL_IDS, QueueParams, simulate_model3, simulate_model5, SIMULATORS
from .rng import RngStream

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DIST_KINDS = ("ml", "ge", "mml", "min-prob", "model2-interarrival", "model-service", "model3-interarrival",
              "comparison", "last-jump", "restless-service")


class UsageError(Exception):
    pass


def _positive_float(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {s!r}")
    return v


def _unit_scale(s):
    v = _positive_float(s)
    if v > 1:
        raise argparse.ArgumentTypeError("tolerance scale must lie in (0, 1]")
    return v


def _bool(s):
    v = str(s).strip().lower()
    if v not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
        raise argparse.ArgumentTypeError(f"expected a boolean: {s!r}")
    return v in ("true", "yes", "1", "on")


def _int_list(s):
    try:
        out = tuple(int(float(x)) for x in str(s).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers: {s!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(s):
    try:
        out = tuple(float(x) for x in str(s).replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers: {s!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


# dest -> converter for config-file values
CONVERTERS = {
    "model": str, "alpha": float, "beta": float, "lam": float, "mu": float, "horizon": float,
    "n_ladder": _int_list, "delta": float, "seed": int, "jobs": int, "out": str, "format": str,
    "method": str, "kind": str, "t_max": float, "points": int, "h": float, "n": int, "k": int,
    "gap": float, "tol": float, "k_max": int, "replications": int, "limit_draws": int,
    "threshold": float, "eval_times": _float_list, "chain": str, "p": float, "time_rule": str,
    "tolerance_scale": _unit_scale, "with_empty_path": _bool,
}
CHOICES = {"model": MODEL_IDS, "format": ("csv", "json", "both"), "kind": DIST_KINDS,
           "method": ("reflectedCTRW", "semiMarkov"), "chain": ("r", "q", "q_bar", "all")}


def _common(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODEL_IDS, default="MM1")
    g.add_argument("--alpha", type=float, default=1.0)
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--horizon", type=_positive_float, default=100.0)
    p.add_argument("--n-ladder", type=_int_list, default=(100, 1000, 10000))
    p.add_argument("--delta", type=_positive_float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--config", default=None, help="INI file with a [run] section; overrides flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="mlqueue", description="Mittag-Leffler queue simulation and checks")
    parser.add_argument("--version", action="version", version=f"mlqueue {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one queue trace")
    _common(p)
    p.add_argument("--method", choices=CHOICES["method"], default="reflectedCTRW", help="M3 construction")

    p = sub.add_parser("dist", help="tabulate a distribution on a grid")
    _common(p)
    p.add_argument("--kind", choices=DIST_KINDS, default="mml")
    p.add_argument("--t-max", type=_positive_float, default=5.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--h", type=_positive_float, default=0.01, help="convolution grid step")
    p.add_argument("--n", type=int, default=1, help="queue size for model2-interarrival")
    p.add_argument("--k", type=int, default=1, help="order of the generalized Erlang law")
    p.add_argument("--with-empty-path", action="store_true",
                   help="model2-interarrival: add the term for n departures in a row (values at t=0 become 1)")
    p.add_argument("--gap", type=float, default=1.0, help="idle gap T for last-jump and restless-service")
    p.add_argument("--tol", type=_positive_float, default=1e-10, help="series truncation tolerance")
    p.add_argument("--k-max", type=int, default=400, help="largest convolution order allowed")

    p = sub.add_parser("scaling", help="run a scaling experiment")
    _common(p)
    p.add_argument("--replications", type=int, default=2000)
    p.add_argument("--limit-draws", type=int, default=20000)
    p.add_argument("--threshold", type=_positive_float, default=scaling.KS_THRESHOLD)
    p.add_argument("--eval-times", type=_float_list, default=scaling.EVAL_TIMES)
    p.add_argument("--time-rule", default="auto")

    p = sub.add_parser("regime", help="classify the regime and print the scaling constants")
    _common(p)

    p = sub.add_parser("chains", help="embedded Markov chain checks")
    _common(p)
    p.add_argument("--chain", choices=CHOICES["chain"], default="all")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--replications", type=int, default=10000)

    p = sub.add_parser("selftest", help="fast acceptance subset")
    _common(p)
    p.add_argument("--list", action="store_true", help="list the checks without running them")
    p.add_argument("--tolerance-scale", type=_unit_scale, default=1.0,
                   help="multiply every tolerance by this factor in (0, 1]")
    return parser


def apply_config(args, path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise UsageError(f"cannot read config {path}: {e}")
    if "run" not in cp:
        raise UsageError("config needs a [run] section")
    for key, raw in cp["run"].items():
        dest = "lam" if key == "lambda" else key.replace("-", "_")
        if dest not in CONVERTERS or not hasattr(args, dest):
            raise UsageError(f"config key {key!r} does not apply to '{args.command}'")
        try:
            val = CONVERTERS[dest](raw.strip())
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise UsageError(f"config key {key!r}: {e}")
        if dest in CHOICES and val not in CHOICES[dest]:
            raise UsageError(f"config key {key!r} must be one of {', '.join(CHOICES[dest])}")
        setattr(args, dest, val)
    return args


def provenance(args, **extra):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("config", "out", "jobs", "list")}
    out = {
        "package": "mlqueue", "version": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
        "python": platform.python_version(), "kernel_backend": kernels.BACKEND, "config": cfg,
    }
    out.update(extra)
    return scaling._jsonable(out)


def _params(args):
    try:
        return QueueParams(args.alpha, args.beta, args.lam, args.mu, args.model)
    except ValueError as e:
        raise UsageError(str(e))


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump(obj):
    return json.dumps(scaling._jsonable(obj), indent=1, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(args):
    params = _params(args)
    rng = RngStream(args.seed)
    if params.model_id == "M3":
        trace = simulate_model3(params.alpha, params.beta, params.lambda_rate, params.mu_rate, args.horizon, rng,
                                method=args.method)
    elif params.model_id == "M5":
        trace, _ = simulate_model5(params.alpha, params.beta, params.lambda_rate, params.mu_rate, args.horizon, rng,
                                   internals=False)
    else:
        trace = SIMULATORS[params.model_id](params, args.horizon, rng)
    stem = os.path.join(args.out, "trace")
    trace.to_files(stem, provenance(args))
    q = trace.q_path
    print(f"{params.model_id}: horizon {args.horizon:g}, {trace.arrivals.size} arrivals, "
          f"{trace.departures.size} departures, final queue {int(q(args.horizon))}, max queue {int(np.max(q.all_values))}, "
          f"tied epochs {trace.ties}")
    if params.model_id != "MM1" and params.alpha == 1.0 and params.beta == 1.0:
        if params.model_id == "M2":
            print("alpha = beta = 1: the fast renewal queue is not a classical M/M/1 queue "
                  "(its inter-arrival law differs from Exp(lambda))")
        else:
            print(f"alpha = beta = 1: reduces to the classical M/M/1 queue with lambda = {params.lambda_rate:g}, "
                  f"mu = {params.mu_rate:g}")
    print(f"wrote {stem}.csv and {stem}.json")
    return EXIT_OK


def _grid(args):
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    return np.linspace(0.0, args.t_max, args.points)


def _table(args, k_needed, t_max):
    if k_needed > args.k_max:
        raise ArithmeticError(f"the truncation tolerance {args.tol:g} needs {k_needed} convolution orders, "
                              f"more than --k-max {args.k_max}; loosen --tol or raise --k-max")
    return dists.build_convolutions(args.alpha, args.beta, args.lam, args.mu, (t_max, args.h), k_needed)


def _terms(p, tol):
    return 1 if p == 0 else max(1, int(math.ceil(math.log(tol) / math.log(p))))


def cmd_dist(args):
    from .specfun import MLLaw, ge_survival, ml_survival
    kind = args.kind
    a, b, lam, mu = args.alpha, args.beta, args.lam, args.mu
    for name, v in (("alpha", a), ("beta", b)):
        if not 0 < v <= 1:
            raise UsageError(f"{name} must lie in (0, 1], got {v}")
    if not (lam > 0 and mu > 0):
        raise UsageError("rates must be positive")
    meta = {"kind": kind}
    if kind == "min-prob":
        p = dists.min_prob(a, b, lam, mu)
        meta.update(value=p, quadrature_tolerance=dists.QUAD_TOL)
        print(f"P(X < Y) = {p:.12g}")
        _write(os.path.join(args.out, "min_prob.json"), _dump({"provenance": provenance(args), **meta}))
        return EXIT_OK
    grid = _grid(args)
    if kind == "ml":
        surv = ml_survival(MLLaw(a, lam), grid)
    elif kind == "ge":
        surv = ge_survival(MLLaw(a, lam), args.k, grid)
        meta["k"] = args.k
    elif kind == "mml":
        surv = dists.mml_survival(a, b, lam, mu, grid)
    elif kind in ("model2-interarrival", "model-service", "model3-interarrival", "comparison"):
        p = dists.min_prob(a, b, lam, mu)
        meta["p"] = p
        if kind == "model2-interarrival":
            if args.n < 1:
                raise UsageError("--n must be at least 1")
            table = _table(args, args.n + 1, args.t_max)
            surv = dists.model2_interarrival_survival(table, p, args.n, grid, args.with_empty_path)
            meta.update(n=args.n, with_empty_path=args.with_empty_path,
                        weight_sum=1.0 if args.with_empty_path else 1 - (1 - p) ** (args.n + 1))
        elif kind == "comparison":
            k = _terms(max(p, 1 - p), args.tol) + 1
            table = _table(args, k, args.t_max)
            res = dists.comparison_inequality(a, b, lam, mu, grid, table, args.tol)
            meta.update(verdict_p_at_least_half=res["verdict"], consistent=res["consistent"],
                        refinement_error=table.error_estimate, truncation_tolerance=args.tol)
            print(f"p = {p:.10g}; comparison holds: {res['verdict']}; consistent with p >= 1/2: {res['consistent']}")
            buf = io.StringIO()
            buf.write("# " + json.dumps(scaling._jsonable({"provenance": provenance(args), **meta}), sort_keys=True) + "\n")
            buf.write("t,lhs,rhs,label\n")
            for t, l, r, lab in zip(grid.tolist(), res["lhs"].tolist(), res["rhs"].tolist(), res["labels"]):
                buf.write(f"{t!r},{l!r},{r!r},{lab}\n")
            _write(os.path.join(args.out, "comparison.csv"), buf.getvalue())
            return EXIT_OK if res["consistent"] else EXIT_FAIL
        else:
            q = p if kind == "model-service" else 1 - p
            table = _table(args, _terms(q, args.tol), args.t_max)
            f = dists.model_service_survival if kind == "model-service" else dists.model3_interarrival_survival
            surv = f(table, p, grid, args.tol)
            meta.update(truncation_tolerance=args.tol, terms=_terms(q, args.tol))
        meta.update(refinement_error=table.error_estimate, h=args.h)
    elif kind == "last-jump":
        T = args.gap
        grid = np.linspace(0.0, T, args.points)
        surv = dists.last_jump_cdf(b, mu, T, grid)
        meta.update(T=T, column="cdf", tail_tolerance=dists.LJ_TAIL_TOL)
    else:
        surv = dists.restless_service_survival(b, mu, args.gap, grid)
        meta.update(T=args.gap, tail_tolerance=dists.LJ_TAIL_TOL)
    meta["provenance"] = provenance(args)
    curve = dists.SurvivalCurve(grid, np.asarray(surv, dtype=float), scaling._jsonable(meta))
    path = os.path.join(args.out, f"{kind}.csv")
    _write(path, curve.to_csv())
    print(f"{kind}: {grid.size} points on [0, {grid[-1]:g}], first value {float(curve.survival[0]):.10g}; wrote {path}")
    return EXIT_OK


def _experiment(args):
    params = _params(args)
    try:
        return scaling.ScalingExperiment(
            params.model_id, params, args.n_ladder, delta=args.delta, time_rule=args.time_rule,
            eval_times=args.eval_times, replications=args.replications, seed=args.seed,
            limit_draws=args.limit_draws, threshold=args.threshold, jobs=max(1, args.jobs))
    except ValueError as e:
        raise UsageError(str(e))


def cmd_scaling(args):
    exp = _experiment(args)
    report = scaling.run_experiment(exp)
    doc = {"provenance": provenance(args, delta=exp.delta), "report": json.loads(report.to_json())}
    if args.format in ("json", "both"):
        _write(os.path.join(args.out, "scaling.json"), _dump(doc))
    if args.format in ("csv", "both"):
        _write(os.path.join(args.out, "scaling.csv"),
               "# " + json.dumps(doc["provenance"], sort_keys=True) + "\n" + scaling.report_csv(report))
    print(f"{exp.model_id} {report.regime} (rdp {report.rdp_value:.6g} vs {report.critical_value:g}), "
          f"delta {exp.delta:g}: {'PASS' if report.passed else 'FAIL'}")
    for e in report.evidence:
        print(f"  n={e['n']:<8d} t={e['t']:<4g} {e['metric']}={e['ks']:.4f}  sup median {e['sup_median']:.4f}  "
              f"p95 {e['sup_p95']:.4f}")
    for note in report.notes:
        print(f"  note: {note}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_regime(args):
    params = _params(args)
    rdp, cv, label = scaling.regime_of(params)
    delta = args.delta if args.delta is not None else scaling.default_delta(params, label)
    doc = {"model": params.model_id, "rdp": rdp, "critical_value": cv, "regime": label, "delta": delta,
           "time_scale": {str(n): scaling.time_scale(params, n) for n in args.n_ladder}}
    if params.model_id in ("M2", "M3"):
        doc["kappa"] = scaling.kappa(params.alpha, params.beta, params.lambda_rate, params.mu_rate)
        doc["m_n"] = {str(n): scaling.compute_mn(params.alpha, params.beta, params.lambda_rate, params.mu_rate, n)
                      for n in args.n_ladder}
    print(f"{params.model_id}: {label} (rdp {rdp:.8g}, critical value {cv:g}), delta {delta:g}")
    for n, f in doc["time_scale"].items():
        print(f"  n={n}: time factor {f:.6g}")
    if args.format in ("json", "both"):
        _write(os.path.join(args.out, "regime.json"), _dump({"provenance": provenance(args), **doc}))
    return EXIT_OK


def cmd_chains(args):
    if not 0 < args.p < 1:
        raise UsageError("--p must lie in (0, 1)")
    chains = ("r", "q", "q_bar") if args.chain == "all" else (args.chain,)
    reports = [scaling.embedded_chain_harness(c, args.p, args.n_ladder, args.delta, args.replications, args.seed)
               for c in chains]
    for r in reports:
        print(f"chain {r['chain']} p={r['p']:g} {r['kind']}: {'PASS' if r['passed'] else 'FAIL'}")
        for row in r["rows"]:
            print("  " + "  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    if args.format in ("json", "both"):
        _write(os.path.join(args.out, "chains.json"), _dump({"provenance": provenance(args), "reports": reports}))
    return EXIT_OK if all(r["passed"] for r in reports) else EXIT_FAIL


def cmd_selftest(args):
    from . import checks
    if args.list:
        for name, doc, _ in checks.FAST_CHECKS:
            print(f"{name:<22s} {doc}")
        return EXIT_OK
    rows, ok = [], True
    for name, doc, fn in checks.FAST_CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = fn(args.seed, args.tolerance_scale)
        except Exception as e:  # a crash is a failed check, reported in the table
            passed, detail = False, f"{type(e).__name__}: {e}"
        rows.append((name, passed, detail, time.perf_counter() - t0))
        ok &= passed
    for name, passed, detail, dt in rows:
        print(f"{name:<22s} {'PASS' if passed else 'FAIL'}  {detail}  ({dt:.1f}s)")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "dist": cmd_dist, "scaling": cmd_scaling, "regime": cmd_regime,
            "chains": cmd_chains, "selftest": cmd_selftest}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            apply_config(args, args.config)
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if args.command != "selftest" or not args.list:
            os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"mlqueue {args.command}: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, ValueError) as e:
        print(f"mlqueue {args.command}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
