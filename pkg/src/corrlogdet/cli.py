"""Command line interface.

Every subcommand prints a JSON document on stdout. Exit status: 0 on
success, 2 when a statistical check fails its threshold, 1 on usage or
numerical errors.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import _rng
from .corrmat import read_csv
from .heavytail import GaussianLaw, TailLaw, standardize
from .moments import MomentIndex, estimate_mixed_moment, gaussian_moment_exact, moment_rate_limit, moment_scaling
from .normalization import DEFAULT_W, clt_constants, standardize_logdet
from .projections import epsilon_grid, projection_matrix, resolvent_traces, stieltjes_formula, verify_q_bounds
from .simharness import (
    SimConfig,
    export_results,
    gaussian_beta_oracle,
    independence_test,
    ks_statistic,
    ks_two_sample,
    replacement_experiment,
    run_clt_experiment,
    simulate_logdets,
)
from .truncation import apply_truncation, exceedance_profile, plan_truncation

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STAT_FAIL = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 so that 2 stays reserved for failed statistical checks
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _parse_sv(text):
    kind, _, value = text.partition(":")
    kind = kind.strip().lower()
    if kind not in ("constant", "logpower") or not value:
        raise argparse.ArgumentTypeError("--sv must look like constant:C or logpower:GAMMA")
    return kind, float(value)


def _float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _add_law_args(sp, gaussian_flag=True):
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--alpha", type=float, help="tail index of the magnitude")
    if gaussian_flag:
        grp.add_argument("--gaussian", action="store_true", help="standard normal entries")
    sp.add_argument("--sv", type=_parse_sv, default=("constant", 1.0), help="constant:C or logpower:GAMMA")
    sp.add_argument("--x0", type=float, default=1.0)
    sp.add_argument("--skew", type=float, default=0.5, help="probability of the + sign")


def _law_from_args(args):
    if getattr(args, "gaussian", False) or args.alpha is None:
        return GaussianLaw()
    kind, param = args.sv
    return standardize(TailLaw(alpha=args.alpha, sv_kind=kind, sv_param=param, x0=args.x0, skew=args.skew))


def _emit(obj):
    json.dump(obj, sys.stdout, indent=1, default=float)
    sys.stdout.write("\n")


def cmd_simulate(args):
    cfg = SimConfig(
        p=args.p,
        n=args.n,
        law=_law_from_args(args),
        reps=args.reps,
        seed=args.seed,
        regime=None if args.regime == "auto" else args.regime,
        w=args.w,
        method=args.method,
        workers=args.workers,
    )
    res = run_clt_experiment(cfg)
    if args.out:
        export_results(res, args.out, args.format)
    summary = {k: v for k, v in res.to_dict().items() if k != "z"}
    alt = _overlap_alternative(cfg, res.logdet)
    if alt is not None:
        summary["overlap_alternative"] = alt
    _emit(summary)
    if args.ks_max is not None and not res.ks <= args.ks_max:
        return EXIT_STAT_FAIL
    return EXIT_OK


def _overlap_consts(p, n, w, chosen):
    """General-regime constants when the near-singular regime was chosen and both apply."""
    if chosen.kind != "near_singular":
        return None
    try:
        return clt_constants(p, n, "general", w)
    except ValueError:
        return None


def _overlap_alternative(cfg, logdets):
    if cfg.regime is not None:
        return None
    alt = _overlap_consts(cfg.p, cfg.n, cfg.w, cfg.constants().regime)
    if alt is None:
        return None
    z = np.atleast_1d(standardize_logdet(logdets, alt))
    out = {"consts": alt.to_json(), "mean": float(z.mean())}
    if z.size >= 2:
        out.update(var=float(z.var(ddof=1)), ks=ks_statistic(z).D)
    return out


def cmd_oracle_compare(args):
    law = GaussianLaw()
    matrix, _ = simulate_logdets(law, args.p, args.n, args.reps, args.seed, workers=args.workers)
    oracle = gaussian_beta_oracle(args.p, args.n, args.reps, args.seed)
    ks = ks_two_sample(matrix, oracle)
    out = {
        "p": args.p,
        "n": args.n,
        "reps": args.reps,
        "ks": ks.D,
        "ks_pvalue": ks.pvalue,
        "matrix_mean": float(matrix.mean()),
        "oracle_mean": float(oracle.mean()),
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({**out, "matrix": matrix.tolist(), "oracle": oracle.tolist()}, fh)
    _emit(out)
    return EXIT_STAT_FAIL if ks.D > args.ks_max else EXIT_OK


def cmd_replace_exp(args):
    cfg = SimConfig(p=args.p, n=args.n, law=_law_from_args(args), reps=args.reps, seed=args.seed)
    res = replacement_experiment(cfg, s1_override=args.s1)
    _emit(res.to_json())
    return EXIT_OK


def cmd_test(args):
    X = read_csv(args.input, header=args.header)
    if args.transpose:
        X = X.T
    res = independence_test(X, level=args.level, w=args.w, normalization=args.normalization)
    out = {"p": X.shape[0], "n": X.shape[1], **res.to_json()}
    if args.normalization == "asymptotic":
        alt = _overlap_consts(X.shape[0], X.shape[1], args.w, res.consts.regime)
        if alt is not None:
            out["overlap_alternative"] = {"consts": alt.to_json(), "z": standardize_logdet(res.logdet, alt)}
    _emit(out)
    return EXIT_OK


def cmd_verify_bounds(args):
    if not 0 <= args.i < args.n:
        raise _UsageError("need 0 <= i < n")
    reports = []
    for k in range(args.instances):
        gen = _rng.stream(args.seed, k)
        X = gen.standard_normal((max(args.i, 1), args.n))
        reports.append(verify_q_bounds(projection_matrix(X, args.i)))
    worst = {name: max(r.ratios[name] for r in reports) for name in reports[0].ratios}
    ok = all(r.all_ok for r in reports)
    passed = sum(r.all_ok for r in reports)
    _emit({"n": args.n, "i": args.i, "instances": args.instances, "passed": passed,
           "failed": len(reports) - passed, "all_ok": ok, "max_ratio": worst})
    return EXIT_OK if ok else EXIT_STAT_FAIL


def cmd_resolvent_check(args):
    eps = args.eps_grid or epsilon_grid(args.n)
    law = _law_from_args(args)
    traces = np.empty((args.reps, len(eps)))
    for r in range(args.reps):
        X = law.matrix(_rng.stream(args.seed, r), (args.p, args.n))
        traces[r] = [pr.trace_mean for pr in resolvent_traces(X, eps)]
    rows = []
    worst = 0.0
    for j, e in enumerate(eps):
        theo = stieltjes_formula(args.p, args.n, e)
        emp = float(traces[:, j].mean())
        rel = abs(emp - theo) / theo
        worst = max(worst, rel)
        rows.append({"epsilon": e, "empirical": emp, "formula": theo, "rel_error": rel})
    _emit({"p": args.p, "n": args.n, "reps": args.reps, "checks": rows, "max_rel_error": worst})
    return EXIT_STAT_FAIL if worst > args.tol else EXIT_OK


def cmd_moments_check(args):
    idx = MomentIndex.parse(args.index)
    law = _law_from_args(args)
    est = estimate_mixed_moment(law, args.n, idx, args.reps, args.seed, workers=args.workers)
    if isinstance(law, GaussianLaw):
        theo = gaussian_moment_exact(args.n, idx)
        scaled = est.value
        scaled_se = est.se
    else:
        theo = moment_rate_limit(law.alpha, idx)
        factor = moment_scaling(law.alpha, idx, args.n, law.tail_slowly_varying(math.sqrt(args.n)))
        scaled = est.value * factor
        scaled_se = est.se * factor
    ratio = scaled / theo if theo != 0 else math.nan
    _emit(
        {
            "estimate": est.value,
            "se": est.se,
            "scaled": scaled,
            "scaled_se": scaled_se,
            "theoretical_limit": theo,
            "ratio": ratio,
            "samples": est.samples,
            "chunk_rows": est.chunk_rows,
        }
    )
    if args.tol is not None and not abs(ratio - 1.0) <= args.tol:
        return EXIT_STAT_FAIL
    return EXIT_OK


def cmd_truncate_stats(args):
    plan = plan_truncation(args.p, args.n, a=args.a, c_frak=args.c_frak, mode=args.mode)
    if args.alpha is None:
        raise _UsageError("truncate-stats needs --alpha")
    law = _law_from_args(args)
    changed = []
    events = 0
    for r in range(args.reps):
        X = law.matrix(_rng.stream(args.seed, r), (args.p, args.n))
        changed.append(apply_truncation(X, plan).changed)
        events += exceedance_profile(X, args.c_alpha, args.eps_alpha, law.alpha).event
    frac = np.array(changed) / (args.p * args.n)
    _emit(
        {
            "plan": plan.to_json(),
            "reps": args.reps,
            "changed_fraction_distribution": {
                "mean": float(frac.mean()),
                "max": float(frac.max()),
                "quantiles": {f"{q:g}": float(np.quantile(frac, q)) for q in (0.5, 0.9, 0.99)},
                "fraction_unchanged": float(np.mean(frac == 0)),
            },
            "bn_flag_rate": events / args.reps,
        }
    )
    return EXIT_OK


def build_parser():
    ap = _Parser(prog="corrlogdet", description="log-determinant of sample correlation matrices")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="replicate the standardized log-determinant")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    _add_law_args(sp)
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--regime", choices=["auto", "general", "near", "square"], default="auto")
    sp.add_argument("--w", type=float, default=DEFAULT_W)
    sp.add_argument("--method", choices=["perpendiculars", "cholesky"], default="perpendiculars")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="write full results (plus a .qq.csv file)")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--ks-max", type=float, default=None, help="exit 2 if the KS distance exceeds this")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("oracle-compare", help="matrix route vs exact Beta-product oracle (Gaussian)")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--reps", type=int, default=5000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--ks-max", type=float, default=0.04)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle_compare)

    sp = sub.add_parser("replace-exp", help="swap the last s1 rows for Gaussian rows")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    _add_law_args(sp)
    sp.add_argument("--s1", type=int, default=None)
    sp.add_argument("--reps", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_replace_exp)

    sp = sub.add_parser("test", help="independence test on a CSV data matrix (rows = variables)")
    sp.add_argument("--input", required=True)
    sp.add_argument("--header", action="store_true")
    sp.add_argument("--transpose", action="store_true", help="input has one observation per line")
    sp.add_argument("--level", type=float, default=0.05)
    sp.add_argument("--w", type=float, default=DEFAULT_W)
    sp.add_argument("--normalization", choices=["asymptotic", "gaussian_exact"], default="asymptotic")
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("verify-bounds", help="deterministic bounds on the normalized projection")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--i", type=int, required=True)
    sp.add_argument("--instances", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify_bounds)

    sp = sub.add_parser("resolvent-check", help="mean resolvent trace vs closed form")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    _add_law_args(sp)
    sp.add_argument("--eps-grid", type=_float_list, default=None)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=0.05)
    sp.set_defaults(func=cmd_resolvent_check)

    sp = sub.add_parser("moments-check", help="Monte Carlo mixed moment vs its limit")
    sp.add_argument("--n", type=int, required=True)
    _add_law_args(sp)
    sp.add_argument("--index", default="4")
    sp.add_argument("--reps", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--tol", type=float, default=None, help="exit 2 if |ratio - 1| exceeds this")
    sp.set_defaults(func=cmd_moments_check)

    sp = sub.add_parser("truncate-stats", help="truncation plan and how often it changes the data")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    _add_law_args(sp, gaussian_flag=False)
    sp.add_argument("--a", type=float, default=2.5)
    sp.add_argument("--c-frak", type=float, default=0.125)
    sp.add_argument("--mode", choices=["auto", "global_only", "multilevel"], default="auto")
    sp.add_argument("--c-alpha", type=float, default=1.0 / 3.0)
    sp.add_argument("--eps-alpha", type=float, default=0.05)
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_truncate_stats)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (_UsageError, ValueError, TypeError, OSError, ArithmeticError, RuntimeError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
