"""Command-line front end. Every subcommand writes one CSV table.

Columns per subcommand:
  kappa     s, regime, kappa, exponent, log_power
  series    s, m, m_prime, r, method, value, truncation, tail_bound
  expect    s, R, expectation, predicted_leading, ratio
  simulate  seed, s, R, l_max, n_critical, n_saddle, n_extremum, wall_time
  farfield  n, phi_star, r_pred, r_found, distance
  spectrum  seed, s, N, block_energy
  fcrit     seed, s, n_f_crit, min_abs_f
  bench     s, r, direct_time, asymptotic_time, direct_value, asymptotic_value,
            rel_error, recommended, crossover_r
  selftest  check, passed, detail

Exit status: 0 on success, 1 on invalid input, 2 when an internal
consistency check fails. Randomness is fixed by --seed (default 0).
"""
import argparse
import csv
import io
import math
import os
import statistics
import sys
import time

import numpy as np

from . import kac_rice as kr
from .bessel import addition_sums
from .density import DensityRealization, count_density_critical_points, dyadic_profile
from .quadrature import periodic_trapezoid
from .rng import sample_seed
from .series import RegularityModel, SeriesSpec, series_asymptotic, series_direct
from .wave import (find_critical_points, match_far_field, min_l_max, sample_wave,
                   simulate_counts)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


# --- subcommands ----------------------------------------------------------

def cmd_kappa(args, errors):
    if errors:
        return None
    rows = []
    for s in args.s:
        k = kr.kappa_constant(s)
        rows.append((k.s, k.regime, k.kappa, k.exponent, k.log_power))
    return _table(["s", "regime", "kappa", "exponent", "log_power"], rows)


def cmd_series(args, errors):
    if any(r <= 0 for r in args.r):
        errors.append("series: every r must be positive")
    if args.m < 0 or args.mprime < 0:
        errors.append("series: m and mprime must be non-negative")
    if args.method in ("asymptotic", "both") and any(r < 10 for r in args.r):
        errors.append("series: asymptotic evaluation needs r >= 10")
    if args.tol <= 0:
        errors.append("series: tol must be positive")
    if errors:
        return None
    methods = ["direct", "asymptotic"] if args.method == "both" else [args.method]
    rows = []
    for s in args.s:
        spec = SeriesSpec(RegularityModel(s), args.m, args.mprime)
        for r in args.r:
            for method in methods:
                if method == "direct":
                    v = series_direct(spec, r, args.tol)
                else:
                    v = series_asymptotic(spec, r)
                rows.append((s, args.m, args.mprime, r, method, v.value, v.truncation, v.tail_bound))
    return _table(["s", "m", "m_prime", "r", "method", "value", "truncation", "tail_bound"], rows)


def cmd_expect(args, errors):
    if not args.r_min > 0:
        errors.append("expect: r-min must be positive")
    if any(R <= args.r_min for R in args.R):
        errors.append("expect: every R must exceed r-min")
    if errors:
        return None
    rows = []
    for s in args.s:
        for R in args.R:
            e = kr.expected_critical_points(s, R, r_min=args.r_min)
            pred = kr.predicted_leading(s, R)
            rows.append((s, R, e, pred, e / pred))
    return _table(["s", "R", "expectation", "predicted_leading", "ratio"], rows)


def cmd_simulate(args, errors):
    if not args.R > 0.5:
        errors.append("simulate: R must exceed 0.5")
    if args.samples < 1:
        errors.append("simulate: samples must be at least 1")
    if args.grid_density < 4:
        errors.append("simulate: grid-density must be at least 4")
    if args.l_max is not None and args.R > 0 and args.l_max < min_l_max(args.R):
        errors.append(f"simulate: l-max must be at least ceil(1.5 R) + 32 = {min_l_max(args.R)}")
    if errors:
        return None
    recs = simulate_counts(args.s, args.R, args.samples, args.seed, args.l_max,
                           workers=_threads(args), grid_density=args.grid_density)
    rows = [(r.seed, r.s, r.R, r.l_max, r.n_critical, r.n_saddle, r.n_extremum, r.wall_time)
            for r in recs]
    return _table(["seed", "s", "R", "l_max", "n_critical", "n_saddle", "n_extremum",
                   "wall_time"], rows)


def cmd_farfield(args, errors):
    if not args.s > 5:
        errors.append("farfield: s must exceed 5")
    if not 0 < args.r_cut < args.R:
        errors.append("farfield: need 0 < r-cut < R")
    if errors:
        return None
    smp = sample_wave(args.s, sample_seed(args.seed, 0), min_l_max(args.R))
    pts = find_critical_points(smp, args.R)
    rows = match_far_field(smp, pts, args.r_cut)
    return _table(["n", "phi_star", "r_pred", "r_found", "distance"], rows)


def cmd_spectrum(args, errors):
    if args.blocks < 5:
        errors.append("spectrum: blocks must be at least 5")
    l_max = args.l_max or 2 ** args.blocks
    if l_max < 2 ** args.blocks:
        errors.append("spectrum: l-max must be at least 2^blocks")
    if args.samples < 1:
        errors.append("spectrum: samples must be at least 1")
    if errors:
        return None
    rows = []
    for i in range(args.samples):
        seed = sample_seed(args.seed, i)
        d = DensityRealization.from_sample(sample_wave(args.s, seed, l_max))
        for N, e in dyadic_profile(d, args.blocks).blocks:
            rows.append((seed, args.s, N, e))
    return _table(["seed", "s", "N", "block_energy"], rows)


def cmd_fcrit(args, errors):
    if args.l_max < 8:
        errors.append("fcrit: l-max must be at least 8")
    if args.samples < 1:
        errors.append("fcrit: samples must be at least 1")
    if errors:
        return None
    rows = []
    for i in range(args.samples):
        seed = sample_seed(args.seed, i)
        d = DensityRealization.from_sample(sample_wave(args.s, seed, args.l_max))
        res = count_density_critical_points(d)
        rows.append((seed, args.s, res.count, res.min_abs_f))
    return _table(["seed", "s", "n_f_crit", "min_abs_f"], rows)


def _median_time(fn, reps):
    times, val = [], None
    for _ in range(reps):
        t0 = time.perf_counter()
        val = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), val


def bench_rows(s_values, r_values, reps):
    rows = []
    for s in s_values:
        spec = SeriesSpec(RegularityModel(s))
        cells = []
        for r in sorted(r_values):
            td, vd = _median_time(lambda: series_direct(spec, r).value, reps)
            ta, va = _median_time(lambda: series_asymptotic(spec, r).value, reps)
            rel = abs(va - vd) / abs(vd) if vd else math.inf
            rec = "asymptotic" if (rel < 0.01 and ta < td) else "direct"
            cells.append([s, r, td, ta, vd, va, rel, rec])
        # smallest r from which the asymptotic formula is recommended throughout
        cross = None
        for cell in reversed(cells):
            if cell[7] != "asymptotic":
                break
            cross = cell[1]
        rows.extend(c + [cross] for c in cells)
    return rows


def cmd_bench(args, errors):
    if args.reps < 5:
        errors.append("bench: reps must be at least 5")
    if any(r < 10 for r in args.r):
        errors.append("bench: every r must be at least 10")
    if errors:
        return None
    return _table(["s", "r", "direct_time", "asymptotic_time", "direct_value",
                   "asymptotic_value", "rel_error", "recommended", "crossover_r"],
                  bench_rows(args.s, args.r, args.reps))


def selftest_rows(seed=0):
    rows = []
    for r in (0.5, 7.0, 63.0, 250.0):
        got, exact = addition_sums(r)
        worst = max(abs(got[k] - exact[k]) / abs(exact[k]) for k in got)
        rows.append((f"addition_sums r={r}", worst < 1e-9, f"max rel err {worst:.2e}"))
    for b in (0.0, 0.3, -0.3, 0.9, -0.9):
        q = periodic_trapezoid(lambda x: 1.0 / (1.0 + b * np.sin(2 * x)), math.pi)
        err = abs(q - math.pi / math.sqrt(1 - b * b))
        rows.append((f"periodic_identity b={b}", err < 1e-10, f"abs err {err:.2e}"))
    for A, B, C in ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (1.0, -1.0, math.sqrt(2)),
                    (0.7, 2.1, -1.3), (-3.0, 0.4, 2.2)):
        c = kr.AbsQuadraticCoeffs(A, B, C)
        red = kr.abs_gaussian_integral(c)
        mc, se = kr.abs_gaussian_montecarlo(c, 200_000, seed)
        ok = abs(red - mc) <= 4 * se + 1e-12
        rows.append((f"reduction_vs_mc {A},{B},{C}", ok, f"{red:.6f} vs {mc:.6f} +- {se:.1e}"))
    k0 = kr.kappa_constant(0.0).kappa
    rows.append(("kappa_at_zero", abs(k0 - 1 / (2 * math.sqrt(3))) < 1e-6, repr(k0)))
    return rows


def cmd_selftest(args, errors):
    if errors:
        return None
    rows = selftest_rows(args.seed)
    args._selftest_failed = not all(r[1] for r in rows)
    return _table(["check", "passed", "detail"], rows)


COMMANDS = {
    "kappa": cmd_kappa, "series": cmd_series, "expect": cmd_expect,
    "simulate": cmd_simulate, "farfield": cmd_farfield, "spectrum": cmd_spectrum,
    "fcrit": cmd_fcrit, "bench": cmd_bench, "selftest": cmd_selftest,
}


def build_parser():
    p = _Parser(prog="critwave", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the CSV here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $THREADS or all cores)")
    common.add_argument("--config", help="file of 'key = value' lines; flags take precedence")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    q = add("kappa", "leading constant and exponent of the expected count")
    q.add_argument("--s", type=float, nargs="+", default=[0.0])

    q = add("series", "weighted Neumann series, direct and/or asymptotic")
    q.add_argument("--s", type=float, nargs="+", default=[0.0])
    q.add_argument("--m", type=int, default=0)
    q.add_argument("--mprime", type=int, default=0)
    q.add_argument("--r", type=float, nargs="+", default=[50.0])
    q.add_argument("--method", choices=["direct", "asymptotic", "both"], default="direct")
    q.add_argument("--tol", type=float, default=1e-15)

    q = add("expect", "Kac-Rice expected number of critical points")
    q.add_argument("--s", type=float, nargs="+", default=[0.0])
    q.add_argument("--R", type=float, nargs="+", default=[100.0])
    q.add_argument("--r-min", type=float, default=math.pi)

    q = add("simulate", "Monte-Carlo critical point counts")
    q.add_argument("--s", type=float, default=0.0)
    q.add_argument("--R", type=float, default=20.0)
    q.add_argument("--samples", type=int, default=10)
    q.add_argument("--l-max", type=int, default=None)
    q.add_argument("--grid-density", type=float, default=8.0)

    q = add("farfield", "match far-field predictions to critical points")
    q.add_argument("--s", type=float, default=6.0)
    q.add_argument("--R", type=float, default=80.0)
    q.add_argument("--r-cut", type=float, default=40.0)

    q = add("spectrum", "dyadic block energies of the density")
    q.add_argument("--s", type=float, default=1.0)
    q.add_argument("--samples", type=int, default=10)
    q.add_argument("--blocks", type=int, default=10)
    q.add_argument("--l-max", type=int, default=None)

    q = add("fcrit", "critical points of the density modulus")
    q.add_argument("--s", type=float, default=6.0)
    q.add_argument("--samples", type=int, default=10)
    q.add_argument("--l-max", type=int, default=256)

    q = add("bench", "time direct against asymptotic series evaluation")
    q.add_argument("--s", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    q.add_argument("--r", type=float, nargs="+", default=[10.0, 30.0, 100.0, 300.0, 1000.0])
    q.add_argument("--reps", type=int, default=5)

    add("selftest", "exact-identity checks")
    return p


def read_config(path):
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _apply_config(subparser, config):
    """Turn config entries into parser defaults, converted like flags would be."""
    defaults = {}
    actions = {a.dest: a for a in subparser._actions}
    for key, raw in config.items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        conv = act.type or str
        try:
            if act.nargs in ("+", "*"):
                defaults[key] = [conv(v) for v in raw.replace(",", " ").split()]
            else:
                defaults[key] = conv(raw)
        except ValueError:
            raise UsageError(f"config key {key!r}: cannot parse {raw!r}")
        if act.choices and defaults[key] not in act.choices:
            raise UsageError(f"config key {key!r}: {raw!r} not in {sorted(act.choices)}")
    subparser.set_defaults(**defaults)


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if not argv or argv[0] not in COMMANDS:
            if argv and argv[0] in ("-h", "--help"):
                parser.print_help()
                return 0
            raise UsageError(parser.format_usage().strip() + "\nunknown or missing subcommand")
        pre = _Parser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv[1:])
        if known.config:
            sub = parser._subparsers._group_actions[0].choices[argv[0]]
            _apply_config(sub, read_config(known.config))
        args = parser.parse_args(argv)
        errors = []
        if args.threads is not None and args.threads < 1:
            errors.append("threads must be at least 1")
        text = COMMANDS[args.command](args, errors)
        if errors:
            raise UsageError("\n".join(errors))
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (kr.CovarianceError, ArithmeticError) as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 2 if getattr(args, "_selftest_failed", False) else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
