"""Command-line front end: sweeps emitted as CSV or JSON for external plotting.

Exit codes: 0 success, 1 usage or validation error, 2 acceptance failure.
Precedence of settings: command-line flags, then ``--config`` file, then defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from .blocking import blocking_probability, bound_ratio, bounds_valid
from .dimensioning import asymptotic_capacity_per_rru, asymptotic_gain, gain, min_capacity
from .dist import ModelParams, log_pmf, pmf_table
from .spatial import (
    DEFAULT_WINDOW_RRUS,
    blocked_fraction,
    cluster_user_counts,
    estimate_blocking_model,
    summarize,
    windows_for_samples,
)

DEFAULT_K = "1,3,5,10,20,50,100"

BLOCKING_COLUMNS = ["K", "T", "t_bar", "p_block", "ln_p_block", "lower", "upper", "tail_bound", "truncation_n"]
BOUNDS_COLUMNS = [
    "K", "T", "t_bar", "p_block", "ln_p_block", "lower", "upper",
    "upper_present", "ratio", "dlnp_dT", "tangent_slope",
]
CAPACITY_COLUMNS = ["p_threshold", "K", "T_min", "t_bar", "gain", "asymptote", "asymptotic_gain"]
SIMULATE_COLUMNS = [
    "K", "T", "t_bar", "method", "mc_mean", "mc_stderr", "samples", "analytic", "z_score", "rel_error",
]
PMF_COLUMNS = ["n", "pmf", "log_pmf", "cdf"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parsing helpers


def _expand(text: str, conv) -> list:
    """Comma list where each item is a value or an inclusive ``start:stop[:step]`` range."""
    out = []
    for item in filter(None, (s.strip() for s in str(text).split(","))):
        if ":" not in item:
            out.append(conv(item))
            continue
        parts = item.split(":")
        if len(parts) not in (2, 3):
            raise UsageError(f"bad range {item!r}; use start:stop[:step]")
        start, stop = conv(parts[0]), conv(parts[1])
        step = conv(parts[2]) if len(parts) == 3 else conv("1")
        if step <= 0 or stop < start:
            raise UsageError(f"bad range {item!r}; need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        out.extend(start + i * step for i in range(count))
    return out


def _int_list(text, name, minimum=0):
    try:
        values = _expand(text, int)
    except ValueError as exc:
        raise UsageError(f"--{name}: {exc}") from None
    if not values:
        raise UsageError(f"--{name} must list at least one value")
    bad = [v for v in values if v < minimum]
    if bad:
        raise UsageError(f"--{name} values must be >= {minimum}, got {bad[0]}")
    return values


def _float_list(text, name):
    try:
        values = _expand(text, float)
    except ValueError as exc:
        raise UsageError(f"--{name}: {exc}") from None
    if not values:
        raise UsageError(f"--{name} must list at least one value")
    return values


def _cells(text):
    cells = []
    for item in filter(None, (s.strip() for s in str(text).split(","))):
        try:
            k, t = (int(x) for x in item.split(":"))
        except ValueError:
            raise UsageError(f"--cells item {item!r} must look like K:T") from None
        if k < 1 or t < 0:
            raise UsageError(f"--cells item {item!r} needs K >= 1 and T >= 0")
        cells.append((k, t))
    if not cells:
        raise UsageError("--cells must list at least one K:T pair")
    return cells


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


# ---------------------------------------------------------------- output


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render(rows, columns, fmt, metadata) -> str:
    if fmt == "json":
        doc = {
            "metadata": metadata,
            "columns": columns,
            "rows": [{c: _json_value(r.get(c)) for c in columns} for r in rows],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(args, rows, columns, extra_meta=None):
    meta = {
        "command": args.command,
        "params": args.params.as_dict(),
        "seed": args.seed,
        "version": __version__,
    }
    meta.update(extra_meta or {})
    text = render(rows, columns, args.format, meta)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_blocking(args):
    ks = _int_list(args.k_values, "k-values", minimum=1)
    tbars = _float_list(args.tbar_values, "tbar-values")
    rows = []
    for K in sorted(set(ks)):
        for tb in tbars:
            if tb < 0:
                raise UsageError(f"--tbar-values must be >= 0, got {tb}")
            T = round(K * tb)
            if abs(T - K * tb) > 1e-9:
                raise UsageError(f"K*t_bar must be an integer; K={K}, t_bar={tb} gives {K * tb}")
            res = blocking_probability(K, T, args.params)
            rows.append({
                "K": K, "T": T, "t_bar": T / K,
                "p_block": res.value, "ln_p_block": res.log_value,
                "lower": res.lower_bound, "upper": res.upper_bound,
                "tail_bound": res.tail_bound, "truncation_n": res.truncation_n,
            })
    emit(args, rows, BLOCKING_COLUMNS)
    return rows


def cmd_bounds(args):
    K = args.k
    if K < 1:
        raise UsageError(f"--k must be >= 1, got {K}")
    ts = sorted(set(_int_list(args.t_values, "t-values", minimum=0)))
    slope = math.log(args.params.lam) if args.params.lam > 0 else -math.inf
    rows = []
    prev = None
    for T in ts:
        res = blocking_probability(K, T, args.params)
        valid = bounds_valid(K, T, args.params)
        ratio = bound_ratio(K, T, args.params) if valid else None
        d = None
        if prev is not None and math.isfinite(res.log_value) and math.isfinite(prev[1]):
            d = (res.log_value - prev[1]) / (T - prev[0])
        rows.append({
            "K": K, "T": T, "t_bar": T / K,
            "p_block": res.value, "ln_p_block": res.log_value,
            "lower": res.lower_bound, "upper": res.upper_bound,
            "upper_present": res.upper_bound is not None,
            "ratio": ratio, "dlnp_dT": d, "tangent_slope": slope,
        })
        prev = (T, res.log_value)
    emit(args, rows, BOUNDS_COLUMNS, {"tangent_slope_per_T": slope, "tangent_slope_per_t_bar": K * slope})
    return rows


def cmd_capacity(args):
    ks = sorted(set(_int_list(args.k_values, "k-values", minimum=1)))
    thresholds = _float_list(args.thresholds, "thresholds")
    rows = []
    for p in sorted(set(thresholds)):
        if not 0 < p < 1:
            raise UsageError(f"--thresholds must lie in (0, 1), got {p}")
        g_inf = asymptotic_gain(p, args.params)
        for K in ks:
            t_min = min_capacity(K, p, args.params)
            rows.append({
                "p_threshold": p, "K": K, "T_min": t_min, "t_bar": t_min / K,
                "gain": gain(K, p, args.params),
                "asymptote": asymptotic_capacity_per_rru(p, args.params),
                "asymptotic_gain": g_inf,
            })
    emit(args, rows, CAPACITY_COLUMNS)
    return rows


def cmd_simulate(args):
    cells = sorted(set(_cells(args.cells)))
    if args.samples < 1:
        raise UsageError(f"--samples must be >= 1, got {args.samples}")
    if args.window_rrus < 1:
        raise UsageError(f"--window-rrus must be >= 1, got {args.window_rrus}")
    params = args.params
    spatial_counts = {}
    if not args.no_spatial:
        for K in sorted({k for k, _ in cells}):
            reps = windows_for_samples(K, args.samples, args.window_rrus)
            spatial_counts[K] = cluster_user_counts(K, params, reps, args.window_rrus, args.seed, args.workers)
    rows = []
    for K, T in cells:
        exact = blocking_probability(K, T, params).value
        estimates = [("model", estimate_blocking_model(K, T, params, args.samples, args.seed))]
        if K in spatial_counts:
            estimates.append(("spatial", summarize(blocked_fraction(spatial_counts[K], T), args.seed)))
        for method, est in estimates:
            rows.append({
                "K": K, "T": T, "t_bar": T / K, "method": method,
                "mc_mean": est.mean, "mc_stderr": est.stderr, "samples": est.replications,
                "analytic": exact, "z_score": est.z_score(exact),
                "rel_error": (est.mean - exact) / exact if exact > 0 else None,
            })
    emit(args, rows, SIMULATE_COLUMNS, {"window_rrus": args.window_rrus, "samples": args.samples})
    return rows


def cmd_pmf(args):
    if args.k < 1:
        raise UsageError(f"--k must be >= 1, got {args.k}")
    if args.n_max is not None and args.n_max < 0:
        raise UsageError(f"--n-max must be >= 0, got {args.n_max}")
    n, p = pmf_table(args.k, args.params, n_max=args.n_max)
    lp = log_pmf(n, args.k, args.params)
    cdf = 0.0
    rows = []
    for ni, pi, li in zip(n.tolist(), p.tolist(), lp.tolist()):
        cdf += pi
        rows.append({"n": ni, "pmf": pi, "log_pmf": li, "cdf": min(cdf, 1.0)})
    emit(args, rows, PMF_COLUMNS, {"K": args.k})
    return rows


def cmd_validate(args):
    from .acceptance import run_all

    only = set(_int_list(args.only, "only", minimum=1)) if args.only else None
    results = run_all(args.params, workers=args.workers, only=only)
    for r in results:
        print(r.line(), flush=True)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return 0 if passed == len(results) else 2


# ---------------------------------------------------------------- parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda-u", type=float, default=5.0, help="user density (default 5)")
    common.add_argument("--lambda-r", type=float, default=1.0, help="RRU density (default 1)")
    common.add_argument("--gamma-a", type=float, default=3.5, help="cell-area gamma shape (default 3.5)")
    common.add_argument("--gamma-b", type=float, default=3.5, help="cell-area gamma rate constant (default 3.5)")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--config", default=None, help="key = value settings file")

    parser = _Parser(prog="fronthaul-mux", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("blocking", parents=[common], help="blocking probability vs t_bar per K")
    p.add_argument("--k-values", default=DEFAULT_K)
    p.add_argument("--tbar-values", default="1:10:1")
    p.set_defaults(func=cmd_blocking)
    subs["blocking"] = p

    p = sub.add_parser("bounds", parents=[common], help="series value with lower/upper bounds vs T")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--t-values", default="3:60:1,100:2000:100")
    p.set_defaults(func=cmd_bounds)
    subs["bounds"] = p

    p = sub.add_parser("capacity", parents=[common], help="minimum capacity and gain vs K")
    p.add_argument("--k-values", default=DEFAULT_K)
    p.add_argument("--thresholds", default="0.05")
    p.set_defaults(func=cmd_capacity)
    subs["capacity"] = p

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates against the series")
    p.add_argument("--cells", default="1:8,5:29", help="K:T pairs")
    p.add_argument("--samples", type=int, default=100_000, help="cluster samples per estimate")
    p.add_argument("--window-rrus", type=int, default=DEFAULT_WINDOW_RRUS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-spatial", action="store_true", help="model-level MC only")
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("pmf", parents=[common], help="cluster user-count PMF table")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n-max", type=int, default=None, help="last n (default: certified truncation)")
    p.set_defaults(func=cmd_pmf)
    subs["pmf"] = p

    p = sub.add_parser("validate", parents=[common], help="run the acceptance criteria")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", default=None, help="criterion numbers to run")
    p.set_defaults(func=cmd_validate)
    subs["validate"] = p
    return parser, subs


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(subs, config: dict):
    known = set()
    for p in subs.values():
        actions = {a.dest: a for a in p._actions}
        known.update(actions)
        defaults = {}
        for key, value in config.items():
            action = actions.get(key)
            if action is None or key in ("config", "help"):
                continue
            if isinstance(action, argparse._StoreTrueAction):
                low = value.lower()
                if low not in _TRUE | _FALSE:
                    raise UsageError(f"config key {key!r} expects true/false, got {value!r}")
                value = low in _TRUE
            defaults[key] = value
        p.set_defaults(**defaults)
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(subs, read_config(known.config))
        args = parser.parse_args(argv)
        try:
            args.params = ModelParams(args.lambda_u, args.lambda_r, args.gamma_a, args.gamma_b)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if getattr(args, "workers", 1) < 1:
            raise UsageError(f"--workers must be >= 1, got {args.workers}")
        result = args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"fronthaul-mux: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
