"""rotsums command line: cf, partition, sum, decompose, dist, renewal,
cosecant and verify.

Exact quantities travel as "num/den" strings, floats with 17 significant
digits.  Every artifact embeds a run manifest.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from rotsums import __version__
from rotsums.cf_core import GRID_BITS, cf_expand, format_rational, rational01
from rotsums.errors import InvariantViolation, RotsumsError

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2
_UNRECORDED = {"--jobs", "--out"}


# Serialization -----------------------------------------------------------------

def _float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def to_json(obj, indent: int | None = 1, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and Fractions as "num/den"."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = "," if indent is None else ","
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, complex):
        return to_json([obj.real, obj.imag], None)
    if isinstance(obj, Fraction):
        return json.dumps(format_rational(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return to_json([[v.real, v.imag] for v in obj.tolist()], indent, _level)
        return "[" + ",".join(to_json(v, None) for v in obj.tolist()) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + ": " + to_json(v, indent, _level + 1) for k, v in obj.items()]
        return "{" + pad + (sep + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str, Fraction, np.number)) for v in obj):
            return "[" + ",".join(to_json(v, None) for v in obj) + "]"
        items = [to_json(v, indent, _level + 1) for v in obj]
        return "[" + pad + (sep + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
              else _dt.datetime.now(_dt.timezone.utc))
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def _recorded_argv(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        name = tok.split("=", 1)[0]
        if name in _UNRECORDED:
            skip = "=" not in tok
            continue
        out.append(tok)
    return out


def manifest(argv: list[str], args: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "jobs", "out")}
    return {
        "command": "rotsums " + " ".join(_recorded_argv(argv)),
        "seed": getattr(args, "seed", None),
        "grid_bits": GRID_BITS,
        "version": __version__,
        "timestamp": _timestamp(),
        "parameters": params,
    }


def _emit(payload: dict, out: str | None) -> None:
    text = to_json(payload) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# Argument types -------------------------------------------------------------------

def _rational(text: str) -> Fraction:
    try:
        return rational01(text)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _alpha(text: str) -> Fraction:
    if text == "golden":
        from rotsums.sums import golden

        return golden()
    return _rational(text)


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


# Subcommands -------------------------------------------------------------------

def cmd_cf(args, argv) -> int:
    cf = cf_expand(args.alpha, args.terms)
    rows = [
        {"n": n, "a_n": cf.a(n) if n >= 1 else None, "p_n": cf.p[n], "q_n": cf.q[n],
         "lambda_n": format_rational(cf.lam[n])}
        for n in range(len(cf.q))
    ]
    _emit({"manifest": manifest(argv, args), "alpha": args.alpha, "digits": list(cf.digits),
           "terminated": cf.terminated, "convention": "q_0=1, q_1=a_1, p_0=0, p_1=1, lambda_0=alpha",
           "levels": rows}, args.out)
    return EXIT_OK


def cmd_partition(args, argv) -> int:
    from rotsums.partitions import build_level, coding_string, reflected_string

    level = build_level(cf_expand(args.alpha), args.level, args.max_intervals)
    _emit({
        "manifest": manifest(argv, args),
        "n": level.n, "q_n": level.q_n, "q_n1": level.q_n1,
        "lambda_n": level.lambda_n, "lambda_n1": level.lambda_n1,
        "string": str(coding_string(level)),
        "reflected_string": str(reflected_string(level)),
        "intervals": [{"left": iv.left, "type": iv.type, "j": iv.j} for iv in level.intervals],
    }, args.out)
    return EXIT_OK


def cmd_sum(args, argv) -> int:
    from rotsums.decomposition import G_eps_delta, birkhoff_via_cycles
    from rotsums.sums import FunctionConfig, birkhoff_direct

    cf = cf_expand(args.alpha)
    meta: dict = {"method": args.method, "c": args.c}
    if args.method == "direct":
        config = FunctionConfig(args.c, args.smooth)
        total = birkhoff_direct(cf, args.x, args.N, config)
        meta["function"] = config.label
        mean = total / args.N
    elif args.method == "cycles":
        if args.smooth:
            raise ValueError("--smooth is only supported by --method direct")
        total = birkhoff_via_cycles(cf, args.x, args.N, args.c)
        mean = total / args.N
    else:
        if args.smooth:
            raise ValueError("--smooth is only supported by --method direct")
        from rotsums.decomposition import DEFAULT_ORDERS

        M = args.M or DEFAULT_ORDERS
        mean = G_eps_delta(cf, args.x, args.N, args.c, args.eps, args.delta, M)
        total = mean * args.N
        meta.update({"eps": args.eps, "delta": args.delta, "M_orders": M})
    _emit({"manifest": manifest(argv, args), "sum": total, "mean": mean, **meta}, args.out)
    return EXIT_OK


def cmd_decompose(args, argv) -> int:
    from rotsums.decomposition import birkhoff_via_cycles, decompose

    cf = cf_expand(args.alpha)
    dec = decompose(cf, args.x, args.N)
    _emit({
        "manifest": manifest(argv, args),
        "N": dec.N, "n": dec.n,
        "orders": [
            {"m": o.m, "cbar": o.cbar, "cunder": o.cunder,
             "cycles": [{"start": cyc.start, "r": cyc.r, "index": cyc.index} for cyc in o.cycles]}
            for o in dec.orders
        ],
        "head": [0, dec.head],
        "tail": [dec.tail, dec.N],
        "reconstructed_sum": birkhoff_via_cycles(cf, args.x, args.N, args.c, dec),
    }, args.out)
    return EXIT_OK


def _distribution_payload(dist) -> dict:
    return {
        "kind": dist.kind,
        "samples": dist.samples,
        "seed": dist.seed,
        "meta": dist.meta,
        "bins": {k: {"edges": h.edges, "counts": h.counts, "underflow": h.underflow,
                     "overflow": h.overflow} for k, h in dist.bins.items()},
        "quantiles": {k: [list(pq) for pq in qs] for k, qs in dist.quantiles.items()},
        "values": dist.values,
    }


def _distribution_csv(dist, man: dict) -> str:
    buf = io.StringIO()
    buf.write("# manifest " + to_json(man, None) + "\n")
    buf.write("# meta " + to_json(dist.meta, None) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "component", "lower", "upper", "count"])
    for comp, h in dist.bins.items():
        w.writerow(["bin", comp, "-inf", _float(h.edges[0]), h.underflow])
        for lo, hi, n in zip(h.edges[:-1], h.edges[1:], h.counts):
            w.writerow(["bin", comp, _float(lo), _float(hi), int(n)])
        w.writerow(["bin", comp, _float(h.edges[-1]), "inf", h.overflow])
    w.writerow(["section", "component", "p", "value", ""])
    for comp, qs in dist.quantiles.items():
        for p, v in qs:
            w.writerow(["quantile", comp, _float(p), _float(v), ""])
    return buf.getvalue()


def cmd_dist(args, argv) -> int:
    from rotsums.statistics import empirical_snn
    from rotsums.sums import FunctionConfig

    mode = "complex" if args.complex else "f1"
    config = FunctionConfig() if args.complex else FunctionConfig(args.c, args.smooth)
    dist = empirical_snn(args.N, args.samples, args.seed, config, mode, args.bins, args.jobs)
    man = manifest(argv, args)
    if args.out.endswith(".csv"):
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_distribution_csv(dist, man))
    else:
        _emit({"manifest": man, **_distribution_payload(dist)}, args.out)
    q = dict(next(iter(dist.quantiles.values())))
    print(f"{dist.kind} law of {dist.meta['function']} at N={args.N}: {dist.samples} samples, "
          f"median {q[0.5]:.6g}, rejected {dist.meta['rejected']} -> {args.out}")
    return EXIT_OK


def cmd_renewal(args, argv) -> int:
    from rotsums.statistics import renewal_stats

    rs = renewal_stats(args.N, args.samples, args.M, args.seed, args.jobs)
    payload = {
        "manifest": manifest(argv, args),
        "N": rs.N, "M": rs.M, "samples": rs.samples, "seed": rs.seed,
        "ratio_hist": {k: v for k, v in _distribution_payload(rs.ratio_hist).items() if k != "values"},
        "entry_freqs": {str(k): v for k, v in rs.entry_freqs.items()},
        "joint": [{"entries": list(key), "count": n} for key, n in rs.joint],
        "ratio_quantities": {
            name: {k: v for k, v in _distribution_payload(d).items() if k in ("quantiles", "bins")}
            for name, d in rs.ratio_quantities.items()
        },
        "range_failures": rs.range_failures,
        "meta": rs.meta,
    }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_cosecant(args, argv) -> int:
    from rotsums.sums import cosecant_partial_sums

    report = cosecant_partial_sums(args.alpha, args.N)
    _emit({"manifest": manifest(argv, args), "alpha": args.alpha, "N": args.N,
           "alpha_note": "golden means F_60/F_61" if args.alpha_text == "golden" else None,
           "marks": report.marks()}, args.out)
    return EXIT_OK


def cmd_verify(args, argv) -> int:
    from rotsums.checks import run_suite

    results = run_suite(quick=args.quick)
    for r in results:
        print(r.line(), flush=True)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    from rotsums.statistics import DEFAULT_BINS, default_jobs

    parser = argparse.ArgumentParser(prog="rotsums", description="Birkhoff sums of a singular observable over circle rotations.")
    parser.add_argument("--version", action="version", version=f"rotsums {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, out_required=False):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", required=out_required, help="write the artifact here")
        return p

    p = add("cf", cmd_cf, "digits, convergents and lengths")
    p.add_argument("--alpha", type=_alpha, required=True)
    p.add_argument("--terms", type=_positive, default=200)

    p = add("partition", cmd_partition, "one level of the tower partition")
    p.add_argument("--alpha", type=_alpha, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--max-intervals", type=_positive, default=10**7)

    p = add("sum", cmd_sum, "Birkhoff sum by direct, cycle or truncated evaluation")
    p.add_argument("--alpha", type=_alpha, required=True)
    p.add_argument("--x", type=_rational, required=True)
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--method", choices=("direct", "cycles", "truncated"), default="direct")
    p.add_argument("--eps", type=_positive_float, default=0.1)
    p.add_argument("--delta", type=_positive_float, default=0.05)
    p.add_argument("--M", type=_positive, default=None, help="orders kept by --method truncated")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--smooth", choices=("cos",), default=None)

    p = add("decompose", cmd_decompose, "cycle inventory of an orbit segment")
    p.add_argument("--alpha", type=_alpha, required=True)
    p.add_argument("--x", type=_rational, required=True)
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--c", type=float, default=1.0)

    p = add("dist", cmd_dist, "empirical law of S_N/N or of the complex average", out_required=True)
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--samples", type=_positive, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--complex", action="store_true")
    p.add_argument("--bins", type=_positive, default=DEFAULT_BINS)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--smooth", choices=("cos",), default=None)
    p.add_argument("--jobs", type=_positive, default=default_jobs())

    p = add("renewal", cmd_renewal, "renewal statistics of q_n(N)/N and nearby digits")
    p.add_argument("--N", type=_positive, required=True)
    p.add_argument("--samples", type=_positive, required=True)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=_positive, default=default_jobs())

    p = add("cosecant", cmd_cosecant, "running maxima of cosecant partial sums")
    p.add_argument("--alpha", required=True, help="golden or NUM/DEN")
    p.add_argument("--N", type=_positive, required=True)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.set_defaults(func=cmd_verify)
    p.add_argument("--quick", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad arguments
    if args.command == "cosecant":
        args.alpha_text = args.alpha
        try:
            args.alpha = _alpha(args.alpha)
        except argparse.ArgumentTypeError as exc:
            parser.error(f"argument --alpha: {exc}")
    try:
        return args.func(args, argv)
    except InvariantViolation as exc:
        print(f"rotsums: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (RotsumsError, ValueError, ArithmeticError) as exc:
        print(f"rotsums: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
