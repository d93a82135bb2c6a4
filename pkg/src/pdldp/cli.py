"""Command-line interface.

    pdldp sample gem|pd|dirichlet ...   draws as CSV (replicate,coordinate,value)
    pdldp rate i1|pd|partition|measure|entropy ...
    pdldp density perman ...            grid of log densities as CSV
    pdldp verify ldp ...                sweep report as JSON
    pdldp --check-report FILE           validate a sweep report

Exit codes: 0 success, 1 domain error (bad values, invalid report),
2 accuracy or numeric failure, 64 usage error.  A JSON config file given
with ``--config`` supplies defaults for any option; flags override it.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .errors import AccuracyError, DomainError, NumericError, PdldpError
from .gem import StopRule, batch_partition_via_sticks, rank_prefix, sample_gem
from .harness import EventSpec, SweepConfig, SweepResult, run_sweep, verdict, SlopeFit
from .measures import BaseMeasure, MeasureSpec, PartitionSpec
from .perman import PermanContext, perman_log_density
from .rates import rate_i1, rate_measure_alpha, rate_partition, rate_pd_prefix, relative_entropy
from .sampling import RandomStream
from .subordinator import batch_partition_via_subordinator

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64
REPORT_FORMAT = "pdldp-sweep"
REPORT_VERSION = 1
CSV_COLUMNS = ("replicate", "coordinate", "value")

# built-in defaults, applied after the config file
DEFAULTS = {
    "theta": 1.0,
    "alpha": 0.0,
    "C": 1.0,
    "seed": 0,
    "workers": 1,
    "replicates": 1,
    "stop": "residual:1e-6",
    "k": 1,
    "nu": None,
    "cuts": None,
    "base": "uniform",
    "route": "sticks",
    "tol": 1e-4,
    "depth": 9,
    "grid": "0.2,0.95,16",
    "samples": 1_000_000,
    "tolerance": 1.25,
    "event": "p1_ge:0.1",
    "thetas": "20,40,60,80",
    "center": None,
    "out": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(v) -> str:
    return f"{float(v):.9g}"


def floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from exc


def _add_common(p, *names):
    for name in names:
        kind = {"seed": int, "workers": int, "replicates": int, "k": int, "depth": int, "samples": int}.get(name, str)
        if name in ("theta", "alpha", "C", "tol", "tolerance", "u"):
            kind = float
        p.add_argument(f"--{name}", type=kind, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdldp", description="Poisson-Dirichlet sampling and large-deviation checks")
    parser.add_argument("--config", help="JSON file of option defaults")
    parser.add_argument("--check-report", metavar="FILE", help="validate a sweep report and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    sample = sub.add_parser("sample", help="draw samples as CSV").add_subparsers(dest="what", parser_class=_Parser)
    p = sample.add_parser("gem")
    _add_common(p, "theta", "alpha", "seed", "replicates", "stop", "out")
    p = sample.add_parser("pd")
    _add_common(p, "theta", "alpha", "seed", "replicates", "k", "out")
    p = sample.add_parser("dirichlet")
    _add_common(p, "theta", "alpha", "seed", "replicates", "nu", "cuts", "base", "route", "tol", "out")

    rate = sub.add_parser("rate", help="evaluate a rate function").add_subparsers(dest="what", parser_class=_Parser)
    p = rate.add_parser("i1")
    _add_common(p, "u")
    p = rate.add_parser("pd")
    _add_common(p, "p")
    p.add_argument("--unordered", action="store_true", help="GEM sequence: skip the ordering check")
    p = rate.add_parser("partition")
    _add_common(p, "alpha", "nu", "x")
    p = rate.add_parser("measure")
    _add_common(p, "alpha", "mu", "base", "depth")
    p = rate.add_parser("entropy")
    _add_common(p, "mu", "base")

    dens = sub.add_parser("density", help="evaluate densities").add_subparsers(dest="what", parser_class=_Parser)
    p = dens.add_parser("perman")
    _add_common(p, "theta", "alpha", "C", "k", "grid", "points", "out")

    ver = sub.add_parser("verify", help="Monte Carlo LDP checks").add_subparsers(dest="what", parser_class=_Parser)
    p = ver.add_parser("ldp")
    _add_common(p, "event", "alpha", "thetas", "samples", "seed", "workers", "tolerance", "nu", "cuts",
                "base", "center", "out")
    return parser


def resolve(args: argparse.Namespace, config: dict) -> argparse.Namespace:
    """Fill unset options from the config file, then from built-in defaults."""
    for key, value in vars(args).items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    return args


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise UsageError(f"missing required option --{n}")


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def _cells(args) -> PartitionSpec:
    nu = BaseMeasure.parse(args.base)
    if args.cuts is not None:
        return PartitionSpec.from_cuts(floats(args.cuts), nu)
    if args.nu is not None:
        return PartitionSpec.from_probs(floats(args.nu))
    raise UsageError("need --nu (cell probabilities) or --cuts")


def _parse_stop(text: str) -> StopRule:
    kind, _, value = str(text).partition(":")
    if kind == "rank_exact":
        return StopRule.rank_exact()
    try:
        v = float(value)
    except ValueError as exc:
        raise DomainError(f"bad stopping rule {text!r}") from exc
    if kind in ("count", "top_k"):
        return StopRule(kind, int(v))
    return StopRule(kind, v)


def _write_rows(path, rows):
    fh = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r, j, v in rows:
            w.writerow((r, j, fmt(v)))
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_sample(args) -> int:
    rows = []
    if args.what == "gem":
        stop = _parse_stop(args.stop)
        for r in range(args.replicates):
            s = sample_gem(args.theta, args.alpha, stop, RandomStream(args.seed, r))
            rows += [(r, j + 1, v) for j, v in enumerate(s.sticks)]
    elif args.what == "pd":
        for r in range(args.replicates):
            s = sample_gem(args.theta, args.alpha, StopRule.top_k(args.k), RandomStream(args.seed, r))
            pre = rank_prefix(s, args.k)
            if not pre.exact:
                raise AccuracyError(f"replicate {r}: ranked prefix not certified")
            rows += [(r, j + 1, v) for j, v in enumerate(pre.masses)]
    else:
        cells = _cells(args)
        stream = RandomStream(args.seed)
        if args.route == "subordinator":
            x = batch_partition_via_subordinator(args.theta, args.alpha, cells, args.replicates, stream)
        elif args.route == "sticks":
            x = batch_partition_via_sticks(args.theta, args.alpha, cells, args.replicates, stream, tol=args.tol)
        else:
            raise DomainError(f"unknown route {args.route!r}")
        rows = [(r, j + 1, v) for r in range(x.shape[0]) for j, v in enumerate(x[r])]
    _write_rows(args.out, rows)
    return EXIT_OK


def cmd_rate(args) -> int:
    if args.what == "i1":
        _require(args, "u")
        value = rate_i1(float(args.u))
    elif args.what == "pd":
        _require(args, "p")
        value = rate_pd_prefix(floats(args.p), ordered=not args.unordered)
    elif args.what == "partition":
        _require(args, "nu", "x")
        value = rate_partition(floats(args.x), args.alpha, PartitionSpec.from_probs(floats(args.nu)))
    elif args.what == "measure":
        _require(args, "mu")
        res = rate_measure_alpha(MeasureSpec.parse(args.mu), BaseMeasure.parse(args.base), args.alpha, args.depth)
        print("depth,value")
        for d, v in enumerate(res.by_depth):
            print(f"{d},{fmt(v)}")
        return EXIT_OK
    else:
        _require(args, "mu")
        value = relative_entropy(BaseMeasure.parse(args.base), MeasureSpec.parse(args.mu))
    print(fmt(value))
    return EXIT_OK


def _perman_points(args) -> list:
    if args.points:
        return [tuple(floats(pt)) for pt in str(args.points).split(";")]
    if args.k != 1:
        raise UsageError("--grid is for k = 1; pass --points for k > 1")
    lo, hi, n = floats(args.grid)
    return [(float(v),) for v in np.linspace(lo, hi, int(n))]


def cmd_density(args) -> int:
    ctx = PermanContext(args.theta, args.alpha, args.C, args.k)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"p{i + 1}" for i in range(args.k)] + ["log_density"])
        for pt in _perman_points(args):
            w.writerow([fmt(v) for v in pt] + [fmt(perman_log_density(pt, ctx))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_verify(args) -> int:
    cells = _cells(args) if (args.nu is not None or args.cuts is not None) else None
    center = MeasureSpec.parse(args.center) if args.center else None
    event = EventSpec.parse(args.event, cells=cells, center=center, nu=BaseMeasure.parse(args.base))
    cfg = SweepConfig(event, float(args.alpha), tuple(floats(args.thetas)), int(args.samples),
                      int(args.seed), int(args.workers), float(args.tolerance))
    result = run_sweep(cfg)
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION, "result": result.to_dict()}
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def check_report(path: str) -> SweepResult:
    """Load a sweep report and check its internal consistency."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read report {path!r}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT or doc.get("version") != REPORT_VERSION:
        raise DomainError("not a version-1 sweep report")
    try:
        res = SweepResult.from_dict(doc["result"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed report: {exc}") from exc
    n = len(res.thetas)
    if not all(len(getattr(res, f)) == n for f in ("samples", "counts", "probabilities", "stderrs")):
        raise DomainError("per-theta fields have mismatched lengths")
    for s, c, p in zip(res.samples, res.counts, res.probabilities):
        if not 0 <= c <= s or not math.isclose(p, c / s, rel_tol=1e-12, abs_tol=0.0):
            raise DomainError("probabilities do not match counts")
    if not res.ci_low <= res.rate <= res.ci_high:
        raise DomainError("fitted rate lies outside its interval")
    fit = SlopeFit(res.rate, res.ci_low, res.ci_high, res.intercept, 0.0, n)
    if verdict(fit, res.theoretical_rate, res.tolerance_factor) != res.verdict:
        raise DomainError("verdict does not follow from the reported interval")
    return res


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.check_report:
            check_report(args.check_report)
            print(f"{args.check_report}: valid")
            return EXIT_OK
        if not args.command or not getattr(args, "what", None):
            raise UsageError("a command is required; see --help")
        config = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    config = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
            if not isinstance(config, dict):
                raise UsageError("config file must hold a JSON object")
        args = resolve(args, config)
        handler = {"sample": cmd_sample, "rate": cmd_rate, "density": cmd_density, "verify": cmd_verify}
        return handler[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (AccuracyError, NumericError) as exc:
        print(f"pdldp: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PdldpError, ValueError) as exc:
        print(f"pdldp: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
