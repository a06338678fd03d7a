"""Command-line interface: ``lomaxfit <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 the single requested
fit (or bootstrap) did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from .distribution import LomaxParams, Sample, lomax_sample
from .errors import BootstrapError, DataError, DomainError, LomaxError
from .estimators import OPTIMIZERS, Method, fit_all
from .simulation import AGGREGATIONS, CSV_COLUMNS, MCConfig, load_grid, reports_to_json, run_grid, run_monte_carlo
from . import dataio, gof

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    pass


def _methods(text: str | None):
    if text is None or text.strip().lower() == "all":
        return list(Method)
    try:
        return [Method.parse(t) for t in text.split(",") if t.strip()]
    except DomainError as exc:
        raise _UsageError(str(exc)) from None


def _params(sigma, beta) -> LomaxParams:
    try:
        return LomaxParams(sigma, beta)
    except DomainError as exc:
        raise _UsageError(str(exc)) from None


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def _table(rows: list[dict], cols) -> str:
    cells = [[str(c) for c in cols]] + [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(x.ljust(w) for x, w in zip(row, widths)).rstrip() for row in cells) + "\n"


def _csv(rows: list[dict], cols) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(cols), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else (repr(r[k]) if isinstance(r[k], float) else r[k])) for k in cols})
    return buf.getvalue()


def _render(rows, cols, fmt, payload=None) -> str:
    if fmt == "json":
        return json.dumps(payload if payload is not None else rows, indent=2, default=_json_default) + "\n"
    if fmt == "csv":
        return _csv(rows, cols)
    return _table(rows, cols)


def _json_default(v):
    if isinstance(v, float):
        return None
    raise TypeError(type(v).__name__)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args) -> Sample:
    s = dataio.load_sample(args.file, fmt=args.input_format, column=args.column)
    if getattr(args, "degroup", False):
        s = Sample(dataio.degroup_values(s.values, args.half_width))
    if getattr(args, "shift", 0.0):
        s = s.shifted(-args.shift)
    try:
        s.require_nonnegative()
    except DomainError as exc:
        raise DataError(str(exc)) from None
    return s


FIT_COLS = ("method", "sigma", "beta", "converged", "reason", "objective_value", "iterations")


def _fit_rows(results) -> list[dict]:
    rows = []
    for r in results.values():
        d = r.as_dict()
        d["method"] = r.method.label
        rows.append(d)
    return rows


def cmd_fit(args) -> int:
    methods = _methods(args.method)
    s = _load(args)
    results = fit_all(s, methods, optimizer=args.optimizer)
    _emit(_render(_fit_rows(results), FIT_COLS, args.format), args.out)
    if len(methods) == 1 and not next(iter(results.values())).converged:
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_wind(args) -> int:
    results = dataio.wind_workflow(shift=args.shift, optimizer=args.optimizer, methods=_methods(args.method))
    _emit(_render(_fit_rows(results), FIT_COLS, args.format), args.out)
    return EXIT_OK


def _mc_config(args, params) -> MCConfig:
    try:
        return MCConfig(
            params, args.n, args.reps, seed=args.seed, estimators=tuple(_methods(args.methods)),
            trim_percent=args.trim, optimizer=args.optimizer, aggregation=args.aggregation,
        )
    except DomainError as exc:
        raise _UsageError(str(exc)) from None


def _reports_out(reports, fmt) -> str:
    if fmt == "json":
        return reports_to_json(reports) + "\n"
    rows = [row for rep in reports for row in rep.rows()]
    return _csv(rows, CSV_COLUMNS) if fmt == "csv" else _table(rows, CSV_COLUMNS)


def cmd_simulate(args) -> int:
    cfg = _mc_config(args, _params(args.sigma, args.beta))
    rep = run_monte_carlo(cfg, workers=args.threads)
    _emit(_reports_out([rep], args.format), args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    try:
        cells = load_grid(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read grid {args.config}: {exc}") from None
    if args.format == "json":
        _emit(_reports_out(list(run_grid(cells, workers=args.threads)), "json"), args.out)
        return EXIT_OK
    fh = open(args.out, "w") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rep in run_grid(cells, workers=args.threads):
            for row in rep.rows():
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
            fh.flush()
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_gof(args) -> int:
    methods = _methods(args.method)
    s = _load(args)
    rows = []
    status = EXIT_OK
    for m in methods:
        try:
            r = gof.ks_bootstrap_test(s, m, reps=args.reps, seed=args.seed, optimizer=args.optimizer, workers=args.threads)
            rows.append({"method": m.label, "statistic": r.statistic, "p_value": r.p_value,
                         "bootstrap_reps": r.bootstrap_reps, "refits_failed": r.refits_failed, "error": None})
        except BootstrapError as exc:
            rows.append({"method": m.label, "statistic": None, "p_value": None,
                         "bootstrap_reps": None, "refits_failed": None, "error": str(exc)})
            if len(methods) == 1:
                status = EXIT_NONCONVERGED
    cols = ("method", "statistic", "p_value", "bootstrap_reps", "refits_failed", "error")
    _emit(_render(rows, cols, args.format), args.out)
    return status


def cmd_degroup(args) -> int:
    s = dataio.load_sample(args.file, fmt=args.input_format, column=args.column)
    vals = dataio.degroup_values(s.values, args.half_width, args.decimals)
    _emit("".join(f"{v!r}\n" for v in vals.tolist()), args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.n < 1:
        raise _UsageError("n must be positive")
    s = lomax_sample(_params(args.sigma, args.beta), args.n, args.seed)
    _emit("".join(f"{v!r}\n" for v in s.values.tolist()), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lomaxfit", description="Fit, simulate and test Lomax (Pareto II) models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_opts(sp, shift=True):
        sp.add_argument("file")
        sp.add_argument("--input-format", choices=("plain", "csv"), default="plain")
        sp.add_argument("--column", help="CSV column name (default: first column)")
        sp.add_argument("--half-width", type=float, default=0.5, help="rounding half-width for de-grouping")
        if shift:
            sp.add_argument("--degroup", action="store_true", help="spread tied values before fitting")
            sp.add_argument("--shift", type=float, default=0.0, help="subtract this from every observation")

    def out_opts(sp, formats=("table", "csv", "json"), default="table"):
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--out", help="write to this file instead of stdout")

    def opt_opt(sp, default):
        sp.add_argument("--optimizer", choices=OPTIMIZERS, default=default,
                        help="MDE path: 'bfgs' (log-space, converged) or 'optim' (R optim replay)")

    sp = sub.add_parser("fit", help="fit estimators to a data file")
    data_opts(sp)
    sp.add_argument("--method", default="all", help="method name, comma list, or 'all'")
    opt_opt(sp, "bfgs")
    out_opts(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("wind", help="fit the bundled wind-catastrophe data")
    sp.add_argument("--shift", type=float, default=0.0)
    sp.add_argument("--method", default="all")
    opt_opt(sp, "optim")
    out_opts(sp)
    sp.set_defaults(func=cmd_wind)

    sp = sub.add_parser("simulate", help="Monte Carlo study of one (n, sigma, beta) cell")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--methods", default="all")
    sp.add_argument("--trim", type=float, default=1.0, help="percent trimmed for the trimmed variance")
    sp.add_argument("--aggregation", choices=AGGREGATIONS, default="per-method")
    sp.add_argument("--threads", type=int, default=1, help="worker processes (0 = one per CPU)")
    opt_opt(sp, "optim")
    out_opts(sp, default="csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("grid", help="run a grid of cells from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--threads", type=int, default=1)
    out_opts(sp, formats=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("gof", help="bootstrap Kolmogorov-Smirnov test")
    data_opts(sp)
    sp.add_argument("--method", default="MLE")
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    opt_opt(sp, "bfgs")
    out_opts(sp)
    sp.set_defaults(func=cmd_gof)

    sp = sub.add_parser("degroup", help="spread runs of tied rounded values")
    data_opts(sp, shift=False)
    sp.add_argument("--decimals", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_degroup)

    sp = sub.add_parser("sample", help="draw a Lomax sample")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"lomaxfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"lomaxfit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LomaxError as exc:
        print(f"lomaxfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
