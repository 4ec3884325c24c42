"""
Command-line front end: ``vestool {fit,compare,synth,capital,check}``.

Exit codes: 0 success, 1 usage or I/O error, 2 estimation failure.
Structured reports are JSON, plot-ready tables are CSV; every output file
is written to a temporary sibling and renamed into place.
"""

import argparse
import csv
import io
import json
import logging
import os
from pathlib import Path
import sys
import tempfile
import warnings

import numpy as np

from . import __version__
from .data_io import SchemaConfig, SynthConfig, generate, ingest, records_to_csv
from .errors import VesError
from .pipeline import (
    GroupEstimate,
    PipelineConfig,
    capital_by_state,
    compare_groups,
    estimate_all,
)
from .production import (
    CesParams,
    VesParams,
    derivatives,
    elasticity_of_substitution,
    eval_ces,
    eval_ves,
    eval_ves_intensive,
    factor_prices,
    ode_residual,
    ves_to_hl,
)

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2

FIG1_COLUMNS = ("industry_code", "sigma_ces", "mu_ves", "reasonable", "priority")
FIG2_COLUMNS = ("state", "industry_code", "invested_capital_rs_mn")
CHECK_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
ODE_TOL = 1e-8
EULER_TOL = 1e-10
GRAD_TOL = 1e-6
CES_TOL = 1e-12

log = logging.getLogger("vestool")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fail(code, message):
    print(f"vestool: error[{code}]: {message}", file=sys.stderr)


def write_atomic(path, text):
    if str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _pipeline_config(args):
    return PipelineConfig(
        models=tuple(getattr(args, "models", None) or ("polynomial", "exponential", "power")),
        max_degree=getattr(args, "max_degree", 4),
        sigma_threshold=args.sigma_threshold,
        sigma_max=args.sigma_max,
        mu_route=args.mu_route,
    )


def build_report(records, ingest_exclusions, config, by="industry_code", jobs=1, seed=0):
    batch = estimate_all(records, config, by=by, jobs=jobs)
    comparisons = compare_groups(batch.estimates, config)
    group_exclusions = {}
    for est in batch.estimates:
        for rule, count in est.exclusions.items():
            group_exclusions[rule] = group_exclusions.get(rule, 0) + count
    return {
        "config": {
            "models": list(config.models),
            "max_degree": config.max_degree,
            "sigma_threshold": config.sigma_threshold,
            "sigma_max": config.sigma_max,
            "mu_route": config.mu_route,
            "group_by": by,
            "seed": seed,
        },
        "groups": [e.to_dict() for e in batch.estimates],
        "comparisons": [c.to_dict() for c in comparisons],
        "exclusion_summary": {
            "ingest": dict(sorted(ingest_exclusions.items())),
            "estimation": dict(sorted(group_exclusions.items())),
        },
        "failures": batch.failures,
    }


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def cmd_fit(args):
    schema = SchemaConfig(year_range=(args.year, args.year) if args.year is not None else None)
    records, excluded = ingest(args.input, schema)
    report = build_report(records, excluded, _pipeline_config(args), by=args.group_by,
                          jobs=args.jobs, seed=args.seed)
    write_atomic(args.out, dump_json(report))
    for f in report["failures"]:
        _fail(f["code"], f"group {f['group']}: {f['error']}")
    return EXIT_FAILED if report["failures"] else EXIT_OK


def comparison_rows(report, config):
    estimates = [GroupEstimate.from_dict(g) for g in report.get("groups", [])]
    return estimates, compare_groups(estimates, config)


def cmd_compare(args):
    with open(args.report, encoding="utf-8") as fh:
        report = json.load(fh)
    estimates, comps = comparison_rows(report, _pipeline_config(args))
    rows = [[_cell(getattr(c, "theoretically_reasonable" if k == "reasonable" else k)) for k in FIG1_COLUMNS]
            for c in comps]
    write_atomic(args.out, _csv_text(FIG1_COLUMNS, rows))
    usable = [c for c in comps if c.sigma_ces is not None and c.mu_ves is not None]
    if estimates and not usable:
        _fail("E_NO_COMPARISON", "no group in the report carries both sigma_ces and a mu estimate")
        return EXIT_FAILED
    return EXIT_OK


def _derived_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def cmd_synth(args):
    params = VesParams(args.A, args.delta, args.rho, args.mu)
    codes = args.industry_code
    records = []
    for i, code in enumerate(codes):
        seed = args.seed if len(codes) == 1 else _derived_seed(args.seed, i)
        cfg = SynthConfig(params, args.n, args.x_low, args.x_high, args.noise, seed,
                          not args.no_wages, code, args.state, args.year)
        records.extend(generate(cfg))
    write_atomic(args.out, records_to_csv(records))
    return EXIT_OK


def cmd_capital(args):
    records, _ = ingest(args.input)
    report = capital_by_state(records, args.year)
    rows = [[c.state, c.industry_code, _cell(float(c.invested_capital))] for c in report.cells]
    write_atomic(args.out, _csv_text(FIG2_COLUMNS, rows))
    return EXIT_OK


def run_checks(p, grid=CHECK_GRID):
    """Identity checks for one parameter vector; returns (lines, all_passed)."""
    X = np.asarray(grid, dtype=float)
    lines, ok = [], True

    def record(name, value, tol):
        nonlocal ok
        passed = value <= tol
        ok &= passed
        lines.append(f"{name:<16} max={value:.3e} tol={tol:.0e} {'PASS' if passed else 'FAIL'}")

    try:
        h = ves_to_hl(p)
    except VesError as exc:
        ok = False
        lines.append(f"{'ode-residual':<16} FAIL ({exc})")
    else:
        record("ode-residual", float(np.max(np.abs(ode_residual(h, X)))), ODE_TOL)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        W, r = factor_prices(p, X)
    Y = eval_ves_intensive(p, X)
    record("euler", float(np.max(np.abs(W + r * X - Y) / Y)), EULER_TOL)
    d = derivatives(p, X)
    h_step = 1e-5 * X
    fd = (eval_ves_intensive(p, X + h_step) - eval_ves_intensive(p, X - h_step)) / (2 * h_step)
    record("gradient", float(np.max(np.abs(fd - d.f1) / np.abs(d.f1))), GRAD_TOL)
    if p.mu == 0:
        K, L = np.meshgrid(np.geomspace(0.5, 50, 5), np.geomspace(1, 100, 5))
        ces = eval_ces(CesParams(p.A, p.delta, p.rho), K, L)
        record("ces-reduction", float(np.max(np.abs(eval_ves(p, K, L) - ces) / ces)), CES_TOL)
    else:
        lines.append(f"{'ces-reduction':<16} skipped (mu != 0)")
    try:
        sig = elasticity_of_substitution(p, X)
        lines.append("sigma(X)         " + " ".join(f"{x:g}:{s:.6g}" for x, s in zip(X, sig)))
    except VesError as exc:
        lines.append(f"sigma(X)         undefined ({exc})")
    return lines, ok


def cmd_check(args):
    p = VesParams(args.A, args.delta, args.rho, args.mu)
    lines, ok = run_checks(p, args.grid)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAILED


def _model_list(text):
    models = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in models if m not in ("polynomial", "exponential", "power")]
    if bad or not models:
        raise argparse.ArgumentTypeError(f"unknown model(s): {', '.join(bad) or text!r}")
    return models


def _grid(text):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not values or any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError("grid values must be positive")
    return values


def _add_comparison_flags(p):
    p.add_argument("--sigma-threshold", type=float, default=0.5,
                   help="sigma_CES above which a reasonable group gets priority")
    p.add_argument("--sigma-max", type=float, default=1.0,
                   help="upper end of the theoretically reasonable sigma band")
    p.add_argument("--mu-route", choices=("wage", "inversion"), default="wage",
                   help="preferred mu estimate (the other is the fallback)")


def _add_params(p):
    p.add_argument("--A", type=float, default=1.0, help="efficiency scale")
    p.add_argument("--delta", type=float, default=0.5, help="distribution weight")
    p.add_argument("--rho", type=float, default=1.0, help="substitution parameter")
    p.add_argument("--mu", type=float, default=0.0, help="capital-intensity parameter")


def make_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="vestool", description=__doc__.strip().splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per group")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="estimate every group and write the batch report", formatter_class=fmt)
    p.add_argument("--input", required=True, help="plant-level CSV")
    p.add_argument("--out", required=True, help="batch report JSON ('-' for stdout)")
    p.add_argument("--group-by", default="industry_code", choices=("industry_code", "state"))
    p.add_argument("--models", type=_model_list, default=["polynomial", "exponential", "power"],
                   help="comma-separated subset of polynomial,exponential,power")
    p.add_argument("--max-degree", type=int, default=4, help="largest polynomial degree tried")
    p.add_argument("--year", type=int, default=None, help="keep only this survey year")
    p.add_argument("--seed", type=int, default=0, help="master seed recorded in the report")
    p.add_argument("--jobs", type=int, default=1, help="groups estimated in parallel")
    _add_comparison_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="sigma_CES vs mu table from a batch report", formatter_class=fmt)
    p.add_argument("--report", required=True, help="batch report JSON written by fit")
    p.add_argument("--out", default="-", help="comparison CSV ('-' for stdout)")
    _add_comparison_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate synthetic plant records", formatter_class=fmt)
    _add_params(p)
    p.add_argument("--n", type=int, default=200, help="records per industry code")
    p.add_argument("--noise", type=float, default=0.0, help="sd of the ln(V/L) disturbance")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--x-low", type=float, default=0.1, help="lower bound of K/L")
    p.add_argument("--x-high", type=float, default=10.0, help="upper bound of K/L")
    p.add_argument("--industry-code", nargs="+", default=["274"], help="one group per code")
    p.add_argument("--state", default="WB")
    p.add_argument("--year", type=int, default=2016)
    p.add_argument("--no-wages", action="store_true", help="leave the wages column empty")
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("capital", help="invested capital by state and industry", formatter_class=fmt)
    p.add_argument("--input", required=True, help="plant-level CSV")
    p.add_argument("--year", type=int, default=None, help="survey year to aggregate")
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_capital)

    p = sub.add_parser("check", help="verify the closed-form identities for one parameter vector",
                       formatter_class=fmt)
    _add_params(p)
    p.add_argument("--grid", type=_grid, default=list(CHECK_GRID), help="comma-separated K/L values")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _fail("E_USAGE", exc)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code or EXIT_OK
    _configure_logging(args.verbose)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            return args.func(args)
        except (OSError, json.JSONDecodeError) as exc:
            _fail("E_IO", exc)
        except VesError as exc:
            _fail(exc.code, exc)
        except ValueError as exc:
            _fail("E_VALUE", exc)
        finally:
            for msg in dict.fromkeys(str(w.message) for w in caught):
                print(f"vestool: warning: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _configure_logging(verbose):
    # own handler so the per-group lines appear even when the host configured the root logger
    for h in [h for h in log.handlers if getattr(h, "_vestool", False)]:
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("vestool: %(message)s"))
    handler._vestool = True
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


if __name__ == "__main__":
    sys.exit(main())
