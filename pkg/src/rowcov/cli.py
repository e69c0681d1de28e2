"""Command-line interface.

    rowcov test --data Y.csv --design colmeans --stat maxep
    rowcov power-curve --method analytic --n-list 20,40,80 --p half
    rowcov simulate-null --data Y.csv --design colmeans --stat maxep

Row indices given on the command line (``--pair``) and reported
(``argmax_pair``) are 1-based. Errors are written to standard output as a
JSON object with exit code 2 (usage or model errors) or 3 (numerical
failure).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import RowCovError
from .invariant import DEFAULT_REPS, TestReport, mc_null_test, pair_vector, simulate_null, spiked_test
from .models import DesignSpec, effective_dims, reduce_direction
from .sampling import RngStream
from .studies import maxep_power_curve, umpi_power_curve

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(RowCovError):
    kind = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- input ----------------------------------------------------------------


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _read_rows(path: str) -> list[list[str]]:
    with open(path, newline="") as fh:
        text = fh.read()
    try:
        dialect = csv.Sniffer().sniff(text[:4096], delimiters=",;\t ")
    except csv.Error:
        dialect = csv.excel
    rows = [[tok.strip() for tok in row] for row in csv.reader(io.StringIO(text), dialect)]
    rows = [r for r in rows if any(r)]
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return rows


def read_data(path: str, cols_first: int | None = None, log: bool = False) -> np.ndarray:
    """Numeric matrix from CSV; a non-numeric first row is taken as a header."""
    rows = _read_rows(path)
    if not all(_is_number(t) for t in rows[0]):
        rows = rows[1:]
    try:
        Y = np.array([[float(t) for t in r] for r in rows])
    except ValueError as exc:
        raise UsageError(f"{path}: non-numeric entry ({exc})") from None
    if Y.ndim != 2 or Y.size == 0:
        raise UsageError(f"{path}: rows have unequal length or no data")
    if cols_first is not None:
        if not 1 <= cols_first <= Y.shape[1]:
            raise UsageError(f"--cols-first must be in 1..{Y.shape[1]}")
        Y = Y[:, :cols_first]
    if log:
        if np.any(Y <= 0):
            raise UsageError("--log needs strictly positive data")
        Y = np.log(Y)
    return Y


def read_design(spec: str, nrows: int) -> np.ndarray:
    """Design matrix with ``nrows`` rows.

    ``ones`` is the intercept. Otherwise a CSV file whose first row is a
    header iff it has ``nrows + 1`` rows; non-numeric columns are expanded
    to one indicator per level (sorted), without dropping a level.
    """
    if spec in ("1", "ones"):
        return np.ones((nrows, 1))
    rows = _read_rows(spec)
    if len(rows) == nrows + 1:
        rows = rows[1:]
    if len(rows) != nrows:
        raise UsageError(f"{spec}: has {len(rows)} rows, expected {nrows}")
    cols = list(zip(*rows))
    blocks = []
    for col in cols:
        if all(_is_number(t) for t in col):
            blocks.append(np.array([float(t) for t in col])[:, None])
        else:
            levels = sorted(set(col))
            blocks.append(np.array([[t == lv for lv in levels] for t in col], dtype=float))
    return np.hstack(blocks)


def parse_design(text: str, n: int, p: int) -> DesignSpec:
    kind, _, rest = text.partition(":")
    if kind == "zero" and not rest:
        return DesignSpec.zero()
    if kind == "colmeans" and not rest:
        return DesignSpec.column_means()
    if kind == "reg" and rest:
        return DesignSpec.row_regression(read_design(rest, n))
    if kind == "rowcol" and rest.count(",") == 1:
        xs, ws = rest.split(",")
        return DesignSpec.row_column_regression(read_design(xs, n), read_design(ws, p))
    raise UsageError(f"bad --design {text!r}; expected zero, colmeans, reg:X.csv or rowcol:X.csv,W.csv")


def parse_pair(text: str, n: int) -> tuple[int, int]:
    try:
        i, j = (int(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"--pair expects 'i,j', got {text!r}") from None
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise UsageError(f"--pair indices must be distinct and in 1..{n}")
    return i - 1, j - 1


def _direction(args, n: int, warnings: list[str]) -> np.ndarray | None:
    if args.stat != "spiked":
        return None
    if (args.c_file is None) == (args.pair is None):
        raise UsageError("the spiked statistic needs exactly one of --c-file or --pair")
    if args.pair is not None:
        return pair_vector(n, *parse_pair(args.pair, n))
    c = read_data(args.c_file).ravel()
    if c.size != n:
        raise UsageError(f"{args.c_file}: direction has length {c.size}, expected n={n}")
    norm = float(np.linalg.norm(c))
    if norm == 0 or not math.isfinite(norm):
        raise UsageError("direction vector is zero or non-finite")
    if abs(norm - 1.0) > 1e-8:
        warnings.append(f"direction vector rescaled from norm {norm:.6g} to 1")
    return c / norm


# --- output ---------------------------------------------------------------


def _emit(text: str, out: str | None):
    sys.stdout.write(text)
    if not text.endswith("\n"):
        sys.stdout.write("\n")
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _report_csv(d: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.keys())
    w.writerow(["" if v is None else " ".join(map(str, v)) if isinstance(v, list) else
                repr(v) if isinstance(v, float) else v for v in d.values()])
    return buf.getvalue()


# --- subcommands ----------------------------------------------------------


def _check_common(args):
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.reps < 100:
        raise UsageError("--reps must be at least 100")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")


def cmd_test(args) -> int:
    _check_common(args)
    Y = read_data(args.data, args.cols_first, args.log)
    n, p = Y.shape
    design = parse_design(args.design, n, p)
    warnings: list[str] = []
    if args.cols_first is not None:
        warnings.append(f"using only the first {args.cols_first} columns")
    c = _direction(args, n, warnings)
    if args.stat == "maxep":
        report = mc_null_test("maxep", Y, design, S=args.reps, alpha=args.alpha,
                              rng=RngStream(args.seed), workers=args.workers)
        report.argmax_pair = [i + 1 for i in report.argmax_pair]
        report.warnings = warnings
    else:
        res = spiked_test(Y, design, c, alpha=args.alpha)
        hx, _ = design.bases(n, p)
        _, scale = reduce_direction(c, hx)
        if scale < 1.0 - 1e-12:
            warnings.append(f"direction has a component in the row-design space; |H c|^2 = {scale:.6g}")
        report = TestReport(
            method="spiked", n=n, p=p, q1=design.q1, q2=design.q2(n), n_eff=res.n_eff, p_eff=res.p_eff,
            statistic=res.t, critical_value=res.critical_value, p_value=res.p_value, alpha=res.alpha,
            null_kind="exact_beta", warnings=warnings,
        )
    d = report.to_dict()
    text = json.dumps(d, indent=2) if args.format == "json" else _report_csv(d)
    _emit(text, args.out)
    return EXIT_OK


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None


def cmd_power_curve(args) -> int:
    _check_common(args)
    n_list = [int(v) for v in _float_list(args.n_list, "--n-list")]
    omegas = _float_list(args.omega_grid, "--omega-grid")
    if any(o < 0 for o in omegas):
        raise UsageError("--omega-grid values must be nonnegative")
    p_rule = args.p if args.p == "half" else int(args.p)
    import warnings as _w

    with _w.catch_warnings():
        _w.simplefilter("ignore")
        if args.method == "analytic":
            table = umpi_power_curve(n_list, p_rule, omegas, args.alpha)
        else:
            pair = parse_pair(args.pair or "1,2", min(n_list))
            table = maxep_power_curve(n_list, p_rule, omegas, args.alpha, S_null=args.null_reps,
                                      S_power=args.reps, rng=RngStream(args.seed), pair=pair,
                                      workers=args.workers)
    if args.format == "csv":
        text = table.to_csv()
    else:
        text = json.dumps([r.__dict__ for r in table.rows], indent=2)
    _emit(text, args.out)
    if args.plot_data:
        Path(args.plot_data).write_text(table.to_plot_data())
    return EXIT_OK


def cmd_simulate_null(args) -> int:
    _check_common(args)
    if args.data is not None:
        Y = read_data(args.data, args.cols_first, args.log)
        n, p = Y.shape
    elif args.n is not None and args.p is not None:
        n, p = args.n, args.p
    else:
        raise UsageError("give --data or both --n and --p")
    design = parse_design(args.design, n, p)
    c = _direction(args, n, [])
    null = simulate_null(args.stat, n, p, design, S=args.reps, rng=RngStream(args.seed), c=c,
                         workers=args.workers)
    if args.format == "csv":
        text = "statistic\n" + "".join(f"{v!r}\n" for v in null.tolist())
    else:
        n_eff, p_eff = effective_dims(n, p, design)
        text = json.dumps({"method": args.stat, "n": n, "p": p, "n_eff": n_eff, "p_eff": p_eff,
                           "S": args.reps, "seed": args.seed, "null": null.tolist()})
    _emit(text, args.out)
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rowcov", description="Invariant tests of row covariance.")
    parser.add_argument("--version", action="version", version=f"rowcov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, reps_default=DEFAULT_REPS):
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--reps", type=int, default=reps_default, help="Monte Carlo replicates")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", help="also write the output to this file")

    def data_opts(sp, required):
        sp.add_argument("--data", required=required, help="CSV, rows = observations")
        sp.add_argument("--design", default="colmeans",
                        help="zero | colmeans | reg:X.csv | rowcol:X.csv,W.csv ('ones' = intercept)")
        sp.add_argument("--stat", choices=("spiked", "maxep"), default="maxep")
        sp.add_argument("--c-file", help="direction vector for --stat spiked")
        sp.add_argument("--pair", help="1-based rows i,j; direction (e_i + e_j)/sqrt(2)")
        sp.add_argument("--cols-first", type=int, help="use only the first K columns")
        sp.add_argument("--log", action="store_true", help="log-transform the data")

    sp = sub.add_parser("test", help="run a test and print a JSON report")
    data_opts(sp, True)
    common(sp)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("power-curve", help="power table as CSV")
    sp.add_argument("--method", choices=("analytic", "maxep"), default="analytic")
    sp.add_argument("--n-list", default="20,40,80,160,320")
    sp.add_argument("--p", default="half", help="integer or 'half' (p = n // 2)")
    sp.add_argument("--omega-grid", default="0,1,2,5,10")
    sp.add_argument("--null-reps", type=int, default=DEFAULT_REPS)
    sp.add_argument("--pair", help="1-based spiked pair for --method maxep (default 1,2)")
    sp.add_argument("--plot-data", help="write plain-text plot data (x = omega) here")
    common(sp, reps_default=2000)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_power_curve)

    sp = sub.add_parser("simulate-null", help="raw Monte Carlo null sample")
    data_opts(sp, False)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    common(sp)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_simulate_null)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stdout.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except RowCovError as exc:
        return _fail(exc.kind, str(exc), EXIT_USAGE)
    except OSError as exc:
        return _fail("io_error", str(exc), EXIT_USAGE)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        return _fail("numerical_failure", str(exc), EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
