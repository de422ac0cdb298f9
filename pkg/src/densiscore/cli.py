"""Command-line front end.

Exit codes:
    0  success
    1  unexpected error
    2  malformed input (missing file or column, non-numeric cell, empty file)
    3  degenerate sample (zero spread, too few points) or failed bandwidth search
    4  some metric has a zero denominator (the partial report is still written)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import density as dens
from .errors import DegenerateSample, OptimizationFailed
from .experiments import (
    ChunkStressResult,
    RegressorOptions,
    StudyResult,
    SyntheticSpec,
    run_chunk_study,
    run_invariance_study,
    synthetic_chunk_data,
)
from .metrics import (
    METRICS,
    MODES,
    DensityOptions,
    EvalSet,
    fit_models,
    full_report,
    reports_differ,
)

log = logging.getLogger("densiscore")

EXIT_OK, EXIT_ERROR, EXIT_INPUT, EXIT_DEGENERATE, EXIT_ZERO_DENOMINATOR = 0, 1, 2, 3, 4

RECORD_COLUMNS = ["metric", "mode", "mean_convention", "value", "n", "ess", "bandwidth",
                  "weight_min", "weight_max", "error"]
TIDY_COLUMNS = ["study", "dataset_index", "metric", "mode", "mean_convention", "value"]


class MalformedInput(Exception):
    pass


def _method(name: str) -> str:
    return name.replace("-", "_")


def read_table(path: str) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row, returned column-wise."""
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return {}
    header = [h.strip() for h in header]
    rows = [r for r in reader if any(c.strip() for c in r)]
    cols: dict[str, list[float]] = {h: [] for h in header}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise MalformedInput(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        for h, cell in zip(header, row):
            try:
                v = float(cell)
            except ValueError:
                raise MalformedInput(f"line {lineno}: column {h!r} is not numeric: {cell!r}") from None
            if not math.isfinite(v):
                raise MalformedInput(f"line {lineno}: column {h!r} is not finite")
            cols[h].append(v)
    return {h: np.asarray(v) for h, v in cols.items()}


def _column(table: dict, name: str) -> np.ndarray:
    if name not in table:
        raise MalformedInput(f"missing column {name!r}")
    if table[name].size == 0:
        raise MalformedInput(f"column {name!r} has no rows")
    return table[name]


def _x_columns(table: dict) -> Optional[np.ndarray]:
    names = []
    while f"x{len(names)}" in table:
        names.append(f"x{len(names)}")
    if not names:
        return None
    return np.column_stack([table[n] for n in names])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _base(path: str) -> str:
    p = Path(path)
    return str(p.with_suffix("")) if p.suffix in (".json", ".csv") else str(p)


def _density_options(args) -> DensityOptions:
    return DensityOptions(_method(args.method), args.efficient, args.floor_ratio, args.seed)


# ---------------------------------------------------------------------------


def cmd_density_fit(args) -> int:
    table = read_table(args.input)
    values = _column(table, args.column)
    method = _method(args.method)
    if method == "histogram":
        model = dens.histogram_density(values)
        bandwidth = model.meta["bin_width"]
    else:
        model = dens.fit(values, method, args.efficient, seed=args.seed)
        bandwidth = model.bandwidth.h[0]
    summary = {
        "column": args.column,
        "method": method,
        "efficient": bool(args.efficient),
        "bandwidth": bandwidth,
        "n": int(values.size),
        "integral_check": dens.integral_check(model),
    }
    _emit(_json_text(summary), args.out)
    curve_path = args.curve or (None if args.out == "-" else _base(args.out) + "_curve.csv")
    if curve_path:
        t, g = dens.curve(model, 512)
        _emit(_csv_text([{"t": a, "density": b} for a, b in zip(t.tolist(), g.tolist())], ["t", "density"]),
              curve_path)
    log.info("bandwidth %.6g (%s), integral %.6f", bandwidth, method, summary["integral_check"])
    return EXIT_OK


def cmd_score(args) -> int:
    table = read_table(args.input)
    actual = _column(table, "actual")
    predicted = _column(table, "predicted")
    X = _x_columns(table)
    base_weights = _column(table, args.weight_column) if args.weight_column else None
    try:
        es = EvalSet(actual, predicted, X)
    except ValueError as exc:
        raise MalformedInput(str(exc)) from exc
    modes = [m for m in args.modes.split(",") if m]
    for m in modes:
        if m not in MODES:
            raise MalformedInput(f"unknown mode {m!r}")
    warnings = []
    if "xw" in modes and X is None:
        warnings.append("no x columns; xw skipped")
        modes.remove("xw")
    opts = _density_options(args)
    y_model = x_model = None
    try:
        y_model, _ = fit_models(es, [m for m in modes if m == "yw"], opts)
    except (DegenerateSample, OptimizationFailed) as exc:
        warnings.append(f"cannot fit the density of actual values ({exc}); yw skipped")
        modes.remove("yw")
    if "xw" in modes:
        _, x_model = fit_models(es, ["xw"], opts)
    for w in warnings:
        log.warning(w)

    def run(convention):
        return full_report(es, y_model, x_model, modes=modes, mean_convention=convention,
                           floor_ratio=args.floor_ratio, base_weights=base_weights)

    reports = list(run(args.mean).values())
    other = "plain" if args.mean == "weighted" else "weighted"
    alt = run(other)
    reports += [alt[r.mode] for r in reports if reports_differ(r, alt[r.mode])]

    records = [rec for r in reports for rec in r.to_records()]
    if args.format == "csv":
        text = _csv_text(records, RECORD_COLUMNS)
    else:
        text = _json_text({"records": records, "warnings": warnings})
    _emit(text, args.out)
    if any(r.errors for r in reports):
        undefined = sorted({m for r in reports for m in r.errors})
        log.warning("undefined metrics (zero denominator): %s", ", ".join(undefined))
        return EXIT_ZERO_DENOMINATOR
    return EXIT_OK


def _write_study(result: StudyResult, args) -> None:
    json_text = _json_text(result.to_dict())
    csv_text = _csv_text(result.tidy_rows(), TIDY_COLUMNS)
    if args.out == "-":
        sys.stdout.write(csv_text if args.format == "csv" else json_text)
    else:
        base = _base(args.out)
        _emit(json_text, base + ".json")
        _emit(csv_text, base + ".csv")
    sys.stderr.write(spread_table(result))


def spread_table(result: StudyResult) -> str:
    modes = result.modes
    lines = ["spread (max-min)/|mean|", "metric " + " ".join(f"{m:>9}" for m in modes)]
    for metric in METRICS:
        lines.append(f"{metric:<6} " + " ".join(f"{result.spread(metric, m):9.4f}" for m in modes))
    return "\n".join(lines) + "\n"


def cmd_bench_synthetic(args) -> int:
    spec = SyntheticSpec(function_id=args.function, seed=args.seed)
    result = run_invariance_study(
        spec,
        test_n=args.test_n,
        regressor=RegressorOptions(args.rbf_gamma, args.ridge_lambda),
        density=_density_options(args),
        mean_convention=args.mean,
    )
    _write_study(result, args)
    return EXIT_OK


def cmd_bench_stress(args) -> int:
    if args.input:
        table = read_table(args.input)
        X = _x_columns(table)
        if X is None:
            raise MalformedInput("missing column 'x0'")
        es = EvalSet(_column(table, "actual"), _column(table, "predicted"), X)
        source = {"input": args.input}
    else:
        spec = SyntheticSpec(function_id=args.synthetic, seed=args.seed)
        es = synthetic_chunk_data(spec, args.n, RegressorOptions(args.rbf_gamma, args.ridge_lambda))
        source = {"synthetic": args.synthetic, "seed": args.seed}
    result: ChunkStressResult = run_chunk_study(
        es, k=args.k, reps=args.reps, density=_density_options(args), mean_convention=args.mean,
        oracle_weights=args.oracle_weights, config=source,
    )
    _write_study(result, args)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _density_flags(p: argparse.ArgumentParser, with_weighting: bool = True) -> None:
    p.add_argument("--method", default="cv-ls", choices=["scott", "silverman", "cv-ml", "cv-ls"])
    p.add_argument("--efficient", action="store_true", help="cross-validate on random sub-blocks")
    p.add_argument("--seed", type=int, default=0)
    if with_weighting:
        p.add_argument("--floor-ratio", type=float, default=0.0)
        p.add_argument("--mean", choices=["weighted", "plain"], default="weighted")


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=["json", "csv"], default="json",
                   help="format written to stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densiscore", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_density = sub.add_parser("density", help="density estimation")
    dsub = p_density.add_subparsers(dest="action", required=True)
    p_fit = dsub.add_parser("fit", help="fit a KDE (or histogram) to one CSV column")
    p_fit.add_argument("input")
    p_fit.add_argument("--column", default="actual")
    p_fit.add_argument("--method", default="cv-ls",
                       choices=["scott", "silverman", "cv-ml", "cv-ls", "histogram"])
    p_fit.add_argument("--efficient", action="store_true")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", default="-")
    p_fit.add_argument("--curve", default=None, help="path of the 512-point curve CSV")
    p_fit.set_defaults(func=cmd_density_fit)

    p_score = sub.add_parser("score", help="nw/yw/xw metrics for a prediction file")
    p_score.add_argument("input", help="CSV with columns actual, predicted and optionally x0..x{d-1}")
    p_score.add_argument("--modes", default="nw,yw,xw")
    p_score.add_argument("--weight-column", default=None,
                         help="column of extra per-row weights multiplied into every mode")
    _density_flags(p_score)
    _output_flags(p_score)
    p_score.set_defaults(func=cmd_score)

    p_bench = sub.add_parser("bench", help="distribution-shift studies")
    bsub = p_bench.add_subparsers(dest="action", required=True)

    p_syn = bsub.add_parser("synthetic", help="seven shifted synthetic test sets")
    p_syn.add_argument("--function", choices=["f1", "f2", "f3"], default="f1")
    p_syn.add_argument("--test-n", type=int, default=1000)
    _regressor_flags(p_syn)
    _density_flags(p_syn)
    _output_flags(p_syn)
    p_syn.set_defaults(func=cmd_bench_synthetic)

    p_stress = bsub.add_parser("stress", help="chunk-augmentation stress study")
    src = p_stress.add_mutually_exclusive_group()
    src.add_argument("--input", help="CSV with x0, actual, predicted")
    src.add_argument("--synthetic", choices=["f1", "f2", "f3"], default="f2")
    p_stress.add_argument("--n", type=int, default=1000, help="synthetic sample size")
    p_stress.add_argument("--k", type=int, default=5)
    p_stress.add_argument("--reps", type=int, default=5)
    p_stress.add_argument("--oracle-weights", action="store_true",
                          help="add an 'ow' mode weighting rows by 1/multiplicity")
    _regressor_flags(p_stress)
    _density_flags(p_stress)
    _output_flags(p_stress)
    p_stress.set_defaults(func=cmd_bench_stress)
    return parser


def _regressor_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rbf-gamma", type=float, default=10.0)
    p.add_argument("--ridge-lambda", type=float, default=None,
                   help="default: 10 for f1/f3, 2 for f2")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except MalformedInput as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (DegenerateSample, OptimizationFailed) as exc:
        log.error("degenerate sample: %s", exc)
        return EXIT_DEGENERATE
    except Exception as exc:  # noqa: BLE001
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
