"""Command line interface: fit, predict, outliers, simulate.

Exit codes: 0 success, 2 input error, 3 estimate not computable,
4 degenerate tuning grid.
"""

import argparse
import csv
import sys
import time

import numpy as np

from .classifier import (
    METHODS,
    atomic_write_text,
    classify,
    fit_method,
    load_model,
    save_model,
)
from .datasets import LabeledDataset
from .exceptions import DegenerateGridError, NotComputableError
from .outliers import detect
from .plots import distance_svg, heatmap_svg
from .simulate import (
    ScenarioSpec,
    bench_replicates_csv,
    bench_summary_json,
    run_bench,
)
from .solvers import SolverOptions

__all__ = ["main"]


def _read_csv(path):
    """Parse a comma-separated, dot-decimal, UTF-8 table with a header row.

    Returns (values, group_names, variable_names); group_names is None when
    no case-insensitive "group" column exists.
    """
    with open(path, "r", encoding="utf-8-sig", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    group_cols = [i for i, name in enumerate(header) if name.strip().lower() == "group"]
    if len(group_cols) > 1:
        raise ValueError(f"{path}: multiple group columns")
    group_col = group_cols[0] if group_cols else None
    variable_names = [name.strip() for i, name in enumerate(header) if i != group_col]
    if not variable_names:
        raise ValueError(f"{path}: no numeric columns besides group")
    values = np.empty((len(rows), len(variable_names)))
    group_names = [] if group_col is not None else None
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 2} has {len(row)} fields, expected {len(header)}")
        c = 0
        for i, cell in enumerate(row):
            if i == group_col:
                group_names.append(cell.strip())
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: row {r + 2}, column {header[i]!r}: not a number: {cell!r}"
                ) from None
            if not np.isfinite(value):
                raise ValueError(f"{path}: row {r + 2}, column {header[i]!r}: non-finite value")
            values[r, c] = value
            c += 1
    return values, group_names, variable_names


def _labels_from_names(group_names, path):
    order = []
    for name in group_names:
        if name not in order:
            order.append(name)
    index = {name: i + 1 for i, name in enumerate(order)}
    labels = np.array([index[name] for name in group_names], dtype=np.int64)
    return labels, tuple(order)


def _read_labeled(path):
    values, group_names, variable_names = _read_csv(path)
    if group_names is None:
        raise ValueError(f"{path}: a group column is required")
    labels, label_names = _labels_from_names(group_names, path)
    return LabeledDataset(values, labels, tuple(variable_names), label_names)


def _labels_for_model(group_names, model, path):
    index = {name: i + 1 for i, name in enumerate(model.label_names)}
    labels = np.empty(len(group_names), dtype=np.int64)
    for i, name in enumerate(group_names):
        if name not in index:
            raise ValueError(f"{path}: group {name!r} not present in the model")
        labels[i] = index[name]
    return labels


def _solver_options(args):
    return SolverOptions(tol=args.tol, max_iter=args.max_iter)


def _fmt_float(x):
    return repr(float(x))


def _grid_csv(model):
    lines = ["method,lambda1/rho1,lambda2/rho2,df,bic,converged"]
    for row in model.selection_table:
        p1 = _fmt_float(row.params[0])
        p2 = _fmt_float(row.params[1]) if len(row.params) > 1 else ""
        b = _fmt_float(row.bic) if np.isfinite(row.bic) else "NA"
        lines.append(f"{model.method},{p1},{p2},{row.df},{b},{int(row.converged)}")
    return "\n".join(lines) + "\n"


def cmd_fit(args):
    data = _read_labeled(args.input)
    model = fit_method(args.method, data, _solver_options(args), args.grid_points)
    save_model(model, f"{args.out_prefix}.model.json")
    atomic_write_text(f"{args.out_prefix}.grid.csv", _grid_csv(model))
    print(f"fitted {args.method} on {data.n} rows, {data.p} variables, {data.k} groups")
    if model.precisions.regularization:
        chosen = ", ".join(f"{k}={v:.6g}" for k, v in model.precisions.regularization.items())
        print(f"selected {chosen} (bic {model.selection_bic:.4f}, "
              f"converged {model.precisions.converged})")
    print(f"wrote {args.out_prefix}.model.json and {args.out_prefix}.grid.csv")
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    values, group_names, variable_names = _read_csv(args.input)
    if tuple(variable_names) != model.variable_names:
        raise ValueError(
            f"{args.input}: variables {variable_names} do not match the model "
            f"variables {list(model.variable_names)}"
        )
    truth = None
    if group_names is not None:
        truth = _labels_for_model(group_names, model, args.input)
    report = classify(values, model, truth)
    lines = ["row,predicted," + ",".join(f"score_{name}" for name in model.label_names)]
    for i in range(values.shape[0]):
        name = model.label_names[report.labels[i] - 1]
        scores = ",".join(_fmt_float(s) for s in report.scores[i])
        lines.append(f"{i},{name},{scores}")
    atomic_write_text(f"{args.out_prefix}.predictions.csv", "\n".join(lines) + "\n")
    print(f"predicted {values.shape[0]} rows with {model.method}")
    if report.cc is not None:
        print(f"correct classification: {report.cc:.2f}%")
    print(f"wrote {args.out_prefix}.predictions.csv")
    return 0


def cmd_outliers(args):
    model = load_model(args.model)
    data = _read_labeled(args.input)
    if data.label_names != model.label_names:
        raise ValueError(
            f"{args.input}: groups {list(data.label_names)} do not match the "
            f"model groups {list(model.label_names)}"
        )
    report = detect(data, model)
    names = data.variable_names
    head = (["row", "group", "row_distance", "row_flag"]
            + [f"d_{v}" for v in names] + [f"flag_{v}" for v in names])
    lines = [",".join(head)]
    for i in range(data.n):
        cells = [_fmt_float(x) for x in report.cell_distances[i]]
        flags = [str(int(x)) for x in report.cell_flags[i]]
        lines.append(
            f"{i},{data.label_names[data.labels[i] - 1]},"
            f"{_fmt_float(report.row_distances[i])},{int(report.row_flags[i])},"
            + ",".join(cells) + "," + ",".join(flags)
        )
    atomic_write_text(f"{args.out_prefix}.outliers.csv", "\n".join(lines) + "\n")
    atomic_write_text(f"{args.out_prefix}.heatmap.svg", heatmap_svg(report))
    atomic_write_text(f"{args.out_prefix}.distances.svg", distance_svg(report))
    n_rows = int(report.row_flags.sum())
    n_cells = int(report.cell_flags.sum())
    print(f"flagged {n_rows} rows and {n_cells} cells out of {data.n}x{data.p}")
    print(f"wrote {args.out_prefix}.outliers.csv, .heatmap.svg, .distances.svg")
    return 0


def cmd_simulate(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ValueError("no methods given")
    spec = ScenarioSpec(
        scenario=args.scenario,
        p=args.dim,
        epsilon=args.epsilon,
        n_per_group=args.n_per_group,
        n_test=args.n_test,
        replicates=args.replicates,
        seed=args.seed,
    )
    started = time.perf_counter()
    result = run_bench(spec, methods, _solver_options(args), args.grid_points)
    elapsed = time.perf_counter() - started
    atomic_write_text(f"{args.out_prefix}.replicates.csv", bench_replicates_csv(result))
    atomic_write_text(f"{args.out_prefix}.summary.json", bench_summary_json(result))
    print(f"scenario {spec.scenario}, p={spec.p}, eps={spec.epsilon}, "
          f"R={spec.replicates}, seed={spec.seed}")
    print(f"ran {spec.replicates} replicates of {len(methods)} methods "
          f"in {elapsed:.1f}s")
    for method in result.methods:
        cc = result.mean_cc(method)
        kl = result.mean_kl(method)
        na = result.na_count(method)
        cc_s = "NA" if not np.isfinite(cc) else f"{cc:.1f}"
        kl_s = "NA" if not np.isfinite(kl) else f"{kl:.2f}"
        print(f"  {method:<8} cc {cc_s:>6}  kl {kl_s:>8}  na {na}")
    print(f"wrote {args.out_prefix}.replicates.csv and {args.out_prefix}.summary.json")
    return 0


def _add_solver_flags(parser):
    parser.add_argument("--grid-points", type=int, default=5,
                        help="values per tuning parameter (default 5)")
    parser.add_argument("--tol", type=float, default=1e-5,
                        help="solver convergence tolerance (default 1e-5)")
    parser.add_argument("--max-iter", type=int, default=500,
                        help="solver iteration cap (default 500)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cellshield",
        description="Cellwise-robust regularized discriminant analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a classifier on a labeled CSV")
    p_fit.add_argument("--method", required=True, choices=sorted(METHODS),
                       help="estimator name")
    p_fit.add_argument("--input", required=True, help="training CSV with a group column")
    p_fit.add_argument("--out-prefix", required=True)
    _add_solver_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="classify rows with a saved model")
    p_pred.add_argument("--model", required=True, help="model JSON from fit")
    p_pred.add_argument("--input", required=True,
                        help="CSV with the model's variables, group column optional")
    p_pred.add_argument("--out-prefix", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_out = sub.add_parser("outliers", help="rowwise and cellwise outlier report")
    p_out.add_argument("--model", required=True)
    p_out.add_argument("--input", required=True, help="labeled CSV to screen")
    p_out.add_argument("--out-prefix", required=True)
    p_out.set_defaults(func=cmd_outliers)

    p_sim = sub.add_parser("simulate", help="replicate a synthetic benchmark")
    p_sim.add_argument("--scenario", type=int, required=True, choices=(1, 2))
    p_sim.add_argument("--dim", type=int, required=True, help="number of variables p")
    p_sim.add_argument("--epsilon", type=float, default=0.0,
                       help="cellwise contamination rate (default 0)")
    p_sim.add_argument("--replicates", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--methods", default=",".join(sorted(METHODS)),
                       help="comma-separated method names (default: all twelve)")
    p_sim.add_argument("--n-per-group", type=int, default=30)
    p_sim.add_argument("--n-test", type=int, default=1000)
    p_sim.add_argument("--out-prefix", required=True)
    _add_solver_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateGridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NotComputableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
