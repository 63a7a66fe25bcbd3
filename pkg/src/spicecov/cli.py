"""Command-line entry point: ``spicecov {simulate,estimate,tune,classify,bench}``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import LabeledData
from .errors import SpiceError
from .estimators import fit_spice, ledoit_wolf, sample_covariance
from .experiments import (ClassificationConfig, SimulationConfig, model_file_label, run_bench,
                          run_classification, run_simulation)
from .linalg import inverse_pd
from .solver import INIT_STRATEGIES, PenaltySpec, SolverConfig
from .tuning import select_lambda_cv, select_lambda_validation

logger = logging.getLogger("spicecov")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input files or option values; reported with exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ formatting


def fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_matrix(path: Path, m: np.ndarray, names: Sequence[str] | None = None) -> None:
    names = list(names) if names is not None else [f"v{j + 1}" for j in range(m.shape[1])]
    write_csv(path, names, m.tolist())


def read_numeric_csv(path, label_column: str | None = None):
    """Header row plus numeric rows; returns (names, data, labels or None).

    Raises ``UsageError`` naming the line and column of the first bad cell.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: line 1: empty file, expected a header row")
    header = [h.strip() for h in rows[0]]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise UsageError(f"{path}: line 1: no column named {label_column!r}")
        label_idx = header.index(label_column)
    data, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise UsageError(f"{path}: line {lineno}: expected {len(header)} columns, found {len(row)}")
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise UsageError(f"{path}: line {lineno}, column {col}: non-numeric value {cell.strip()!r}") from None
            if not math.isfinite(v):
                raise UsageError(f"{path}: line {lineno}, column {col}: non-finite value {cell.strip()!r}")
            values.append(v)
        if label_idx is not None:
            lab = values.pop(label_idx)
            if lab not in (0.0, 1.0):
                raise UsageError(f"{path}: line {lineno}, column {label_idx + 1}: label must be 0 or 1")
            labels.append(int(lab))
        data.append(values)
    names = [h for i, h in enumerate(header) if i != label_idx]
    x = np.array(data, dtype=float).reshape(len(data), len(names))
    return names, x, (np.array(labels, dtype=int) if label_idx is not None else None)


# ------------------------------------------------------------------ option types


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned integer, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite nonnegative number, got {text!r}")
    return v


def _positive_float(text):
    v = _nonneg_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("expected a positive number")
    return v


def _q(text):
    v = _nonneg_float(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"q must be at least 1, got {v}")
    return v


def _grid(text):
    """``lo:hi:k`` -> ``k`` log-spaced values."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:k, got {text!r}")
    try:
        lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:k, got {text!r}") from None
    if not (0 < lo <= hi and k >= 1) or (k > 1 and lo == hi):
        raise argparse.ArgumentTypeError("grid needs 0 < lo < hi and k >= 1 (lo == hi only with k = 1)")
    return tuple(np.geomspace(lo, hi, k).tolist()) if k > 1 else (lo,)


def _tune(text):
    name, _, k = text.partition(":")
    if name != "cv":
        raise argparse.ArgumentTypeError(f"--tune expects cv:k, got {text!r}")
    return _positive_int(k or "5")


def _int_list(text):
    try:
        values = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError("dimensions must be integers >= 2")
    return values


def _str_list(text):
    values = tuple(t.strip() for t in text.split(",") if t.strip())
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return values


def _pair(text):
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers 'n0,n1', got {text!r}") from None
    return a, b


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser, lam_default=None):
    p.add_argument("--config", type=Path, help="key = value file; command-line flags win")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--q", type=_q, default=1.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=_nonneg_float, default=lam_default)
    g.add_argument("--grid", type=_grid, default=None, help="lo:hi:k, k log-spaced values")
    p.add_argument("--mode", choices=("corr", "cov"), default="corr")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--inner-tol", type=_positive_float, default=SolverConfig.inner_tol)
    p.add_argument("--outer-tol", type=_positive_float, default=SolverConfig.outer_tol)
    p.add_argument("--max-inner-sweeps", type=_positive_int, default=SolverConfig.max_inner_sweeps)
    p.add_argument("--max-outer-iters", type=_positive_int, default=SolverConfig.max_outer_iters)
    p.add_argument("--init-strategy", choices=INIT_STRATEGIES, default=None)
    p.add_argument("--no-refine", action="store_true",
                   help="skip the exact q=1 finishing step; report the coordinate-descent iterate")
    p.add_argument("--grid-size", type=_positive_int, default=20)
    p.add_argument("--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spicecov", description="Sparse concentration-matrix estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte Carlo comparison of estimators on synthetic models")
    _common(p)
    p.add_argument("--models", type=_str_list, default=("ar1", "ar4", "sparse:0.1", "sparse:0.5"),
                   help="comma list of ar1, ar4, sparse:<alpha>")
    p.add_argument("--p", dest="p_list", type=_int_list, default=(30,))
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--n-val", type=_positive_int, default=100)
    p.add_argument("--reps", type=_positive_int, default=50)
    p.add_argument("--estimators", type=_str_list, default=("sample", "ledoit_wolf", "spice"))

    p = sub.add_parser("estimate", help="fit a concentration matrix to a CSV data file")
    _common(p)
    p.add_argument("input", type=Path)
    p.add_argument("--estimator", choices=("spice", "sample", "ledoit_wolf"), default="spice")
    p.add_argument("--tune", type=_tune, default=None, metavar="cv:k")

    p = sub.add_parser("tune", help="select the penalty level on a grid")
    _common(p)
    p.add_argument("input", type=Path)
    p.add_argument("--validation", type=Path, default=None, help="held-out CSV; otherwise k-fold CV")
    p.add_argument("--tune", type=_tune, default=5, metavar="cv:k")

    p = sub.add_parser("classify", help="LDA over random stratified splits of a labeled CSV")
    _common(p)
    p.add_argument("input", type=Path)
    p.add_argument("--label-column", default="label")
    p.add_argument("--splits", type=_positive_int, default=100)
    p.add_argument("--n-train", type=_pair, default=None, metavar="n0,n1",
                   help="training rows per class (default: two thirds of each class)")
    p.add_argument("--p-keep", type=_positive_int, default=None)
    p.add_argument("--selection", choices=("per_split", "global"), default="per_split")
    p.add_argument("--schemes", type=_str_list, default=("A", "B"))
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--estimators", type=_str_list, default=("naive_bayes", "ledoit_wolf", "spice"))

    p = sub.add_parser("bench", help="time single solves on AR(4) data")
    _common(p, lam_default=0.2)
    p.add_argument("--p", dest="p_list", type=_int_list, default=(50, 100, 200))
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--repeats", type=_positive_int, default=1, help="report the fastest of this many solves")
    return parser


def read_config(path: Path, subparser: argparse.ArgumentParser) -> dict:
    """Parse ``key = value`` lines into typed defaults for ``subparser``.

    Blank lines and ``#`` comments are skipped; keys are option names with
    ``-`` or ``_``. Errors name the line and column.
    """
    actions = {a.dest: a for a in subparser._actions if a.option_strings}
    for a in subparser._actions:
        for opt in a.option_strings:
            actions.setdefault(opt.lstrip("-").replace("-", "_"), a)
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(raw) - len(raw.lstrip()) + 1
            raise UsageError(f"{path}: line {lineno}, column {col}: expected 'key = value'")
        key, _, value = line.partition("=")
        name = key.strip().replace("-", "_")
        col_key = len(key) - len(key.lstrip()) + 1
        col_val = len(key) + 2 + (len(value) - len(value.lstrip()))
        action = actions.get(name)
        if action is None or action.dest in ("config", "help"):
            raise UsageError(f"{path}: line {lineno}, column {col_key}: unknown key {key.strip()!r}")
        value = value.strip()
        try:
            if isinstance(action, argparse._StoreTrueAction):
                if value.lower() not in ("true", "false"):
                    raise argparse.ArgumentTypeError("expected true or false")
                typed = value.lower() == "true"
            else:
                typed = action.type(value) if action.type else value
                if action.choices is not None and typed not in action.choices:
                    raise argparse.ArgumentTypeError(f"expected one of {sorted(action.choices)}")
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{path}: line {lineno}, column {col_val}: {exc}") from None
        out[action.dest] = typed
    return out


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        defaults = read_config(args.config, sub)
        if "lam" in defaults and "grid" in defaults:
            raise UsageError(f"{args.config}: 'lambda' and 'grid' are mutually exclusive")
        # A flag on the command line overrides the matching config entry; the
        # lambda/grid pair counts as one setting.
        if any(a in ("--lambda", "--grid") or a.startswith(("--lambda=", "--grid=")) for a in argv):
            defaults.pop("lam", None)
            defaults.pop("grid", None)
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _solver_config(args) -> SolverConfig:
    return SolverConfig(inner_tol=args.inner_tol, outer_tol=args.outer_tol,
                        max_inner_sweeps=args.max_inner_sweeps, max_outer_iters=args.max_outer_iters,
                        init_strategy=args.init_strategy, refine=not args.no_refine)


def _grid_arg(args):
    if args.grid is not None:
        return tuple(args.grid)
    if args.lam is not None:
        return (args.lam,)
    return None


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    config = SimulationConfig(models=tuple(args.models), p_list=tuple(args.p_list), n=args.n, n_val=args.n_val,
                              n_reps=args.reps, seed=args.seed, estimators=tuple(args.estimators),
                              grid=_grid_arg(args), grid_size=args.grid_size, q=args.q, mode=args.mode,
                              solver=_solver_config(args), workers=args.threads)
    outcome = run_simulation(config)
    write_csv(args.out / "kl_summary.csv", ("model", "p", "estimator", "mean", "se", "n_reps"), outcome.kl_rows)
    if "spice" in config.estimators:
        write_csv(args.out / "sparsity_summary.csv", ("model", "p", "tp_mean", "tp_se", "tn_mean", "tn_se"),
                  outcome.sparsity_rows)
        write_csv(args.out / "frobenius_summary.csv", ("model", "p", "mean", "se", "n_reps"),
                  outcome.frobenius_rows)
        for (key, p), counts in outcome.zero_counts.items():
            write_matrix(args.out / f"zero_counts_{model_file_label(key)}_{p}.csv", counts)
    if outcome.n_failed:
        print(f"{outcome.n_failed} replication(s) failed and were excluded", file=sys.stderr)
    return EXIT_OK


def _report_lines(pairs):
    return "".join(f"{k} = {fmt(v)}\n" for k, v in pairs)


def cmd_estimate(args) -> int:
    names, x, _ = read_numeric_csv(args.input)
    s = sample_covariance(x)
    n = x.shape[0]
    if args.estimator != "spice":
        omega = inverse_pd(s if args.estimator == "sample" else ledoit_wolf(x))
        zeros = np.zeros_like(omega, dtype=bool)
        report = [("estimator", args.estimator), ("lambda", None), ("q", None), ("objective", None),
                  ("outer_iters", None), ("converged", None), ("nnz_offdiag", int(np.count_nonzero(omega)) - omega.shape[0])]
    else:
        cfg = _solver_config(args)
        pen = PenaltySpec(0.0, q=args.q)
        grid = _grid_arg(args)
        if args.tune is not None or grid is None or len(grid) > 1:
            tuned = select_lambda_cv(x, args.tune or 5, grid, "cv_likelihood", pen, cfg, seed=args.seed, mode=args.mode)
            lam = tuned.best_lambda
        else:
            lam = grid[0]
        fit = fit_spice(s, pen.with_lambda(lam), cfg, n_obs=n, mode=args.mode)
        omega, zeros = fit.omega_hat, fit.zero_pattern
        report = [("estimator", "spice"), ("lambda", lam), ("q", args.q), ("objective", fit.objective),
                  ("outer_iters", fit.outer_iters), ("converged", fit.converged), ("nnz_offdiag", fit.nnz_offdiag)]
    write_matrix(args.out / "omega_hat.csv", omega, names)
    write_matrix(args.out / "zero_pattern.csv", zeros.astype(int), names)
    (args.out / "report.txt").write_text(_report_lines(report))
    return EXIT_OK


def cmd_tune(args) -> int:
    names, x, _ = read_numeric_csv(args.input)
    pen = PenaltySpec(0.0, q=args.q)
    cfg = _solver_config(args)
    grid = _grid_arg(args)
    if args.validation is not None:
        vnames, xv, _ = read_numeric_csv(args.validation)
        if len(vnames) != len(names):
            raise UsageError(f"{args.validation}: {len(vnames)} columns, training data has {len(names)}")
        result = select_lambda_validation(x, xv, grid, pen, cfg, args.mode)
    else:
        result = select_lambda_cv(x, args.tune, grid, "cv_likelihood", pen, cfg, seed=args.seed, mode=args.mode)
    write_csv(args.out / "tuning.csv", ("lambda", "score"), result.criterion_values)
    (args.out / "report.txt").write_text(_report_lines([
        ("criterion", result.criterion), ("best_lambda", result.best_lambda), ("best_score", result.best_score),
        ("failed_fits", len(result.failures))]))
    return EXIT_OK


def cmd_classify(args) -> int:
    _, x, labels = read_numeric_csv(args.input, label_column=args.label_column)
    data = LabeledData(x, labels)
    counts = data.counts
    if min(counts) == 0:
        raise SpiceError(f"{args.input}: both classes are required, got counts {counts}")
    n_train = args.n_train or tuple(max(1, (2 * c) // 3) for c in counts)
    config = ClassificationConfig(n_splits=args.splits, n_train=n_train, p_keep=args.p_keep, selection=args.selection,
                                  k=args.k, seed=args.seed, estimators=tuple(args.estimators),
                                  schemes=tuple(args.schemes), grid=_grid_arg(args), grid_size=args.grid_size,
                                  q=args.q, mode=args.mode, solver=_solver_config(args), workers=args.threads)
    outcome = run_classification(data, config)
    write_csv(args.out / "classification_report.csv", ("estimator", "scheme", "mean_error_pct", "se"),
              [row[:4] for row in outcome.rows])
    if outcome.n_failed:
        print(f"{outcome.n_failed} split(s) failed and were excluded", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    lam = args.lam if args.lam is not None else args.grid[0]
    rows = run_bench(args.p_list, lam=lam, n=args.n, seed=args.seed, q=args.q, solver=_solver_config(args),
                     mode=args.mode, repeats=args.repeats)
    write_csv(args.out / "timing.csv", ("p", "seconds", "outer_iters"),
              [(r.p, r.seconds, r.outer_iters) for r in rows])
    for a, b in zip(rows[:-1], rows[1:]):
        print(f"p {a.p} -> {b.p}: time ratio {b.seconds / a.seconds:.2f}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "tune": cmd_tune, "classify": cmd_classify,
            "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpiceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
