"""Command-line interface: ``blocklogit {fit,predict,simulate,bench}``.

Exit codes
----------
0  success (for ``fit``: converged by ftol or gtol)
1  other library error (for example a malformed model file)
2  usage error (bad or missing arguments)
3  formula error
4  data error, including unreadable input files
5  rank deficiency or singular Hessian
6  ``fit`` stopped at maxiter without converging (outputs are still written)
7  line search failure
8  models not nested
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .bench import run_bench
from .dataset import CsvConfig, read_long_csv, subset_alternatives, write_long_csv
from .design import build_design
from .errors import BlockLogitError
from .formula import format_formula, parse_formula
from .inference import format_est_stat, format_model_size, predict_probs, summarize
from .serialize import load_model, model_to_dict, save_model
from .simgen import KINDS, ProblemSpec, make_problem
from .solver import SolverControls, fit

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_NOT_CONVERGED"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 4
EXIT_NOT_CONVERGED = 6


def _csv_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _workers_list(text):
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid worker list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blocklogit", description="Multinomial logit estimation by Newton-Raphson.")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model to a long-format CSV")
    f.add_argument("--data", required=True, help="long-format CSV file")
    f.add_argument("--formula", required=True, help='e.g. "choice ~ price | income | catch"')
    f.add_argument("--id-col", default="id")
    f.add_argument("--alt-col", default="alt")
    f.add_argument("--choice-col", default="choice")
    f.add_argument("--base", default="auto", help="base alternative (default: first in sorted order)")
    f.add_argument("--maxiter", type=int, default=50)
    f.add_argument("--ftol", type=float, default=1e-6)
    f.add_argument("--gtol", type=float, default=1e-6)
    f.add_argument("--lindeptol", type=float, default=1e-6)
    f.add_argument("--ncores", type=int, default=1, help="Hessian worker threads")
    f.add_argument("--na", choices=("fail", "drop"), default="fail")
    f.add_argument("--weights", default=None, help="per-individual weight column")
    f.add_argument("--alt-subset", type=_csv_list, default=None, help="comma-separated alternatives to keep")
    f.add_argument("--start", default=None, help="JSON file: list of values or {name: value}")
    f.add_argument("--ridge-on-failure", action="store_true")
    f.add_argument("--out", default=None, help="write the fitted model as JSON")
    f.add_argument("--format", choices=("text", "json"), default="text")
    f.add_argument("--print-level", type=int, default=0, help=">0 logs each iteration to stderr")

    pr = sub.add_parser("predict", help="choice probabilities from a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", default=None, help="output CSV (default: stdout)")

    s = sub.add_parser("simulate", help="generate a synthetic benchmark dataset")
    s.add_argument("--kind", choices=KINDS, required=True)
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--p", type=int, default=50)
    s.add_argument("--N", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--yz-split", type=int, default=5)
    s.add_argument("--out", required=True, help="CSV path; true coefficients go to <stem>.truth.json")

    b = sub.add_parser("bench", help="phase timings and parallel Hessian speedup")
    b.add_argument("--kind", choices=KINDS, required=True)
    b.add_argument("--K", type=int, required=True)
    b.add_argument("--p", type=int, default=50)
    b.add_argument("--N", type=int, default=None)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--yz-split", type=int, default=5)
    b.add_argument("--workers", type=_workers_list, default=[1, 2, 4])
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--out", default=None, help="JSON report (default: stdout)")
    b.add_argument("--csv", default=None, help="also write a CSV table")
    return p


def _read_start(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, (list, dict)):
        raise BlockLogitError("--start file must hold a JSON list or object")
    return doc


def cmd_fit(a, out) -> int:
    cfg = CsvConfig(id_col=a.id_col, alt_col=a.alt_col, response_col=a.choice_col,
                    na_policy=a.na, weights_col=a.weights)
    formula = parse_formula(a.formula)
    ds = read_long_csv(a.data, cfg)
    if a.alt_subset:
        ds = subset_alternatives(ds, a.alt_subset)
    controls = SolverControls(maxiter=a.maxiter, ftol=a.ftol, gtol=a.gtol, workers=a.ncores,
                              ridge_on_failure=a.ridge_on_failure)
    start = _read_start(a.start) if a.start else None
    res = fit(ds, formula, a.base, a.lindeptol, controls, start)
    columns = {"id_col": a.id_col, "alt_col": a.alt_col, "response_col": a.choice_col,
               "weights_col": a.weights, "alt_subset": a.alt_subset}
    if a.out:
        save_model(res, a.out, columns)

    summary = summarize(res)
    if a.format == "json":
        doc = model_to_dict(res, columns)
        doc.update(coefficients=summary.to_records(), iterations=res.iterations,
                   linesearch_iterations=res.linesearch_iterations, grad_norm=res.grad_norm,
                   loglik_delta=None if res.loglik_delta != res.loglik_delta else res.loglik_delta,
                   stop_message=res.stop_message(), timings=res.timings, workers=controls.workers,
                   model_size=res.model_size)
        json.dump(doc, out, indent=1)
        out.write("\n")
    else:
        out.write(f"Formula: {format_formula(res.info.formula)}\n")
        out.write(f"Base alternative: {res.info.base}\n\n")
        out.write(format_model_size(res) + "\n")
        if res.info.dropped_columns:
            out.write("Dropped collinear columns: " + ", ".join(res.info.dropped_columns) + "\n")
        out.write("\n" + summary.to_text() + "\n\n")
        out.write(f"Log-Likelihood: {res.loglik:.6f}, df = {res.n_params}\n")
        out.write(format_est_stat(res) + "\n")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_predict(a, out) -> int:
    model = load_model(a.model)
    cols = model.columns
    cfg = CsvConfig(id_col=cols.get("id_col") or "id", alt_col=cols.get("alt_col") or "alt",
                    response_col=None, variable_cols=model.info.formula.variables)
    ds = read_long_csv(a.data, cfg)
    if cols.get("alt_subset"):
        ds = subset_alternatives(ds, cols["alt_subset"])
    P = predict_probs(model, ds).P
    alts = model.info.alternatives
    order = sorted(range(len(alts)), key=lambda k: alts[k])  # columns in sorted order

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([cfg.id_col] + [alts[k] for k in order])
        for i, row in zip(ds.ids, P):
            w.writerow([i] + [repr(float(row[k])) for k in order])

    if a.out:
        with open(a.out, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
    else:
        emit(out)
    return EXIT_OK


def cmd_simulate(a, out) -> int:
    spec = ProblemSpec(a.kind, a.K, a.p, a.N, a.seed, a.yz_split)
    ds, formula, theta = make_problem(spec)
    write_long_csv(ds, a.out)
    _, layout = build_design(ds, formula)
    truth = Path(a.out).with_suffix(".truth.json")
    with open(truth, "w", encoding="utf-8") as fh:
        json.dump({"kind": a.kind, "K": a.K, "p": a.p, "N": spec.n_individuals, "seed": a.seed,
                   "formula": format_formula(formula), "names": list(layout.names),
                   "theta": [float(t) for t in theta]}, fh, indent=1)
        fh.write("\n")
    out.write(f"wrote {a.out} and {truth}\n")
    return EXIT_OK


def cmd_bench(a, out) -> int:
    spec = ProblemSpec(a.kind, a.K, a.p, a.N, a.seed, a.yz_split)
    report = run_bench(spec, a.workers, a.repeats)
    text = json.dumps(report.to_dict(), indent=1) + "\n"
    if a.out:
        Path(a.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    if a.csv:
        Path(a.csv).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None, stdout=None) -> int:
    """Run the CLI; returns the exit code instead of exiting."""
    out = stdout or sys.stdout
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    if getattr(a, "print_level", 0) > 0:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger = logging.getLogger("blocklogit")
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
    try:
        return COMMANDS[a.command](a, out)
    except BlockLogitError as exc:
        print(f"blocklogit {a.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"blocklogit {a.command}: cannot read or write file: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"blocklogit {a.command}: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
