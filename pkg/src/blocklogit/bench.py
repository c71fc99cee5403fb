"""Timing harness: phase profile, parallel Hessian speedup, Amdahl analysis.

The serial fraction of a run is the share of total time not spent on
Hessian computation at one worker, which ignores the serial generic
coefficient blocks and so understates it for ``Z``-type problems.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import build_index
from .design import build_design
from .inference import summarize
from .likelihood import hessian_blocked, hessian_dense_oracle
from .simgen import ProblemSpec, make_problem
from .solver import SolverControls, newton_solve

__all__ = [
    "BenchRow",
    "BenchReport",
    "profile_fit",
    "run_bench",
    "amdahl_speedup",
    "blocked_vs_dense_timing",
    "BENCH_REPORT_SCHEMA",
]


def amdahl_speedup(f_s: float, n: int) -> float:
    """Ultimate speedup ``1 / (f_s + (1 - f_s) / n)`` on ``n`` workers."""
    if not 0.0 <= f_s <= 1.0:
        raise ValueError(f"serial fraction must be in [0, 1], got {f_s}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 1.0 / (f_s + (1.0 - f_s) / n)


@dataclass
class BenchRow:
    kind: str
    K: int
    p: int
    N: int
    n_p: int
    workers: int
    repeats: int
    preprocess: float
    newton_total: float
    hessian_total: float
    total: float
    iterations: int
    theta_hat: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("theta_hat")
        return d


@dataclass
class BenchReport:
    rows: list
    speedup: dict
    serial_fraction: float
    amdahl: dict
    identical_estimates: bool

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "speedup": {str(k): v for k, v in self.speedup.items()},
            "serial_fraction": self.serial_fraction,
            "amdahl": {str(k): v for k, v in self.amdahl.items()},
            "identical_estimates": self.identical_estimates,
        }

    def to_csv(self) -> str:
        cols = ["kind", "K", "p", "N", "n_p", "workers", "repeats", "preprocess", "newton_total",
                "hessian_total", "total", "iterations", "speedup", "amdahl"]
        out = [",".join(cols)]
        for r in self.rows:
            d = r.to_dict()
            d["speedup"] = self.speedup[r.workers]
            d["amdahl"] = self.amdahl[r.workers]
            out.append(",".join(str(d[c]) for c in cols))
        return "\n".join(out) + "\n"


def _one_run(ds, formula, controls):
    t0 = time.perf_counter()
    d, _ = build_design(ds, formula)
    index = build_index(ds, d.base)
    t1 = time.perf_counter()
    partial = {"preprocess": t1 - t0}
    try:
        res = newton_solve(d, index, controls)
    except Exception as exc:
        exc.partial_timings = partial
        raise
    summarize(res)
    t3 = time.perf_counter()
    return {
        "preprocess": t1 - t0,
        "newton_total": res.timings["newton_total"],
        "hessian_total": res.timings["hessian_total"],
        "total": t3 - t0,
    }, res


def profile_fit(spec: ProblemSpec, workers: int = 1, repeats: int = 3, warmup: bool = True,
                problem=None) -> BenchRow:
    """Phase timings of the median run among ``repeats`` build and solve runs.

    Data are generated once, outside the timed region (pass ``problem`` to
    reuse a ``make_problem`` output). One warm-up run is discarded when
    ``warmup`` is true. The reported phases all come from the run whose
    total is the (lower) median.

    Raises
    ------
    BlockLogitError
        A failed fit propagates with a ``partial_timings`` attribute.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ds, formula, _ = problem if problem is not None else make_problem(spec)
    controls = SolverControls(workers=workers)
    samples = []
    res = None
    for r in range(repeats + int(warmup)):
        t, res = _one_run(ds, formula, controls)
        if r >= int(warmup):
            samples.append(t)
    # every phase comes from the run with the median total, so phase containment holds
    med = sorted(samples, key=lambda t: t["total"])[(len(samples) - 1) // 2]
    return BenchRow(spec.kind, spec.K, spec.p, spec.n_individuals, res.n_params, workers, repeats,
                    med["preprocess"], med["newton_total"], med["hessian_total"], med["total"],
                    res.iterations, res.theta_hat)


def run_bench(spec: ProblemSpec, workers=(1, 2, 4), repeats: int = 3) -> BenchReport:
    """Profile ``spec`` at each worker count and derive speedups.

    ``speedup[w]`` is the ratio of Hessian time at one worker to Hessian
    time at ``w`` workers; ``amdahl[w]`` is the prediction from the serial
    fraction measured at one worker.
    """
    workers = sorted(set(workers) | {1})
    problem = make_problem(spec)
    rows = [profile_fit(spec, w, repeats, problem=problem) for w in workers]
    base = rows[0]
    f_s = (base.total - base.hessian_total) / base.total
    speedup = {r.workers: base.hessian_total / r.hessian_total for r in rows}
    amdahl = {r.workers: amdahl_speedup(f_s, r.workers) for r in rows}
    identical = all(np.array_equal(r.theta_hat, base.theta_hat) for r in rows)
    return BenchReport(rows, speedup, f_s, amdahl, identical)


@dataclass(frozen=True)
class DenseRace:
    ratio: float
    blocked_seconds: float
    dense_seconds: float
    max_abs_diff: float


def blocked_vs_dense_timing(spec: ProblemSpec, repeats: int = 5, cap: int = None) -> DenseRace:
    """Time the dense stacked-matrix Hessian against the blocked one (one worker).

    Both are evaluated at the generating coefficients and must agree to
    1e-10 before any timing is done.
    """
    ds, formula, theta = make_problem(spec)
    d, _ = build_design(ds, formula)
    index = build_index(ds, d.base)
    cap = cap if cap is not None else d.N * (d.K - 1)
    Hb = hessian_blocked(theta, d, index, 1).matrix
    Hd = hessian_dense_oracle(theta, d, index, cap=cap)
    diff = float(np.max(np.abs(Hb - Hd)))
    if diff > 1e-10:
        raise AssertionError(f"blocked and dense Hessians differ by {diff:.3g}")

    def timed(fn):
        out = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            out.append(time.perf_counter() - t0)
        return statistics.median(out)

    tb = timed(lambda: hessian_blocked(theta, d, index, 1))
    td = timed(lambda: hessian_dense_oracle(theta, d, index, cap=cap))
    return DenseRace(td / tb, tb, td, diff)


_ROW_SCHEMA = {
    "type": "object",
    "required": ["kind", "K", "p", "N", "n_p", "workers", "repeats", "preprocess", "newton_total",
                 "hessian_total", "total", "iterations"],
    "properties": {
        "kind": {"enum": ["X", "Y", "Z", "YZ", "XYZ"]},
        "K": {"type": "integer", "minimum": 2},
        "p": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "n_p": {"type": "integer", "minimum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "repeats": {"type": "integer", "minimum": 1},
        "preprocess": {"type": "number", "exclusiveMinimum": 0},
        "newton_total": {"type": "number", "exclusiveMinimum": 0},
        "hessian_total": {"type": "number", "exclusiveMinimum": 0},
        "total": {"type": "number", "exclusiveMinimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
    },
}

BENCH_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "blocklogit bench report",
    "type": "object",
    "required": ["rows", "speedup", "serial_fraction", "amdahl", "identical_estimates"],
    "properties": {
        "rows": {"type": "array", "minItems": 1, "items": _ROW_SCHEMA},
        "speedup": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "serial_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "amdahl": {"type": "object", "additionalProperties": {"type": "number", "minimum": 1}},
        "identical_estimates": {"type": "boolean"},
    },
}
