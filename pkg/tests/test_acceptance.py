"""Acceptance gate.

Every criterion prints one ``PASS`` or ``FAIL`` line straight to the
terminal, whether or not output capture is on. Run ``pytest
tests/test_acceptance.py -v`` to see the full verdict list.
"""
import dataclasses
import io
import json
import os
import statistics
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from blocklogit.bench import amdahl_speedup, blocked_vs_dense_timing, run_bench
from blocklogit.cli import main
from blocklogit.dataset import CsvConfig, LongDataset, build_index, read_long_csv
from blocklogit.design import build_design, count_parameters
from blocklogit.inference import lrtest, predict_probs, scoretest, waldtest
from blocklogit.likelihood import gradient, hessian_blocked, hessian_dense_oracle, loglik
from blocklogit.serialize import load_model
from blocklogit.simgen import ProblemSpec, make_problem
from blocklogit.solver import SolverControls, fit

from conftest import FISH_FORMULA, fish_like, instance_grid, random_instance

TIGHT = SolverControls(ftol=1e-14, gtol=1e-10)

EST_STAT_FIELDS = (
    "Maximum likelihood estimation using the Newton-Raphson method",
    "Number of iterations:",
    "Number of linesearch iterations:",
    "At termination:",
    "Gradient norm =",
    "Diff between last 2 loglik values =",
    "Stopping reason:",
    "Total estimation time (sec):",
    "Time for Hessian calculations (sec):",
    "processors.",
)
MODEL_SIZE_FIELDS = (
    "Number of observations in training data =",
    "Number of alternatives =",
    "Intercept turned:",
    "Number of parameters in model =",
    "# individual specific variables =",
    "# choice specific coeff variables =",
    "# generic coeff variables =",
)


@contextmanager
def criterion(capsys, number, title):
    """Print ``PASS``/``FAIL`` for the enclosed checks, then re-raise failures."""
    t0 = time.perf_counter()
    notes = []
    try:
        yield notes
    except pytest.skip.Exception:
        raise
    except BaseException as exc:
        line = f"FAIL  [{number}] {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        with capsys.disabled():
            print("\n" + line)
        raise
    detail = f" ({'; '.join(notes)})" if notes else ""
    with capsys.disabled():
        print(f"\nPASS  [{number}] {title}{detail} [{time.perf_counter() - t0:.1f}s]")


def _fd_gradient(fun, theta, h=1e-5):
    eye = np.eye(len(theta)) * h
    return np.array([(fun(theta + e) - fun(theta - e)) / (2 * h) for e in eye])


def _fd_jacobian(fun, theta, h=1e-4):
    eye = np.eye(len(theta)) * h
    return np.column_stack([(fun(theta + e) - fun(theta - e)) / (2 * h) for e in eye])


def _rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


def _grid_designs():
    for case in instance_grid(20, seed=0):
        ds, f = random_instance(**case)
        d, _ = build_design(ds, f)
        theta = np.random.default_rng(case["seed"]).normal(0, 0.5, d.n_params)
        yield case, d, build_index(ds, d.base), theta


def test_c1_parameter_counts(capsys, fish_data):
    with criterion(capsys, 1, "parameter-count fixtures") as notes:
        t0 = time.perf_counter()
        for dims, n_p in [((50, 0, 0), 4950), ((0, 50, 0), 5000), ((0, 0, 50), 50), ((0, 45, 5), 4505)]:
            assert count_parameters(*dims, 100) == n_p
        _, layout = build_design(fish_data, FISH_FORMULA)
        assert layout.n_params == 11
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0
        notes.append(f"Fish-style n_p = {layout.n_params}")


def test_c2_derivatives(capsys):
    with criterion(capsys, 2, "analytic derivatives vs finite differences") as notes:
        t0 = time.perf_counter()
        worst_g = worst_h = 0.0
        kinds = set()
        for case, d, idx, theta in _grid_designs():
            kinds.add(case["kind"])
            g = gradient(theta, d, idx)
            worst_g = max(worst_g, _rel(g, _fd_gradient(lambda t: loglik(t, d, idx), theta)))
            H = hessian_blocked(theta, d, idx).matrix
            worst_h = max(worst_h, _rel(H, _fd_jacobian(lambda t: gradient(t, d, idx), theta)))
        assert kinds == {"X", "Y", "Z", "YZ"}
        assert worst_g <= 1e-6, worst_g
        assert worst_h <= 1e-5, worst_h
        assert time.perf_counter() - t0 < 30
        notes.append(f"worst gradient rel err {worst_g:.1e}, Hessian {worst_h:.1e}")


def test_c3_dense_oracle(capsys):
    with criterion(capsys, 3, "blocked Hessian equals dense X~'W~X~") as notes:
        t0 = time.perf_counter()
        worst = 0.0
        for _, d, idx, theta in _grid_designs():
            worst = max(worst, np.max(np.abs(hessian_blocked(theta, d, idx).matrix
                                             - hessian_dense_oracle(theta, d, idx))))
        # individual-specific-only instance: the oracle's reduced form
        ds, f = random_instance("X", 250, 5, 3, seed=77, intercept=False)
        d, _ = build_design(ds, f)
        theta = np.random.default_rng(0).normal(0, 0.5, d.n_params)
        worst = max(worst, np.max(np.abs(hessian_blocked(theta, d).matrix - hessian_dense_oracle(theta, d))))
        assert worst <= 1e-10, worst
        assert time.perf_counter() - t0 < 30
        notes.append(f"max abs diff {worst:.1e}")


AMDAHL_ROWS = [(0.124, 2, 1.78), (0.258, 4, 2.27), (0.780, 4, 1.20), (0.257, 8, 2.86)]
INCONSISTENT = ("fixture value 2.27 disagrees with its own serial fraction: "
                "1 / (0.258 + 0.742 / 4) = 2.2548, outside the 0.01 tolerance")


@pytest.mark.parametrize("f_s, n, expected", [
    pytest.param(*row, marks=pytest.mark.xfail(strict=True, reason=INCONSISTENT)) if row[0] == 0.258 else row
    for row in AMDAHL_ROWS
], ids=lambda v: str(v))
def test_c4_amdahl(capsys, f_s, n, expected):
    with criterion(capsys, 4, f"Amdahl S({f_s}, {n}) = {expected} +/- 0.01") as notes:
        got = amdahl_speedup(f_s, n)
        notes.append(f"computed {got:.4f}")
        assert abs(got - expected) <= 0.01, f"computed {got:.4f}"


def _intercept_data(counts):
    chosen = np.repeat(np.arange(len(counts)), counts).astype(np.intp)
    ids = np.array([str(i) for i in range(len(chosen))], dtype=object)
    return LongDataset(ids, tuple(f"a{k}" for k in range(len(counts))), chosen, {})


def _binary_irls(X, y):
    b = np.zeros(X.shape[1])
    for _ in range(100):
        p = 1 / (1 + np.exp(-X @ b))
        step = np.linalg.solve(X.T @ ((p * (1 - p))[:, None] * X), X.T @ (y - p))
        b += step
        if np.max(np.abs(step)) < 1e-14:
            break
    return b


def test_c5_solver(capsys):
    with criterion(capsys, 5, "solver correctness") as notes:
        t0 = time.perf_counter()
        for counts in ([30, 50, 20], [5, 17, 40, 9, 29], [11, 60]):
            res = fit(_intercept_data(counts), "choice ~ 1", controls=TIGHT)
            n = np.array(counts, float)
            assert np.max(np.abs(res.theta_hat - np.log(n[1:] / n[0]))) <= 1e-8
        worst_k2 = 0.0
        for seed in range(3):
            ds, f = random_instance("X", 400, 2, 3, seed=40 + seed)
            res = fit(ds, f, controls=TIGHT)
            X = np.column_stack([np.ones(ds.n_individuals)] + [ds.variables[f"x{j}"][:, 0] for j in (1, 2, 3)])
            worst_k2 = max(worst_k2, np.max(np.abs(res.theta_hat - _binary_irls(X, (ds.chosen == 1) * 1.0))))
        assert worst_k2 <= 1e-6, worst_k2
        worst_start = 0.0
        rng = np.random.default_rng(5)
        for kind in ("X", "Y", "Z", "YZ"):
            ds, f = random_instance(kind, 300, 4, 2, seed=50)
            n_p = build_design(ds, f)[1].n_params
            a = fit(ds, f, controls=TIGHT, start=rng.normal(0, 1, n_p))
            b = fit(ds, f, controls=TIGHT, start=rng.normal(0, 1, n_p))
            worst_start = max(worst_start, np.max(np.abs(a.theta_hat - b.theta_hat)))
        assert worst_start <= 1e-5, worst_start
        assert time.perf_counter() - t0 < 60
        notes.append(f"K=2 max diff {worst_k2:.1e}, random starts {worst_start:.1e}")


def test_c6_determinism(capsys):
    with criterion(capsys, 6, "bitwise determinism for workers 1, 2, 4") as notes:
        ds, f, _ = make_problem(ProblemSpec("X", K=10, p=20, N=10000, seed=6))
        fits = {w: fit(ds, f, controls=SolverControls(workers=w)) for w in (1, 2, 4)}
        ref = fits[1]
        for w in (2, 4):
            assert fits[w].theta_hat.tobytes() == ref.theta_hat.tobytes()
            assert fits[w].loglik == ref.loglik
            assert fits[w].hessian.matrix.tobytes() == ref.hessian.matrix.tobytes()
        notes.append(f"n_p = {ref.n_params}, {ref.iterations} iterations")


@pytest.mark.slow
def test_c7_parallel_speedup(capsys):
    cores = os.cpu_count() or 1
    spec_x = ProblemSpec("X", K=30, p=20, N=30000, seed=7)
    with criterion(capsys, 7, "Hessian speedup S_4 >= 1.5 on kind X") as notes:
        rep = run_bench(spec_x, workers=(1, 4), repeats=1)
        s4 = rep.speedup[4]
        z = run_bench(ProblemSpec("Z", K=30, p=20, N=30000, seed=7), workers=(1, 4), repeats=1)
        notes.append(f"S_4 = {s4:.2f} on {cores} core(s); kind Z S_4 = {z.speedup[4]:.2f} (not gated)")
        assert rep.identical_estimates
        if cores < 4:
            with capsys.disabled():
                print(f"\nFAIL  [7] not measurable here: os.cpu_count() = {cores} < 4; measured S_4 = {s4:.2f}")
            pytest.skip(f"speedup gate needs >= 4 cores, found {cores} (measured S_4 = {s4:.2f})")
        assert s4 >= 1.5, f"S_4 = {s4:.2f}"


def test_c8_blocked_vs_dense(capsys):
    with criterion(capsys, 8, "blocked Hessian >= 5x faster than dense") as notes:
        t0 = time.perf_counter()
        race = blocked_vs_dense_timing(ProblemSpec("XYZ", K=20, p=10, N=5000, seed=8), repeats=3)
        assert race.max_abs_diff <= 1e-10
        assert race.ratio >= 5, race.ratio
        assert time.perf_counter() - t0 < 120
        notes.append(f"ratio {race.ratio:.1f}, max abs diff {race.max_abs_diff:.1e}")


def _drop_x(formula, keep):
    return dataclasses.replace(formula, individual_vars=formula.individual_vars[:keep])


def _trio(ds, f, r):
    full, rest = fit(ds, f, controls=TIGHT), fit(ds, r, controls=TIGHT)
    d, _ = build_design(ds, f)
    dropped = [n for n in full.names if n not in rest.names]
    return (lrtest(full, rest).statistic, waldtest(full, dropped).statistic,
            scoretest(rest, d, build_index(ds, d.base)).statistic)


@pytest.mark.slow
def test_c9_statistical_sanity(capsys):
    with criterion(capsys, 9, "LR, Wald and score tests") as notes:
        t0 = time.perf_counter()
        # vacuous restriction: mirrored copies make the x coefficients exactly zero at the optimum
        ds, _ = random_instance("X", 300, 3, 2, seed=90)
        x = ds.variables["x2"]
        both = ds.take(np.concatenate([np.arange(ds.n_individuals)] * 2))
        variables = dict(both.variables, x2=np.concatenate([x, -x]))
        mirrored = LongDataset(np.array([str(i) for i in range(both.n_individuals)], dtype=object),
                               both.alternatives, both.chosen, variables)
        vac = _trio(mirrored, "choice ~ 1 | x1 + x2", "choice ~ 1 | x1")
        assert all(0 <= s <= 1e-8 for s in vac), vac

        worst = 0.0
        for seed in range(5):
            spec = ProblemSpec("X", K=4, p=3, N=20000, seed=seed, true_scale=0.05)
            ds, f, _ = make_problem(spec)
            lr, wald, score = _trio(ds, f, _drop_x(f, 2))
            assert min(lr, wald, score) >= 0
            worst = max(worst, abs(wald - lr) / lr, abs(score - lr) / lr)
        assert worst <= 0.15, worst

        lrs = []
        for seed in range(200):
            ds, f, _ = make_problem(ProblemSpec("X", K=3, p=2, N=500, seed=1000 + seed, true_scale=0.0))
            lrs.append(lrtest(fit(ds, f), fit(ds, _drop_x(f, 1))).statistic)
        med, ref = statistics.median(lrs), stats.chi2.median(2)
        assert min(lrs) >= 0
        assert abs(med - ref) <= 0.25 * ref, (med, ref)
        assert time.perf_counter() - t0 < 300
        notes.append(f"vacuous max {max(vac):.1e}; large-N worst rel gap {worst:.3f}; "
                     f"null LR median {med:.3f} vs {ref:.3f}")


def test_c10_cli_round_trip(capsys, tmp_path):
    with criterion(capsys, 10, "CLI simulate -> fit -> predict round trip") as notes:
        data, model, pred = tmp_path / "d.csv", tmp_path / "m.json", tmp_path / "p.csv"

        def run(*argv):
            out = io.StringIO()
            code = main([str(a) for a in argv], stdout=out)
            assert code == 0, (argv[0], code)
            return out.getvalue()

        run("simulate", "--kind", "YZ", "--K", 5, "--p", 4, "--N", 800, "--seed", 10, "--yz-split", 2,
            "--out", data)
        formula = json.loads((tmp_path / "d.truth.json").read_text())["formula"]
        text = run("fit", "--data", data, "--formula", formula, "--ncores", 2, "--out", model)
        run("predict", "--model", model, "--data", data, "--out", pred)

        ds = read_long_csv(data, CsvConfig())
        ref = fit(ds, formula, controls=SolverControls(workers=2))
        lines = pred.read_text().strip().split("\n")
        P = np.array([[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]])
        gap = np.max(np.abs(P - ref.fitted.P))
        assert P.shape == ref.fitted.P.shape and gap <= 1e-12, gap
        saved = load_model(model)
        gap_loaded = np.max(np.abs(predict_probs(saved, ds).P - ref.fitted.P))
        assert gap_loaded <= 1e-12
        missing = [fld for fld in EST_STAT_FIELDS + MODEL_SIZE_FIELDS if fld not in text]
        assert not missing, missing

        fish = tmp_path / "fish.csv"
        fish.write_text(fish_like(400, seed=1, text=True))
        text = run("fit", "--data", fish, "--formula", FISH_FORMULA, "--id-col", "chid", "--choice-col", "mode")
        assert "Number of parameters in model = 11" in text and "Intercept turned: ON" in text
        notes.append(f"max |P_cli - P_fit| = {gap:.1e}")
