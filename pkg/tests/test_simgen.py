import io

import numpy as np
import pytest

from blocklogit.dataset import CsvConfig, read_long_csv, write_long_csv
from blocklogit.simgen import ProblemSpec, make_problem, recovery_check
from blocklogit.solver import fit


def _csv_bytes(ds):
    buf = io.StringIO()
    write_long_csv(ds, buf)
    return buf.getvalue().encode()


def test_kind_x_parameter_count_and_formula():
    spec = ProblemSpec("X", K=10, p=50)
    assert spec.n_individuals == 10000
    assert spec.n_params == 450
    f = spec.formula()
    assert len(f.individual_vars) == 50 and not f.intercept
    assert not f.generic_vars and not f.altspecific_vars


@pytest.mark.parametrize("kind, n_p", [("X", 4950), ("Y", 5000), ("Z", 50), ("YZ", 4505)])
def test_table_sizes(kind, n_p):
    assert ProblemSpec(kind, K=100, p=50, yz_split=5).n_params == n_p


def test_formula_parts_by_kind():
    assert ProblemSpec("Y", 3, p=2).formula().altspecific_vars == ("y1", "y2")
    assert ProblemSpec("Z", 3, p=2).formula().generic_vars == ("z1", "z2")
    yz = ProblemSpec("YZ", 3, p=4, yz_split=1).formula()
    assert yz.altspecific_vars == ("y1", "y2", "y3") and yz.generic_vars == ("z1",)


def test_same_seed_same_bytes():
    spec = ProblemSpec("YZ", K=4, p=4, N=300, seed=9, yz_split=2)
    a, fa, ta = make_problem(spec)
    b, fb, tb = make_problem(spec)
    assert _csv_bytes(a) == _csv_bytes(b)
    assert fa == fb and ta.tobytes() == tb.tobytes()
    c, _, _ = make_problem(ProblemSpec("YZ", K=4, p=4, N=300, seed=10, yz_split=2))
    assert _csv_bytes(c) != _csv_bytes(a)


def test_generated_data_validates_and_has_structure():
    for kind in ("X", "Y", "Z", "YZ", "XYZ"):
        spec = ProblemSpec(kind, K=3, p=3, N=200, seed=1, yz_split=1)
        ds, f, theta = make_problem(spec)
        again = read_long_csv(_csv_bytes(ds), CsvConfig())
        assert again.fingerprint() == ds.fingerprint()
        assert len(theta) == spec.n_params
        for v in f.individual_vars:
            assert np.all(ds.variables[v] == ds.variables[v][:, :1])
        for v in f.altspecific_vars + f.generic_vars:
            assert np.any(ds.variables[v] != ds.variables[v][:, :1])


def test_invalid_specs():
    with pytest.raises(ValueError):
        ProblemSpec("W", K=3)
    with pytest.raises(ValueError):
        ProblemSpec("X", K=1)
    with pytest.raises(ValueError, match="2 \\* n_p"):
        ProblemSpec("X", K=10, p=50, N=800)
    with pytest.raises(ValueError):
        ProblemSpec("YZ", K=3, p=5, yz_split=5)


def test_recovery_report_shape():
    spec = ProblemSpec("YZ", K=4, p=4, N=1500, seed=2, yz_split=2)
    ds, f, theta = make_problem(spec)
    rep = recovery_check(spec, fit(ds, f), theta)
    assert len(rep) == spec.n_params == len(rep.names)
    assert rep.rmse == pytest.approx(np.sqrt(np.mean(rep.error ** 2)))
    # recomputing the true coefficients from the problem definition gives the same answer
    assert recovery_check(spec, fit(ds, f)).rmse == rep.rmse


@pytest.mark.slow
def test_rmse_shrinks_with_n():
    wins = 0
    for seed in range(10):
        rmse = []
        for N in (1000, 4000):
            spec = ProblemSpec("X", K=4, p=3, N=N, seed=seed)
            ds, f, theta = make_problem(spec)
            rmse.append(recovery_check(spec, fit(ds, f), theta).rmse)
        wins += rmse[1] < rmse[0]
    assert wins >= 9


def test_null_model_estimates_within_four_standard_errors():
    inside = total = 0
    for seed in range(4):
        spec = ProblemSpec("YZ", K=4, p=5, N=2000, seed=seed, yz_split=2, true_scale=0.0)
        ds, f, theta = make_problem(spec)
        assert not theta.any()
        rep = recovery_check(spec, fit(ds, f), theta)
        inside += int(np.sum(np.abs(rep.error) < 4 * rep.std_error))
        total += len(rep)
    assert inside >= 0.95 * total
