import io

import numpy as np
import pytest

from blocklogit.dataset import CsvConfig, LongDataset, read_long_csv

FISH_SNAPSHOT = """\
mode,income,alt,price,catch,chid
FALSE,7083.332,beach,157.930,0.0678,1
FALSE,7083.332,boat,157.930,0.2601,1
TRUE,7083.332,charter,182.930,0.5391,1
FALSE,7083.332,pier,157.930,0.0503,1
FALSE,1250.000,beach,15.114,0.1049,2
FALSE,1250.000,boat,10.534,0.1574,2
TRUE,1250.000,charter,34.534,0.4671,2
FALSE,1250.000,pier,15.114,0.0451,2
"""

FISH_CONFIG = CsvConfig(id_col="chid", alt_col="alt", response_col="mode")
FISH_FORMULA = "mode ~ price | income | catch"
FISH_ALTS = ("beach", "boat", "charter", "pier")


def fish_like(n=600, seed=0, text=False):
    """Synthetic data shaped like the recreational fishing data.

    Income is individual-specific; price and catch vary by individual and
    alternative. Choices follow a multinomial logit with fixed coefficients.
    Returns a LongDataset, or CSV text when ``text`` is true.
    """
    rng = np.random.default_rng(seed)
    K = 4
    income = rng.uniform(0.4, 12.5, n)  # thousands
    price = rng.gamma(2.0, 40.0, (n, K)) + np.array([0.0, 20.0, 60.0, 0.0])
    catch = rng.gamma(1.5, 0.15, (n, K)) * np.array([0.5, 1.2, 2.0, 0.6])
    V = (np.array([0.0, 0.5, 1.4, 0.3]) + np.outer(income, [0.0, 0.09, -0.03, -0.12])
         - 0.025 * price + catch * np.array([3.0, 0.8, 1.0, 2.5]))
    P = np.exp(V - V.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    chosen = (P.cumsum(axis=1) < rng.random(n)[:, None]).sum(axis=1).clip(max=K - 1)
    if text:
        out = io.StringIO()
        out.write("mode,income,alt,price,catch,chid\n")
        for i in range(n):
            for k in range(K):
                out.write(f"{'TRUE' if chosen[i] == k else 'FALSE'},{float(income[i])!r},{FISH_ALTS[k]},"
                          f"{float(price[i, k])!r},{float(catch[i, k])!r},{i + 1}\n")
        return out.getvalue()
    variables = {"income": np.repeat(income[:, None], K, axis=1), "price": price, "catch": catch}
    ids = np.array([str(i + 1) for i in range(n)], dtype=object)
    return LongDataset(ids, FISH_ALTS, chosen.astype(np.intp), variables, columns=FISH_CONFIG)


KIND_PARTS = {"X": (0, 1, 0), "Y": (0, 0, 1), "Z": (1, 0, 0), "YZ": (1, 0, 1), "XYZ": (1, 1, 1)}


def random_instance(kind, N, K, nvar, seed, intercept=True, weights=False, scale=0.5):
    """A random long dataset plus matching formula text.

    ``kind`` selects which formula parts get ``nvar`` variables each
    (generic ``z``, individual ``x``, alternative-specific ``y``).
    """
    rng = np.random.default_rng(seed)
    gz, gx, gy = KIND_PARTS[kind]
    zs = [f"z{j + 1}" for j in range(nvar * gz)]
    xs = [f"x{j + 1}" for j in range(nvar * gx)]
    ys = [f"y{j + 1}" for j in range(nvar * gy)]
    variables = {v: np.repeat(rng.standard_normal((N, 1)), K, axis=1) for v in xs}
    variables.update({v: rng.standard_normal((N, K)) for v in ys + zs})
    alts = tuple(f"a{k}" for k in range(K))
    # responses from a random-coefficient logit so the fit has signal
    V = sum(scale * rng.standard_normal(K) * variables[v] for v in xs + ys)
    V = V + sum(scale * rng.standard_normal() * variables[v] for v in zs) + rng.normal(0, 0.3, K)
    P = np.exp(V - V.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    chosen = (P.cumsum(axis=1) < rng.random(N)[:, None]).sum(axis=1).clip(max=K - 1)
    w = rng.uniform(0.5, 2.0, N) if weights else None
    ids = np.array([str(i) for i in range(N)], dtype=object)
    ds = LongDataset(ids, alts, chosen.astype(np.intp), variables, w)
    parts = [" + ".join(zs) or "1", " + ".join(xs) or "1", " + ".join(ys) or "1"]
    if not intercept:
        parts[1] += " - 1" if xs else ""
        if not xs:
            parts[1] = "-1"
    formula = "choice ~ " + " | ".join(parts)
    return ds, formula


def instance_grid(n=20, seed=0):
    """``n`` varied small instances over kinds X/Y/Z/YZ (N<=300, K<=6, <=4 vars per type)."""
    rng = np.random.default_rng(seed)
    kinds = ["X", "Y", "Z", "YZ"]
    out = []
    for i in range(n):
        kind = kinds[i % 4]
        K = int(rng.integers(2, 7))
        nvar = int(rng.integers(1, 5))
        N = int(rng.integers(120, 301))
        intercept = bool(i % 3 != 2)
        out.append(dict(kind=kind, N=N, K=K, nvar=nvar, seed=1000 + i, intercept=intercept,
                        weights=(i % 5 == 4)))
    return out


@pytest.fixture
def fish_snapshot():
    return read_long_csv(io.StringIO(FISH_SNAPSHOT), FISH_CONFIG)


@pytest.fixture(scope="session")
def fish_data():
    return fish_like(600, seed=7)
