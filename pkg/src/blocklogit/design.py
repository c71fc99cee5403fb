"""Design blocks and the coefficient layout.

Notation follows the utility of alternative k (k = 0 is the base)::

    V_ik = X_i . beta_k + Y_ik . gamma_k - Y_i0 . gamma_0 + (Z_ik - Z_i0) . alpha

``X`` holds individual-specific data (intercept first when present), ``Y``
alternative-varying data with alternative-specific coefficients, ``Z``
alternative-varying data with a generic coefficient, already differenced
against the base. The flat parameter vector is ordered::

    beta_1 .. beta_{K-1}, gamma_0 .. gamma_{K-1}, alpha
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dataset import LongDataset, alternative_order
from .errors import DataError, RankError, StructuralSingularityError
from .formula import ModelFormula, parse_formula

__all__ = [
    "Chunk",
    "ThetaLayout",
    "DesignInfo",
    "DesignMatrices",
    "count_parameters",
    "independent_columns",
    "assemble_design",
    "check_rank_conditions",
    "build_design",
    "select_columns",
]

INTERCEPT = "(Intercept)"


def count_parameters(p_x: int, p_y: int, p_z: int, K: int) -> int:
    """Number of identified coefficients: ``p_x (K-1) + p_y K + p_z``."""
    if min(p_x, p_y, p_z) < 0 or K < 2:
        raise ValueError("dimensions must be nonnegative and K >= 2")
    return p_x * (K - 1) + p_y * K + p_z


@dataclass(frozen=True)
class Chunk:
    """A contiguous group of coefficients sharing a type and alternative.

    ``alt`` is the position in the base-first alternative order (None for
    the generic chunk).
    """

    kind: str  # "beta", "gamma" or "alpha"
    alt: Optional[int]
    start: int
    stop: int

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class ThetaLayout:
    chunks: tuple
    names: tuple

    @property
    def n_params(self) -> int:
        return len(self.names)

    def chunk(self, kind, alt=None) -> Chunk:
        for c in self.chunks:
            if c.kind == kind and c.alt == alt:
                return c
        raise KeyError((kind, alt))

    def index(self, name) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class DesignInfo:
    """Array-free description of a design, enough to rebuild it on new data."""

    formula: ModelFormula
    alternatives: tuple  # base first
    x_names: tuple
    y_names: tuple  # one tuple per alternative, base first
    z_names: tuple
    dropped_columns: tuple = ()

    @property
    def base(self) -> str:
        return self.alternatives[0]

    @property
    def K(self) -> int:
        return len(self.alternatives)

    def layout(self) -> ThetaLayout:
        chunks, names = [], []
        pos = 0
        alts = self.alternatives
        for k in range(1, self.K):
            chunks.append(Chunk("beta", k, pos, pos + len(self.x_names)))
            names += [f"{v}:{alts[k]}" for v in self.x_names]
            pos = chunks[-1].stop
        for k in range(self.K):
            chunks.append(Chunk("gamma", k, pos, pos + len(self.y_names[k])))
            names += [f"{v}:{alts[k]}" for v in self.y_names[k]]
            pos = chunks[-1].stop
        chunks.append(Chunk("alpha", None, pos, pos + len(self.z_names)))
        names += list(self.z_names)
        return ThetaLayout(tuple(chunks), tuple(names))


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """Numeric design blocks.

    Attributes
    ----------
    X : ndarray, shape (N, p_X)
    Y : list of K ndarrays, shape (N, p_Y_k), base first
    Z : list of K-1 ndarrays, shape (N, p_Z), non-base alternatives, base-differenced
    weights : ndarray, shape (N,) or None
    info : DesignInfo
    """

    X: np.ndarray
    Y: list
    Z: list
    weights: Optional[np.ndarray]
    info: DesignInfo
    layout: ThetaLayout = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "layout", self.info.layout())

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def K(self) -> int:
        return self.info.K

    @property
    def base(self) -> str:
        return self.info.base

    @property
    def n_params(self) -> int:
        return self.layout.n_params

    @property
    def dropped_columns(self) -> tuple:
        return self.info.dropped_columns

    def model_size(self) -> dict:
        f = self.info.formula
        return {
            "N": self.N,
            "K": self.K,
            "intercept": f.intercept and INTERCEPT in self.info.x_names,
            "n_params": self.n_params,
            "p_X": len(self.info.x_names),
            "p_Y": len(set().union(*self.info.y_names)),
            "p_Z": len(self.info.z_names),
        }


def independent_columns(a: np.ndarray, tol: float = 1e-6, project=None) -> list:
    """Indices of a maximal set of linearly independent columns, earliest first.

    QR with limited pivoting: columns are orthogonalized left to right and a
    column whose remaining norm falls below ``tol`` times its original norm
    is treated as dependent and pushed out of the basis.

    Parameters
    ----------
    a : ndarray, shape (n, p)
    tol : float
        Relative tolerance.
    project : callable, optional
        Orthogonal projector applied to each column before the basis, for
        removing a subspace that is always kept (such as intercepts).
    """
    a = np.asarray(a, dtype=np.float64)
    basis = []
    kept = []
    for j in range(a.shape[1]):
        col = a[:, j]
        n0 = np.linalg.norm(col)
        if n0 == 0 or not np.isfinite(n0):
            continue
        r = col / n0
        if project is not None:
            r = project(r)
        for _ in range(2):  # second pass restores orthogonality lost in the first
            for q in basis:
                r -= (q @ r) * q
        nr = np.linalg.norm(r)
        if nr > tol:
            basis.append(r / nr)
            kept.append(j)
    return kept


def assemble_design(ds: LongDataset, formula: ModelFormula, base: str = "auto") -> DesignMatrices:
    """Raw design blocks without any collinearity screening."""
    missing = [v for v in formula.variables if v not in ds.variables]
    if missing:
        raise DataError(f"variables {missing} not found; available {sorted(ds.variables)}")
    order = alternative_order(ds, base)
    perm = [ds.alternatives.index(a) for a in order]
    N = ds.n_individuals

    xcols, xnames = [], []
    if formula.intercept:
        xcols.append(np.ones(N))
        xnames.append(INTERCEPT)
    for v in formula.individual_vars:
        data = ds.variables[v]
        varies = np.any(data != data[:, :1], axis=1)
        if varies.any():
            who = ds.ids[np.flatnonzero(varies)[0]]
            raise DataError(f"variable {v!r} is not individual-specific: it varies across alternatives", who)
        xcols.append(data[:, 0].copy())
        xnames.append(v)
    X = np.column_stack(xcols) if xcols else np.empty((N, 0))

    yv = formula.altspecific_vars
    Y = [np.column_stack([ds.variables[v][:, p] for v in yv]) if yv else np.empty((N, 0)) for p in perm]

    zv = formula.generic_vars
    if zv:
        raw = np.stack([ds.variables[v][:, perm] for v in zv], axis=-1)  # (N, K, pZ)
        Z = [raw[:, k, :] - raw[:, 0, :] for k in range(1, len(order))]
    else:
        Z = [np.empty((N, 0)) for _ in order[1:]]

    info = DesignInfo(formula, order, tuple(xnames), tuple(tuple(yv) for _ in order), tuple(zv))
    return DesignMatrices(X, Y, Z, ds.weights, info)


def check_rank_conditions(d: DesignMatrices, lin_dep_tol: float = 1e-6):
    """Drop collinear columns so the necessary rank conditions hold.

    Condition 1: ``X`` and every ``Y_k`` have full column rank. Condition 2:
    the vertically stacked ``Z_1 .. Z_{K-1}`` has full column rank. When the
    intercept is present, generic columns that are a combination of the
    alternative intercepts (for example data that varies only by
    alternative) are dropped too, and a model made of the intercept plus
    generic variables whose columns all vanish this way is rejected with
    :class:`StructuralSingularityError`.

    Returns
    -------
    (DesignMatrices, list of str)
        The adjusted design and the dropped-column report.

    Raises
    ------
    RankError
        A block the formula asked for loses every column.
    """
    info = d.info
    f = info.formula
    report = list(info.dropped_columns)

    keep_x = independent_columns(d.X, lin_dep_tol)
    if info.x_names[:1] == (INTERCEPT,) and 0 not in keep_x:
        keep_x = [0] + keep_x
    for j in range(d.X.shape[1]):
        if j not in keep_x:
            report.append(f"X:{info.x_names[j]}")
    x_names = tuple(info.x_names[j] for j in keep_x)
    if f.individual_vars and not any(n != INTERCEPT for n in x_names):
        raise RankError(f"all individual-specific variables {list(f.individual_vars)} are collinear"
                        + (" with the intercept" if f.intercept else ""))
    X = d.X[:, keep_x]

    Y, y_names = [], []
    for k, (Yk, names) in enumerate(zip(d.Y, info.y_names)):
        keep = independent_columns(Yk, lin_dep_tol)
        for j in range(Yk.shape[1]):
            if j not in keep:
                report.append(f"Y[{info.alternatives[k]}]:{names[j]}")
        if f.altspecific_vars and not keep:
            raise RankError(f"no usable alternative-specific variable for alternative {info.alternatives[k]!r}")
        Y.append(Yk[:, keep])
        y_names.append(tuple(names[j] for j in keep))

    pz = len(info.z_names)
    K = d.K
    if pz:
        stacked = np.concatenate(d.Z, axis=0)
        project = None
        if INTERCEPT in x_names:
            n = d.N

            def project(v):
                # remove the span of the per-alternative intercept dummies
                g = v.reshape(K - 1, n)
                return (g - g.mean(axis=1, keepdims=True)).ravel()

        keep_z = independent_columns(stacked, lin_dep_tol, project=project)
        for j in range(pz):
            if j not in keep_z:
                report.append(f"Z:{info.z_names[j]}")
        if not keep_z:
            only_generic = not f.individual_vars and not f.altspecific_vars and f.intercept
            if only_generic:
                raise StructuralSingularityError(
                    "model has only the intercept and generic variables whose base-differenced data "
                    "does not vary across individuals; its Hessian is singular"
                )
            raise RankError(f"all generic variables {list(info.z_names)} are collinear after base differencing")
        Z = [z[:, keep_z] for z in d.Z]
        z_names = tuple(info.z_names[j] for j in keep_z)
    else:
        Z, z_names = list(d.Z), ()

    new_info = replace(info, x_names=x_names, y_names=tuple(y_names), z_names=z_names,
                       dropped_columns=tuple(report))
    return DesignMatrices(X, Y, Z, d.weights, new_info), report


def build_design(ds: LongDataset, formula, base: str = "auto", lin_dep_tol: float = 1e-6):
    """Assemble, normalize and rank-screen; returns ``(DesignMatrices, ThetaLayout)``.

    ``formula`` may be a :class:`ModelFormula` or formula text.
    """
    if isinstance(formula, str):
        formula = parse_formula(formula)
    d, _ = check_rank_conditions(assemble_design(ds, formula, base), lin_dep_tol)
    return d, d.layout


def select_columns(ds: LongDataset, info: DesignInfo) -> DesignMatrices:
    """Rebuild the design of a fitted model on new data, keeping its columns."""
    if tuple(sorted(info.alternatives)) != tuple(ds.alternatives):
        raise DataError(f"alternatives {list(ds.alternatives)} differ from the model's {sorted(info.alternatives)}")
    raw = assemble_design(ds, info.formula, info.base)

    def pick(arr, names, wanted):
        return arr[:, [names.index(n) for n in wanted]] if wanted else arr[:, :0]

    X = pick(raw.X, raw.info.x_names, info.x_names)
    Y = [pick(y, raw.info.y_names[k], info.y_names[k]) for k, y in enumerate(raw.Y)]
    Z = [pick(z, raw.info.z_names, info.z_names) for z in raw.Z]
    return DesignMatrices(X, Y, Z, ds.weights, info)
