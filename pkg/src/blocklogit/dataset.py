"""Long-format choice data: ingestion, validation and indexing.

The long format has exactly K rows per individual, one per alternative.
Internally a dataset is stored "cube" style: every variable becomes an
``(N, K)`` array whose columns follow the canonical (sorted) alternative
order, so downstream code never has to regroup rows again.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "CsvConfig",
    "LongDataset",
    "ChoiceIndex",
    "read_long_csv",
    "write_long_csv",
    "subset_alternatives",
    "build_index",
]

_MISSING = {"", "na", "nan", "null", "none"}
# two-level non-numeric responses: the second element means "chosen"
_BOOLEAN_LEVELS = [("false", "true"), ("f", "t"), ("no", "yes"), ("n", "y")]


@dataclass(frozen=True)
class CsvConfig:
    """Column roles for :func:`read_long_csv`.

    ``response_col`` may be None for prediction data. ``variable_cols`` of
    None means every column not used for a role.
    """

    id_col: str = "id"
    alt_col: str = "alt"
    response_col: Optional[str] = "choice"
    variable_cols: Optional[Sequence[str]] = None
    na_policy: str = "fail"
    weights_col: Optional[str] = None

    def __post_init__(self):
        if self.na_policy not in ("fail", "drop"):
            raise ValueError(f"na_policy must be 'fail' or 'drop', got {self.na_policy!r}")


@dataclass(frozen=True, eq=False)
class LongDataset:
    """Validated long-format choice data.

    Attributes
    ----------
    ids : ndarray of str, shape (N,)
        Individual identifiers in order of first appearance.
    alternatives : tuple of str
        The K alternative names, sorted.
    chosen : ndarray of int, shape (N,) or None
        Position of each individual's chosen alternative in ``alternatives``.
        None for data without a response column.
    variables : dict of str -> ndarray, shape (N, K)
        Numeric variable values, column k belonging to ``alternatives[k]``.
    weights : ndarray, shape (N,) or None
        Optional positive per-individual weights.
    """

    ids: np.ndarray
    alternatives: tuple
    chosen: Optional[np.ndarray]
    variables: Mapping[str, np.ndarray]
    weights: Optional[np.ndarray] = None
    columns: CsvConfig = field(default_factory=CsvConfig)

    def __post_init__(self):
        n, k = len(self.ids), len(self.alternatives)
        if k < 2:
            raise DataError(f"need at least 2 alternatives, got {k}")
        if n < 1:
            raise DataError("dataset has no individuals")
        if list(self.alternatives) != sorted(self.alternatives):
            raise DataError("alternatives must be in sorted order")
        for name, arr in self.variables.items():
            if arr.shape != (n, k):
                raise DataError(f"variable {name!r} has shape {arr.shape}, expected {(n, k)}")
        if self.chosen is not None:
            if self.chosen.shape != (n,) or self.chosen.min() < 0 or self.chosen.max() >= k:
                raise DataError("chosen index out of range")
        if self.weights is not None and (self.weights.shape != (n,) or np.any(self.weights <= 0)):
            raise DataError("weights must be positive, one per individual")

    @property
    def n_individuals(self) -> int:
        return len(self.ids)

    @property
    def n_alternatives(self) -> int:
        return len(self.alternatives)

    @property
    def has_response(self) -> bool:
        return self.chosen is not None

    def counts(self) -> np.ndarray:
        """Number of individuals choosing each alternative (canonical order)."""
        return np.bincount(self.chosen, minlength=self.n_alternatives)

    def fingerprint(self) -> str:
        """SHA-256 over the canonical content; equal data gives equal digests."""
        h = hashlib.sha256()
        h.update("\x1f".join(map(str, self.ids)).encode())
        h.update("\x1e".join(self.alternatives).encode())
        if self.chosen is not None:
            h.update(np.ascontiguousarray(self.chosen, dtype=np.int64).tobytes())
        for name in sorted(self.variables):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.variables[name], dtype=np.float64).tobytes())
        if self.weights is not None:
            h.update(b"weights")
            h.update(np.ascontiguousarray(self.weights, dtype=np.float64).tobytes())
        return h.hexdigest()

    def take(self, rows) -> "LongDataset":
        """Subset of individuals by boolean mask or integer positions."""
        rows = np.asarray(rows)
        return LongDataset(
            ids=self.ids[rows],
            alternatives=self.alternatives,
            chosen=None if self.chosen is None else self.chosen[rows],
            variables={k: v[rows] for k, v in self.variables.items()},
            weights=None if self.weights is None else self.weights[rows],
            columns=self.columns,
        )


@dataclass(frozen=True, eq=False)
class ChoiceIndex:
    """Response indicators relative to a base alternative.

    ``alternatives`` lists the base first, then the others in canonical
    order. ``y[:, k-1]`` is the indicator that the individual chose
    ``alternatives[k]``; ``counts[k]`` is the number of such individuals.
    """

    alternatives: tuple
    y: np.ndarray
    counts: np.ndarray

    @property
    def base(self) -> str:
        return self.alternatives[0]

    @property
    def y_base(self) -> np.ndarray:
        return 1.0 - self.y.sum(axis=1)

    def indicators(self) -> np.ndarray:
        """Full ``(N, K)`` indicator matrix, base in column 0."""
        return np.column_stack([self.y_base, self.y])


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _to_float(text):
    t = text.strip()
    if t.lower() in _MISSING:
        return math.nan
    return float(t)


def _response_mapping(levels):
    """Map the two distinct raw response values to (not chosen, chosen)."""
    if len(levels) != 2:
        raise DataError(f"response column must have exactly 2 distinct values, found {sorted(levels)}")
    a, b = sorted(levels)
    try:
        fa, fb = float(a), float(b)
    except ValueError:
        fa = fb = None
    if fa is not None and fa != fb:
        return {a: fa > fb, b: fb > fa}
    la, lb = a.strip().lower(), b.strip().lower()
    for lo, hi in _BOOLEAN_LEVELS:
        if {la, lb} == {lo, hi}:
            return {a: la == hi, b: lb == hi}
    raise DataError(f"cannot order response levels {a!r} and {b!r}")


def read_long_csv(source, config: CsvConfig = CsvConfig()) -> LongDataset:
    """Read and validate long-format choice data.

    Parameters
    ----------
    source : path, bytes, binary or text stream
        Comma-separated data with a header row.
    config : CsvConfig
        Column roles and the missing-value policy.

    Returns
    -------
    LongDataset
        Individuals in order of first appearance, alternatives sorted.

    Raises
    ------
    DataError
        Missing or duplicated alternative rows, not exactly one chosen row,
        non-numeric cells, or a response column without exactly two levels.
        Errors concerning one individual name it.
    """
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty CSV input") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()

    pos = {name: i for i, name in enumerate(header)}
    required = [config.id_col, config.alt_col]
    if config.response_col is not None:
        required.append(config.response_col)
    if config.weights_col is not None:
        required.append(config.weights_col)
    for col in required:
        if col not in pos:
            raise DataError(f"column {col!r} not found in header {header}")
    roles = set(required)
    if config.variable_cols is None:
        var_cols = [h for h in header if h not in roles]
    else:
        var_cols = list(config.variable_cols)
        for col in var_cols:
            if col not in pos:
                raise DataError(f"variable column {col!r} not found in header")

    alternatives = tuple(sorted({r[pos[config.alt_col]].strip() for r in rows}))
    alt_pos = {a: k for k, a in enumerate(alternatives)}
    K = len(alternatives)
    if K < 2:
        raise DataError(f"need at least 2 alternatives, found {list(alternatives)}")

    groups: dict[str, list] = {}
    for r in rows:
        if len(r) != len(header):
            raise DataError(f"row has {len(r)} fields, header has {len(header)}", r[pos[config.id_col]] if len(r) > pos[config.id_col] else None)
        groups.setdefault(r[pos[config.id_col]].strip(), []).append(r)

    mapping = None
    if config.response_col is not None:
        levels = {r[pos[config.response_col]].strip() for r in rows}
        levels -= {lv for lv in levels if lv.lower() in _MISSING}
        mapping = _response_mapping(levels)

    ids, chosen, weights = [], [], []
    cube = {v: [] for v in var_cols}
    for ident, group in groups.items():
        if len(group) != K or {r[pos[config.alt_col]].strip() for r in group} != set(alternatives):
            got = sorted(r[pos[config.alt_col]].strip() for r in group)
            raise DataError(f"expected one row for each of {list(alternatives)}, got {got}", ident)
        group = sorted(group, key=lambda r: alt_pos[r[pos[config.alt_col]].strip()])
        values = {}
        missing = False
        for v in var_cols:
            try:
                col = [_to_float(r[pos[v]]) for r in group]
            except ValueError:
                bad = next(r[pos[v]] for r in group if not _is_number(r[pos[v]]))
                raise DataError(f"non-numeric value {bad!r} in column {v!r}", ident) from None
            if any(math.isnan(x) for x in col):
                missing = True
            values[v] = col
        pick = None
        if mapping is not None:
            raw = [r[pos[config.response_col]].strip() for r in group]
            if any(x not in mapping for x in raw):
                missing = True
            else:
                picks = [k for k, x in enumerate(raw) if mapping[x]]
                if len(picks) != 1:
                    raise DataError(f"{len(picks)} chosen alternatives, expected exactly 1", ident)
                pick = picks[0]
        w = None
        if config.weights_col is not None:
            try:
                ws = {_to_float(r[pos[config.weights_col]]) for r in group}
            except ValueError:
                raise DataError(f"non-numeric weight in column {config.weights_col!r}", ident) from None
            if any(math.isnan(x) for x in ws):
                missing = True
            elif len(ws) != 1:
                raise DataError("weight varies across the individual's rows", ident)
            else:
                w = ws.pop()
                if w <= 0:
                    raise DataError(f"weight must be positive, got {w}", ident)
        if missing:
            if config.na_policy == "drop":
                continue
            raise DataError("missing value", ident)
        ids.append(ident)
        chosen.append(pick)
        weights.append(w)
        for v in var_cols:
            cube[v].append(values[v])

    if not ids:
        raise DataError("no complete individuals left")
    return LongDataset(
        ids=np.array(ids, dtype=object),
        alternatives=alternatives,
        chosen=None if mapping is None else np.array(chosen, dtype=np.intp),
        variables={v: np.array(cube[v], dtype=np.float64).reshape(len(ids), K) for v in var_cols},
        weights=None if config.weights_col is None else np.array(weights, dtype=np.float64),
        columns=config,
    )


def _is_number(text):
    try:
        _to_float(text)
        return True
    except ValueError:
        return False


def write_long_csv(ds: LongDataset, dest) -> None:
    """Write ``ds`` back to long-format CSV.

    The response is written as 1/0 and floats with ``repr`` so that reading
    the file again reproduces the dataset exactly.
    """
    cfg = ds.columns
    header = [cfg.id_col, cfg.alt_col]
    if ds.has_response:
        header.append(cfg.response_col or "choice")
    if ds.weights is not None:
        header.append(cfg.weights_col or "weight")
    names = list(ds.variables)
    header += names

    close = False
    if isinstance(dest, (str, os.PathLike)):
        fh = open(dest, "w", newline="", encoding="utf-8")
        close = True
    else:
        fh = dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, ident in enumerate(ds.ids):
            for k, alt in enumerate(ds.alternatives):
                row = [ident, alt]
                if ds.has_response:
                    row.append(1 if ds.chosen[i] == k else 0)
                if ds.weights is not None:
                    row.append(repr(float(ds.weights[i])))
                row += [repr(float(ds.variables[v][i, k])) for v in names]
                w.writerow(row)
    finally:
        if close:
            fh.close()


def subset_alternatives(ds: LongDataset, keep: Sequence[str]) -> LongDataset:
    """Restrict the choice set to ``keep``.

    Individuals whose chosen alternative is dropped are removed entirely.
    """
    keep = sorted(set(keep))
    unknown = [a for a in keep if a not in ds.alternatives]
    if unknown:
        raise DataError(f"unknown alternatives {unknown}; available {list(ds.alternatives)}")
    if len(keep) < 2:
        raise DataError(f"need at least 2 alternatives, got {keep}")
    cols = np.array([ds.alternatives.index(a) for a in keep])
    if ds.chosen is None:
        rows = np.ones(ds.n_individuals, dtype=bool)
        chosen = None
    else:
        remap = np.full(ds.n_alternatives, -1)
        remap[cols] = np.arange(len(cols))
        rows = remap[ds.chosen] >= 0
        chosen = remap[ds.chosen[rows]]
    if not rows.any():
        raise DataError(f"no individual chose any of {keep}")
    return LongDataset(
        ids=ds.ids[rows],
        alternatives=tuple(keep),
        chosen=chosen,
        variables={k: v[rows][:, cols] for k, v in ds.variables.items()},
        weights=None if ds.weights is None else ds.weights[rows],
        columns=ds.columns,
    )


def alternative_order(ds: LongDataset, base: str = "auto") -> tuple:
    """Base-first ordering used by the design and likelihood modules."""
    if base == "auto" or base is None:
        base = ds.alternatives[0]
    if base not in ds.alternatives:
        raise DataError(f"unknown base alternative {base!r}; available {list(ds.alternatives)}")
    return (base,) + tuple(a for a in ds.alternatives if a != base)


def build_index(ds: LongDataset, base: str = "auto") -> ChoiceIndex:
    """Response indicators for the non-base alternatives."""
    if ds.chosen is None:
        raise DataError("dataset has no response column")
    order = alternative_order(ds, base)
    perm = np.array([ds.alternatives.index(a) for a in order])
    chosen = np.argsort(perm)[ds.chosen]  # position in base-first order
    K = len(order)
    y = np.zeros((ds.n_individuals, K - 1))
    nonbase = chosen > 0
    y[np.flatnonzero(nonbase), chosen[nonbase] - 1] = 1.0
    return ChoiceIndex(alternatives=order, y=y, counts=np.bincount(chosen, minlength=K))
