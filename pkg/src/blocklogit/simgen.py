"""Seeded synthetic choice data for the four benchmark problem kinds.

* ``X``: individual-specific data, alternative-specific coefficients.
* ``Y``: alternative-varying data, alternative-specific coefficients.
* ``Z``: alternative-varying data, generic coefficients.
* ``YZ``: alternative-varying data, ``p - yz_split`` alternative-specific
  and ``yz_split`` generic coefficients.
* ``XYZ``: ``p`` variables of each of the three types plus the intercept
  (used for the blocked-versus-dense Hessian race).

The random stream is numpy's PCG64 (``numpy.random.default_rng(seed)``).
Draw order is fixed: covariates, then true coefficients, then one uniform
per individual for the response, so a seed reproduces a dataset exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import CsvConfig, LongDataset
from .design import build_design, count_parameters
from .formula import ModelFormula
from .inference import summarize
from .likelihood import probabilities, utilities

__all__ = ["ProblemSpec", "make_problem", "recovery_check", "KINDS"]

KINDS = ("X", "Y", "Z", "YZ", "XYZ")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    K: int
    p: int = 50
    N: Optional[int] = None  # default 50 * K * 20
    seed: int = 0
    yz_split: int = 5
    true_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.kind == "YZ" and not 0 < self.yz_split < self.p:
            raise ValueError("yz_split must be between 1 and p-1")
        if self.n_individuals < 2 * self.n_params:
            raise ValueError(f"N = {self.n_individuals} is below 2 * n_p = {2 * self.n_params}")

    @property
    def n_individuals(self) -> int:
        return self.N if self.N is not None else 50 * self.K * 20

    @property
    def dims(self) -> tuple:
        """(p_X, p_Y, p_Z) of the generated model."""
        return {
            "X": (self.p, 0, 0),
            "Y": (0, self.p, 0),
            "Z": (0, 0, self.p),
            "YZ": (0, self.p - self.yz_split, self.yz_split),
            "XYZ": (self.p + 1, self.p, self.p),
        }[self.kind]

    @property
    def n_params(self) -> int:
        return count_parameters(*self.dims, self.K)

    def formula(self) -> ModelFormula:
        p_x, p_y, p_z = self.dims
        if self.kind == "XYZ":
            p_x -= 1
        return ModelFormula(
            response="choice",
            generic_vars=tuple(f"z{j + 1}" for j in range(p_z)),
            individual_vars=tuple(f"x{j + 1}" for j in range(p_x)),
            altspecific_vars=tuple(f"y{j + 1}" for j in range(p_y)),
            intercept=self.kind == "XYZ",
        )


def _alt_names(K):
    width = len(str(K))
    return tuple(f"alt{k + 1:0{width}d}" for k in range(K))


def make_problem(spec: ProblemSpec):
    """Generate ``(LongDataset, ModelFormula, true_theta)``.

    Covariates are i.i.d. standard normal; individual-specific columns are
    repeated across the K rows of an individual. True coefficients are
    uniform on ``(-true_scale, true_scale)`` in layout order (base = first
    alternative). Each response is drawn by inverting the cumulative
    probability row at a uniform variate.
    """
    rng = np.random.default_rng(spec.seed)
    N, K = spec.n_individuals, spec.K
    f = spec.formula()
    variables = {}
    for v in f.individual_vars:
        variables[v] = np.repeat(rng.standard_normal((N, 1)), K, axis=1)
    for v in f.altspecific_vars + f.generic_vars:
        variables[v] = rng.standard_normal((N, K))
    alts = _alt_names(K)
    ids = np.array([str(i + 1) for i in range(N)], dtype=object)
    cfg = CsvConfig(id_col="id", alt_col="alt", response_col="choice")

    proto = LongDataset(ids, alts, None, variables, columns=cfg)
    d, layout = build_design(proto, f)
    theta = rng.uniform(-spec.true_scale, spec.true_scale, size=layout.n_params)
    P = probabilities(utilities(theta, d)).P  # base first == sorted order here
    u = rng.random(N)
    cum = np.cumsum(P, axis=1)
    chosen = np.minimum((cum < u[:, None]).sum(axis=1), K - 1)
    ds = LongDataset(ids, alts, chosen.astype(np.intp), variables, columns=cfg)
    return ds, f, theta


@dataclass(frozen=True)
class RecoveryReport:
    names: tuple
    error: np.ndarray
    rmse: float
    std_error: np.ndarray

    def __len__(self):
        return len(self.error)


def recovery_check(spec: ProblemSpec, fit, true_theta=None) -> RecoveryReport:
    """Per-coefficient error of a fit against the generating coefficients."""
    if true_theta is None:
        _, _, true_theta = make_problem(spec)
    err = np.asarray(fit.theta_hat) - np.asarray(true_theta)
    se = summarize(fit).std_error
    return RecoveryReport(fit.names, err, float(np.sqrt(np.mean(err ** 2))), se)
