"""Post-fit inference: coefficient tables, prediction and likelihood tests.

The covariance of the estimates is the inverse of the observed
information ``-H`` at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .dataset import ChoiceIndex, LongDataset
from .design import DesignMatrices, select_columns
from .errors import DataError, NotNestedError, SingularHessianError
from .likelihood import ProbabilityTable, gradient, hessian_blocked, probabilities, utilities

__all__ = [
    "CoefficientSummary",
    "TestReport",
    "covariance",
    "summarize",
    "predict_probs",
    "lrtest",
    "waldtest",
    "scoretest",
    "format_est_stat",
    "format_model_size",
]


@dataclass(frozen=True, eq=False)
class CoefficientSummary:
    names: tuple
    estimate: np.ndarray
    std_error: np.ndarray
    z_value: np.ndarray
    p_value: np.ndarray
    singular: bool = False

    def __len__(self):
        return len(self.names)

    def to_records(self) -> list:
        return [
            {"name": n, "estimate": float(e), "std_error": _nan_none(s), "z_value": _nan_none(z),
             "p_value": _nan_none(p)}
            for n, e, s, z, p in zip(self.names, self.estimate, self.std_error, self.z_value, self.p_value)
        ]

    def to_text(self) -> str:
        width = max([len(n) for n in self.names] + [11])
        lines = [f"{'Coefficient':<{width}}  {'Estimate':>12}  {'Std.Error':>11}  {'z-value':>9}  {'Pr(>|z|)':>10}"]
        for n, e, s, z, p in zip(self.names, self.estimate, self.std_error, self.z_value, self.p_value):
            lines.append(f"{n:<{width}}  {e:>12.6g}  {s:>11.4g}  {z:>9.3f}  {p:>10.3g}")
        if self.singular:
            lines.append("(standard errors unavailable: -H is not positive definite)")
        return "\n".join(lines)


def _nan_none(x):
    x = float(x)
    return None if np.isnan(x) else x


@dataclass(frozen=True)
class TestReport:
    kind: str  # "LR", "Wald" or "score"
    statistic: float
    df: int
    p_value: float

    def __str__(self):
        return f"{self.kind} test: statistic = {self.statistic:.6g}, df = {self.df}, p-value = {self.p_value:.4g}"


def _chi2_report(kind, stat, df):
    stat = max(float(stat), 0.0)
    p = float(stats.chi2.sf(stat, df)) if df > 0 else 1.0
    return TestReport(kind, stat, int(df), p)


def covariance(fit) -> np.ndarray:
    """``(-H)^{-1}`` at the optimum; raises SingularHessianError if -H is not positive definite."""
    A = -fit.hessian.matrix
    try:
        c = sla.cho_factor(A)
    except sla.LinAlgError:
        raise SingularHessianError("-H is not positive definite at the estimate") from None
    return sla.cho_solve(c, np.eye(len(A)))


def summarize(fit) -> CoefficientSummary:
    """Estimates with asymptotic standard errors, z-values and two-sided p-values."""
    est = np.asarray(fit.theta_hat, dtype=float)
    try:
        se = np.sqrt(np.diag(covariance(fit)))
        singular = False
    except SingularHessianError:
        se = np.full_like(est, np.nan)
        singular = True
    with np.errstate(invalid="ignore", divide="ignore"):
        z = est / se
    p = 2 * stats.norm.sf(np.abs(z))
    return CoefficientSummary(tuple(fit.names), est, se, z, p, singular)


def predict_probs(fit, newdata: LongDataset) -> ProbabilityTable:
    """Choice probabilities of ``newdata`` at the fitted coefficients.

    Columns of ``P`` follow the model's base-first alternative order
    (``fit.info.alternatives``).
    """
    missing = [v for v in fit.info.formula.variables if v not in newdata.variables]
    if missing:
        raise DataError(f"new data lacks variables {missing}")
    d = select_columns(newdata, fit.info)
    return probabilities(utilities(fit.theta_hat, d))


def _check_nested(full, restricted):
    ff, fr = full.info.formula, restricted.info.formula
    if full.data_fingerprint != restricted.data_fingerprint:
        raise NotNestedError("models were fitted to different data")
    if full.info.base != restricted.info.base:
        raise NotNestedError("models use different base alternatives")
    for part in ("generic_vars", "individual_vars", "altspecific_vars"):
        extra = set(getattr(fr, part)) - set(getattr(ff, part))
        if extra:
            raise NotNestedError(f"restricted model has {sorted(extra)} not in the full model's {part}")
    if fr.intercept and not ff.intercept:
        raise NotNestedError("restricted model has an intercept the full model lacks")
    extra = set(restricted.names) - set(full.names)
    if extra:
        raise NotNestedError(f"restricted coefficients {sorted(extra)} missing from the full model")


def lrtest(full, restricted) -> TestReport:
    """Likelihood ratio test ``2 (l_full - l_restricted)`` on ``n_p`` difference df."""
    _check_nested(full, restricted)
    return _chi2_report("LR", 2.0 * (full.loglik - restricted.loglik), full.n_params - restricted.n_params)


def waldtest(fit, drop: Iterable[str]) -> TestReport:
    """Wald test that the coefficients named in ``drop`` are jointly zero."""
    drop = list(dict.fromkeys(drop))
    if not drop:
        raise ValueError("waldtest needs at least one coefficient to test")
    names = list(fit.names)
    unknown = [n for n in drop if n not in names]
    if unknown:
        raise KeyError(f"unknown coefficients {unknown}")
    idx = [names.index(n) for n in drop]
    cov = covariance(fit)[np.ix_(idx, idx)]
    b = np.asarray(fit.theta_hat)[idx]
    try:
        stat = b @ sla.solve(cov, b, assume_a="pos")
    except sla.LinAlgError:
        raise SingularHessianError("covariance of the tested coefficients is singular") from None
    return _chi2_report("Wald", stat, len(idx))


def embed(restricted, layout) -> np.ndarray:
    """Place the restricted estimates into a larger layout, zeros elsewhere."""
    theta = np.zeros(layout.n_params)
    pos = {n: i for i, n in enumerate(layout.names)}
    for n, v in zip(restricted.names, restricted.theta_hat):
        if n not in pos:
            raise NotNestedError(f"restricted coefficient {n!r} is not in the full model")
        theta[pos[n]] = v
    return theta


def scoretest(restricted, full_design: DesignMatrices, index: ChoiceIndex, workers: int = 1) -> TestReport:
    """Rao score test ``g' (-H)^{-1} g`` at the zero-padded restricted estimate."""
    if restricted.info.base != full_design.base:
        raise NotNestedError("models use different base alternatives")
    theta = embed(restricted, full_design.layout)
    probs = probabilities(utilities(theta, full_design))
    g = gradient(theta, full_design, index, probs)
    H = hessian_blocked(theta, full_design, index, workers, probs=probs).matrix
    try:
        stat = g @ sla.cho_solve(sla.cho_factor(-H), g)
    except sla.LinAlgError:
        raise SingularHessianError("-H is singular at the restricted estimate") from None
    return _chi2_report("score", stat, full_design.n_params - restricted.n_params)


def format_est_stat(fit) -> str:
    """Estimation report: iterations, termination state and timings."""
    t = fit.timings
    bar = "-" * 61
    lines = [
        bar,
        "Maximum likelihood estimation using the Newton-Raphson method",
        bar,
        f"  Number of iterations: {fit.iterations}",
        f"  Number of linesearch iterations: {fit.linesearch_iterations}",
        "At termination: ",
        f"  Gradient norm = {fit.grad_norm:.3g}",
        f"  Diff between last 2 loglik values = {_fmt_delta(fit.loglik_delta)}",
        f"  Stopping reason: {fit.stop_message()}",
        f"Total estimation time (sec): {t.get('total', t['newton_total']):.3f}",
        f"Time for Hessian calculations (sec): {t['hessian_total']:.3f} using {fit.controls.workers} processors.",
    ]
    if fit.ridge_applied:
        lines.append("Note: a ridge was added to a singular Hessian during the iterations.")
    return "\n".join(lines)


def _fmt_delta(x):
    if np.isnan(x):
        return "NA"
    return f"{abs(x):.3g}"


def format_model_size(fit) -> str:
    """Model dimensions report."""
    m = fit.model_size
    return "\n".join([
        f"Number of observations in training data = {m['N']}",
        f"Number of alternatives = {m['K']}",
        f"Intercept turned: {'ON' if m['intercept'] else 'OFF'}",
        f"Number of parameters in model = {m['n_params']}",
        f"  # individual specific variables = {m['p_X']}",
        f"  # choice specific coeff variables = {m['p_Y']}",
        f"  # generic coeff variables = {m['p_Z']}",
    ])
