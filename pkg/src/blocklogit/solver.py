"""Newton-Raphson maximization of the multinomial logit log-likelihood."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np
import scipy.linalg as sla

from .dataset import ChoiceIndex, LongDataset, build_index
from .design import DesignInfo, DesignMatrices, ThetaLayout, build_design
from .errors import LineSearchError, SingularHessianError
from .formula import parse_formula
from .likelihood import (
    HessianBlocks,
    ProbabilityTable,
    gradient,
    hessian_blocked,
    loglik,
    probabilities,
    utilities,
)

__all__ = ["SolverControls", "FitResult", "newton_solve", "line_search", "fit"]

log = logging.getLogger(__name__)

STOP_MESSAGES = {
    "ftol": "Successive loglik difference < ftol ({ftol:g}).",
    "gtol": "Gradient norm < gtol ({gtol:g}).",
    "maxiter": "Number of iterations reached maxiter ({maxiter}).",
}


@dataclass(frozen=True)
class SolverControls:
    maxiter: int = 50
    ftol: float = 1e-6
    gtol: float = 1e-6
    workers: int = 1
    max_halvings: int = 30
    ridge_on_failure: bool = False

    def __post_init__(self):
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")
        if not (self.ftol > 0 and self.gtol > 0):
            raise ValueError("ftol and gtol must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of a Newton-Raphson fit.

    ``timings`` holds wall-clock seconds for ``preprocess``, ``newton_total``
    and ``hessian_total`` (the latter included in the former).
    """

    theta_hat: np.ndarray
    loglik: float
    grad_norm: float
    hessian: HessianBlocks
    iterations: int
    linesearch_iterations: int
    stop_reason: str
    loglik_delta: float
    timings: dict
    model_size: dict
    info: DesignInfo
    controls: SolverControls
    fitted: ProbabilityTable
    loglik_history: tuple = ()
    ridge_applied: bool = False
    data_fingerprint: Optional[str] = None

    @property
    def layout(self) -> ThetaLayout:
        return self.info.layout()

    @property
    def names(self) -> tuple:
        return self.layout.names

    @property
    def n_params(self) -> int:
        return len(self.theta_hat)

    @property
    def converged(self) -> bool:
        return self.stop_reason in ("ftol", "gtol")

    def coef(self) -> dict:
        return dict(zip(self.names, self.theta_hat.tolist()))

    def stop_message(self) -> str:
        c = self.controls
        return STOP_MESSAGES[self.stop_reason].format(ftol=c.ftol, gtol=c.gtol, maxiter=c.maxiter)


def _newton_direction(H, g, ridge_on_failure):
    """Solve ``(-H) delta = g``; returns (delta, ridge_applied)."""
    A = -H
    try:
        return sla.cho_solve(sla.cho_factor(A), g), False
    except sla.LinAlgError:
        pass
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            delta = sla.solve(A, g, assume_a="sym")
        if np.all(np.isfinite(delta)):
            return delta, False
    except (sla.LinAlgError, sla.LinAlgWarning):
        pass
    if not ridge_on_failure:
        raise SingularHessianError(
            "the Hessian is numerically singular; relax ftol or gtol, check the data for "
            "collinearity, or enable ridge_on_failure"
        )
    tau = 1e-8 * np.trace(A) / len(g)
    log.warning("singular Hessian, retrying with ridge %.3g", tau)
    try:
        return sla.cho_solve(sla.cho_factor(A + tau * np.eye(len(g))), g), True
    except sla.LinAlgError:
        raise SingularHessianError("the Hessian is singular even after adding a ridge") from None


def _line_search(theta, delta, l_old, d, index, max_halvings):
    step = delta
    for j in range(max_halvings + 1):
        cand = theta + step
        l_new = loglik(cand, d, index)
        if l_new >= l_old:
            return cand, j, l_new
        step = step / 2
    raise LineSearchError(f"log-likelihood did not improve after {max_halvings} step halvings")


def line_search(theta, delta, l_old, d: DesignMatrices, index: ChoiceIndex, max_halvings: int = 30):
    """First ``theta + delta / 2**j`` whose log-likelihood is not below ``l_old``.

    Returns
    -------
    (theta_new, j)
    """
    theta_new, j, _ = _line_search(np.asarray(theta, float), np.asarray(delta, float), l_old, d, index,
                                   max_halvings)
    return theta_new, j


def newton_solve(d: DesignMatrices, index: ChoiceIndex, controls: SolverControls = SolverControls(),
                 start=None) -> FitResult:
    """Maximize the log-likelihood by Newton-Raphson with step halving.

    Stops at the first of: successive log-likelihood difference below
    ``ftol``, gradient norm below ``gtol``, or ``maxiter`` iterations. The
    last case is reported through ``stop_reason`` rather than raised.

    Raises
    ------
    SingularHessianError
        The Newton system cannot be solved (and no ridge was requested).
    LineSearchError
        Step halving exhausted ``max_halvings``.
    """
    t_start = time.perf_counter()
    theta = np.zeros(d.n_params) if start is None else np.array(start, dtype=np.float64)
    if theta.shape != (d.n_params,):
        raise ValueError(f"start has shape {theta.shape}, expected ({d.n_params},)")
    l_cur = loglik(theta, d, index)
    history = [l_cur]
    iterations = halvings = 0
    hess_time = 0.0
    ridge = False
    delta_l = float("nan")
    while True:
        probs = probabilities(utilities(theta, d))
        g = gradient(theta, d, index, probs)
        gnorm = float(np.linalg.norm(g))
        if gnorm < controls.gtol:
            reason = "gtol"
            break
        if iterations >= controls.maxiter:
            reason = "maxiter"
            break
        t_h = time.perf_counter()
        H = hessian_blocked(theta, d, index, controls.workers, probs=probs).matrix
        hess_time += time.perf_counter() - t_h
        delta, used_ridge = _newton_direction(H, g, controls.ridge_on_failure)
        ridge = ridge or used_ridge
        theta, j, l_new = _line_search(theta, delta, l_cur, d, index, controls.max_halvings)
        iterations += 1
        halvings += j
        delta_l = l_new - l_cur
        l_cur = l_new
        history.append(l_cur)
        log.info("iter %d: loglik %.10g, |grad| %.3g, halvings %d", iterations, l_cur, gnorm, j)
        if abs(delta_l) < controls.ftol:
            reason = "ftol"
            probs = probabilities(utilities(theta, d))
            gnorm = float(np.linalg.norm(gradient(theta, d, index, probs)))
            break

    t_h = time.perf_counter()
    hess = hessian_blocked(theta, d, index, controls.workers, probs=probs)
    hess_time += time.perf_counter() - t_h
    newton_total = time.perf_counter() - t_start
    return FitResult(
        theta_hat=theta,
        loglik=l_cur,
        grad_norm=gnorm,
        hessian=hess,
        iterations=iterations,
        linesearch_iterations=halvings,
        stop_reason=reason,
        loglik_delta=delta_l,
        timings={"preprocess": 0.0, "newton_total": newton_total, "hessian_total": hess_time},
        model_size=d.model_size(),
        info=d.info,
        controls=controls,
        fitted=probs,
        loglik_history=tuple(history),
        ridge_applied=ridge,
    )


def _start_vector(start, layout: ThetaLayout):
    if start is None:
        return None
    if isinstance(start, Mapping):
        unknown = set(start) - set(layout.names)
        if unknown:
            raise ValueError(f"start values for unknown coefficients {sorted(unknown)}")
        return np.array([float(start.get(n, 0.0)) for n in layout.names])
    return np.asarray(start, dtype=np.float64)


def fit(ds: LongDataset, formula, base: str = "auto", lin_dep_tol: float = 1e-6,
        controls: SolverControls = SolverControls(), start=None) -> FitResult:
    """Build the design for ``ds`` and fit it.

    Parameters
    ----------
    ds : LongDataset
    formula : str or ModelFormula
    base : str
        Base alternative, or "auto" for the first in sorted order.
    lin_dep_tol : float
        Relative tolerance of the collinearity screen.
    controls : SolverControls
    start : array or mapping of coefficient name to value, optional
        Starting point; zeros by default.
    """
    t0 = time.perf_counter()
    f = parse_formula(formula) if isinstance(formula, str) else formula
    d, layout = build_design(ds, f, base, lin_dep_tol)
    index = build_index(ds, d.base)
    preprocess = time.perf_counter() - t0
    res = newton_solve(d, index, controls, _start_vector(start, layout))
    timings = dict(res.timings, preprocess=preprocess)
    timings["total"] = preprocess + timings["newton_total"]
    return replace(res, timings=timings, data_fingerprint=ds.fingerprint())
