"""Versioned JSON model files for later prediction.

A model file is a plain JSON object::

    {
      "format": "blocklogit-model",
      "version": 1,
      "formula": "choice ~ price | income | catch",
      "alternatives": ["beach", "boat", "charter", "pier"],   # base first
      "x_names": [...], "y_names": {"beach": [...], ...}, "z_names": [...],
      "dropped_columns": [...],
      "names": [...], "theta": [...], "covariance": [[...]] or null,
      "loglik": ..., "stop_reason": "ftol",
      "columns": {"id_col": ..., "alt_col": ..., "response_col": ..., "weights_col": ..., "alt_subset": ...}
    }

Floats are written with ``repr`` precision, so a loaded model reproduces
the in-memory estimates bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import DesignInfo
from .errors import BlockLogitError, SingularHessianError
from .formula import format_formula, parse_formula
from .inference import covariance

__all__ = ["MODEL_FORMAT", "MODEL_VERSION", "SavedModel", "model_to_dict", "save_model", "load_model"]

MODEL_FORMAT = "blocklogit-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class SavedModel:
    """A fitted model read back from disk; accepted by ``predict_probs``."""

    info: DesignInfo
    theta_hat: np.ndarray
    covariance: Optional[np.ndarray]
    loglik: float
    stop_reason: str
    columns: dict

    @property
    def names(self) -> tuple:
        return self.info.layout().names


def model_to_dict(fit, columns: Optional[dict] = None) -> dict:
    info = fit.info
    try:
        cov = covariance(fit).tolist()
    except SingularHessianError:
        cov = None
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "formula": format_formula(info.formula),
        "alternatives": list(info.alternatives),
        "x_names": list(info.x_names),
        "y_names": {a: list(n) for a, n in zip(info.alternatives, info.y_names)},
        "z_names": list(info.z_names),
        "dropped_columns": list(info.dropped_columns),
        "names": list(fit.names),
        "theta": [float(t) for t in fit.theta_hat],
        "covariance": cov,
        "loglik": float(fit.loglik),
        "stop_reason": fit.stop_reason,
        "columns": dict(columns or {}),
    }


def save_model(fit, path, columns: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(fit, columns), fh, indent=1)
        fh.write("\n")


def load_model(path) -> SavedModel:
    """Read a model file written by :func:`save_model`.

    Raises
    ------
    BlockLogitError
        Wrong format tag, unsupported version, or inconsistent contents.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BlockLogitError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise BlockLogitError(f"{path} is not a blocklogit model file")
    if doc.get("version") != MODEL_VERSION:
        raise BlockLogitError(f"unsupported model file version {doc.get('version')!r}")
    alts = tuple(doc["alternatives"])
    info = DesignInfo(
        formula=parse_formula(doc["formula"]),
        alternatives=alts,
        x_names=tuple(doc["x_names"]),
        y_names=tuple(tuple(doc["y_names"][a]) for a in alts),
        z_names=tuple(doc["z_names"]),
        dropped_columns=tuple(doc.get("dropped_columns", ())),
    )
    theta = np.array(doc["theta"], dtype=np.float64)
    if info.layout().names != tuple(doc["names"]) or len(theta) != len(doc["names"]):
        raise BlockLogitError("model file coefficient names do not match its design description")
    cov = None if doc.get("covariance") is None else np.array(doc["covariance"], dtype=np.float64)
    return SavedModel(info, theta, cov, float(doc["loglik"]), doc["stop_reason"], dict(doc.get("columns", {})))
