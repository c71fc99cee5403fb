"""Multinomial logit estimation by Newton-Raphson with a block-structured Hessian.

Typical use::

    from blocklogit import CsvConfig, read_long_csv, fit, summarize

    ds = read_long_csv("fish.csv", CsvConfig(id_col="chid", alt_col="alt", response_col="mode"))
    res = fit(ds, "mode ~ price | income | catch")
    print(summarize(res).to_text())
"""

from .bench import amdahl_speedup, blocked_vs_dense_timing, profile_fit, run_bench
from .dataset import ChoiceIndex, CsvConfig, LongDataset, build_index, read_long_csv, subset_alternatives, write_long_csv
from .design import DesignInfo, DesignMatrices, ThetaLayout, build_design, count_parameters
from .errors import (
    BlockLogitError,
    DataError,
    FormulaError,
    LineSearchError,
    NotNestedError,
    RankError,
    SingularHessianError,
    StructuralSingularityError,
)
from .formula import ModelFormula, format_formula, parse_formula
from .inference import (
    covariance,
    format_est_stat,
    format_model_size,
    lrtest,
    predict_probs,
    scoretest,
    summarize,
    waldtest,
)
from .likelihood import gradient, hessian_blocked, hessian_dense_oracle, loglik, probabilities, utilities
from .serialize import load_model, save_model
from .simgen import ProblemSpec, make_problem, recovery_check
from .solver import FitResult, SolverControls, fit, newton_solve

__version__ = "0.1.0"

__all__ = [
    "ModelFormula", "parse_formula", "format_formula",
    "CsvConfig", "LongDataset", "ChoiceIndex", "read_long_csv", "write_long_csv", "subset_alternatives",
    "build_index",
    "DesignInfo", "DesignMatrices", "ThetaLayout", "build_design", "count_parameters",
    "utilities", "probabilities", "loglik", "gradient", "hessian_blocked", "hessian_dense_oracle",
    "SolverControls", "FitResult", "fit", "newton_solve",
    "summarize", "covariance", "predict_probs", "lrtest", "waldtest", "scoretest",
    "format_est_stat", "format_model_size",
    "save_model", "load_model",
    "ProblemSpec", "make_problem", "recovery_check",
    "profile_fit", "run_bench", "amdahl_speedup", "blocked_vs_dense_timing",
    "BlockLogitError", "FormulaError", "DataError", "RankError", "StructuralSingularityError",
    "SingularHessianError", "LineSearchError", "NotNestedError",
]
