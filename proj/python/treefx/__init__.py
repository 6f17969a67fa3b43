"""Bayesian tree ensembles (BART, DART, BCF) for treatment effects and variable selection."""

from ._core import (
    BcfFitResult,
    DataError,
    FitResult,
    __version__,
    cate,
    compute_pip,
    credible_interval,
    estimate_ite,
    fit_bart,
    fit_bcf,
    fit_glm_propensity,
    fit_probit,
    ice_curves,
    load_model,
    observed_grid,
    pdp_curve,
    rmse,
    run_benchmark,
    save_model,
    select_variables,
    selection_metrics,
    simulate,
    thin_grid,
)

__all__ = [
    "BcfFitResult",
    "DataError",
    "FitResult",
    "__version__",
    "cate",
    "compute_pip",
    "credible_interval",
    "estimate_ite",
    "fit_bart",
    "fit_bcf",
    "fit_glm_propensity",
    "fit_probit",
    "ice_curves",
    "load_model",
    "observed_grid",
    "pdp_curve",
    "rmse",
    "run_benchmark",
    "save_model",
    "select_variables",
    "selection_metrics",
    "simulate",
    "thin_grid",
]
