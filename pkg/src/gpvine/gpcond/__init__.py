"""Conditional bivariate copulas with a sparse GP prior on the latent tau function."""
from .ep import EPConfig, EPState, ep_evidence, ep_fit
from .kernels import (FITCCovariance, FITCPrior, KernelHyper, fitc_covariance,
                      full_covariance, kernel_matrix)
from .model import (GPConditionalCopula, GPConfig, TuningWarning, fit_gp_copula,
                    initial_pseudo_inputs, log_predict_density, optimize_hyperparameters,
                    predict_density, predict_tau, prior_mean_from_mle)

__all__ = [
    "EPConfig", "EPState", "ep_evidence", "ep_fit",
    "FITCCovariance", "FITCPrior", "KernelHyper", "fitc_covariance", "full_covariance",
    "kernel_matrix", "GPConditionalCopula", "GPConfig", "TuningWarning", "fit_gp_copula",
    "initial_pseudo_inputs", "log_predict_density", "optimize_hyperparameters",
    "predict_density", "predict_tau", "prior_mean_from_mle",
]
