"""Regular vine copulas with conditional Gaussian pair copulas.

Kendall's tau of each conditional pair copula is ``2 Phi(f(z)) - 1`` where
``f`` has a sparse (FITC) Gaussian-process prior and is inferred by
expectation propagation.  Constant-parameter vines and a local-likelihood
estimator serve as baselines.
"""
from .bicop import (CopulaFamily, CopulaParam, fit_theta_mle, gaussian_h, gaussian_loglik,
                    gaussian_logpdf, gaussian_pdf, tau_to_theta, theta_to_tau)
from .data import RawDataset, SplitSpec, load_csv, split, synth_sample
from .empirics import PseudoSample, kendall_tau, pseudo_observations
from .errors import (BandwidthError, BoundaryError, DomainError, FitError, GPVineError,
                     NumericalError, ParseError, SizeError, StateError, UnsupportedOperation,
                     WindowError)
from .experiments import compare, paired_wilcoxon, synthetic_protocol
from .serialize import load_model, save_model
from .vine import (Estimator, RVineStructure, VineConfig, VineEdge, VineModel,
                   build_structure, evaluate, fit, h_propagate, log_density, tau_surface)

__version__ = "0.1.0"
