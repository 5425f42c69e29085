"""Fitted GP conditional copulas: hyperparameter tuning and prediction."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, special
from scipy.cluster.vq import kmeans2

from .. import bicop
from ..bicop import CopulaFamily
from ..errors import DomainError, FitError
from .ep import EPConfig, EPState, as_inputs, ep_fit
from .kernels import FITCCovariance, FITCPrior, KernelHyper, fitc_covariance

_LOG_BOUNDS = {"lengthscale": (np.log(1e-3), np.log(1e5)),
               "amplitude": (np.log(1e-4), np.log(10.0)),
               "noise": (np.log(1e-8), np.log(10.0))}


class TuningWarning(RuntimeWarning):
    """No hyperparameter candidate produced a converged EP run."""


@dataclass(frozen=True)
class GPConfig:
    """Settings for fitting one GP conditional copula."""

    n_pseudo: int = 20
    ep: EPConfig = field(default_factory=EPConfig)
    init_lengthscales: tuple = (0.05, 0.15, 0.5)
    init_amplitude: float = 0.25
    init_noise: float = 1e-3
    step: float = 1.0
    min_step: float = 0.125
    max_evals: int = 60
    min_gain: float = 1e-3
    refine_pseudo_inputs: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_pseudo < 1:
            raise DomainError(f"n_pseudo must be positive, got {self.n_pseudo}")

    def with_quadrature(self, nodes: int) -> "GPConfig":
        return replace(self, ep=replace(self.ep, quad_nodes=int(nodes)))


@dataclass
class GPConditionalCopula:
    """Gaussian copula whose Kendall tau is ``2 Phi(f(z)) - 1`` under a GP posterior."""

    family: CopulaFamily
    prior: FITCPrior
    ep: EPState
    training_inputs: np.ndarray
    quad_nodes: int = 32
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = CopulaFamily(self.family)
        self.training_inputs = as_inputs(self.training_inputs)
        self._cov = None

    @property
    def input_dim(self) -> int:
        return self.training_inputs.shape[1]

    def _covariance(self) -> FITCCovariance:
        if self._cov is None:
            self._cov = fitc_covariance(self.training_inputs, self.prior)
        return self._cov

    def latent(self, z):
        """Predictive mean and variance of f at each row of `z`."""
        z = as_inputs(z)
        cov = self._covariance()
        Vz, dz = cov.project(z)
        post = self.ep.posterior
        mean = self.prior.prior_mean + Vz @ post.w_mean
        A = linalg.solve_triangular(post.chol_M, Vz.T, lower=True)
        var = dz + np.sum(A * A, axis=0)
        return mean, np.maximum(var, 0.0)


def initial_pseudo_inputs(inputs, n_pseudo, seed=0) -> np.ndarray:
    """k-means centres of the inputs, deduplicated and topped up with data rows."""
    inputs = as_inputs(inputs)
    n = inputs.shape[0]
    k = min(n_pseudo, n)
    uniq = np.unique(inputs, axis=0)
    if uniq.shape[0] <= k:
        return uniq
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        centres, _ = kmeans2(inputs, k, seed=rng, minit="++")
    centres = np.unique(centres[np.all(np.isfinite(centres), axis=1)], axis=0)
    if centres.shape[0] < k:
        extra = [row for row in uniq if not np.any(np.all(np.isclose(centres, row), axis=1))]
        centres = np.vstack([centres] + extra[: k - centres.shape[0]])
    return centres[np.lexsort(centres.T[::-1])]


def prior_mean_from_mle(pairs) -> float:
    """Constant prior mean ``Phi^-1((tau_mle + 1) / 2)``."""
    tau = bicop.fit_theta_mle(pairs).tau
    return float(special.ndtri((tau + 1.0) / 2.0))


class _Objective:
    """EP evidence as a function of log-hyperparameters, warm-started."""

    def __init__(self, pairs, inputs, family, config: GPConfig):
        self.pairs = pairs
        self.inputs = inputs
        self.family = family
        self.config = config
        self.n_evals = 0

    def __call__(self, prior: FITCPrior, warm=None):
        self.n_evals += 1
        init = None if warm is None else (warm.site_precisions, warm.site_natural_means)
        try:
            state = ep_fit(self.pairs, self.inputs, self.family, prior, self.config.ep, init=init)
            if not state.converged and init is not None:
                state = ep_fit(self.pairs, self.inputs, self.family, prior, self.config.ep)
        except (FitError, linalg.LinAlgError, FloatingPointError):
            return None
        return state


def _clip_log(x, dim):
    lo = np.r_[[_LOG_BOUNDS["lengthscale"][0]] * dim, _LOG_BOUNDS["amplitude"][0],
               _LOG_BOUNDS["noise"][0]]
    hi = np.r_[[_LOG_BOUNDS["lengthscale"][1]] * dim, _LOG_BOUNDS["amplitude"][1],
               _LOG_BOUNDS["noise"][1]]
    return np.clip(x, lo, hi)


def _coordinate_search(objective, prior, state, config):
    """Cyclic +/- step search over log-hyperparameters.

    Each coordinate is tried in turn; a move is kept when its EP run
    converges and raises the evidence by more than ``config.min_gain``.  The
    step halves after a full cycle without a kept move.
    """
    x = prior.hyper.to_log()
    dim = prior.hyper.dim
    best_prior, best_state = prior, state
    best = state.log_evidence if state is not None and state.converged else -np.inf
    step = config.step
    evals = 0
    while step >= config.min_step and evals < config.max_evals:
        improved = False
        for j in range(x.size):
            for sign in (1.0, -1.0):
                if evals >= config.max_evals:
                    break
                cand_x = x.copy()
                cand_x[j] += sign * step
                cand_x = _clip_log(cand_x, dim)
                if cand_x[j] == x[j]:
                    continue
                cand = best_prior.replace(hyper=KernelHyper.from_log(cand_x))
                cand_state = objective(cand, warm=best_state)
                evals += 1
                if cand_state is None or not cand_state.converged:
                    continue
                if cand_state.log_evidence > best + config.min_gain:
                    x, best, best_prior, best_state = cand_x, cand_state.log_evidence, cand, cand_state
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return best_prior, best_state, best


def _refine_pseudo_inputs(objective, prior, state, best, span):
    Z = prior.pseudo_inputs.copy()
    step = 0.05 * span
    for i in range(Z.shape[0]):
        for k in range(Z.shape[1]):
            for sign in (1.0, -1.0):
                trial = Z.copy()
                trial[i, k] += sign * step[k]
                if np.any(np.all(np.delete(trial, i, axis=0) == trial[i], axis=1)):
                    continue
                cand = prior.replace(pseudo_inputs=trial)
                cand_state = objective(cand, warm=state)
                if cand_state is not None and cand_state.converged and cand_state.log_evidence > best + 1e-9:
                    Z, prior, state, best = trial, cand, cand_state, cand_state.log_evidence
                    break
    return prior, state, best


def _tune(pairs, inputs, family, initial: FITCPrior, config: GPConfig, starts=None):
    objective = _Objective(pairs, inputs, family, config)
    init_state = objective(initial)
    base = init_state.log_evidence if init_state is not None and init_state.converged else -np.inf
    best_prior, best_state, best = initial, init_state, base
    for start in [initial] + list(starts or []):
        st = init_state if start is initial else objective(start)
        p, s, ev = _coordinate_search(objective, start, st, config)
        if s is not None and ev > best:
            best_prior, best_state, best = p, s, ev
    if config.refine_pseudo_inputs and np.isfinite(best):
        span = np.ptp(inputs, axis=0)
        span = np.where(span > 0, span, 1.0)
        best_prior, best_state, best = _refine_pseudo_inputs(
            objective, best_prior, best_state, best, span)
    if not np.isfinite(best):
        warnings.warn("no hyperparameter candidate produced a converged EP fit; "
                      "keeping the initial prior", TuningWarning, stacklevel=3)
        return initial, init_state, False
    return best_prior, best_state, True


def optimize_hyperparameters(pairs, inputs, family, initial: FITCPrior,
                             config: GPConfig | None = None) -> FITCPrior:
    """Maximize the EP evidence over log kernel hyperparameters.

    Candidates are accepted only when their EP run converges and raises the
    evidence, so the result never has lower evidence than `initial`.
    Pseudo-inputs move only when ``config.refine_pseudo_inputs`` is set.
    """
    config = config or GPConfig()
    prior, _, _ = _tune(np.asarray(pairs, dtype=float), as_inputs(inputs),
                        CopulaFamily(family), initial, config)
    return prior


def fit_gp_copula(pairs, inputs, family=CopulaFamily.GAUSSIAN,
                  config: GPConfig | None = None) -> GPConditionalCopula:
    """Fit a conditional copula with a sparse GP prior on the latent tau function."""
    config = config or GPConfig()
    pairs = np.asarray(pairs, dtype=float)
    inputs = as_inputs(inputs)
    family = CopulaFamily(family)
    d = inputs.shape[1]
    Z0 = initial_pseudo_inputs(inputs, config.n_pseudo, config.seed)
    if family is CopulaFamily.INDEPENDENT:
        prior = FITCPrior(Z0, KernelHyper((1.0,) * d, 1.0, 0.0), 0.0)
        state = ep_fit(pairs, inputs, family, prior, config.ep)
        return GPConditionalCopula(family, prior, state, inputs, config.ep.quad_nodes,
                                   {"tuned": False})
    m = prior_mean_from_mle(pairs)
    span = np.ptp(inputs, axis=0)
    span = np.where(span > 0, span, 1.0)

    def hyper_for(frac):
        lam = tuple(1.0 / (2.0 * (frac * span) ** 2))
        return KernelHyper(lam, config.init_amplitude, config.init_noise)

    priors = [FITCPrior(Z0, hyper_for(f), m) for f in config.init_lengthscales]
    prior, state, ok = _tune(pairs, inputs, family, priors[0], config, starts=priors[1:])
    if state is None:
        raise FitError("EP failed for every hyperparameter setting")
    diagnostics = {"tuned": ok, "log_evidence": state.log_evidence,
                   "converged": state.converged, "n_sweeps": state.n_sweeps}
    return GPConditionalCopula(family, prior, state, inputs, config.ep.quad_nodes, diagnostics)


def predict_tau(model: GPConditionalCopula, z):
    """Posterior mean and standard deviation of Kendall's tau at `z`.

    Integrates ``2 Phi(f) - 1`` against the Gaussian predictive of ``f`` with
    the model's Gauss-Hermite rule.  A single point returns floats.
    """
    single = np.ndim(z) <= 1 and np.size(z) == model.input_dim
    z = np.atleast_2d(np.asarray(z, dtype=float)) if single else as_inputs(z)
    mean, var = model.latent(z)
    x, w = np.polynomial.hermite.hermgauss(model.quad_nodes)
    f = mean[:, None] + np.sqrt(2.0 * var)[:, None] * x[None, :]
    g = 2.0 * special.ndtr(f) - 1.0
    w = w / np.sqrt(np.pi)
    tau_mean = g @ w
    tau_sd = np.sqrt(np.maximum((g - tau_mean[:, None]) ** 2 @ w, 0.0))
    if single:
        return float(tau_mean[0]), float(tau_sd[0])
    return tau_mean, tau_sd


def log_predict_density(model: GPConditionalCopula, u, v, z):
    """Log of the predictive copula density, integrated over f."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    a, b = bicop._scores(u, v)
    if model.family is CopulaFamily.INDEPENDENT:
        return np.zeros(np.broadcast(a, b).shape)
    z = as_inputs(z)
    if z.shape[1] != model.input_dim:
        z = z.reshape(-1, model.input_dim)
    mean, var = model.latent(z)
    x, w = np.polynomial.hermite.hermgauss(model.quad_nodes)
    f = mean[:, None] + np.sqrt(2.0 * var)[:, None] * x[None, :]
    lw = bicop.logpdf_scores(a[:, None], b[:, None], bicop.theta_from_latent(f))
    return special.logsumexp(lw + np.log(w / np.sqrt(np.pi))[None, :], axis=1)


def predict_density(model: GPConditionalCopula, u, v, z):
    """Predictive copula density ``E_f[c(u, v | tau = 2 Phi(f) - 1)]`` at `z`."""
    out = np.exp(log_predict_density(model, u, v, z))
    return float(out[0]) if np.ndim(u) == 0 and out.size == 1 else out
