"""
Expectation propagation for a GP-driven Gaussian copula likelihood.

Each observation contributes ``c(u_i, v_i | tau = 2 Phi(f_i) - 1)``.  The
sites are Gaussian in natural form, ``exp(-s_i f^2 / 2 + nu_i f)``, and are
updated in parallel with damping.  All posterior quantities are computed in
the inducing-weight space of :class:`~gpvine.gpcond.kernels.FITCCovariance`:
with ``f = m + V w + e``, ``w ~ N(0, I)``, ``e ~ N(0, diag(d))`` the posterior
precision of ``w`` is ``M = I + V' diag(s / (1 + d s)) V``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .. import bicop
from ..bicop import CopulaFamily
from ..errors import DomainError, FitError, SizeError
from .kernels import FITCCovariance, FITCPrior, fitc_covariance

_LOG_SQRT_PI = 0.5 * np.log(np.pi)


@dataclass(frozen=True)
class EPConfig:
    quad_nodes: int = 32
    damping: float = 0.8
    tol: float = 1e-5
    max_sweeps: int = 200
    negative_sites: bool = True

    def __post_init__(self):
        if self.quad_nodes < 1 or self.max_sweeps < 1:
            raise DomainError("quad_nodes and max_sweeps must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise DomainError(f"damping must lie in (0, 1], got {self.damping}")


class Likelihood:
    """Gauss-Hermite moments of the copula likelihood against Gaussians in f."""

    def __init__(self, pairs, family=CopulaFamily.GAUSSIAN, quad_nodes=32):
        pairs = np.atleast_2d(np.asarray(pairs, dtype=float))
        if pairs.shape[1] != 2:
            raise SizeError("pairs must have shape (n, 2)")
        self.family = CopulaFamily(family)
        if not self.family.has_density:
            raise FitError(f"{self.family.value} copula has no density implementation")
        self.n = pairs.shape[0]
        self.a, self.b = bicop._scores(pairs[:, 0], pairs[:, 1])
        x, w = np.polynomial.hermite.hermgauss(quad_nodes)
        self.nodes = x
        self.log_weights = np.log(w) - _LOG_SQRT_PI

    def log_terms(self, f, idx=None):
        """log c(u_i, v_i | theta(f)) for f broadcast against the data axis 0."""
        a, b = (self.a, self.b) if idx is None else (self.a[idx], self.b[idx])
        theta = bicop.theta_from_latent(f)
        return bicop.logpdf_scores(a[:, None], b[:, None], theta)

    def moments(self, mean, var):
        """Log normalizer, mean and variance of the tilted distributions."""
        sd = np.sqrt(2.0 * var)
        f = mean[:, None] + sd[:, None] * self.nodes[None, :]
        if self.family is CopulaFamily.INDEPENDENT:
            return np.zeros_like(mean), mean.copy(), var.copy()
        lw = self.log_terms(f) + self.log_weights[None, :]
        logz = special.logsumexp(lw, axis=1)
        p = np.exp(lw - logz[:, None])
        mu = np.sum(p * f, axis=1)
        v = np.sum(p * (f - mu[:, None]) ** 2, axis=1)
        return logz, mu, v


@dataclass
class Posterior:
    """Gaussian EP posterior over training latents in inducing-weight form."""

    mean: np.ndarray
    var: np.ndarray
    w_mean: np.ndarray
    chol_M: np.ndarray
    logdet_B: float

    @classmethod
    def compute(cls, cov: FITCCovariance, m, s, nu):
        V, d = cov.V, cov.d
        r = 1.0 / (1.0 + d * s)
        M = np.eye(V.shape[1]) + (V * (s * r)[:, None]).T @ V
        L = linalg.cholesky(M, lower=True)
        b = nu - s * m
        w_mean = linalg.cho_solve((L, True), V.T @ (r * b))
        mean = m + r * (d * b + V @ w_mean)
        A = linalg.solve_triangular(L, (V * r[:, None]).T, lower=True)
        var = d * r + np.sum(A * A, axis=0)
        logdet_B = float(np.sum(np.log1p(d * s)) + 2.0 * np.sum(np.log(np.diag(L))))
        return cls(mean, var, w_mean, L, logdet_B)


@dataclass
class EPState:
    """Site parameters and the posterior they induce."""

    site_precisions: np.ndarray
    site_natural_means: np.ndarray
    posterior: Posterior
    log_evidence: float
    converged: bool
    n_sweeps: int
    prior_mean: float
    family: CopulaFamily = CopulaFamily.GAUSSIAN
    history: list = field(default_factory=list, repr=False)

    @property
    def site_means(self) -> np.ndarray:
        s = self.site_precisions
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, self.site_natural_means / np.where(s > 0, s, 1.0), np.nan)

    @property
    def posterior_mean(self) -> np.ndarray:
        return self.posterior.mean

    @property
    def posterior_var(self) -> np.ndarray:
        return self.posterior.var


def as_inputs(z) -> np.ndarray:
    """Conditioning inputs as an (n, d) float array; 1-d input means d = 1."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1, 1)
    elif z.ndim == 1:
        z = z[:, None]
    return z


def _valid_posterior(cov, m, s, nu):
    if np.any(1.0 + cov.d * s <= 0.0):
        return None
    try:
        post = Posterior.compute(cov, m, s, nu)
    except linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(post.mean)) or np.any(post.var <= 0.0):
        return None
    if np.any(1.0 / post.var - s <= 0.0):
        return None
    return post


def _cavity(post, s, nu):
    tau_c = 1.0 / post.var - s
    nu_c = post.mean / post.var - nu
    return tau_c, nu_c


def log_evidence(lik: Likelihood, cov: FITCCovariance, m, s, nu, post=None) -> float:
    """EP approximation of log p(pairs | inputs) for fixed site parameters."""
    if lik.family is CopulaFamily.INDEPENDENT:
        return 0.0
    if post is None:
        post = Posterior.compute(cov, m, s, nu)
    tau_c, nu_c = _cavity(post, s, nu)
    # extreme candidates overflow here; the caller rejects non-finite values
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logz, _, _ = lik.moments(nu_c / tau_c, 1.0 / tau_c)
        site_norm = (-0.5 * np.log1p(s / tau_c)
                     + 0.5 * (nu + nu_c) ** 2 / (s + tau_c)
                     - 0.5 * nu_c ** 2 / tau_c)
        b = nu - s * m
        gauss = (-0.5 * post.logdet_B + 0.5 * float(b @ (post.mean - m))
                 + m * float(np.sum(nu)) - 0.5 * m * m * float(np.sum(s)))
        out = float(np.sum(logz - site_norm) + gauss)
    return out if np.isfinite(out) else -np.inf


def ep_fit(pairs, inputs, family, prior: FITCPrior, config: EPConfig | None = None,
           init=None, covariance: FITCCovariance | None = None) -> EPState:
    """Run damped parallel EP to a fixed point.

    Parameters
    ----------
    pairs : (n, 2) array
        Conditional pseudo-observations (u_i, v_i).
    inputs : (n, d) array
        Conditioning values z_i.
    family : CopulaFamily
        Gaussian or Independent.
    prior : FITCPrior
    config : EPConfig, optional
    init : tuple of arrays, optional
        Starting site precisions and natural means (warm start).
    covariance : FITCCovariance, optional
        Prior covariance to use instead of the FITC one built from `prior`.

    Returns
    -------
    EPState
        ``converged`` is False when `max_sweeps` ran out first.
    """
    config = config or EPConfig()
    inputs = as_inputs(inputs)
    lik = Likelihood(pairs, family, config.quad_nodes)
    if inputs.shape[0] != lik.n:
        raise SizeError(f"{lik.n} pairs but {inputs.shape[0]} input rows")
    cov = covariance if covariance is not None else fitc_covariance(inputs, prior)
    m = float(prior.prior_mean)
    n = lik.n
    if init is None:
        s, nu = np.zeros(n), np.zeros(n)
    else:
        s, nu = (np.array(x, dtype=float, copy=True) for x in init)
    post = _valid_posterior(cov, m, s, nu) if init is not None else None
    if post is None:
        # a warm start can be infeasible under a different prior
        s, nu = np.zeros(n), np.zeros(n)
        post = Posterior.compute(cov, m, s, nu)
    if lik.family is CopulaFamily.INDEPENDENT:
        return EPState(s, nu, post, 0.0, True, 0, m, lik.family)

    converged = False
    failures = 0
    sweep = 0
    delta = config.damping
    for sweep in range(1, config.max_sweeps + 1):
        tau_c, nu_c = _cavity(post, s, nu)
        ok = tau_c > 0.0
        v_c = np.where(ok, 1.0 / np.where(ok, tau_c, 1.0), 1.0)
        _, mu_t, var_t = lik.moments(nu_c * v_c, v_c)
        ok &= np.isfinite(mu_t) & np.isfinite(var_t) & (var_t > 0.0)
        if not np.any(ok):
            failures += 1
            if failures >= 3:
                raise FitError("EP tilted moments are non-finite for every site")
            continue
        s_new = np.where(ok, 1.0 / np.where(ok, var_t, 1.0) - tau_c, s)
        nu_new = np.where(ok, mu_t / np.where(ok, var_t, 1.0) - nu_c, nu)
        # a negative precision means the tilted distribution is wider than
        # the cavity; the clipped fallback keeps the cavity width and
        # matches only the mean
        neg = ok & (s_new < 0.0)
        s_clip = np.where(neg, 0.0, s_new)
        nu_clip = np.where(neg, mu_t * tau_c - nu_c, nu_new)
        candidates = [(s_new, nu_new), (s_clip, nu_clip)] if config.negative_sites \
            else [(s_clip, nu_clip)]
        post_next = None
        for s_try, nu_try in candidates:
            s_next = (1.0 - delta) * s + delta * s_try
            nu_next = (1.0 - delta) * nu + delta * nu_try
            post_next = _valid_posterior(cov, m, s_next, nu_next)
            if post_next is not None:
                break
        if post_next is None:
            delta *= 0.5
            continue
        change = max(float(np.max(np.abs(s_next - s))), float(np.max(np.abs(nu_next - nu))))
        s, nu, post = s_next, nu_next, post_next
        if change < config.tol:
            converged = True
            break
    logz = log_evidence(lik, cov, m, s, nu, post)
    if not np.isfinite(logz):
        raise FitError("EP evidence is not finite")
    return EPState(s, nu, post, logz, converged, sweep, m, lik.family)


def ep_evidence(state: EPState) -> float:
    """Log evidence stored on a fitted EP state."""
    return state.log_evidence
