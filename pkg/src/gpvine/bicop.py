"""
Bivariate Gaussian copula and Kendall-tau parametrizations.

All density and h-function routines broadcast over numpy arrays.  The
``*_scores`` variants take normal scores ``a = ndtri(u)`` and ``b = ndtri(v)``
directly; they skip input validation and are what the inner loops of the
EP and local-likelihood estimators call.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import BoundaryError, DomainError, FitError, SizeError

#: |theta| is kept at most this far below one wherever theta is derived from tau.
THETA_EPS = 1e-6
THETA_MAX = 1.0 - THETA_EPS


class CopulaFamily(str, enum.Enum):
    """Parametric bivariate copula families indexed by Kendall's tau."""

    GAUSSIAN = "gaussian"
    STUDENT = "student"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    INDEPENDENT = "independent"

    @property
    def has_density(self) -> bool:
        return self in (CopulaFamily.GAUSSIAN, CopulaFamily.INDEPENDENT)


@dataclass(frozen=True)
class CopulaParam:
    """A copula parameter expressed both natively (theta) and as Kendall's tau."""

    family: CopulaFamily
    theta: float
    tau: float

    @classmethod
    def from_tau(cls, family, tau):
        family = CopulaFamily(family)
        return cls(family, float(tau_to_theta(family, tau)), float(tau))

    @classmethod
    def from_theta(cls, family, theta):
        family = CopulaFamily(family)
        return cls(family, float(theta), float(theta_to_tau(family, theta)))


def _check_range(family, name, x, lo, hi, lo_open, hi_open):
    x = np.asarray(x, dtype=float)
    bad = ~np.isfinite(x)
    bad |= (x <= lo) if lo_open else (x < lo)
    bad |= (x >= hi) if hi_open else (x > hi)
    if np.any(bad):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise DomainError(
            f"{name} outside the {family.value} domain {lb}{lo}, {hi}{rb}")
    return x


def tau_to_theta(family, tau):
    """Map Kendall's tau to the native parameter of `family`.

    Parameters
    ----------
    family : CopulaFamily or str
    tau : float or array_like

    Returns
    -------
    theta : float or ndarray
        ``sin(pi tau / 2)`` for Gaussian and Student, ``2 tau / (1 - tau)``
        for Clayton and ``1 / (1 - tau)`` for Gumbel.
    """
    family = CopulaFamily(family)
    scalar = np.ndim(tau) == 0
    if family in (CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT):
        t = _check_range(family, "tau", tau, -1.0, 1.0, False, False)
        out = np.sin(0.5 * np.pi * t)
    elif family is CopulaFamily.CLAYTON:
        t = _check_range(family, "tau", tau, 0.0, 1.0, True, True)
        out = 2.0 * t / (1.0 - t)
    elif family is CopulaFamily.GUMBEL:
        t = _check_range(family, "tau", tau, 0.0, 1.0, False, True)
        out = 1.0 / (1.0 - t)
    else:
        t = _check_range(family, "tau", tau, 0.0, 0.0, False, False)
        out = np.zeros_like(t)
    return float(out) if scalar else out


def theta_to_tau(family, theta):
    """Inverse of :func:`tau_to_theta`."""
    family = CopulaFamily(family)
    scalar = np.ndim(theta) == 0
    if family in (CopulaFamily.GAUSSIAN, CopulaFamily.STUDENT):
        th = _check_range(family, "theta", theta, -1.0, 1.0, False, False)
        out = 2.0 / np.pi * np.arcsin(th)
    elif family is CopulaFamily.CLAYTON:
        th = _check_range(family, "theta", theta, 0.0, np.inf, True, True)
        out = th / (th + 2.0)
    elif family is CopulaFamily.GUMBEL:
        th = _check_range(family, "theta", theta, 1.0, np.inf, False, True)
        out = 1.0 - 1.0 / th
    else:
        th = _check_range(family, "theta", theta, 0.0, 0.0, False, False)
        out = np.zeros_like(th)
    return float(out) if scalar else out


def clamp_theta(theta):
    return np.clip(theta, -THETA_MAX, THETA_MAX)


def theta_from_latent(f):
    """Gaussian-copula correlation for latent values, tau = 2 Phi(f) - 1."""
    tau = 2.0 * special.ndtr(f) - 1.0
    return clamp_theta(np.sin(0.5 * np.pi * tau))


def _scores(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(~(u > 0.0) | ~(u < 1.0)) or np.any(~(v > 0.0) | ~(v < 1.0)):
        raise BoundaryError("pseudo-observations must lie strictly inside (0, 1)")
    return special.ndtri(u), special.ndtri(v)


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~(np.abs(theta) < 1.0)):
        raise DomainError("Gaussian copula needs |theta| < 1")
    return theta


def logpdf_scores(a, b, theta):
    """Log Gaussian copula density at normal scores (a, b); no validation."""
    one_m = 1.0 - theta * theta
    return (-0.5 * np.log(one_m)
            - (theta * theta * (a * a + b * b) - 2.0 * theta * a * b) / (2.0 * one_m))


def h_scores(a, b, theta):
    """P(U <= u | V = v) at normal scores; no validation."""
    return special.ndtr((a - theta * b) / np.sqrt(1.0 - theta * theta))


def gaussian_logpdf(u, v, theta):
    a, b = _scores(u, v)
    theta = _check_theta(theta)
    out = logpdf_scores(a, b, theta)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_pdf(u, v, theta):
    """Density of the bivariate Gaussian copula.

    Parameters
    ----------
    u, v : float or array_like
        Points in the open unit interval.
    theta : float or array_like
        Correlation parameter, ``|theta| < 1``.

    Returns
    -------
    float or ndarray
        ``phi2(a, b | theta) / (phi(a) phi(b))`` with ``a, b`` the normal
        scores of ``u, v``.
    """
    out = np.exp(gaussian_logpdf(u, v, theta))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_h(u, v, theta):
    """Conditional cdf of the first argument given the second, dC/dv."""
    a, b = _scores(u, v)
    theta = _check_theta(theta)
    out = h_scores(a, b, theta)
    return float(out) if np.ndim(out) == 0 else out


def _as_pairs(sample):
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 2 or sample.shape[1] != 2:
        raise SizeError(f"expected an (n, 2) array of pairs, got shape {sample.shape}")
    return sample


def gaussian_loglik(sample, theta):
    """Sum of log copula densities over an (n, 2) sample of pairs."""
    sample = _as_pairs(sample)
    return float(np.sum(gaussian_logpdf(sample[:, 0], sample[:, 1], theta)))


def fit_theta_mle(sample):
    """Maximum likelihood Gaussian copula parameter for an (n, 2) sample.

    The search runs over tau in the range induced by ``|theta| <= 1 - 1e-6``
    with bounded Brent minimization.
    """
    sample = _as_pairs(sample)
    if sample.shape[0] < 2:
        raise FitError("need at least two pairs to fit a copula")
    if np.ptp(sample[:, 0]) == 0.0 and np.ptp(sample[:, 1]) == 0.0:
        raise FitError("degenerate sample: every pair is identical")
    a, b = _scores(sample[:, 0], sample[:, 1])
    saa = float(np.sum(a * a + b * b))
    sab = float(np.sum(a * b))
    n = sample.shape[0]

    def negll(tau):
        th = np.sin(0.5 * np.pi * tau)
        one_m = 1.0 - th * th
        return 0.5 * n * np.log(one_m) + (th * th * saa - 2.0 * th * sab) / (2.0 * one_m)

    bound = theta_to_tau(CopulaFamily.GAUSSIAN, THETA_MAX)
    # coarse grid first: the likelihood equation is a cubic in theta
    grid = np.linspace(-bound, bound, 41)
    k = int(np.argmin([negll(t) for t in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = optimize.minimize_scalar(negll, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    tau = float(res.x)
    return CopulaParam(CopulaFamily.GAUSSIAN, float(np.sin(0.5 * np.pi * tau)), tau)
