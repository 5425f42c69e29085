"""
Maximum local likelihood estimation of a conditional copula.

The latent ``f(z)`` is approximated linearly around each evaluation point
and fitted by kernel-weighted likelihood with an Epanechnikov kernel.  Only
a single scalar conditioning variable is supported.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import bicop
from .bicop import CopulaFamily
from .errors import BandwidthError, DomainError, SizeError, WindowError

DEFAULT_GRID = tuple(np.logspace(np.log10(0.05), np.log10(10.0), 30))
_FALLBACK_STARTS = (-1.0, 0.0, 1.0)
_B0_BOUND = 4.0
_SLOPE_SPAN = 8.0


def epanechnikov(x, h):
    """``3 / (4 h) * max(0, 1 - (x / h)^2)``."""
    if not h > 0:
        raise DomainError(f"bandwidth must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    out = 0.75 / h * np.maximum(0.0, 1.0 - (x / h) ** 2)
    return float(out) if out.ndim == 0 else out


def _dlogc_dtheta(a, b, theta):
    q = 1.0 - theta * theta
    return (theta * q + (1.0 + theta * theta) * a * b - theta * (a * a + b * b)) / (q * q)


def _dtheta_df(f):
    tau = 2.0 * special.ndtr(f) - 1.0
    theta = np.sin(0.5 * np.pi * tau)
    # zero slope where theta is clamped
    return np.where(np.abs(theta) < bicop.THETA_MAX,
                    np.pi * np.cos(0.5 * np.pi * tau) * np.exp(-0.5 * f * f) / np.sqrt(2 * np.pi),
                    0.0)


@dataclass
class MLLModel:
    """Training data and bandwidth of a local-likelihood conditional copula."""

    pairs: np.ndarray
    inputs: np.ndarray
    bandwidth: float
    family: CopulaFamily = CopulaFamily.GAUSSIAN
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 2 and inputs.shape[1] == 1:
            inputs = inputs[:, 0]
        if inputs.ndim != 1:
            raise SizeError("local likelihood conditions on a single scalar variable")
        self.inputs = inputs
        if self.pairs.shape != (inputs.size, 2):
            raise SizeError("pairs must be (n, 2) with one input per pair")
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        self.family = CopulaFamily(self.family)
        self._a, self._b = bicop._scores(self.pairs[:, 0], self.pairs[:, 1])


def _loglik_terms(a, b, f):
    theta = bicop.theta_from_latent(f)
    return bicop.logpdf_scores(a, b, theta)


def _score(a, b, f):
    theta = bicop.theta_from_latent(f)
    return _dlogc_dtheta(a, b, theta) * _dtheta_df(f)


def _newton(a, b, s, w, start, iters=100):
    """Batched projected Newton ascent on (b0, c1) with f = b0 + c1 * s.

    Rows index evaluation points; columns index training points.  ``s`` is
    the scaled offset ``(z - z_i) / h`` and ``w`` the kernel weights.
    """
    beta = start.copy()
    lo = np.array([-_B0_BOUND, -_SLOPE_SPAN])
    hi = -lo

    def value(bt):
        f = bt[:, :1] + bt[:, 1:] * s
        return np.sum(w * _loglik_terms(a, b, f), axis=1)

    val = value(beta)
    active = np.ones(beta.shape[0], dtype=bool)
    eps = 1e-5
    for _ in range(iters):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        ai, bi, si, wi = a[idx], b[idx], s[idx], w[idx]
        f = beta[idx, :1] + beta[idx, 1:] * si
        g = wi * _score(ai, bi, f)
        grad = np.stack([g.sum(1), (g * si).sum(1)], axis=1)
        h2 = wi * (_score(ai, bi, f + eps) - _score(ai, bi, f - eps)) / (2 * eps)
        H = np.empty((idx.size, 2, 2))
        H[:, 0, 0] = h2.sum(1)
        H[:, 0, 1] = H[:, 1, 0] = (h2 * si).sum(1)
        H[:, 1, 1] = (h2 * si * si).sum(1)
        # shift to negative definite where the local surface is not concave
        top = np.linalg.eigvalsh(H)[:, -1]
        shift = np.where(top > -1e-8, top + 1e-6 * (1.0 + np.abs(H).max(axis=(1, 2))), 0.0)
        H[:, 0, 0] -= shift
        H[:, 1, 1] -= shift
        step = -np.linalg.solve(H, grad[:, :, None])[:, :, 0]
        t = np.ones(idx.size)
        new_val = np.full(idx.size, -np.inf)
        accepted = np.zeros(idx.size, dtype=bool)
        trial = beta[idx].copy()
        for _ in range(40):
            pend = ~accepted
            if not np.any(pend):
                break
            cand = np.clip(beta[idx][pend] + t[pend, None] * step[pend], lo, hi)
            fc = cand[:, :1] + cand[:, 1:] * si[pend]
            vc = np.sum(wi[pend] * _loglik_terms(ai[pend], bi[pend], fc), axis=1)
            ok = vc >= val[idx][pend]
            sel = np.flatnonzero(pend)[ok]
            trial[sel] = cand[ok]
            new_val[sel] = vc[ok]
            accepted[sel] = True
            t[pend] *= np.where(ok, 1.0, 0.5)
        moved = np.max(np.abs(trial - beta[idx]), axis=1)
        gain = np.where(accepted, new_val - val[idx], 0.0)
        beta[idx] = np.where(accepted[:, None], trial, beta[idx])
        val[idx] = np.where(accepted, new_val, val[idx])
        done = ~accepted | ((moved < 1e-12) | (gain <= 1e-15 * (1.0 + np.abs(val[idx]))))
        active[idx[done]] = False
    return beta, val, ~active


def _window_tau(a, b, order, mask):
    """Kendall tau-a of the pairs inside each window (a starting value only)."""
    sgn = np.sign(a[:, None] - a[None, :]) * np.sign(b[:, None] - b[None, :])
    k = mask.sum(axis=1)
    out = np.empty(order.shape[0])
    for r in range(order.shape[0]):
        idx = order[r, mask[r]]
        out[r] = sgn[np.ix_(idx, idx)].sum() / (k[r] * (k[r] - 1))
    return out


def _local_fit_batch(a, b, zi, z, h, loo=False):
    """Local (b0, b1, value) at every entry of `z`.

    With ``loo`` the i-th evaluation point drops the i-th training point.
    Raises WindowError when some window holds fewer than two points.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dz = z[:, None] - zi[None, :]
    w = epanechnikov(dz, h)
    if loo:
        np.fill_diagonal(w, 0.0)
    counts = np.count_nonzero(w > 0, axis=1)
    if np.any(counts < 2):
        bad = z[counts < 2][0]
        raise WindowError(f"fewer than two observations within bandwidth {h:g} of z={bad:g}")
    # compact each row to its window support, padding with zero weight
    width = int(counts.max())
    order = np.argsort(w <= 0, axis=1, kind="stable")[:, :width]
    rows = np.arange(z.size)[:, None]
    w = w[rows, order]
    s = dz[rows, order] / h
    A, B = a[order], b[order]
    tau0 = np.clip(_window_tau(a, b, order, w > 0), -0.99, 0.99)
    start = np.c_[special.ndtri((tau0 + 1.0) / 2.0), np.zeros(z.size)]
    best_beta, best_val, conv = _newton(A, B, s, w, start)
    retry = np.flatnonzero(~conv | ~np.isfinite(best_val))
    for b0 in _FALLBACK_STARTS if retry.size else ():
        st = np.c_[np.full(retry.size, b0), np.zeros(retry.size)]
        beta, val, _ = _newton(A[retry], B[retry], s[retry], w[retry], st)
        better = val > best_val[retry]
        best_beta[retry[better]] = beta[better]
        best_val[retry[better]] = val[better]
    return best_beta[:, 0], best_beta[:, 1] / h, best_val


def _local_fit(a, b, zi, z, h):
    b0, b1, val = _local_fit_batch(a, b, zi, np.array([z]), h)
    return float(b0[0]), float(b1[0]), float(val[0])


def mll_estimate(model: MLLModel, z, exclude=None) -> float:
    """Local intercept ``b0`` at `z`; ``2 Phi(b0) - 1`` is the local tau.

    Parameters
    ----------
    model : MLLModel
    z : float
    exclude : int, optional
        Index of a training point to leave out (leave-one-out scoring).
    """
    a, b, zi = model._a, model._b, model.inputs
    if exclude is not None:
        keep = np.ones(zi.size, dtype=bool)
        keep[exclude] = False
        a, b, zi = a[keep], b[keep], zi[keep]
    return _local_fit(a, b, zi, float(z), model.bandwidth)[0]


def mll_latent(model: MLLModel, z):
    """Local intercepts at each `z`, widening the bandwidth for empty windows.

    Returns the estimates and the number of points that needed widening.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.size)
    pending = np.arange(z.size)
    h = model.bandwidth
    widened = 0
    while pending.size:
        dz = z[pending, None] - model.inputs[None, :]
        ok = np.count_nonzero(np.abs(dz) < h, axis=1) >= 2
        if np.any(ok):
            out[pending[ok]] = _local_fit_batch(model._a, model._b, model.inputs,
                                                z[pending[ok]], h)[0]
            if h != model.bandwidth:
                widened += int(np.count_nonzero(ok))
        pending = pending[~ok]
        h *= 2.0
    return out, widened


def loo_score(pairs, inputs, h) -> float:
    """Leave-one-out log-likelihood of bandwidth `h`; -inf if any point is windowless."""
    model = MLLModel(pairs, inputs, h)
    try:
        f = _local_fit_batch(model._a, model._b, model.inputs, model.inputs, h, loo=True)[0]
    except WindowError:
        return -np.inf
    theta = bicop.theta_from_latent(f)
    return float(np.sum(bicop.logpdf_scores(model._a, model._b, theta)))


def loo_bandwidth(pairs, inputs, grid=DEFAULT_GRID) -> float:
    """Grid bandwidth with the highest leave-one-out log-likelihood."""
    grid = [float(h) for h in grid]
    if not grid:
        raise BandwidthError("empty bandwidth grid")
    if len(grid) == 1:
        return grid[0]
    scores = [loo_score(pairs, inputs, h) for h in grid]
    if not np.any(np.isfinite(scores)):
        raise BandwidthError(f"every bandwidth leaves some point windowless: {grid}")
    return grid[int(np.argmax(scores))]


def fit_mll(pairs, inputs, grid=DEFAULT_GRID, family=CopulaFamily.GAUSSIAN) -> MLLModel:
    h = loo_bandwidth(pairs, inputs, grid)
    return MLLModel(pairs, inputs, h, family, {"bandwidth": h})
