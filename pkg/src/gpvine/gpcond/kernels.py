"""Squared-exponential kernel and the FITC low-rank-plus-diagonal prior."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import DomainError, NumericalError, SizeError

JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class KernelHyper:
    """Hyperparameters of ``sigma * exp(-(a-b)' diag(lam) (a-b)) + sigma0``.

    Larger entries of ``lengthscales`` mean *faster* variation along that
    input dimension; they multiply squared distances.
    """

    lengthscales: tuple
    amplitude: float
    noise: float

    def __post_init__(self):
        lam = tuple(float(x) for x in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", lam)
        if not all(x > 0 for x in lam) or not self.amplitude > 0 or not self.noise >= 0:
            raise DomainError(f"invalid kernel hyperparameters {self}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_log(self) -> np.ndarray:
        return np.log(np.r_[self.lengthscales, self.amplitude, max(self.noise, 1e-300)])

    @classmethod
    def from_log(cls, x):
        x = np.exp(np.asarray(x, dtype=float))
        return cls(tuple(x[:-2]), float(x[-2]), float(x[-1]))


def kernel_matrix(A, B, hyper: KernelHyper) -> np.ndarray:
    """Covariance between the rows of `A` (p, d) and `B` (q, d)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1] or A.shape[1] != hyper.dim:
        raise SizeError(
            f"column mismatch: {A.shape[1]}, {B.shape[1]}, kernel dim {hyper.dim}")
    lam = np.asarray(hyper.lengthscales)
    sq = np.zeros((A.shape[0], B.shape[0]))
    for k in range(A.shape[1]):
        diff = A[:, k, None] - B[None, :, k]
        sq += lam[k] * diff * diff
    return hyper.amplitude * np.exp(-sq) + hyper.noise


@dataclass(frozen=True)
class FITCPrior:
    """GP prior with constant mean, sparsified on a set of pseudo-inputs."""

    pseudo_inputs: np.ndarray
    hyper: KernelHyper
    prior_mean: float

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.pseudo_inputs, dtype=float))
        if Z.shape[0] < 1:
            raise SizeError("at least one pseudo-input is required")
        if Z.shape[1] != self.hyper.dim:
            raise SizeError("pseudo-inputs and lengthscales disagree on dimension")
        object.__setattr__(self, "pseudo_inputs", Z)

    @property
    def n_pseudo(self) -> int:
        return self.pseudo_inputs.shape[0]

    def replace(self, **kw) -> "FITCPrior":
        fields = dict(pseudo_inputs=self.pseudo_inputs, hyper=self.hyper,
                      prior_mean=self.prior_mean)
        fields.update(kw)
        return FITCPrior(**fields)


def _jittered_cholesky(K):
    n = K.shape[0]
    scale = max(float(np.max(np.diag(K))), 1e-300)
    for jitter in JITTER_LADDER:
        try:
            return linalg.cholesky(K + jitter * scale * np.eye(n), lower=True), jitter
        except linalg.LinAlgError:
            continue
    raise NumericalError("inducing covariance is not positive definite even with jitter 1e-6")


class FITCCovariance:
    """Covariance ``V V' + diag(d)`` over n training inputs.

    ``V = K_nm L^{-T}`` where ``L L' = K_mm`` on the inducing inputs and
    ``d = diag(K - V V')``; the same representation with ``d = 0`` and the
    training inputs as inducing set is the exact (full) GP covariance.
    Solves and log-determinants cost O(n m^2).
    """

    def __init__(self, inputs, inducing, hyper, exact=False):
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.inducing = np.atleast_2d(np.asarray(inducing, dtype=float))
        self.hyper = hyper
        self.exact = exact
        Kmm = kernel_matrix(self.inducing, self.inducing, hyper)
        self.chol_inducing, self.jitter = _jittered_cholesky(Kmm)
        Knm = kernel_matrix(self.inputs, self.inducing, hyper)
        self.V = linalg.solve_triangular(self.chol_inducing, Knm.T, lower=True).T
        if exact:
            self.d = np.zeros(self.n)
        else:
            kdiag = hyper.amplitude + hyper.noise
            self.d = np.maximum(kdiag - np.sum(self.V * self.V, axis=1), 0.0)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def diag(self) -> np.ndarray:
        return self.d + np.sum(self.V * self.V, axis=1)

    def dense(self) -> np.ndarray:
        return self.V @ self.V.T + np.diag(self.d)

    def _inner(self):
        # Woodbury core: I + V' D^{-1} V, only valid with d > 0
        if np.any(self.d <= 0.0):
            raise NumericalError("solve needs a strictly positive diagonal part")
        Vd = self.V / self.d[:, None]
        A = np.eye(self.V.shape[1]) + self.V.T @ Vd
        return Vd, linalg.cho_factor(A, lower=True)

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if np.any(self.d <= 0.0):
            return linalg.cho_solve(linalg.cho_factor(self.dense(), lower=True), b)
        Vd, cf = self._inner()
        db = b / (self.d if b.ndim == 1 else self.d[:, None])
        return db - Vd @ linalg.cho_solve(cf, self.V.T @ db)

    def logdet(self) -> float:
        if np.any(self.d <= 0.0):
            return float(2.0 * np.sum(np.log(np.diag(
                linalg.cholesky(self.dense(), lower=True)))))
        _, (L, _) = self._inner()
        return float(np.sum(np.log(self.d)) + 2.0 * np.sum(np.log(np.diag(L))))

    def project(self, Z):
        """Inducing-space features and residual variances for new inputs."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        Kmz = kernel_matrix(self.inducing, Z, self.hyper)
        Vz = linalg.solve_triangular(self.chol_inducing, Kmz, lower=True).T
        kdiag = self.hyper.amplitude + self.hyper.noise
        return Vz, np.maximum(kdiag - np.sum(Vz * Vz, axis=1), 0.0)


def fitc_covariance(train, prior: FITCPrior) -> FITCCovariance:
    """FITC approximation ``Q + diag(K - Q)`` of the training covariance."""
    return FITCCovariance(train, prior.pseudo_inputs, prior.hyper)


def full_covariance(train, hyper: KernelHyper) -> FITCCovariance:
    """Exact training covariance in the same factored form."""
    return FITCCovariance(train, train, hyper, exact=True)
