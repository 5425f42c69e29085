"""Pseudo-observations and rank correlation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import SizeError


@dataclass
class PseudoSample:
    """An (n, d) matrix of observations on the copula scale."""

    values: np.ndarray
    column_names: list = field(default=None)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.column_names is None:
            self.column_names = [f"x{j}" for j in range(self.values.shape[1])]
        self.column_names = list(self.column_names)
        if len(self.column_names) != self.values.shape[1]:
            raise SizeError("one column name per column is required")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def rows(self, index) -> "PseudoSample":
        return PseudoSample(self.values[index], self.column_names)


def pseudo_observations(raw, column_names=None) -> PseudoSample:
    """Rank-transform every column to ``rank / (n + 1)``; ties share the average rank."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    n = raw.shape[0]
    if n < 2:
        raise SizeError(f"need at least 2 observations, got {n}")
    ranks = stats.rankdata(raw, method="average", axis=0)
    return PseudoSample(ranks / (n + 1.0), column_names)


def kendall_tau(x, y) -> float:
    """Kendall's tau-b of two paired samples.

    Returns 0.0 when either sample is constant, where tau-b is undefined.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise SizeError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise SizeError("kendall_tau needs at least two pairs")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return 0.0
    return float(stats.kendalltau(x, y, variant="b").statistic)
