"""Replicated train/test comparisons of vine estimators."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from . import vine
from .data import RawDataset, SplitSpec, split, synth_sample
from .empirics import PseudoSample, pseudo_observations
from .vine import Estimator, VineConfig

#: The synthetic protocol: 1000 points, 100 for training and 900 for testing.
SYNTH_N = 1000
SYNTH_FRACTION = 0.1


@dataclass
class ComparisonResult:
    """Test log-likelihood means per replicate, estimator and tree count."""

    estimators: list
    trees: int
    scores: dict = field(default_factory=dict)
    structures: dict = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return len(next(iter(self.scores.values()))[1]) if self.scores else 0

    def values(self, estimator, tree=None) -> np.ndarray:
        return np.asarray(self.scores[Estimator(estimator).value][tree or self.trees])

    def summary(self, estimator, tree=None) -> tuple:
        """Mean and standard deviation across replicates."""
        x = self.values(estimator, tree)
        return float(np.mean(x)), float(np.std(x, ddof=1)) if x.size > 1 else 0.0

    def table(self) -> list:
        rows = []
        for est in self.estimators:
            for t in range(1, self.trees + 1):
                if t in self.scores[est]:
                    m, s = self.summary(est, t)
                    rows.append({"estimator": est, "trees": t, "mean": m, "sd": s})
        return rows

    def pvalues(self, tree=None) -> list:
        out = []
        for a, b in combinations(self.estimators, 2):
            out.append((a, b, paired_wilcoxon(self.values(a, tree), self.values(b, tree))))
        return out


def paired_wilcoxon(x, y):
    """Two-sided Wilcoxon signed-rank p-value, or ``"n/a"`` below 2 pairs.

    Zero differences are dropped; when every difference is zero the
    p-value is 1.0.  Up to 25 non-zero differences use the exact null
    distribution, larger samples the normal approximation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return "n/a"
    diff = x - y
    diff = diff[diff != 0.0]
    if diff.size == 0:
        return 1.0
    method = "exact" if diff.size <= 25 else "approx"
    return float(stats.wilcoxon(diff, method=method).pvalue)


def compare(data, estimators=("svine", "gpvine"), replicates=50, seed=0, trees=None,
            fraction=0.5, pit=True, config: VineConfig | None = None,
            progress=None) -> ComparisonResult:
    """Fit each estimator on each training split and score the test split.

    The probability integral transform is applied to the full dataset
    before splitting.  Every tree count up to `trees` is scored from one
    fit by truncating the vine.
    """
    estimators = [Estimator(e).value for e in estimators]
    if isinstance(data, RawDataset):
        names, values = data.column_names, data.values
    else:
        values = np.asarray(data, dtype=float)
        names = [f"x{j}" for j in range(values.shape[1])]
    sample = pseudo_observations(values, names) if pit else PseudoSample(values, names)
    trees = trees or sample.d - 1
    result = ComparisonResult(list(dict.fromkeys(estimators)), trees)
    for est in result.estimators:
        result.scores[est] = {t: [] for t in range(1, trees + 1)}
        result.structures[est] = []
    for r in range(replicates):
        train, test = split(sample, SplitSpec(seed, fraction, r))
        for est in result.estimators:
            model = vine.fit(train, est, trees, config)
            for t in range(1, trees + 1):
                result.scores[est][t].append(vine.evaluate(model, test, t)[0])
            result.structures[est].append(model.structure.factorization(names))
            if progress is not None:
                progress(r, est, result.scores[est][trees][-1])
    return result


def synthetic_protocol(replicates=50, seed=0, estimators=("svine", "gpvine", "mllvine"),
                       n=SYNTH_N, fraction=SYNTH_FRACTION, config=None, progress=None):
    """Replicated comparison on the conditional-correlation synthetic data."""
    return compare(synth_sample(n, seed), estimators, replicates, seed, 2, fraction,
                   config=config, progress=progress)
