"""Dataset loading, the synthetic conditional-correlation generator and splits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ParseError, SizeError

#: Replaces an exact zero uniform draw before ``ndtri``; draws never reach 1.
_UNIT_EPS = 2.0 ** -54


@dataclass
class RawDataset:
    """An (n, d) matrix of observations on their original scale.

    Files must provide at least two numeric rows; the generator may return one.
    """

    values: np.ndarray
    column_names: list
    source: str = ""
    dropped: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.column_names = list(self.column_names)
        if len(self.column_names) != self.values.shape[1]:
            raise SizeError("one column name per column is required")
        if self.values.shape[0] < 1:
            raise SizeError("a dataset needs at least one row")
        if not np.all(np.isfinite(self.values)):
            raise SizeError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def rows(self, index) -> "RawDataset":
        return RawDataset(self.values[index], self.column_names, self.source)


def _normals(rng, size):
    u = rng.random(size)
    return special.ndtri(np.where(u > 0.0, u, _UNIT_EPS))


def synth_sample(n: int, seed: int = 0) -> RawDataset:
    """Draw ``(X, Y, Z)`` with ``Z ~ U[-6, 6]`` and ``corr(X, Y | Z) = 0.75 sin Z``.

    ``X`` and ``Y`` are standard normal given ``Z``.  The stream comes from a
    Philox generator, so results are bit-identical across platforms.
    """
    if n < 1:
        raise SizeError(f"n must be positive, got {n}")
    rng = np.random.Generator(np.random.Philox(seed))
    z = -6.0 + 12.0 * rng.random(n)
    e1 = _normals(rng, n)
    e2 = _normals(rng, n)
    rho = 0.75 * np.sin(z)
    x = e1
    y = rho * e1 + np.sqrt(1.0 - rho * rho) * e2
    values = np.c_[x, y, z]
    return RawDataset(values, ["X", "Y", "Z"], f"synthetic(n={n}, seed={seed})")


def load_csv(path) -> RawDataset:
    """Read a comma-separated file with a header row of column names.

    Rows with an empty, non-numeric or non-finite cell are dropped and
    counted in ``dropped``.  Ragged rows raise :class:`ParseError` naming the
    line.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0]]
    rows, dropped = [], 0
    for lineno, row in enumerate(lines[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            dropped += 1
            continue
        if not all(math.isfinite(v) for v in vals):
            dropped += 1
            continue
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no numeric rows")
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least 2 numeric rows, got {len(rows)}")
    return RawDataset(np.array(rows), header, str(path), dropped)


def write_csv(data: RawDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.column_names)
        for row in data.values:
            w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    fraction: float = 0.5
    replicate: int = 0


def split_indices(n: int, spec: SplitSpec):
    if n < 4:
        raise SizeError(f"need at least 4 rows to split, got {n}")
    if not 0.0 < spec.fraction < 1.0:
        raise SizeError(f"fraction must lie in (0, 1), got {spec.fraction}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seed, spec.replicate])))
    perm = rng.permutation(n)
    n_train = int(round(spec.fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(data, spec: SplitSpec = SplitSpec()):
    """Disjoint train/test row partition, deterministic per (seed, replicate)."""
    values = data.values if hasattr(data, "values") else np.asarray(data)
    train, test = split_indices(values.shape[0], spec)
    if hasattr(data, "rows"):
        return data.rows(train), data.rows(test)
    return values[train], values[test]
