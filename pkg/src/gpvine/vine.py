"""
Regular vines built from conditional Gaussian pair copulas.

Variables are indexed from 0 internally; edge labels are 1-based (``"1,2|3"``)
unless column names are supplied.  A tree at level ``i`` is grown over the
edges of level ``i - 1`` with Prim's algorithm on absolute Kendall's tau of
the current conditional pseudo-observations, and each selected edge is fitted
before the next level is built, so the weights of deeper trees depend on the
estimator's own h-function propagation.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, special

from . import bicop
from .bicop import CopulaFamily, CopulaParam
from .empirics import PseudoSample, kendall_tau
from .errors import (DomainError, FitError, GPVineError, SizeError, StateError,
                     UnsupportedOperation)
from .gpcond import GPConfig, GPConditionalCopula, fit_gp_copula, log_predict_density, predict_tau
from .mll import DEFAULT_GRID, MLLModel, fit_mll, mll_latent

#: h-function outputs are kept this far inside the unit interval.
H_EPS = 1e-10


class Estimator(str, enum.Enum):
    SVINE = "svine"
    GPVINE = "gpvine"
    MLLVINE = "mllvine"


# ---------------------------------------------------------------------------
# pair copulas attached to edges


class EdgeCopula:
    """A fitted Gaussian pair copula whose parameter may depend on ``z``."""

    kind = "abstract"
    conditional = False

    def theta(self, z, n):
        """Per-point correlation used by the h-function."""
        raise NotImplementedError

    def logpdf(self, u, v, z):
        return bicop.gaussian_logpdf(u, v, self.theta(z, np.size(u)))

    def h(self, u_cond, u_given, z):
        """``P(U <= u_cond | V = u_given, z)``, clamped to ``[H_EPS, 1 - H_EPS]``."""
        out = bicop.gaussian_h(u_cond, u_given, self.theta(z, np.size(u_cond)))
        return np.clip(out, H_EPS, 1.0 - H_EPS)


@dataclass
class IndependentCopula(EdgeCopula):
    kind = "independent"

    def theta(self, z, n):
        return np.zeros(n)

    def logpdf(self, u, v, z):
        bicop._scores(u, v)
        return np.zeros(np.size(u))

    def h(self, u_cond, u_given, z):
        bicop._scores(u_cond, u_given)
        return np.clip(np.asarray(u_cond, dtype=float), H_EPS, 1.0 - H_EPS)


@dataclass
class ConstantCopula(EdgeCopula):
    """Pair copula under the simplifying assumption: one theta for all z."""

    param: CopulaParam
    kind = "constant"

    def __post_init__(self):
        bicop.tau_to_theta(self.param.family, self.param.tau)

    def theta(self, z, n):
        return np.full(n, self.param.theta)


@dataclass
class GPCopula(EdgeCopula):
    """Pair copula with tau(z) under a sparse GP posterior.

    Propagation uses the posterior-mean tau; the density integrates over f.
    """

    model: GPConditionalCopula
    kind = "gp"
    conditional = True

    def theta(self, z, n):
        tau, _ = predict_tau(self.model, np.asarray(z, dtype=float).reshape(n, -1))
        return bicop.clamp_theta(np.sin(0.5 * np.pi * tau))

    def logpdf(self, u, v, z):
        return log_predict_density(self.model, u, v, np.asarray(z).reshape(np.size(u), -1))

    def tau(self, z):
        return predict_tau(self.model, z)


@dataclass
class MLLCopula(EdgeCopula):
    """Pair copula with a local-linear tau(z) in one conditioning variable."""

    model: MLLModel
    kind = "mll"
    conditional = True

    def _latent(self, z):
        z = np.asarray(z, dtype=float).reshape(-1)
        return mll_latent(self.model, z)[0]

    def theta(self, z, n):
        return bicop.theta_from_latent(self._latent(z))

    def tau(self, z):
        tau = 2.0 * special.ndtr(self._latent(z)) - 1.0
        return tau, np.full(tau.shape, np.nan)


def h_propagate(parent: EdgeCopula | None, u_cond, u_given, z=None):
    """Conditional pseudo-observations ``P(u_cond | u_given, z)`` through `parent`."""
    if parent is None:
        raise StateError("edge copula has not been fitted")
    u_cond = np.atleast_1d(np.asarray(u_cond, dtype=float))
    u_given = np.atleast_1d(np.asarray(u_given, dtype=float))
    if u_cond.shape != u_given.shape:
        raise SizeError(f"length mismatch: {u_cond.size} vs {u_given.size}")
    if parent.conditional and (z is None or np.shape(z)[0] != u_cond.size):
        raise SizeError("conditioning inputs need one row per point")
    return parent.h(u_cond, u_given, z)


# ---------------------------------------------------------------------------
# structure


@dataclass
class VineEdge:
    """One pair-copula factor ``c_{C | D}``.

    ``parents`` indexes the two edges of the previous tree that this edge
    joins; at level 1 it holds the two variable indices.
    """

    conditioned: tuple
    conditioning: tuple
    level: int
    parents: tuple
    copula: EdgeCopula | None = None

    def __post_init__(self):
        self.conditioned = tuple(sorted(int(i) for i in self.conditioned))
        self.conditioning = tuple(sorted(int(i) for i in self.conditioning))
        self.parents = tuple(int(i) for i in self.parents)
        if len(self.conditioned) != 2 or len(self.constraint) != self.level + 1:
            raise DomainError(f"inconsistent edge sets {self.conditioned} | {self.conditioning}")

    @property
    def constraint(self) -> tuple:
        return tuple(sorted(set(self.conditioned) | set(self.conditioning)))

    def label(self, names=None) -> str:
        fmt = (lambda i: str(names[i])) if names is not None else (lambda i: str(i + 1))
        out = ",".join(fmt(i) for i in self.conditioned)
        if self.conditioning:
            out += "|" + ",".join(fmt(i) for i in self.conditioning)
        return out


@dataclass
class RVineStructure:
    dimension: int
    trees: list = field(default_factory=list)

    @property
    def truncation_level(self) -> int:
        return len(self.trees)

    def edges(self):
        for tree in self.trees:
            yield from tree

    def factorization(self, names=None) -> list:
        """Edge labels level by level, e.g. ``["1,3", "2,3", ..., "2,4|1,3"]``."""
        return [e.label(names) for e in self.edges()]

    def find(self, spec, names=None) -> VineEdge:
        """Look up an edge by label (``"1,2|3"``, ``"12|3"`` or with names)."""
        if isinstance(spec, VineEdge):
            return spec
        conditioned, conditioning = _parse_label(str(spec), self.dimension, names)
        for e in self.edges():
            if e.conditioned == conditioned and e.conditioning == conditioning:
                return e
        raise DomainError(f"no edge {spec!r} in this vine")


def _parse_label(text, d, names=None):
    def parse(part):
        part = part.strip()
        if not part:
            return ()
        tokens = [t.strip() for t in part.split(",")] if "," in part else None
        if tokens is None:
            if names is not None and part in names:
                tokens = [part]
            elif d < 10 and re.fullmatch(r"\d+", part):
                tokens = list(part)
            else:
                tokens = [part]
        out = []
        for t in tokens:
            if names is not None and t in names:
                out.append(list(names).index(t))
            elif re.fullmatch(r"\d+", t) and 1 <= int(t) <= d:
                out.append(int(t) - 1)
            else:
                raise DomainError(f"cannot parse edge label {text!r}")
        return tuple(sorted(out))

    left, _, right = text.partition("|")
    conditioned = parse(left)
    if len(conditioned) != 2:
        raise DomainError(f"edge label {text!r} needs two conditioned variables")
    return conditioned, parse(right)


def prim_maximum_spanning_tree(weights, keys=None) -> list:
    """Edges ``(p, q)`` of a maximum spanning tree of a dense weight matrix.

    Entries equal to ``-inf`` mark pairs that may not be joined.  Among
    equal-weight candidates the one with the smallest ``keys[p][q]`` wins.
    """
    W = np.asarray(weights, dtype=float)
    k = W.shape[0]
    if keys is None:
        keys = [[(min(p, q), max(p, q)) for q in range(k)] for p in range(k)]
    in_tree = np.zeros(k, dtype=bool)
    in_tree[0] = True
    chosen = []
    for _ in range(k - 1):
        best = None
        for p in np.flatnonzero(in_tree):
            for q in np.flatnonzero(~in_tree):
                w = W[p, q]
                if w == -np.inf:
                    continue
                cand = (-w, keys[p][q], int(p), int(q))
                if best is None or cand < best:
                    best = cand
        if best is None:
            raise FitError("eligible graph is disconnected")
        chosen.append((best[2], best[3]))
        in_tree[best[3]] = True
    return chosen


@dataclass
class _Node:
    constraint: frozenset
    parents: tuple
    values: dict


def _abs_tau(conditioned, conditioning, x, y):
    return abs(kendall_tau(x, y))


def _edge_inputs(edge, nodes, p, q):
    j, k = edge.conditioned
    x = nodes[p].values[j] if j in nodes[p].constraint and j not in nodes[q].constraint \
        else nodes[q].values[j]
    y = nodes[q].values[k] if k in nodes[q].constraint and k not in nodes[p].constraint \
        else nodes[p].values[k]
    return x, y


def _candidate(nodes, p, q, level):
    Np, Nq = nodes[p].constraint, nodes[q].constraint
    if level == 1:
        return (p, q), ()
    if not set(nodes[p].parents) & set(nodes[q].parents):
        return None
    return tuple(sorted(Np ^ Nq)), tuple(sorted(Np & Nq))


def _next_node(edge, x, y, z, copula, p, q):
    j, k = edge.conditioned
    values = {j: h_propagate(copula, x, y, z), k: h_propagate(copula, y, x, z)}
    return _Node(frozenset(edge.constraint), (p, q), values)


def _grow(values, max_trees, fit_edge, weight):
    n, d = values.shape
    nodes = [_Node(frozenset({j}), (), {j: values[:, j]}) for j in range(d)]
    structure = RVineStructure(d)
    pseudo = []
    for level in range(1, max_trees + 1):
        k = len(nodes)
        W = np.full((k, k), -np.inf)
        keys = [[None] * k for _ in range(k)]
        cands = {}
        for p in range(k):
            for q in range(p + 1, k):
                sets = _candidate(nodes, p, q, level)
                if sets is None:
                    continue
                edge = VineEdge(sets[0], sets[1], level, (p, q))
                x, y = _edge_inputs(edge, nodes, p, q)
                W[p, q] = W[q, p] = float(weight(edge.conditioned, edge.conditioning, x, y))
                keys[p][q] = keys[q][p] = edge.conditioned + edge.conditioning
                cands[p, q] = edge
        pairs = sorted((min(p, q), max(p, q)) for p, q in prim_maximum_spanning_tree(W, keys))
        tree = sorted((cands[pq] for pq in pairs), key=lambda e: (e.conditioned, e.conditioning))
        next_nodes, level_pseudo = [], []
        for edge in tree:
            p, q = edge.parents
            x, y = _edge_inputs(edge, nodes, p, q)
            z = values[:, list(edge.conditioning)] if edge.conditioning else None
            edge.copula = fit_edge(edge, x, y, z)
            level_pseudo.append(np.c_[x, y])
            if level < max_trees:
                next_nodes.append(_next_node(edge, x, y, z, edge.copula, p, q))
        structure.trees.append(tree)
        pseudo.append(level_pseudo)
        nodes = next_nodes
    return structure, pseudo


def _as_values(sample):
    if isinstance(sample, PseudoSample):
        return sample.values, sample.column_names
    values = np.atleast_2d(np.asarray(sample, dtype=float))
    return values, [f"x{j}" for j in range(values.shape[1])]


def _check_trees(d, max_trees):
    if d < 2:
        raise DomainError("a vine needs at least two variables")
    if max_trees is None:
        return d - 1
    if not 1 <= int(max_trees) <= d - 1:
        raise DomainError(f"max_trees must lie in [1, {d - 1}], got {max_trees}")
    return int(max_trees)


def _fit_constant(edge, x, y, z):
    return ConstantCopula(bicop.fit_theta_mle(np.c_[x, y]))


def _with_edge(fit_edge, names):
    def wrapped(edge, x, y, z):
        try:
            return fit_edge(edge, x, y, z)
        except (GPVineError, linalg.LinAlgError) as exc:
            label = edge.label(names)
            exc.args = (f"edge {label}: {exc}",) + exc.args[1:]
            exc.edge = label
            raise
    return wrapped


def build_structure(sample, max_trees=None, weight: Callable | None = None,
                    fit_edge: Callable | None = None) -> tuple:
    """Select the vine trees and return them with per-edge pseudo-observations.

    Parameters
    ----------
    sample : PseudoSample or (n, d) array
    max_trees : int, optional
        Number of trees to build, default ``d - 1``.
    weight : callable, optional
        ``weight(conditioned, conditioning, x, y)`` scoring a candidate edge;
        defaults to the absolute Kendall's tau of ``x`` and ``y``.
    fit_edge : callable, optional
        ``fit_edge(edge, x, y, z)`` returning an :class:`EdgeCopula` used to
        propagate pseudo-observations; defaults to the constant MLE.

    Returns
    -------
    structure : RVineStructure
        With fitted copulas attached to every edge.
    pseudo : list of lists of (n, 2) arrays
        The arguments of each edge copula, level by level.
    """
    values, names = _as_values(sample)
    max_trees = _check_trees(values.shape[1], max_trees)
    fit_edge = _with_edge(fit_edge or _fit_constant, names)
    return _grow(values, max_trees, fit_edge, weight or _abs_tau)


# ---------------------------------------------------------------------------
# fitting and evaluation


@dataclass(frozen=True)
class VineConfig:
    gp: GPConfig = field(default_factory=GPConfig)
    mll_grid: tuple = DEFAULT_GRID


@dataclass
class VineModel:
    structure: RVineStructure
    estimator: Estimator
    column_names: list
    config: VineConfig = field(default_factory=VineConfig)
    diagnostics: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.structure.dimension

    @property
    def n_trees(self) -> int:
        return self.structure.truncation_level

    def edge(self, spec) -> VineEdge:
        return self.structure.find(spec, self.column_names)


def independent_model(d, column_names=None) -> VineModel:
    """A one-tree vine whose edges are all independence copulas."""
    names = column_names or [f"x{j}" for j in range(d)]
    tree = [VineEdge((j, j + 1), (), 1, (j, j + 1), IndependentCopula()) for j in range(d - 1)]
    return VineModel(RVineStructure(d, [tree]), Estimator.SVINE, names)


def _edge_fitter(estimator, config):
    def fit_edge(edge, x, y, z):
        if z is None or estimator is Estimator.SVINE:
            return _fit_constant(edge, x, y, z)
        if estimator is Estimator.GPVINE:
            return GPCopula(fit_gp_copula(np.c_[x, y], z, CopulaFamily.GAUSSIAN, config.gp))
        return MLLCopula(fit_mll(np.c_[x, y], z[:, 0], config.mll_grid))
    return fit_edge


def fit(sample, estimator="svine", max_trees=None, config: VineConfig | None = None) -> VineModel:
    """Select a vine structure and fit every pair copula.

    Level-1 edges have no conditioning variables and are constant MLE fits
    for every estimator.  GPVINE and MLLVINE edges condition on the columns
    of `sample` indexed by the edge's conditioning set.

    Raises
    ------
    DomainError
        For MLLVINE with more than two trees, which would need more than one
        conditioning variable.
    """
    estimator = Estimator(estimator)
    config = config or VineConfig()
    values, names = _as_values(sample)
    max_trees = _check_trees(values.shape[1], max_trees)
    if estimator is Estimator.MLLVINE and max_trees > 2:
        raise DomainError("mllvine supports at most 2 trees (a single conditioning variable)")
    structure, pseudo = build_structure(
        PseudoSample(values, names), max_trees, fit_edge=_edge_fitter(estimator, config))
    model = VineModel(structure, estimator, names, config)
    edges = {}
    per_tree = []
    for tree, level_pseudo in zip(structure.trees, pseudo):
        level_ll = 0.0
        for edge, xy in zip(tree, level_pseudo):
            z = values[:, list(edge.conditioning)] if edge.conditioning else None
            ll = float(np.sum(edge.copula.logpdf(xy[:, 0], xy[:, 1], z)))
            info = {"train_loglik": ll, "kind": edge.copula.kind}
            if isinstance(edge.copula, GPCopula):
                info.update(edge.copula.model.diagnostics)
            elif isinstance(edge.copula, MLLCopula):
                info["bandwidth"] = edge.copula.model.bandwidth
            elif isinstance(edge.copula, ConstantCopula):
                info["theta"] = edge.copula.param.theta
            edges[edge.label(names)] = info
            level_ll += ll
        per_tree.append(level_ll / values.shape[0])
    model.diagnostics = {"edges": edges, "train_loglik_per_tree": list(np.cumsum(per_tree)),
                         "n_train": values.shape[0]}
    return model


def log_density(model: VineModel, points, max_level=None) -> np.ndarray:
    """Per-point log copula density of the vine, optionally truncated.

    Parameters
    ----------
    model : VineModel
    points : PseudoSample or (n, d) array
    max_level : int, optional
        Use only the first `max_level` trees; deeper factors count as
        independent.
    """
    values, _ = _as_values(points)
    if values.shape[1] != model.dimension:
        raise SizeError(f"model has dimension {model.dimension}, points have {values.shape[1]}")
    levels = model.n_trees if max_level is None else min(int(max_level), model.n_trees)
    nodes = [_Node(frozenset({j}), (), {j: values[:, j]}) for j in range(model.dimension)]
    total = np.zeros(values.shape[0])
    for level, tree in enumerate(model.structure.trees[:levels], start=1):
        next_nodes = []
        for edge in tree:
            if edge.copula is None:
                raise StateError(f"edge {edge.label()} has no fitted copula")
            p, q = edge.parents
            x, y = _edge_inputs(edge, nodes, p, q)
            z = values[:, list(edge.conditioning)] if edge.conditioning else None
            total += edge.copula.logpdf(x, y, z)
            if level < levels:
                next_nodes.append(_next_node(edge, x, y, z, edge.copula, p, q))
        nodes = next_nodes
    return total


def evaluate(model: VineModel, test, max_level=None) -> tuple:
    """Mean and standard deviation of the per-point log density."""
    ld = log_density(model, test, max_level)
    return float(np.mean(ld)), float(np.std(ld))


@dataclass
class TauSurface:
    """Kendall's tau of one edge tabulated over conditioning points."""

    edge: str
    z: np.ndarray
    tau_mean: np.ndarray
    tau_sd: np.ndarray

    def __len__(self):
        return self.z.shape[0]


def tau_surface(model: VineModel, edge, grid) -> TauSurface:
    """Predicted tau of a conditional edge at each row of `grid`."""
    e = model.edge(edge)
    if e.copula is None or not e.copula.conditional:
        kind = "unfitted" if e.copula is None else e.copula.kind
        raise UnsupportedOperation(f"edge {e.label(model.column_names)} carries a {kind} copula")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim <= 1:
        grid = grid.reshape(-1, len(e.conditioning))
    if grid.shape[1] != len(e.conditioning):
        raise SizeError(f"edge conditions on {len(e.conditioning)} variables, "
                        f"grid has {grid.shape[1]} columns")
    mean, sd = e.copula.tau(grid)
    return TauSurface(e.label(model.column_names), grid,
                      np.atleast_1d(np.asarray(mean, dtype=float)),
                      np.atleast_1d(np.asarray(sd, dtype=float)))
