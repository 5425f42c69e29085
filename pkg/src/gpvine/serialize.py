"""Versioned JSON persistence of fitted vines.

Floats are written with ``repr`` precision, so a loaded model evaluates
bit-identically to the one that was saved.  GP edges store the prior, the
training inputs and the EP site parameters; the posterior is recomputed.
"""
from __future__ import annotations

import json

import numpy as np

from .bicop import CopulaFamily, CopulaParam
from .errors import ParseError
from .gpcond import FITCPrior, GPConditionalCopula, KernelHyper
from .gpcond.ep import EPState, Posterior
from .gpcond.kernels import fitc_covariance
from .mll import MLLModel
from .vine import (ConstantCopula, Estimator, GPCopula, IndependentCopula, MLLCopula,
                   RVineStructure, VineEdge, VineModel)

FORMAT = "gpvine-model"
VERSION = 1


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, CopulaFamily):
        return x.value
    return x


def _copula_to_dict(c) -> dict:
    if isinstance(c, IndependentCopula):
        return {"kind": "independent"}
    if isinstance(c, ConstantCopula):
        return {"kind": "constant", "family": c.param.family.value,
                "theta": c.param.theta, "tau": c.param.tau}
    if isinstance(c, GPCopula):
        m = c.model
        return {"kind": "gp", "family": m.family.value,
                "prior_mean": m.prior.prior_mean,
                "lengthscales": list(m.prior.hyper.lengthscales),
                "amplitude": m.prior.hyper.amplitude, "noise": m.prior.hyper.noise,
                "pseudo_inputs": m.prior.pseudo_inputs,
                "training_inputs": m.training_inputs,
                "site_precisions": m.ep.site_precisions,
                "site_natural_means": m.ep.site_natural_means,
                "log_evidence": m.ep.log_evidence, "converged": m.ep.converged,
                "n_sweeps": m.ep.n_sweeps, "quad_nodes": m.quad_nodes,
                "diagnostics": m.diagnostics}
    if isinstance(c, MLLCopula):
        m = c.model
        return {"kind": "mll", "family": m.family.value, "bandwidth": m.bandwidth,
                "pairs": m.pairs, "inputs": m.inputs}
    raise ParseError(f"cannot serialize copula of type {type(c).__name__}")


def _copula_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "independent":
        return IndependentCopula()
    if kind == "constant":
        return ConstantCopula(CopulaParam(CopulaFamily(d["family"]), float(d["theta"]),
                                          float(d["tau"])))
    if kind == "gp":
        hyper = KernelHyper(tuple(d["lengthscales"]), d["amplitude"], d["noise"])
        prior = FITCPrior(np.array(d["pseudo_inputs"], dtype=float), hyper, float(d["prior_mean"]))
        inputs = np.array(d["training_inputs"], dtype=float)
        s = np.array(d["site_precisions"], dtype=float)
        nu = np.array(d["site_natural_means"], dtype=float)
        post = Posterior.compute(fitc_covariance(inputs, prior), prior.prior_mean, s, nu)
        family = CopulaFamily(d["family"])
        state = EPState(s, nu, post, float(d["log_evidence"]), bool(d["converged"]),
                        int(d["n_sweeps"]), prior.prior_mean, family)
        return GPCopula(GPConditionalCopula(family, prior, state, inputs, int(d["quad_nodes"]),
                                            dict(d.get("diagnostics", {}))))
    if kind == "mll":
        return MLLCopula(MLLModel(np.array(d["pairs"], dtype=float),
                                  np.array(d["inputs"], dtype=float),
                                  float(d["bandwidth"]), CopulaFamily(d["family"])))
    raise ParseError(f"unknown copula kind {kind!r}")


def model_to_dict(model: VineModel) -> dict:
    trees = [[{"conditioned": list(e.conditioned), "conditioning": list(e.conditioning),
               "level": e.level, "parents": list(e.parents),
               "copula": _copula_to_dict(e.copula)} for e in tree]
             for tree in model.structure.trees]
    return _jsonable({"format": FORMAT, "version": VERSION,
                      "estimator": model.estimator.value,
                      "dimension": model.dimension,
                      "column_names": model.column_names,
                      "trees": trees, "diagnostics": model.diagnostics})


def model_from_dict(doc: dict) -> VineModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ParseError("not a gpvine model file")
    if doc.get("version") != VERSION:
        raise ParseError(f"unsupported model file version {doc.get('version')!r}")
    try:
        structure = RVineStructure(int(doc["dimension"]))
        for tree in doc["trees"]:
            structure.trees.append([
                VineEdge(tuple(e["conditioned"]), tuple(e["conditioning"]), int(e["level"]),
                         tuple(e["parents"]), _copula_from_dict(e["copula"])) for e in tree])
        return VineModel(structure, Estimator(doc["estimator"]), list(doc["column_names"]),
                         diagnostics=doc.get("diagnostics", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed model file: {exc}") from exc


def save_model(model: VineModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> VineModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(doc)
