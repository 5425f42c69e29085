"""``vinecop`` command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np
from scipy import linalg

from . import vine
from .data import load_csv, synth_sample, write_csv
from .empirics import PseudoSample, pseudo_observations
from .errors import (BoundaryError, DomainError, FitError, NumericalError, ParseError,
                     SizeError, UnsupportedOperation)
from .experiments import SYNTH_FRACTION, SYNTH_N, compare
from .gpcond import GPConfig
from .serialize import load_model, save_model
from .vine import VineConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def parse_grid(spec: str) -> np.ndarray:
    """Grid points from ``"a:b:step"`` (inclusive) or ``"a:b:Nj"`` (N points).

    Several specs separated by ``;`` form a product grid whose first
    coordinate varies slowest.
    """
    axes = []
    for part in spec.split(";"):
        fields = part.strip().split(":")
        if len(fields) != 3:
            raise UsageError(f"grid spec {part!r} must look like a:b:step or a:b:Nj")
        try:
            a, b = float(fields[0]), float(fields[1])
            if fields[2].strip().endswith("j"):
                num = int(fields[2].strip()[:-1])
                if num < 1:
                    raise ValueError
                axis = np.linspace(a, b, num)
            else:
                step = float(fields[2])
                if not step > 0 or b < a:
                    raise ValueError
                count = int(np.floor((b - a) / step + 1e-9)) + 1
                axis = a + step * np.arange(count)
        except ValueError:
            raise UsageError(f"invalid grid spec {part!r}") from None
        axes.append(axis)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _config(args) -> VineConfig:
    gp = GPConfig(n_pseudo=args.pseudo_inputs, seed=args.seed).with_quadrature(args.quadrature_nodes)
    return VineConfig(gp=gp)


def _sample(path, pit=True) -> PseudoSample:
    data = load_csv(path)
    if data.dropped:
        print(f"dropped {data.dropped} row(s) with missing or non-numeric cells", file=sys.stderr)
    if pit:
        return pseudo_observations(data.values, data.column_names)
    return PseudoSample(data.values, data.column_names)


def _check_estimator(estimator, trees, d):
    if estimator == "mllvine" and trees is not None and trees > 2:
        raise UsageError("mllvine needs max_trees <= 2 (a single conditioning variable)")
    if estimator == "mllvine" and trees is None and d > 3:
        raise UsageError("mllvine needs max_trees <= 2 (a single conditioning variable); "
                         "pass --trees 2")


def cmd_synth(args):
    if args.n is None or args.n < 1:
        raise UsageError("--n must be a positive integer")
    data = synth_sample(args.n, args.seed)
    if args.out:
        write_csv(data, args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(data.column_names)
        w.writerows([[repr(float(x)) for x in row] for row in data.values])


def cmd_fit(args):
    _require(args, "data", "out")
    sample = _sample(args.data, not args.no_pit)
    _check_estimator(args.estimator, args.trees, sample.d)
    trees = args.trees or (min(2, sample.d - 1) if args.estimator == "mllvine" else None)
    model = vine.fit(sample, args.estimator, trees, _config(args))
    save_model(model, args.out)
    for t, ll in enumerate(model.diagnostics["train_loglik_per_tree"], start=1):
        print(f"trees={t} train_loglik={ll:.6f}")
    labels = model.structure.factorization(model.column_names)
    print("factorization " + " ".join(f"c[{lab}]" for lab in labels))
    print(f"edges={len(labels)} model={args.out}")


def cmd_eval(args):
    _require(args, "model", "data")
    model = load_model(args.model)
    sample = _sample(args.data, not args.no_pit)
    mean, sd = vine.evaluate(model, sample, args.trees)
    if args.csv:
        print("mean,sd,n")
        print(f"{mean!r},{sd!r},{sample.n}")
    else:
        print(f"mean_loglik={mean:.6f} sd={sd:.6f} n={sample.n}")


def cmd_compare(args):
    estimators = [e for item in (args.estimator or ["svine", "gpvine"]) for e in item.split(",")]
    for e in estimators:
        if e not in ("svine", "gpvine", "mllvine"):
            raise UsageError(f"unknown estimator {e!r}")
    if args.data:
        data = load_csv(args.data)
        fraction = args.fraction if args.fraction is not None else 0.5
    else:
        data = synth_sample(args.n or SYNTH_N, args.seed)
        fraction = args.fraction if args.fraction is not None else SYNTH_FRACTION
    trees = args.trees or data.d - 1
    for e in estimators:
        _check_estimator(e, trees, data.d)
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    result = compare(data, estimators, args.replicates, args.seed, trees, fraction,
                     pit=not args.no_pit, config=_config(args))
    print("estimator,trees,mean,sd")
    for row in result.table():
        print(f"{row['estimator']},{row['trees']},{row['mean']:.6f},{row['sd']:.6f}")
    for a, b, p in result.pvalues():
        ptxt = p if isinstance(p, str) else f"{p:.6g}"
        print(f"wilcoxon {a} vs {b} (trees={trees}): p={ptxt}")


def cmd_tau_surface(args):
    _require(args, "model", "edge", "out")
    model = load_model(args.model)
    edge = model.edge(args.edge)
    grid = parse_grid(args.grid or ";".join(["0.005:0.995:100j"] * max(len(edge.conditioning), 1)))
    surface = vine.tau_surface(model, edge, grid)
    header = [f"z{k + 1}" for k in range(surface.z.shape[1])] + ["tau_mean", "tau_sd"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for z, m, s in zip(surface.z, surface.tau_mean, surface.tau_sd):
            w.writerow([repr(float(x)) for x in z] + [repr(float(m)), repr(float(s))])
    print(f"edge {surface.edge}: {len(surface)} points -> {args.out}")


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) in (None, "")]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--pseudo-inputs", type=int, default=20)
    common.add_argument("--quadrature-nodes", type=int, default=32)
    common.add_argument("--no-pit", action="store_true",
                        help="data are already on the copula scale")

    p = argparse.ArgumentParser(prog="vinecop", description="Conditional vine copulas.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write the synthetic dataset")
    s.add_argument("--n", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("fit", parents=[common], help="fit a vine and save it")
    s.add_argument("--data")
    s.add_argument("--estimator", choices=["svine", "gpvine", "mllvine"], default="svine")
    s.add_argument("--trees", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("eval", parents=[common], help="mean test log-likelihood")
    s.add_argument("--model")
    s.add_argument("--data")
    s.add_argument("--trees", type=int)
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", parents=[common], help="replicated estimator comparison")
    s.add_argument("--data", help="CSV file; the synthetic generator is used when omitted")
    s.add_argument("--estimator", action="append",
                   help="repeat or comma-separate; default svine,gpvine")
    s.add_argument("--replicates", type=int, default=50)
    s.add_argument("--trees", type=int)
    s.add_argument("--fraction", type=float)
    s.add_argument("--n", type=int, help="synthetic sample size")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("tau-surface", parents=[common], help="export tau over a grid")
    s.add_argument("--model")
    s.add_argument("--edge")
    s.add_argument("--grid")
    s.add_argument("--out")
    s.set_defaults(func=cmd_tau_surface)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        args.func(args)
    except (UsageError, UnsupportedOperation) as exc:
        print(f"vinecop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SizeError, BoundaryError, OSError) as exc:
        print(f"vinecop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"vinecop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitError, NumericalError, linalg.LinAlgError, FloatingPointError) as exc:
        print(f"vinecop: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
