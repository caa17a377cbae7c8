"""Command-line interface: estimate, learn, and experiment subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import CsmciError
from .estimators import smci_estimate, template_spec
from .experiments import PRESETS, load_config, preset, run_experiment
from .gls import compose
from .graphs import Region, parse_graph_spec
from .kernels import BACKEND
from .learning import Dataset, TrainConfig, exact_ml, parameter_mae, train
from .model import (
    ENUMERATION_CAP_STATES,
    MONOMIAL,
    exact_expectation,
    load_model,
    parse_model_spec,
)
from .sampling import draw_sample_set, save_samples_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csmci", description=__doc__)
    parser.add_argument("--version", action="version", version=f"csmci {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate E[f(x_T)] with SMCI / composite estimators")
    est.add_argument("--graph", help="torus:RxC, lattice:RxC, or a graph file")
    est.add_argument("--model", help="model file (bound to --graph when both are given)")
    est.add_argument("--random-model", help="uniform:<1/T>:<seed> random parameter draw")
    est.add_argument("--target", required=True, help="vertex index, or i,j for an adjacent pair")
    est.add_argument("--template", help="single sum-region template (I..VII)")
    est.add_argument("--compose", help="comma-separated templates to fuse, e.g. I,II,III")
    est.add_argument("--sigma", choices=("sample", "exact"), default="sample")
    est.add_argument("--samples", type=int, default=1000)
    est.add_argument("--mcmc-r", type=int, default=50)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--dump-samples", help="write the sample set to this CSV path")

    lrn = sub.add_parser("learn", help="inverse Ising learning against a generated dataset")
    lrn.add_argument("--graph", required=True)
    lrn.add_argument("--gen-model", required=True, help="uniform:<1/T>:<seed> or a model file")
    lrn.add_argument("--M", type=int, default=1000, help="dataset size")
    lrn.add_argument("--N", type=int, default=1000, help="persistent chain count")
    lrn.add_argument("--eta", type=float, default=0.02)
    lrn.add_argument("--epochs", type=int, default=100)
    lrn.add_argument("--kappa", type=int, default=1)
    lrn.add_argument("--policy", default="qcsmci-all")
    lrn.add_argument("--seed", type=int, default=0)
    lrn.add_argument("--data-r", type=int, default=50, help="MCMC interval for dataset generation")
    lrn.add_argument("--clamp-h", action="store_true", help="keep external fields at zero")
    lrn.add_argument("--out", required=True, help="trajectory CSV (epoch,h_mae,j_mae)")

    exp = sub.add_parser("experiment", help="run a figure-protocol experiment")
    exp.add_argument("--preset", choices=PRESETS)
    exp.add_argument("--config", help="key = value config file")
    exp.add_argument("--paper-scale", action="store_true")
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--out", required=True, help="report CSV path")
    return parser


def _estimate_params(args):
    if args.model and not args.random_model:
        graph = parse_graph_spec(args.graph) if args.graph else None
        return load_model(args.model, graph=graph)
    if args.random_model:
        if not args.graph:
            raise CsmciError("--random-model requires --graph")
        return parse_model_spec(args.random_model, parse_graph_spec(args.graph))
    raise CsmciError("provide --model or --random-model")


def _cmd_estimate(args) -> int:
    params = _estimate_params(args)
    target = Region(int(v) for v in args.target.split(","))
    samples = draw_sample_set(params, args.samples, args.mcmc_r, args.seed)
    if args.dump_samples:
        save_samples_csv(samples, args.dump_samples)
    small = len(params.alphabet) ** params.graph.n <= ENUMERATION_CAP_STATES
    exact = exact_expectation(params, MONOMIAL, target) if small else None
    if args.compose:
        kinds = [k.strip() for k in args.compose.split(",") if k.strip()]
        traces = [
            smci_estimate(params, template_spec(params.graph, target, k), samples) for k in kinds
        ]
        est = compose(traces, sigma=args.sigma, params=params if args.sigma == "exact" else None)
        report = {
            "target": list(target.members),
            "templates": kinds,
            "components": est.components.tolist(),
            "weights": est.weights.tolist(),
            "sigma_kind": est.covariance.kind,
            "sigma": est.covariance.entries.tolist(),
            "value": est.value,
            "variance": est.variance,
            "conditioning": {
                "ridge": est.conditioning.ridge,
                "condition": est.conditioning.condition,
                "fallback": est.conditioning.fallback,
            },
        }
        if exact is not None:
            report["exact"] = exact
        print(json.dumps(report, indent=2))
        return 0
    if not args.template:
        raise CsmciError("provide --template or --compose")
    trace = smci_estimate(params, template_spec(params.graph, target, args.template), samples)
    var = float(trace.values.var(ddof=1)) if len(trace) > 1 else 0.0
    print(f"estimate {trace.mean:.12g}")
    print(f"trace_variance {var:.12g}")
    print(f"estimator_variance {var / len(trace):.12g}")
    if exact is not None:
        print(f"exact {exact:.12g}")
    return 0


def _cmd_learn(args) -> int:
    graph = parse_graph_spec(args.graph)
    gen = parse_model_spec(args.gen_model, graph, zero_field=args.clamp_h)
    data = Dataset(graph, draw_sample_set(gen, args.M, args.data_r, args.seed).points)
    cfg = TrainConfig(
        policy=args.policy, eta=args.eta, epochs=args.epochs, n_chains=args.N,
        kappa=args.kappa, seed=args.seed, learn_fields=not args.clamp_h,
    )
    small = len(gen.alphabet) ** graph.n <= ENUMERATION_CAP_STATES
    if small and not args.clamp_h:
        reference, ref_kind = exact_ml(graph, data), "exact-ml"
    else:
        reference, ref_kind = gen, "generative"
    traj = train(graph, data, cfg, reference=reference)
    lines = ["epoch,h_mae,j_mae"]
    lines += [
        f"{e},{traj.h_mae[e]:.12g},{traj.j_mae[e]:.12g}" for e in range(len(traj))
    ]
    Path(args.out).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    final_h, final_j = parameter_mae(traj.final_params, reference)
    print(json.dumps({
        "out": args.out,
        "reference": ref_kind,
        "policy": args.policy,
        "final_h_mae": final_h,
        "final_j_mae": final_j,
    }, indent=2))
    return 0


def _cmd_experiment(args) -> int:
    if bool(args.preset) == bool(args.config):
        raise CsmciError("provide exactly one of --preset or --config")
    if args.preset:
        cfg = preset(args.preset, paper_scale=args.paper_scale, seed=args.seed)
    else:
        cfg = load_config(args.config)
        cfg.seed = args.seed
    report = run_experiment(cfg)
    report.save(args.out)
    print(json.dumps({"out": args.out, **report.metadata}, indent=2, default=str))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "learn":
            return _cmd_learn(args)
        return _cmd_experiment(args)
    except (CsmciError, ValueError, OSError) as exc:
        print(f'ERROR {json.dumps({"type": type(exc).__name__, "message": str(exc)})}', file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
