"""Command line interface: simulate, detect, sweep, tree-analyze, intersect.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import figures
from .detectors import (cube_scan_detect, drift_tube_detect, lr_detect,
                        radial_detect, tree_cut_detect)
from .harness import (ConfigError, ExperimentConfig, build_domain, build_pair,
                      build_path_sampler, emit_report, load_config,
                      run_threshold_sweep, trial_rng)
from .lattice import WalkSpec, estimate_intersection_tail
from .measures import MeasurePair
from .scenery import (load_scenery, sample_null, sample_perturbed, save_scenery)
from .trees import (BAry, Cut, SphericallySymmetric, attach_flow,
                    branching_number, build_tree, level_cut_sums,
                    local_dimension_estimate, sample_ray)


def _add_common(sub):
    sub.add_argument("--seed", type=int, required=True, help="master seed (mandatory)")
    sub.add_argument("--out", type=str, default=None, help="output path")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--threads", type=int, default=1)


def _load_pair(path: str) -> MeasurePair:
    d = json.loads(Path(path).read_text())
    return MeasurePair.from_dict(d)


def _parse_generator(text: str):
    parts = text.split(":")
    if parts[0] == "bary":
        return BAry(int(parts[1]), int(parts[2]))
    if parts[0] == "symmetric":
        pattern = tuple(int(c) for c in parts[1].split(","))
        return SphericallySymmetric(pattern, int(parts[2]))
    raise ConfigError(f"unknown generator spec {text!r} (use bary:B:D or symmetric:P,..:D)")


def cmd_simulate(args) -> int:
    pair = _load_pair(args.pair)
    rng = trial_rng(args.seed, 0, 0)
    if args.domain == "lattice":
        domain = build_domain({"kind": "lattice", "n": args.n, "dim": args.dim,
                               "half_open": not args.inclusive})
    else:
        gen = _parse_generator(args.generator)
        domain = build_tree(gen)
        if args.flow != "uniform":
            kind, _, beta = args.flow.partition(":")
            domain = attach_flow(domain, kind, beta=float(beta) if beta else None)
    if args.law == "null":
        window = sample_null(domain, pair, rng, seed=args.seed)
    else:
        path_spec = {"kind": "walk", "walk": args.walk, "stop": args.stop}
        if args.stop == "sup-norm-exit":
            path_spec["k"] = args.k
        if args.stop == "fixed-steps":
            path_spec["t"] = args.t
        sampler = build_path_sampler(path_spec if args.domain == "lattice"
                                     else {"kind": "ray"}, domain)
        window = sample_perturbed(domain, pair, sampler, rng, seed=args.seed)
    if not args.out:
        raise ConfigError("simulate needs --out")
    save_scenery(args.out, window, pair.m)
    print(json.dumps({"written": args.out, "provenance": window.provenance.kind}))
    return 0


def cmd_detect(args) -> int:
    pair = _load_pair(args.pair)
    window, _m = load_scenery(args.scenery)
    labels = window.labels
    if args.detector == "cube":
        out = cube_scan_detect(labels, pair, args.delta, args.rho_star)
    elif args.detector == "radial":
        out = radial_detect(labels, pair)
    elif args.detector == "tube":
        mean = tuple(Fraction(v) for v in args.mean.split(","))
        lo, _, hi = args.k_range.partition(":")
        out = drift_tube_detect(labels, window.domain, pair, mean,
                                range(int(lo), int(hi) + 1), args.rho,
                                args.gamma_hat, args.xi)
    elif args.detector == "lr":
        out = lr_detect(labels, window.domain, pair, engine="exact").outcome
    elif args.detector == "treecut":
        lo, _, hi = args.cut_depths.partition(":")
        cuts = [Cut.level(window.domain, d) for d in range(int(lo), int(hi) + 1)]
        out = tree_cut_detect(labels, window.domain, pair, cuts)
    else:
        raise ConfigError(f"unknown detector {args.detector!r}")
    print(json.dumps(out.to_dict()))
    return 0


def cmd_sweep(args) -> int:
    import yaml
    full = yaml.safe_load(Path(args.config).read_text())
    if not isinstance(full, dict):
        raise ConfigError("config file must hold a mapping")
    sweep = full.pop("sweep", None)
    if not sweep:
        raise ConfigError("config has no [sweep] section")
    cfg = ExperimentConfig.from_dict(full)
    if args.seed is not None:
        cfg = cfg.replace(experiment={"trials": cfg.trials, "seed": args.seed,
                                      "threads": args.threads})
    result = run_threshold_sweep(cfg, sweep)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        emit_report(result, args.out, fmt=args.format, figures=args.figures)
        print(json.dumps({"written": args.out, "points": len(result.points)}))
    else:
        print(json.dumps(result.to_dict()))
    return 0


def cmd_tree_analyze(args) -> int:
    gen = _parse_generator(args.generator)
    lo, _, hi = args.beta_range.partition(":")
    est = branching_number(gen, tol=args.tol, bracket=(float(lo), float(hi)))
    tree = build_tree(gen)
    if args.flow != "uniform":
        kind, _, beta = args.flow.partition(":")
        tree = attach_flow(tree, kind, beta=float(beta) if beta else None)
    betas = np.linspace(float(lo), float(hi), 5)
    cut_sums = {f"{b:.3f}": level_cut_sums(tree, float(b)).tolist() for b in betas}
    rng = trial_rng(args.seed, 0, 0)
    dims = []
    if tree.depth >= 10:
        dims = [local_dimension_estimate(tree, sample_ray(tree, rng))
                for _ in range(args.rays)]
    width = 0.05
    hist: dict = {}
    for v in dims:
        key = f"{np.floor(v / width) * width:.2f}"
        hist[key] = hist.get(key, 0) + 1
    analysis = {
        "branching_bracket": [est.lo, est.hi],
        "branching_estimate": est.estimate,
        "conclusive": est.conclusive,
        "depth_schedule": list(est.depth_schedule),
        "cut_sums": cut_sums,
        "dimension_histogram": hist,
        "dimension_bin_width": width,
    }
    text = json.dumps(analysis, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        if args.figures:
            figures.save_tree_analysis_figure(analysis, Path(args.out).with_suffix(".png"))
        print(json.dumps({"written": args.out}))
    else:
        print(text)
    return 0


def cmd_intersect(args) -> int:
    if args.kind == "simple":
        spec = WalkSpec.simple(args.dim)
    elif args.kind == "oriented":
        spec = WalkSpec.oriented(args.dim)
    else:
        raise ConfigError("intersect --kind must be simple or oriented")
    rng = trial_rng(args.seed, 0, 0)
    est = estimate_intersection_tail(spec, args.horizon, args.samples, rng)
    fit = {
        "c_hat": est.fit.c_hat, "r_squared": est.fit.r_squared,
        "available": est.fit.available, "n_points": est.fit.n_points,
        "half_horizon_c_hat": est.half_horizon_fit.c_hat,
        "half_horizon_available": est.half_horizon_fit.available,
        "samples": est.samples, "horizon": est.horizon,
    }
    if args.out:
        base = Path(args.out)
        with open(base, "w") as fh:
            fh.write("n,tail,ci_lo,ci_hi\n")
            for n, t, lo, hi in zip(est.ns, est.tail, est.ci_lo, est.ci_hi):
                fh.write(f"{int(n)},{float(t)!r},{float(lo)!r},{float(hi)!r}\n")
        base.with_suffix(".fit.json").write_text(json.dumps(fit, indent=2))
        if args.figures:
            figures.save_tail_figure(est, base.with_suffix(".png"))
        print(json.dumps({"written": str(base), "fit": fit}))
    else:
        print(json.dumps(fit))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perturbscan",
                                 description="perturbed-scenery simulation and detection")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a scenery file")
    _add_common(sim)
    sim.add_argument("--domain", choices=("lattice", "tree"), default="lattice")
    sim.add_argument("--dim", type=int, default=2)
    sim.add_argument("--n", type=int, default=64, help="lattice window radius")
    sim.add_argument("--inclusive", action="store_true",
                     help="use the inclusive box [-n,n]^d instead of [-n,n)^d")
    sim.add_argument("--generator", type=str, default="bary:2:6")
    sim.add_argument("--flow", type=str, default="uniform")
    sim.add_argument("--pair", type=str, required=True, help="JSON file with mu, nu")
    sim.add_argument("--law", choices=("null", "perturbed"), default="null")
    sim.add_argument("--walk", choices=("simple", "oriented", "biased"), default="simple")
    sim.add_argument("--stop", choices=("window-exit", "sup-norm-exit", "fixed-steps"),
                     default="window-exit")
    sim.add_argument("--k", type=int, default=None)
    sim.add_argument("--t", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    det = sub.add_parser("detect", help="run one detector on a scenery file")
    det.add_argument("--detector", choices=("cube", "radial", "tube", "lr", "treecut"),
                     required=True)
    det.add_argument("--scenery", type=str, required=True)
    det.add_argument("--pair", type=str, required=True)
    det.add_argument("--delta", type=float, default=1.0)
    det.add_argument("--rho-star", dest="rho_star", type=int, default=None)
    det.add_argument("--mean", type=str, default="1/2,1/2")
    det.add_argument("--k-range", dest="k_range", type=str, default="4:8")
    det.add_argument("--rho", type=float, default=0.5)
    det.add_argument("--gamma-hat", dest="gamma_hat", type=float, default=0.25)
    det.add_argument("--xi", type=int, default=None)
    det.add_argument("--cut-depths", dest="cut_depths", type=str, default="1:4")
    det.set_defaults(func=cmd_detect)

    sw = sub.add_parser("sweep", help="threshold sweep from a YAML config")
    sw.add_argument("--config", type=str, required=True)
    sw.add_argument("--seed", type=int, default=None, help="override the config seed")
    sw.add_argument("--out", type=str, default=None)
    sw.add_argument("--format", choices=("json", "csv"), default="csv")
    sw.add_argument("--threads", type=int, default=1)
    sw.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    sw.set_defaults(func=cmd_sweep)

    ta = sub.add_parser("tree-analyze", help="branching number and flow dimensions")
    _add_common(ta)
    ta.add_argument("--generator", type=str, required=True)
    ta.add_argument("--flow", type=str, default="uniform")
    ta.add_argument("--beta-range", dest="beta_range", type=str, default="1:5")
    ta.add_argument("--tol", type=float, default=0.01)
    ta.add_argument("--rays", type=int, default=200)
    ta.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    ta.set_defaults(func=cmd_tree_analyze)

    it = sub.add_parser("intersect", help="intersection tail of two independent walks")
    _add_common(it)
    it.add_argument("--kind", choices=("simple", "oriented"), required=True)
    it.add_argument("--dim", type=int, default=2)
    it.add_argument("--horizon", type=int, default=1000)
    it.add_argument("--samples", type=int, default=1000)
    it.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    it.set_defaults(func=cmd_intersect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures map to exit code 3
        print(f"runtime error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
