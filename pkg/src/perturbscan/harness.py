"""Reproducible Monte Carlo experiments: configs, trials, reports, sweeps.

Every random draw flows from the master seed through SeedSequence spawn
keys (arm, trial index), so reruns are bit-identical and trial order or
worker scheduling cannot change results.
"""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from ._stats import wilson_interval
from .detectors import (DetectorOutcome, cube_scan_detect, drift_tube_detect,
                        lr_detect, radial_detect, tree_cut_detect)
from .lattice import Box, StopRule, WalkSpec, drift_tube, sample_walk
from .measures import MeasurePair, relative_entropy
from .scenery import (SceneryWindow, flow_ray_sampler, sample_null,
                      sample_perturbed, window_exit_walk_sampler,
                      fixed_steps_walk_sampler, sup_norm_exit_walk_sampler)
from .trees import (BAry, Cut, ExplicitEdges, FlowTree, RandomTree,
                    SphericallySymmetric, attach_flow, branching_number,
                    build_tree)

_ARM_P, _ARM_Q, _ARM_CAL = 0, 1, 2


class ConfigError(ValueError):
    """Malformed experiment configuration."""


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in [{where}]")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (domain, pair, path, detector)."""

    domain: dict
    pair: dict
    path: dict
    detector: dict
    trials: int
    seed: int
    threads: int = 1
    output: Optional[str] = None

    def __post_init__(self):
        if self.trials < 10:
            raise ConfigError("trials must be >= 10")
        if self.seed is None:
            raise ConfigError("a master seed is required; no entropy defaults")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _check_keys(raw, {"experiment", "domain", "pair", "path", "detector", "output"},
                    "config")
        exp = dict(raw.get("experiment") or {})
        _check_keys(exp, {"trials", "seed", "threads"}, "experiment")
        out = raw.get("output")
        if out is not None:
            _check_keys(out, {"path", "format"}, "output")
        for section in ("domain", "pair", "detector"):
            if section not in raw:
                raise ConfigError(f"missing [{section}] section")
        if "trials" not in exp or "seed" not in exp:
            raise ConfigError("experiment section needs trials and seed")
        return cls(
            domain=dict(raw["domain"]),
            pair=dict(raw["pair"]),
            path=dict(raw.get("path") or {}),
            detector=dict(raw["detector"]),
            trials=int(exp["trials"]),
            seed=int(exp["seed"]),
            threads=int(exp.get("threads", 1)),
            output=(out or {}).get("path"),
        )

    def to_dict(self) -> dict:
        return {
            "experiment": {"trials": self.trials, "seed": self.seed,
                           "threads": self.threads},
            "domain": self.domain, "pair": self.pair, "path": self.path,
            "detector": self.detector,
        }

    def replace(self, **sections) -> "ExperimentConfig":
        d = self.to_dict()
        for k, v in sections.items():
            d[k] = v
        return ExperimentConfig.from_dict(d)


def load_config(path) -> ExperimentConfig:
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a mapping")
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_domain(spec: dict):
    _check_keys(spec, {"kind", "n", "dim", "half_open", "generator", "b", "depth",
                       "pattern", "child_probs", "tree_seed", "edges", "flow",
                       "flow_beta"}, "domain")
    kind = spec.get("kind")
    if kind == "lattice":
        n = int(spec["n"])
        d = int(spec.get("dim", 2))
        return Box.centered(n, d, half_open=bool(spec.get("half_open", True)))
    if kind == "tree":
        gen_kind = spec.get("generator", "bary")
        depth = int(spec["depth"])
        if gen_kind == "bary":
            gen = BAry(int(spec.get("b", 2)), depth)
        elif gen_kind == "symmetric":
            gen = SphericallySymmetric(tuple(spec["pattern"]), depth)
        elif gen_kind == "random":
            gen = RandomTree(tuple(spec["child_probs"]), depth,
                             int(spec.get("tree_seed", 0)))
        elif gen_kind == "edges":
            gen = ExplicitEdges(tuple(tuple(e) for e in spec["edges"]))
        else:
            raise ConfigError(f"unknown tree generator {gen_kind!r}")
        tree = build_tree(gen)
        flow = spec.get("flow", "uniform")
        if flow != "uniform":
            tree = attach_flow(tree, flow, beta=spec.get("flow_beta"))
        return tree
    raise ConfigError(f"unknown domain kind {kind!r}")


def build_pair(spec: dict) -> MeasurePair:
    _check_keys(spec, {"mu", "nu"}, "pair")
    return MeasurePair(mu=spec["mu"], nu=spec["nu"])


def build_walk_spec(spec: dict) -> WalkSpec:
    kind = spec.get("walk", "simple")
    d = int(spec.get("dim", 2))
    if kind == "simple":
        return WalkSpec.simple(d)
    if kind == "oriented":
        return WalkSpec.oriented(d, spec.get("probs"))
    if kind == "biased":
        return WalkSpec.biased(d, spec["probs"])
    raise ConfigError(f"unknown walk kind {kind!r}")


def build_path_sampler(spec: dict, domain):
    if isinstance(domain, FlowTree):
        _check_keys(spec, {"kind"}, "path")
        return flow_ray_sampler()
    _check_keys(spec, {"kind", "walk", "dim", "probs", "stop", "k", "t"}, "path")
    wspec = build_walk_spec({**spec, "dim": domain.dimension})
    stop = spec.get("stop", "window-exit")
    if stop == "window-exit":
        return window_exit_walk_sampler(wspec)
    if stop == "sup-norm-exit":
        return sup_norm_exit_walk_sampler(wspec, int(spec["k"]))
    if stop == "fixed-steps":
        return fixed_steps_walk_sampler(wspec, int(spec["t"]))
    raise ConfigError(f"unknown stop rule {stop!r}")


def build_detector(spec: dict, pair: MeasurePair, domain):
    kind = spec.get("kind")
    if kind == "cube":
        _check_keys(spec, {"kind", "delta", "rho_star"}, "detector")
        delta = float(spec["delta"])
        rho = spec.get("rho_star")
        return lambda labels: cube_scan_detect(labels, pair, delta,
                                               None if rho is None else int(rho))
    if kind == "radial":
        _check_keys(spec, {"kind"}, "detector")
        return lambda labels: radial_detect(labels, pair)
    if kind == "tube":
        _check_keys(spec, {"kind", "mean", "k_range", "rho", "gamma_hat", "xi"},
                    "detector")
        mean = tuple(Fraction(str(v)) for v in spec["mean"])
        ks = range(int(spec["k_range"][0]), int(spec["k_range"][1]) + 1)
        return lambda labels: drift_tube_detect(
            labels, domain, pair, mean, ks, float(spec["rho"]),
            float(spec["gamma_hat"]), spec.get("xi"))
    if kind == "lr":
        _check_keys(spec, {"kind", "engine"}, "detector")
        return lambda labels: lr_detect(labels, domain, pair,
                                        engine=spec.get("engine", "exact")).outcome
    if kind == "treecut":
        _check_keys(spec, {"kind", "cut_depths"}, "detector")
        cuts = [Cut.level(domain, int(d)) for d in spec["cut_depths"]]
        return lambda labels: tree_cut_detect(labels, domain, pair, cuts)
    if kind == "constant":
        _check_keys(spec, {"kind", "decision"}, "detector")
        fixed = DetectorOutcome(spec["decision"], 0.0, 0.0,
                                params={"detector": "constant"})
        return lambda labels: fixed
    raise ConfigError(f"unknown detector kind {kind!r}")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionReport:
    """Per-arm decision counts and error rates with Wilson intervals."""

    counts: dict
    type_i: float
    type_i_ci: tuple
    type_ii: float
    type_ii_ci: tuple
    per_trial_statistics: dict
    config: dict
    wall_clock_s: float = 0.0

    @property
    def power(self) -> float:
        return 1.0 - self.type_ii

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "type_i": self.type_i, "type_i_ci": list(self.type_i_ci),
            "type_ii": self.type_ii, "type_ii_ci": list(self.type_ii_ci),
            "power": self.power,
            "per_trial_statistics": self.per_trial_statistics,
            "config": self.config,
            "wall_clock_s": self.wall_clock_s,
        }

    def normalized(self) -> dict:
        """Report content for reproducibility comparison: wall clock dropped."""
        d = self.to_dict()
        d.pop("wall_clock_s")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionReport":
        return cls(
            counts=d["counts"], type_i=d["type_i"],
            type_i_ci=tuple(d["type_i_ci"]), type_ii=d["type_ii"],
            type_ii_ci=tuple(d["type_ii_ci"]),
            per_trial_statistics=d["per_trial_statistics"],
            config=d["config"], wall_clock_s=d.get("wall_clock_s", 0.0),
        )


def trial_rng(master_seed: int, arm: int, index: int) -> np.random.Generator:
    """Derived per-trial generator; (arm, index) spawn keys never collide."""
    return np.random.default_rng(np.random.SeedSequence(master_seed,
                                                        spawn_key=(arm, index)))


def _run_trial(config: ExperimentConfig, arm: int, index: int) -> tuple[str, float]:
    rng = trial_rng(config.seed, arm, index)
    domain = build_domain(config.domain)
    pair = build_pair(config.pair)
    detector = build_detector(config.detector, pair, domain)
    if arm == _ARM_Q:
        sampler = build_path_sampler(config.path, domain)
        window = sample_perturbed(domain, pair, sampler, rng)
    else:
        window = sample_null(domain, pair, rng)
    outcome = detector(window.labels)
    return outcome.decision, outcome.statistic


def run_detection_experiment(config: ExperimentConfig) -> DetectionReport:
    """Run `trials` blind detections under each of P and Q.

    Type I is the perturbed rate on the null arm, type II the null rate on
    the perturbed arm.  Identical configs give bit-identical reports
    (wall clock aside).
    """
    t0 = time.time()
    jobs = [(arm, i) for arm in (_ARM_P, _ARM_Q) for i in range(config.trials)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = dict(zip(jobs, pool.map(
                _run_trial_star, [(config, a, i) for a, i in jobs], chunksize=8)))
    else:
        results = {(a, i): _run_trial(config, a, i) for a, i in jobs}
    arms = {"P": _ARM_P, "Q": _ARM_Q}
    counts = {}
    stats = {}
    for name, arm in arms.items():
        decs = [results[(arm, i)][0] for i in range(config.trials)]
        stats[name] = [results[(arm, i)][1] for i in range(config.trials)]
        counts[name] = {"perturbed": decs.count("perturbed"),
                        "null": decs.count("null")}
    t1 = counts["P"]["perturbed"] / config.trials
    t2 = counts["Q"]["null"] / config.trials
    return DetectionReport(
        counts=counts,
        type_i=t1, type_i_ci=wilson_interval(counts["P"]["perturbed"], config.trials),
        type_ii=t2, type_ii_ci=wilson_interval(counts["Q"]["null"], config.trials),
        per_trial_statistics=stats,
        config=config.to_dict(),
        wall_clock_s=time.time() - t0,
    )


def _run_trial_star(args):
    return _run_trial(*args)


# ---------------------------------------------------------------------------
# calibration under P
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubeCalibration:
    delta: float
    false_alarm: float
    target: float
    achieved_target: bool
    null_statistics: tuple


def calibrate_cube_delta(
    config: ExperimentConfig,
    target_fa: float = 0.1,
    calibration_trials: int = 100,
    grid_step: float = 0.05,
) -> CubeCalibration:
    """Pick the smallest delta whose null false-alarm rate meets the target.

    The max-cube-frequency statistic does not depend on delta, so one null
    sweep prices every candidate.  If no delta in (0, 2] reaches the
    target, the most conservative (largest threshold) delta is returned.
    """
    pair = build_pair(config.pair)
    domain = build_domain(config.domain)
    det = build_detector({**config.detector, "delta": 2.0}, pair, domain)
    stats = []
    for i in range(calibration_trials):
        rng = trial_rng(config.seed, _ARM_CAL, i)
        window = sample_null(domain, pair, rng)
        stats.append(det(window.labels).statistic)
    stats_arr = np.array(stats)
    rho = (int(config.detector["rho_star"])
           if config.detector.get("rho_star") is not None
           else int(np.argmax(pair.nu - pair.mu)))
    base = float(pair.mu[rho])
    gap = float(pair.nu[rho] - pair.mu[rho])
    grid = np.arange(grid_step, 2.0 + 1e-9, grid_step)
    best_delta, best_fa = None, None
    for delta in grid:
        fa = float(np.mean(stats_arr > base + delta * gap / 2.0))
        if best_fa is None or fa < best_fa:
            best_delta, best_fa = float(delta), fa
        if fa <= target_fa:
            return CubeCalibration(float(delta), fa, target_fa, True, tuple(stats))
    return CubeCalibration(best_delta, best_fa, target_fa, False, tuple(stats))


@dataclass(frozen=True)
class TubeCalibration:
    rho: float
    gamma_hat: float


def calibrate_tube_rho(
    walk_spec: WalkSpec,
    mean: Sequence,
    k_min: int,
    box: Box,
    n_sims: int,
    master_seed: int,
) -> float:
    """Largest rho whose tube-crossing display holds at the quartile level.

    Walk-only simulations: rho is the largest grid value with empirical
    P(|[X] cap D(2^k_min)| / sqrt|D| > rho) exceeding max(rho, 1/4).
    """
    tube = drift_tube(2**k_min, mean)
    pts = tube.points()
    pts = pts[box.contains_points(pts)]
    keys = set(map(tuple, pts.tolist()))
    root = float(np.sqrt(len(keys)))
    scores = []
    for i in range(n_sims):
        rng = trial_rng(master_seed, _ARM_CAL, 10_000 + i)
        path = sample_walk(walk_spec, StopRule.window_exit(box), rng)
        hits = {tuple(p) for p in path.vertices.tolist() if tuple(p) in keys}
        scores.append(len(hits) / root)
    scores_arr = np.array(scores)
    best = None
    for rho in np.arange(0.05, 5.0, 0.05):
        if float(np.mean(scores_arr > rho)) > max(rho, 0.25):
            best = float(rho)
    if best is None:
        best = 0.05
    return best


def estimate_tube_gamma(
    config: ExperimentConfig,
    rho: float,
    calibration_trials: int = 100,
) -> float:
    """Null B_k rate averaged over the detector's k range."""
    pair = build_pair(config.pair)
    domain = build_domain(config.domain)
    det = build_detector({**config.detector, "rho": rho, "gamma_hat": 0.0},
                         pair, domain)
    rates = []
    for i in range(calibration_trials):
        rng = trial_rng(config.seed, _ARM_CAL, 20_000 + i)
        window = sample_null(domain, pair, rng)
        out = det(window.labels)
        rates.append(np.mean(out.params["fired"]))
    return float(np.mean(rates))


# ---------------------------------------------------------------------------
# radial error curves over nested windows
# ---------------------------------------------------------------------------

class _BallGeometry:
    """Cached l1-ball site enumeration for the inclusive square [-n, n]^2."""

    _cache: dict = {}

    def __init__(self, n: int, m: int):
        xs = np.arange(-n, n + 1, dtype=np.int32)
        shell = np.abs(xs)[:, None] + np.abs(xs)[None, :]
        mask = shell <= n
        self.n = n
        self.n_sites = int(mask.sum())
        self.shell_times_m = shell[mask].astype(np.int32) * m
        ranks = np.full(mask.shape, -1, dtype=np.int32)
        ranks[mask] = np.arange(self.n_sites, dtype=np.int32)
        # oriented hidden paths live in the first quadrant
        self.quadrant_rank = np.ascontiguousarray(ranks[n:, n:])

    @classmethod
    def get(cls, n: int, m: int) -> "_BallGeometry":
        key = (n, m)
        if key not in cls._cache:
            cls._cache[key] = cls(n, m)
        return cls._cache[key]


@dataclass(frozen=True)
class RadialErrorCurve:
    """Type I/II rates of the radial detector across nested window radii."""

    n_values: tuple
    trials: int
    type_i: tuple
    type_ii: tuple
    type_i_counts: tuple
    type_ii_counts: tuple

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values), "trials": self.trials,
            "type_i": list(self.type_i), "type_ii": list(self.type_ii),
            "type_i_counts": list(self.type_i_counts),
            "type_ii_counts": list(self.type_ii_counts),
        }


def run_radial_profile_experiment(
    pair: MeasurePair,
    n_values: Sequence[int],
    trials: int,
    master_seed: int,
) -> RadialErrorCurve:
    """Radial detector error rates at nested window radii, one scenery per
    trial evaluated at every radius (the statistic at radius n is a prefix
    sum of the same shell profile).

    The hidden path is the oriented d=2 walk from the origin, which meets
    every l1 shell k <= n in exactly one site before leaving the window.
    """
    from .detectors import radial_threshold
    from .measures import centered_statistic_fn
    n_values = tuple(sorted(int(n) for n in n_values))
    n_max = n_values[-1]
    m = pair.m
    geo = _BallGeometry.get(n_max, m)
    f = centered_statistic_fn(pair)
    ks = np.arange(1, n_max + 1, dtype=np.float64)
    thresholds = np.array([radial_threshold(n) for n in n_values])
    uniform_mu = bool(np.allclose(pair.mu, 1.0 / m))
    mu_cdf = np.cumsum(pair.mu)
    mu_cdf[-1] = 1.0

    def field_labels(rng):
        if uniform_mu:
            return rng.integers(0, m, size=geo.n_sites, dtype=np.int64)
        return np.searchsorted(mu_cdf, rng.random(geo.n_sites), side="right")

    def u_values(rng, perturbed: bool) -> np.ndarray:
        if perturbed:
            # oriented walk: one new shell per step, first quadrant
            steps = (rng.random(n_max + 1) < 0.5).astype(np.int64)
            x = np.cumsum(steps)
            y = np.arange(1, n_max + 2) - x
            trace_x = np.concatenate([[0], x])
            trace_y = np.concatenate([[0], y])
        labels = field_labels(rng)
        composite = geo.shell_times_m + labels
        counts = np.bincount(composite, minlength=(n_max + 1) * m)
        counts = counts.reshape(n_max + 1, m)
        per_shell = counts.astype(np.float64) @ f
        if perturbed:
            in_ball = (trace_x + trace_y) <= n_max
            tx, ty = trace_x[in_ball], trace_y[in_ball]
            ranks = geo.quadrant_rank[tx, ty]
            shells = (tx + ty).astype(np.int64)
            old_f = f[labels[ranks]]
            new_f = f[np.searchsorted(np.cumsum(pair.nu), rng.random(tx.size),
                                      side="right").clip(0, m - 1)]
            per_shell += np.bincount(shells, weights=new_f - old_f,
                                     minlength=n_max + 1)
        profile = np.concatenate([[0.0], np.cumsum(per_shell[1:] / ks)])
        return profile[list(n_values)]

    up = np.empty((trials, len(n_values)))
    uq = np.empty((trials, len(n_values)))
    for i in range(trials):
        up[i] = u_values(trial_rng(master_seed, _ARM_P, i), False)
        uq[i] = u_values(trial_rng(master_seed, _ARM_Q, i), True)
    t1_counts = (up > thresholds[None, :]).sum(axis=0)
    t2_counts = (uq <= thresholds[None, :]).sum(axis=0)
    return RadialErrorCurve(
        n_values=n_values, trials=trials,
        type_i=tuple((t1_counts / trials).tolist()),
        type_ii=tuple((t2_counts / trials).tolist()),
        type_i_counts=tuple(int(c) for c in t1_counts),
        type_ii_counts=tuple(int(c) for c in t2_counts),
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    """One detection report per sweep point plus threshold-side summaries."""

    points: tuple
    reports: tuple
    entropies: tuple
    log_branching: tuple
    warnings: tuple

    def rows(self) -> list[dict]:
        out = []
        for p, rep, h, lb in zip(self.points, self.reports, self.entropies,
                                 self.log_branching):
            out.append({
                "point": p,
                "trials": rep.config["experiment"]["trials"],
                "type_i": rep.type_i, "type_i_lo": rep.type_i_ci[0],
                "type_i_hi": rep.type_i_ci[1],
                "type_ii": rep.type_ii, "type_ii_lo": rep.type_ii_ci[0],
                "type_ii_hi": rep.type_ii_ci[1],
                "power": rep.power,
                "entropy": h,
                "log_branching": lb,
                "entropy_minus_log_br": (h - lb) if lb == lb else float("nan"),
            })
        return out

    def to_dict(self) -> dict:
        return {"rows": self.rows(), "warnings": list(self.warnings)}


def _sweep_configs(config: ExperimentConfig, sweep: dict):
    if not sweep or len(sweep) != 1:
        raise ConfigError("sweep needs exactly one swept field")
    key, values = next(iter(sweep.items()))
    if not values:
        raise ConfigError("sweep value list is empty")
    for v in values:
        if key == "nu":
            yield f"nu={list(v)}", config.replace(pair={**config.pair, "nu": list(v)})
        elif key == "n":
            yield f"n={v}", config.replace(domain={**config.domain, "n": int(v)})
        elif key == "depth":
            yield f"depth={v}", config.replace(domain={**config.domain, "depth": int(v)})
        elif key == "dim":
            yield f"dim={v}", config.replace(domain={**config.domain, "dim": int(v)})
        else:
            raise ConfigError(f"cannot sweep over {key!r}")


def _log_branching_of(domain_spec: dict) -> float:
    if domain_spec.get("kind") != "tree":
        return float("nan")
    gen_kind = domain_spec.get("generator", "bary")
    if gen_kind == "bary":
        gen = BAry(int(domain_spec.get("b", 2)), int(domain_spec["depth"]))
    elif gen_kind == "symmetric":
        gen = SphericallySymmetric(tuple(domain_spec["pattern"]),
                                   int(domain_spec["depth"]))
    else:
        return float("nan")
    est = branching_number(gen, tol=0.005)
    return float(np.log(est.estimate))


def run_threshold_sweep(config: ExperimentConfig, sweep: dict) -> SweepResult:
    """One detection experiment per sweep point, annotated with H - log br.

    Tree sweeps whose maximal achievable entropy log(1/min mu) cannot
    exceed log br(T) proceed with an explicit infeasibility warning.
    """
    points, reports, entropies, log_brs = [], [], [], []
    warnings = []
    for label, cfg in _sweep_configs(config, sweep):
        pair = build_pair(cfg.pair)
        h = relative_entropy(pair)
        lb = _log_branching_of(cfg.domain)
        if lb == lb:  # tree domain
            max_h = float(np.log(1.0 / np.min(pair.mu)))
            if max_h <= lb:
                warnings.append(
                    f"{label}: max achievable entropy log(1/min mu)={max_h:.4f} "
                    f"does not exceed log br={lb:.4f}; sweep cannot cross the threshold"
                )
        points.append(label)
        reports.append(run_detection_experiment(cfg))
        entropies.append(h)
        log_brs.append(lb)
    return SweepResult(tuple(points), tuple(reports), tuple(entropies),
                       tuple(log_brs), tuple(warnings))


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def emit_report(report, path, fmt: str = "json", figures: bool = False):
    """Write a report (DetectionReport, SweepResult, or dict) to disk.

    JSON emits one object; CSV emits a header plus one row per sweep point
    (or a single row).  With figures=True a matplotlib rendering is saved
    next to the delimited output.
    """
    p = Path(path)
    if isinstance(report, SweepResult) and not report.points:
        raise ConfigError("refusing to emit an empty sweep")
    if fmt == "json":
        obj = report.to_dict() if hasattr(report, "to_dict") else report
        p.write_text(json.dumps(obj, indent=2))
    elif fmt == "csv":
        rows = (report.rows() if isinstance(report, SweepResult)
                else [_flatten_report(report)])
        with open(p, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    if figures:
        from . import figures as figmod
        figmod.render_for_report(report, p)
    return p


def _flatten_report(report) -> dict:
    d = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    flat = {}
    for k, v in d.items():
        if isinstance(v, (int, float, str, bool)):
            flat[k] = v
        elif k in ("type_i_ci", "type_ii_ci"):
            flat[k.replace("_ci", "_lo")] = v[0]
            flat[k.replace("_ci", "_hi")] = v[1]
        elif k == "counts":
            for arm, c in v.items():
                for dec, n in c.items():
                    flat[f"{arm}_{dec}"] = n
    return flat
