"""Decision statistics: labels in, binary decision plus raw statistic out.

Detectors are pure functions of (labels, parameters); hidden-path
provenance never enters.  Ties at the threshold decide null.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .lattice import Box, drift_tube
from .measures import MeasurePair, centered_statistic_fn, relative_entropy
from .scenery import (Provenance, SceneryError, SceneryWindow, exact_g_sequence,
                      g_at_level_prefixes, mc_g_estimate)
from .trees import Cut, FlowTree


class DetectorInapplicableError(ValueError):
    """Detector preconditions not met for this measure pair or walk."""


@dataclass(frozen=True)
class DetectorOutcome:
    """Decision (perturbed iff statistic > threshold), with the raw numbers."""

    decision: str
    statistic: float
    threshold: float
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "params": self.params,
        }


def _decide(statistic: float, threshold: float) -> str:
    return "perturbed" if statistic > threshold else "null"


def _default_boost_label(pair: MeasurePair) -> int:
    gap = pair.nu - pair.mu
    label = int(np.argmax(gap))
    if gap[label] <= 0:
        raise DetectorInapplicableError("no label with nu > mu")
    return label


# ---------------------------------------------------------------------------
# cube scan
# ---------------------------------------------------------------------------

def cube_side(n: int, d: int) -> int:
    """Scan cube side k(n) = (ln n)^(1/(d-1)), rounded, floored at 2."""
    if n < 3 or d < 2:
        raise DetectorInapplicableError("cube side needs n >= 3 and d >= 2")
    return max(2, round(math.log(n) ** (1.0 / (d - 1))))


def _sliding_box_sums(mask: np.ndarray, k: int) -> np.ndarray:
    """Stride-1 sums of all side-k cubes of a d-dim 0/1 array."""
    d = mask.ndim
    ii = np.zeros(tuple(s + 1 for s in mask.shape), dtype=np.int64)
    ii[(slice(1, None),) * d] = mask
    for axis in range(d):
        np.cumsum(ii, axis=axis, out=ii)
    out = None
    for corner in range(1 << d):
        sl = []
        bits = 0
        for axis in range(d):
            if corner >> axis & 1:
                sl.append(slice(k, None))
                bits += 1
            else:
                sl.append(slice(None, -k))
        term = ii[tuple(sl)]
        sign = 1 if (d - bits) % 2 == 0 else -1
        out = sign * term if out is None else out + sign * term
    return out


def cube_scan_detect(
    labels: np.ndarray,
    pair: MeasurePair,
    delta: float,
    rho_star: Optional[int] = None,
) -> DetectorOutcome:
    """Fire when some sliding cube of side k(n) is unusually rich in rho*.

    The statistic is the maximum cube frequency of rho*; the threshold is
    mu(rho*) + delta*(nu(rho*)-mu(rho*))/2 with delta in (0, 2] (delta = 2
    puts the threshold at nu(rho*) itself).
    """
    if not 0.0 < delta <= 2.0:
        raise DetectorInapplicableError("delta must lie in (0, 2]")
    d = labels.ndim
    n = labels.shape[0] // 2
    rho = _default_boost_label(pair) if rho_star is None else int(rho_star)
    gap = float(pair.nu[rho] - pair.mu[rho])
    if gap <= 0:
        raise DetectorInapplicableError("rho* needs nu(rho*) > mu(rho*)")
    k = cube_side(n, d)
    if any(s < k for s in labels.shape):
        raise DetectorInapplicableError("window smaller than the scan cube")
    sums = _sliding_box_sums(labels == rho, k)
    statistic = float(sums.max()) / k**d
    threshold = float(pair.mu[rho]) + delta * gap / 2.0
    return DetectorOutcome(
        _decide(statistic, threshold), statistic, threshold,
        params={"detector": "cube", "k": k, "n": n, "delta": delta, "rho_star": rho},
    )


# ---------------------------------------------------------------------------
# radial statistic (d = 2 impossibility-side detector)
# ---------------------------------------------------------------------------

def radial_profile(shell_index: np.ndarray, labels: np.ndarray,
                   f: np.ndarray, n_max: int) -> np.ndarray:
    """Cumulative U_n for n = 0..n_max from flat shell indices and labels.

    U_n = sum_{k<=n} (1/k) * sum_{|v|_1 = k} f(label(v)); the same profile
    serves every window radius at once.
    """
    per_shell = np.bincount(shell_index, weights=f[labels], minlength=n_max + 1)
    out = np.zeros(n_max + 1)
    ks = np.arange(1, n_max + 1, dtype=np.float64)
    out[1:] = np.cumsum(per_shell[1 : n_max + 1] / ks)
    return out


def radial_threshold(n: int) -> float:
    """Half the harmonic weight sum: (1/2) sum_{k<=n} 1/k."""
    return 0.5 * float(np.sum(1.0 / np.arange(1, n + 1)))


def radial_detect(labels: np.ndarray, pair: MeasurePair) -> DetectorOutcome:
    """Shell-weighted statistic U_n against threshold (1/2) sum 1/k, d=2.

    Labels must cover the inclusive square [-n, n]^2 so every l1 shell up
    to n is complete.
    """
    if labels.ndim != 2 or labels.shape[0] != labels.shape[1] or labels.shape[0] % 2 == 0:
        raise DetectorInapplicableError("need an odd-sided inclusive square grid")
    n = (labels.shape[0] - 1) // 2
    f = centered_statistic_fn(pair)
    xs = np.arange(-n, n + 1)
    shell = (np.abs(xs)[:, None] + np.abs(xs)[None, :]).ravel()
    ball = shell <= n
    profile = radial_profile(shell[ball].astype(np.int64), labels.ravel()[ball], f, n)
    statistic = float(profile[n])
    threshold = radial_threshold(n)
    return DetectorOutcome(
        _decide(statistic, threshold), statistic, threshold,
        params={"detector": "radial", "n": n},
    )


# ---------------------------------------------------------------------------
# drift tube events B_k over windows n_k = 2^k
# ---------------------------------------------------------------------------

def tube_count_threshold(size: int, pair: MeasurePair, xi: int, rho: float) -> float:
    """B_k count threshold mu(xi)(|D| - rho sqrt|D|) + rho nu(xi) sqrt|D|."""
    s = math.sqrt(size)
    return float(pair.mu[xi]) * (size - rho * s) + rho * float(pair.nu[xi]) * s


def drift_tube_detect(
    labels: np.ndarray,
    box: Box,
    pair: MeasurePair,
    mean: Sequence,
    k_range: Sequence[int],
    rho: float,
    gamma_hat: float,
    xi: Optional[int] = None,
) -> DetectorOutcome:
    """Fraction of dyadic drift-tube windows with an excess of xi labels.

    For each k the event B_k asks whether the count of xi inside the tube
    D(2^k) clears the rho-calibrated threshold; the decision compares the
    B_k frequency to the midpoint between the null rate gamma_hat and 1/2.
    """
    xi_label = _default_boost_label(pair) if xi is None else int(xi)
    if pair.nu[xi_label] <= pair.mu[xi_label]:
        raise DetectorInapplicableError("xi needs nu(xi) > mu(xi)")
    if rho <= 0:
        raise DetectorInapplicableError("rho must be positive")
    fired = []
    flat_labels = labels.reshape(-1)
    for k in k_range:
        tube = drift_tube(2**k, mean)
        pts = tube.points()
        inside = box.contains_points(pts)
        pts = pts[inside]
        if pts.shape[0] == 0:
            raise DetectorInapplicableError(f"window misses the whole tube D(2^{k})")
        lo = np.asarray(box.lo, dtype=np.int64)
        shape = box.shape
        flat = (pts[:, 0] - lo[0]).astype(np.int64)
        for i in range(1, len(shape)):
            flat = flat * shape[i] + (pts[:, i] - lo[i])
        cnt = int((flat_labels[flat] == xi_label).sum())
        fired.append(cnt >= tube_count_threshold(pts.shape[0], pair, xi_label, rho))
    statistic = float(np.mean(fired))
    threshold = (gamma_hat + 0.5) / 2.0
    return DetectorOutcome(
        _decide(statistic, threshold), statistic, threshold,
        params={"detector": "tube", "k_range": list(k_range), "rho": rho,
                "gamma_hat": gamma_hat, "xi": xi_label,
                "fired": [bool(b) for b in fired]},
    )


# ---------------------------------------------------------------------------
# likelihood-ratio detector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LrDetection:
    """Outcome plus the g-trajectory along the reveal schedule."""

    outcome: DetectorOutcome
    reveal_points: np.ndarray
    trajectory: np.ndarray


def lr_detect(
    labels: np.ndarray,
    domain,
    pair: MeasurePair,
    engine: str = "exact",
    reveal_schedule: Optional[Sequence[int]] = None,
    path_sampler: Optional[Callable] = None,
    mc_paths: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> LrDetection:
    """Likelihood-ratio test: perturbed iff g at full reveal exceeds 1.

    The exact engine needs a FlowTree domain; the Monte Carlo engine
    estimates g on lattice windows by averaging trace likelihood-ratio
    products over sampled paths (needs a path sampler and rng).
    """
    if engine == "exact":
        if not isinstance(domain, FlowTree):
            raise SceneryError("exact engine needs a tree domain")
        window = SceneryWindow(domain, labels, Provenance("null"))
        if reveal_schedule is None:
            traj = g_at_level_prefixes(window, pair)
            points = np.array(domain.level_offsets[1:], dtype=np.int64)
            g_full = float(traj[-1])
        else:
            g = exact_g_sequence(window, pair)
            points = np.asarray(list(reveal_schedule), dtype=np.int64)
            traj = g[points]
            g_full = float(g[-1])
    elif engine == "mc":
        if not isinstance(domain, Box):
            raise SceneryError("mc engine needs a lattice window")
        if path_sampler is None or rng is None:
            raise SceneryError("mc engine needs a path sampler and rng")
        window = SceneryWindow(domain, labels, Provenance("null"))
        points_list = list(reveal_schedule) if reveal_schedule else [domain.size]
        traj = np.array([
            mc_g_estimate(window, pair, path_sampler, n, mc_paths, rng).estimate
            for n in points_list
        ])
        points = np.asarray(points_list, dtype=np.int64)
        g_full = float(traj[-1])
    else:
        raise SceneryError(f"unknown g engine {engine!r}")
    outcome = DetectorOutcome(
        _decide(g_full, 1.0), g_full, 1.0,
        params={"detector": "lr", "engine": engine},
    )
    return LrDetection(outcome, points, traj)


# ---------------------------------------------------------------------------
# cut detector on trees
# ---------------------------------------------------------------------------

def root_path_log_ratios(tree: FlowTree, labels: np.ndarray,
                         pair: MeasurePair) -> np.ndarray:
    """Per-node sum of log likelihood ratios along the root path (root included)."""
    logr = np.log(pair.ratios)
    acc = logr[labels].astype(np.float64)
    for lvl in range(1, tree.depth + 1):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        idx = np.arange(s, e)
        acc[idx] += acc[tree.parent[idx]]
    return acc


def tree_cut_detect(
    labels: np.ndarray,
    tree: FlowTree,
    pair: MeasurePair,
    cuts: Sequence[Cut],
) -> DetectorOutcome:
    """Majority vote over cuts of the event that some cut vertex u carries a
    root-path likelihood-ratio product of at least e^{|u| H}."""
    if pair.is_degenerate():
        raise DetectorInapplicableError("mu == nu gives H = 0; cut detector undefined")
    if not cuts:
        raise DetectorInapplicableError("need at least one cut")
    h = relative_entropy(pair)
    acc = root_path_log_ratios(tree, labels, pair)
    fired = []
    for cut in cuts:
        verts = np.fromiter(cut.vertices, dtype=np.int64, count=len(cut.vertices))
        fired.append(bool(np.any(acc[verts] >= tree.depths[verts] * h)))
    statistic = float(np.mean(fired))
    return DetectorOutcome(
        _decide(statistic, 0.5), statistic, 0.5,
        params={"detector": "treecut", "n_cuts": len(cuts), "entropy": h,
                "fired": fired},
    )
