"""Sampling null and perturbed sceneries, and likelihood-ratio sequences.

A scenery assigns one alphabet label to every vertex of a lattice window
or a flow tree.  Perturbed sceneries hide a sampled path whose labels are
redrawn from nu; the hidden trace stays in provenance and is never handed
to detectors.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .lattice import Box, PathSample, StopRule, WalkSpec, l1_shell_nd, sample_walk
from .measures import MeasurePair, sample_label
from .trees import FlowTree, RayPrefix, sample_ray

Domain = Union[Box, FlowTree]


class SceneryError(ValueError):
    """Invalid scenery construction or serialization."""


@dataclass(frozen=True)
class Provenance:
    """How a scenery was produced; hidden trace kept for oracle scoring only."""

    kind: str                      # 'null' | 'perturbed'
    hidden_trace: Optional[np.ndarray] = None   # in-window points / tree node ids
    trimmed: bool = False          # True when the path left the window


@dataclass(frozen=True)
class SceneryWindow:
    """Labeled domain plus provenance; labels are the only detector input."""

    domain: Domain
    labels: np.ndarray
    provenance: Provenance
    seed: Optional[int] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if isinstance(self.domain, Box):
            if labels.shape != self.domain.shape:
                raise SceneryError("label array does not match the box shape")
        else:
            if labels.shape != (self.domain.n_nodes,):
                raise SceneryError("label array does not match the tree size")
        labels = np.ascontiguousarray(labels, dtype=np.uint8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def on_tree(self) -> bool:
        return isinstance(self.domain, FlowTree)


def _lattice_flat_indices(box: Box, pts: np.ndarray) -> np.ndarray:
    lo = np.asarray(box.lo, dtype=np.int64)
    shape = box.shape
    rel = pts - lo
    flat = rel[:, 0].astype(np.int64)
    for i in range(1, len(shape)):
        flat = flat * shape[i] + rel[:, i]
    return flat


def _mu_nu(pair) -> tuple[np.ndarray, np.ndarray]:
    """Accept a MeasurePair or a raw (mu, nu) pair of sampling vectors.

    Raw vectors may carry zero-mass labels (point masses); MeasurePair
    keeps its strict positivity.
    """
    if isinstance(pair, MeasurePair):
        return pair.mu, pair.nu
    mu, nu = pair
    return np.asarray(mu, dtype=np.float64), np.asarray(nu, dtype=np.float64)


def sample_null(domain: Domain, pair, rng: np.random.Generator,
                seed: Optional[int] = None) -> SceneryWindow:
    """I.i.d. mu labels on every vertex of the domain.

    `pair` may be a MeasurePair, a (mu, nu) tuple, or a bare mu vector;
    only mu is consumed here.
    """
    if isinstance(pair, MeasurePair):
        mu = pair.mu
    elif isinstance(pair, (tuple, list)) and len(pair) == 2 and np.ndim(pair[0]) >= 1:
        mu = np.asarray(pair[0], dtype=np.float64)
    else:
        mu = np.asarray(pair, dtype=np.float64)
    size = domain.shape if isinstance(domain, Box) else (domain.n_nodes,)
    labels = sample_label(mu, rng, size=size)
    return SceneryWindow(domain, labels, Provenance("null"), seed=seed)


def sample_perturbed(
    domain: Domain,
    pair: MeasurePair,
    path_sampler: Callable,
    rng: np.random.Generator,
    seed: Optional[int] = None,
) -> SceneryWindow:
    """Mu labels off a hidden sampled path, nu labels on its in-window trace.

    The path sampler is called as path_sampler(rng, domain) and must yield
    a PathSample (lattice domains) or RayPrefix (tree domains).  Draw
    order is fixed: path first, then the mu field, then the nu overlay.
    """
    mu, nu = _mu_nu(pair)
    path = path_sampler(rng, domain)
    if isinstance(domain, Box):
        if not isinstance(path, PathSample):
            raise SceneryError("lattice domains need a PathSample-producing sampler")
        labels = sample_label(mu, rng, size=domain.shape)
        verts = path.vertices
        inside = domain.contains_points(verts)
        trimmed = bool(np.any(~inside))
        pts = verts[inside]
        flat = _lattice_flat_indices(domain, pts)
        # distinct sites in first-visit order
        _, first = np.unique(flat, return_index=True)
        order = np.sort(first)
        trace_flat = flat[order]
        labels_flat = labels.reshape(-1)
        labels_flat[trace_flat] = sample_label(nu, rng, size=trace_flat.size)
        labels = labels_flat.reshape(domain.shape)
        trace_pts = pts[order]
        return SceneryWindow(domain, labels,
                             Provenance("perturbed", trace_pts, trimmed), seed=seed)
    if not isinstance(path, RayPrefix):
        raise SceneryError("tree domains need a RayPrefix-producing sampler")
    labels = sample_label(mu, rng, size=(domain.n_nodes,))
    nodes = np.array(path.nodes, dtype=np.int64)
    labels[nodes] = sample_label(nu, rng, size=nodes.size)
    return SceneryWindow(domain, labels, Provenance("perturbed", nodes, False), seed=seed)


def window_exit_walk_sampler(spec: WalkSpec):
    """Path sampler: walk until the first vertex outside the window."""
    def sampler(rng: np.random.Generator, domain: Box) -> PathSample:
        return sample_walk(spec, StopRule.window_exit(domain), rng)
    return sampler


def sup_norm_exit_walk_sampler(spec: WalkSpec, k: int):
    def sampler(rng: np.random.Generator, domain: Box) -> PathSample:
        return sample_walk(spec, StopRule.sup_norm_exit(k), rng)
    return sampler


def fixed_steps_walk_sampler(spec: WalkSpec, t: int):
    def sampler(rng: np.random.Generator, domain: Box) -> PathSample:
        return sample_walk(spec, StopRule.fixed_steps(t), rng)
    return sampler


def flow_ray_sampler():
    """Path sampler for tree domains: descend along the boundary flow."""
    def sampler(rng: np.random.Generator, domain: FlowTree) -> RayPrefix:
        return sample_ray(domain, rng)
    return sampler


# ---------------------------------------------------------------------------
# likelihood-ratio sequences
# ---------------------------------------------------------------------------

def exact_g_sequence(window: SceneryWindow, pair: MeasurePair) -> np.ndarray:
    """Exact g_n = Q(first n revealed labels)/P(same) on a tree scenery.

    Reveal order is the arena's BFS order (root first).  Returns the array
    g[0..N] with g[0] = 1; each reveal updates the Psi-weighted running
    ray products over the stubs below the revealed vertex.
    """
    if not window.on_tree:
        raise SceneryError("exact g sequences need a tree domain")
    tree: FlowTree = window.domain
    rv = pair.ratios[window.labels]
    w = tree.flow[tree.stubs].copy()          # Psi(s) * prod over revealed ancestors
    g = np.empty(tree.n_nodes + 1)
    total = w.sum()                           # == 1 by flow conservation
    g[0] = total
    for v in range(tree.n_nodes):
        lo, hi = tree.stub_lo[v], tree.stub_hi[v]
        old = w[lo:hi].sum()
        w[lo:hi] *= rv[v]
        total += w[lo:hi].sum() - old
        g[v + 1] = total
    return g


def exact_f_sequence(window: SceneryWindow, pair: MeasurePair) -> np.ndarray:
    """Reciprocal direction f_n = P/Q; positive sceneries give f_n = 1/g_n."""
    return 1.0 / exact_g_sequence(window, pair)


def g_at_level_prefixes(window: SceneryWindow, pair: MeasurePair) -> np.ndarray:
    """g after fully revealing levels 0..l, for l = 0..depth (vectorized)."""
    if not window.on_tree:
        raise SceneryError("exact g sequences need a tree domain")
    tree: FlowTree = window.domain
    rv = pair.ratios[window.labels]
    w = tree.flow[tree.stubs].copy()
    out = np.empty(tree.depth + 1)
    for lvl in range(tree.depth + 1):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        sizes = (tree.stub_hi[s:e] - tree.stub_lo[s:e]).astype(np.int64)
        w *= np.repeat(rv[s:e], sizes)
        out[lvl] = w.sum()
    return out


def diamond_order_sites(box: Box, n: int) -> np.ndarray:
    """First n sites of the box in diamond order (l1 norm, ties lexicographic)."""
    if n < 0 or n > box.size:
        raise SceneryError("reveal count outside the window size")
    d = box.dimension
    out = []
    k = 0
    max_norm = sum(max(abs(l), abs(h)) for l, h in zip(box.lo, box.hi))
    while len(out) < n and k <= max_norm:
        shell = l1_shell_nd(k, d)
        inside = box.contains_points(shell)
        for p in shell[inside]:
            out.append(tuple(int(c) for c in p))
            if len(out) == n:
                break
        k += 1
    return np.array(out, dtype=np.int64).reshape(len(out), d)


@dataclass(frozen=True)
class McGEstimate:
    """Monte Carlo estimate of g_n with a batch-means confidence interval."""

    estimate: float
    ci_lo: float
    ci_hi: float
    n_paths: int
    n_revealed: int


def mc_g_estimate(
    window: SceneryWindow,
    pair: MeasurePair,
    path_sampler: Callable,
    n_revealed: int,
    n_paths: int,
    rng: np.random.Generator,
    n_batches: int = 10,
) -> McGEstimate:
    """Unbiased g_n estimate on a lattice window: average over sampled paths
    of the likelihood-ratio product over trace points among the first n
    revealed sites (diamond order)."""
    if window.on_tree:
        raise SceneryError("Monte Carlo g estimates are for lattice windows")
    if n_paths < 100:
        raise SceneryError("need at least 100 path replicas")
    box: Box = window.domain
    revealed = diamond_order_sites(box, n_revealed)
    revealed_flat = set(_lattice_flat_indices(box, revealed).tolist()) if n_revealed else set()
    labels_flat = window.labels.reshape(-1)
    logr = np.log(pair.ratios)
    vals = np.empty(n_paths)
    for i in range(n_paths):
        path = path_sampler(rng, box)
        verts = path.vertices[box.contains_points(path.vertices)]
        flat = np.unique(_lattice_flat_indices(box, verts))
        hit = [f for f in flat.tolist() if f in revealed_flat]
        vals[i] = float(np.exp(logr[labels_flat[hit]].sum())) if hit else 1.0
    est = float(vals.mean())
    b = max(2, n_batches)
    batches = np.array_split(vals, b)
    means = np.array([x.mean() for x in batches])
    se = float(means.std(ddof=1) / np.sqrt(len(means)))
    return McGEstimate(est, est - 1.959963984540054 * se, est + 1.959963984540054 * se,
                       n_paths, n_revealed)


# ---------------------------------------------------------------------------
# scenery files
# ---------------------------------------------------------------------------

_MAGIC = b"PSCN"
_HEADER = "<4sBBBHQB"


def save_scenery(path, window: SceneryWindow, alphabet_size: int,
                 fmt: Optional[str] = None) -> None:
    """Write a scenery to disk; '.json' paths use the debug form.

    The binary form stores the header (dims, alphabet size, seed,
    provenance flag) and the raw label bytes; the hidden trace is not
    serialized, so files are safe detector inputs.
    """
    p = Path(path)
    fmt = fmt or ("json" if p.suffix == ".json" else "binary")
    if fmt == "json":
        p.write_text(json.dumps(_to_json_dict(window, alphabet_size)))
        return
    if window.on_tree:
        raise SceneryError("binary scenery files cover lattice windows; use JSON for trees")
    if alphabet_size > 255:
        raise SceneryError("binary label bytes support alphabets up to 255")
    box: Box = window.domain
    flag = 1 if window.provenance.kind == "perturbed" else 0
    head = struct.pack(_HEADER, _MAGIC, 1, 0, box.dimension, alphabet_size,
                       window.seed or 0, flag)
    bounds = b"".join(struct.pack("<qq", l, h) for l, h in zip(box.lo, box.hi))
    p.write_bytes(head + bounds + window.labels.tobytes())


def load_scenery(path) -> tuple[SceneryWindow, int]:
    """Read a scenery file; returns (window, alphabet_size).

    Loaded provenance carries only the null/perturbed flag: hidden traces
    never round-trip through files.
    """
    p = Path(path)
    if p.suffix == ".json":
        return _from_json_dict(json.loads(p.read_text()))
    raw = p.read_bytes()
    head_size = struct.calcsize(_HEADER)
    magic, version, kind, d, m, seed, flag = struct.unpack(_HEADER, raw[:head_size])
    if magic != _MAGIC or version != 1 or kind != 0:
        raise SceneryError("not a scenery file")
    bounds = struct.unpack(f"<{2 * d}q", raw[head_size : head_size + 16 * d])
    lo = bounds[0::2]
    hi = bounds[1::2]
    box = Box(lo, hi)
    labels = np.frombuffer(raw[head_size + 16 * d :], dtype=np.uint8).reshape(box.shape)
    prov = Provenance("perturbed" if flag else "null")
    return SceneryWindow(box, labels, prov, seed=seed or None), int(m)


def _to_json_dict(window: SceneryWindow, alphabet_size: int) -> dict:
    prov = window.provenance.kind
    if window.on_tree:
        tree: FlowTree = window.domain
        return {
            "kind": "tree",
            "alphabet": alphabet_size,
            "seed": window.seed,
            "provenance": prov,
            "parent": tree.parent.tolist(),
            "level_offsets": list(tree.level_offsets),
            "flow": tree.flow.tolist(),
            "labels": window.labels.tolist(),
        }
    box: Box = window.domain
    return {
        "kind": "lattice",
        "alphabet": alphabet_size,
        "seed": window.seed,
        "provenance": prov,
        "lo": list(box.lo),
        "hi": list(box.hi),
        "labels": window.labels.tolist(),
    }


def _from_json_dict(d: dict) -> tuple[SceneryWindow, int]:
    prov = Provenance(d["provenance"])
    if d["kind"] == "tree":
        parent = np.array(d["parent"], dtype=np.int64)
        offsets = d["level_offsets"]
        n = parent.size
        ccount = np.zeros(n, dtype=np.int64)
        for v in parent[1:]:
            ccount[v] += 1
        child_start = np.zeros(n, dtype=np.int64)
        child_start[0] = 1
        child_start[1:] = 1 + np.cumsum(ccount[:-1])
        tree = FlowTree(parent, child_start, ccount, offsets, flow=d["flow"])
        win = SceneryWindow(tree, np.array(d["labels"], dtype=np.uint8), prov,
                            seed=d.get("seed"))
        return win, int(d["alphabet"])
    box = Box(tuple(d["lo"]), tuple(d["hi"]))
    win = SceneryWindow(box, np.array(d["labels"], dtype=np.uint8), prov,
                        seed=d.get("seed"))
    return win, int(d["alphabet"])
