"""Rooted leafless trees truncated at depth D, carrying boundary flows.

The arena is BFS-ordered numpy arrays: children of a node are contiguous
in the next level, so subtree and boundary-stub ranges are intervals.
All asymptotic quantities (branching number, local dimension) are finite-
depth proxies with the truncation made explicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

FLOW_TOL = 1e-12


class TreeError(ValueError):
    """Invalid tree structure, flow, or generator."""


# ---------------------------------------------------------------------------
# generator specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BAry:
    """Complete b-ary tree of the given depth (b=1 is the unary path)."""

    b: int
    depth: int

    def __post_init__(self):
        if self.b < 1 or self.depth < 1:
            raise TreeError("b-ary generator needs b >= 1 and depth >= 1")

    def level_child_counts(self, depth: int) -> np.ndarray:
        return np.full(depth, self.b, dtype=np.int64)


@dataclass(frozen=True)
class SphericallySymmetric:
    """Every node at level l has pattern[l % len(pattern)] children."""

    pattern: tuple
    depth: int

    def __post_init__(self):
        pat = tuple(int(c) for c in self.pattern)
        if not pat or any(c < 1 for c in pat):
            raise TreeError("child-count pattern must be nonempty and positive")
        if self.depth < 1:
            raise TreeError("depth must be >= 1")
        object.__setattr__(self, "pattern", pat)

    def level_child_counts(self, depth: int) -> np.ndarray:
        pat = self.pattern
        return np.array([pat[l % len(pat)] for l in range(depth)], dtype=np.int64)


@dataclass(frozen=True)
class ExplicitEdges:
    """Edge list (parent, child) with root id 0; leaves must share one depth."""

    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))


@dataclass(frozen=True)
class RandomTree:
    """Galton-Watson child counts, conditioned on reaching the given depth."""

    child_probs: tuple
    depth: int
    seed: int
    max_nodes: int = 1 << 22

    def __post_init__(self):
        p = tuple(float(x) for x in self.child_probs)
        if abs(sum(p) - 1.0) > 1e-9 or any(x < 0 for x in p):
            raise TreeError("child-count law must be a probability vector over 0..K")
        object.__setattr__(self, "child_probs", p)


TreeGenerator = Union[BAry, SphericallySymmetric, ExplicitEdges, RandomTree]


# ---------------------------------------------------------------------------
# the arena
# ---------------------------------------------------------------------------

class FlowTree:
    """Depth-truncated leafless tree with a unit flow on its boundary stubs."""

    __slots__ = ("parent", "child_start", "child_count", "depths",
                 "level_offsets", "stub_lo", "stub_hi", "flow")

    def __init__(self, parent, child_start, child_count, level_offsets, flow=None):
        self.parent = np.asarray(parent, dtype=np.int32)
        self.child_start = np.asarray(child_start, dtype=np.int32)
        self.child_count = np.asarray(child_count, dtype=np.int32)
        self.level_offsets = tuple(int(x) for x in level_offsets)
        n = self.parent.size
        depths = np.empty(n, dtype=np.int32)
        for lvl in range(self.depth + 1):
            depths[self.level_offsets[lvl]:self.level_offsets[lvl + 1]] = lvl
        self.depths = depths
        if np.any(self.child_count[: self.level_offsets[self.depth]] < 1):
            raise TreeError("leafless violation: internal node without children")
        self.stub_lo, self.stub_hi = self._stub_intervals()
        if flow is None:
            flow = _uniform_flow(self)
        self._set_flow(flow)
        for a in (self.parent, self.child_start, self.child_count, self.depths,
                  self.stub_lo, self.stub_hi):
            a.setflags(write=False)

    def _stub_intervals(self):
        n = self.parent.size
        lo = np.zeros(n, dtype=np.int64)
        hi = np.zeros(n, dtype=np.int64)
        first_stub = self.level_offsets[self.depth]
        stubs = np.arange(first_stub, n)
        lo[stubs] = stubs - first_stub
        hi[stubs] = stubs - first_stub + 1
        for lvl in range(self.depth - 1, -1, -1):
            s, e = self.level_offsets[lvl], self.level_offsets[lvl + 1]
            cs = self.child_start[s:e]
            ce = cs + self.child_count[s:e]
            lo[s:e] = lo[cs]
            hi[s:e] = hi[ce - 1]
        return lo.astype(np.int32), hi.astype(np.int32)

    def _set_flow(self, flow):
        f = np.asarray(flow, dtype=np.float64).copy()
        if f.shape != (self.n_nodes,):
            raise TreeError("flow must assign one mass per node")
        if np.any(f < 0.0):
            raise TreeError("flow masses must be nonnegative")
        if abs(f[0] - 1.0) > FLOW_TOL:
            raise TreeError("root flow must be 1")
        for lvl in range(self.depth):
            s, e = self.level_offsets[lvl], self.level_offsets[lvl + 1]
            cs = self.child_start[s:e]
            nxt_lo = self.level_offsets[lvl + 1]
            sums = np.add.reduceat(f[nxt_lo:self.level_offsets[lvl + 2]], cs - nxt_lo)
            if np.max(np.abs(sums - f[s:e])) > FLOW_TOL:
                raise TreeError("flow not conserved at some internal node")
        f.setflags(write=False)
        self.flow = f

    # -- basic queries ------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.parent.size

    @property
    def depth(self) -> int:
        return len(self.level_offsets) - 2

    @property
    def stubs(self) -> np.ndarray:
        return np.arange(self.level_offsets[self.depth], self.n_nodes)

    @property
    def n_stubs(self) -> int:
        return self.n_nodes - self.level_offsets[self.depth]

    def children(self, v: int) -> np.ndarray:
        s = self.child_start[v]
        return np.arange(s, s + self.child_count[v])

    def level(self, lvl: int) -> np.ndarray:
        return np.arange(self.level_offsets[lvl], self.level_offsets[lvl + 1])

    def ray_to_stub(self, stub: int) -> "RayPrefix":
        stub = int(stub)
        if not self.level_offsets[self.depth] <= stub < self.n_nodes:
            raise TreeError(f"{stub} is not a boundary stub")
        nodes = []
        v = stub
        while v >= 0:
            nodes.append(v)
            v = int(self.parent[v])
        return RayPrefix(tuple(reversed(nodes)), tree=self)

    def path_to_root(self, v: int) -> np.ndarray:
        nodes = []
        v = int(v)
        while v >= 0:
            nodes.append(v)
            v = int(self.parent[v])
        return np.array(nodes[::-1], dtype=np.int64)

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when a == b or a lies on the root path of b."""
        if self.depths[a] > self.depths[b]:
            return False
        return bool(self.stub_lo[a] <= self.stub_lo[b] and self.stub_hi[b] <= self.stub_hi[a])

    def with_flow(self, flow) -> "FlowTree":
        return FlowTree(self.parent, self.child_start, self.child_count,
                        self.level_offsets, flow=flow)


def _uniform_flow(tree: FlowTree) -> np.ndarray:
    f = np.zeros(tree.n_nodes)
    f[0] = 1.0
    for lvl in range(tree.depth):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        share = f[s:e] / tree.child_count[s:e]
        f[tree.level_offsets[lvl + 1]:tree.level_offsets[lvl + 2]] = np.repeat(
            share, tree.child_count[s:e]
        )
    return f


def _from_level_counts(child_counts: np.ndarray) -> FlowTree:
    # spherically symmetric: every node at level l has child_counts[l] children
    level_sizes = [1]
    for c in child_counts:
        level_sizes.append(level_sizes[-1] * int(c))
    offsets = np.concatenate([[0], np.cumsum(level_sizes)])
    n = int(offsets[-1])
    parent = np.full(n, -1, dtype=np.int64)
    child_start = np.zeros(n, dtype=np.int64)
    ccount = np.zeros(n, dtype=np.int64)
    for lvl, c in enumerate(child_counts):
        s, e = offsets[lvl], offsets[lvl + 1]
        nodes = np.arange(s, e)
        ccount[s:e] = c
        child_start[s:e] = offsets[lvl + 1] + (nodes - s) * c
        parent[offsets[lvl + 1]:offsets[lvl + 2]] = np.repeat(nodes, c)
    return FlowTree(parent, child_start, ccount, offsets)


def _from_children_lists(children: list) -> FlowTree:
    """Build a BFS arena from a root-indexed adjacency list (list of lists)."""
    order = [0]
    depth_of = {0: 0}
    i = 0
    while i < len(order):
        v = order[i]
        for c in children[v]:
            depth_of[c] = depth_of[v] + 1
            order.append(c)
        i += 1
    if len(order) != len(children):
        raise TreeError("edge list is not a single tree rooted at 0")
    max_depth = max(depth_of[v] for v in order)
    if max_depth < 1:
        raise TreeError("tree must have depth >= 1")
    # stable re-order: BFS level by level, children kept contiguous
    new_id = {v: i for i, v in enumerate(order)}
    n = len(order)
    parent = np.full(n, -1, dtype=np.int64)
    child_start = np.zeros(n, dtype=np.int64)
    ccount = np.zeros(n, dtype=np.int64)
    pos = 1
    for i, v in enumerate(order):
        kids = children[v]
        if depth_of[v] < max_depth and not kids:
            raise TreeError(f"leafless violation: internal node {v} has no children")
        if depth_of[v] == max_depth and kids:
            raise TreeError("children below the boundary depth")
        child_start[i] = pos
        ccount[i] = len(kids)
        for c in kids:
            parent[new_id[c]] = i
        pos += len(kids)
    sizes = np.bincount([depth_of[v] for v in order], minlength=max_depth + 1)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return FlowTree(parent, child_start, ccount, offsets)


def build_tree(generator: TreeGenerator) -> FlowTree:
    """Materialize a generator spec; uniform equal-split flow is attached."""
    if isinstance(generator, BAry):
        return _from_level_counts(generator.level_child_counts(generator.depth))
    if isinstance(generator, SphericallySymmetric):
        return _from_level_counts(generator.level_child_counts(generator.depth))
    if isinstance(generator, ExplicitEdges):
        nodes = {0}
        for a, b in generator.edges:
            nodes.add(a)
            nodes.add(b)
        if sorted(nodes) != list(range(len(nodes))):
            raise TreeError("edge list node ids must be 0..n-1 with root 0")
        children = [[] for _ in range(len(nodes))]
        seen_child = set()
        for a, b in generator.edges:
            if b in seen_child or b == 0:
                raise TreeError("each node except the root needs exactly one parent")
            seen_child.add(b)
            children[a].append(b)
        if len(seen_child) != len(nodes) - 1:
            raise TreeError("edge list is disconnected")
        return _from_children_lists(children)
    if isinstance(generator, RandomTree):
        return _sample_random_tree(generator)
    raise TreeError(f"unknown generator {generator!r}")


def _sample_random_tree(gen: RandomTree) -> FlowTree:
    """Galton-Watson tree rejected until depth D is reached, then pruned to
    the leafless reduced tree of lines that survive to D."""
    probs = np.asarray(gen.child_probs)
    rng = np.random.default_rng(gen.seed)
    for _ in range(10_000):
        children = [[]]
        levels = [[0]]
        total = 1
        for lvl in range(gen.depth):
            nxt = []
            draws = rng.choice(probs.size, size=len(levels[lvl]), p=probs)
            for v, c in zip(levels[lvl], draws):
                for _k in range(int(c)):
                    children.append([])
                    children[v].append(total)
                    nxt.append(total)
                    total += 1
                    if total > gen.max_nodes:
                        raise TreeError(f"random tree exceeded {gen.max_nodes} nodes")
            levels.append(nxt)
        if not levels[gen.depth]:
            continue  # extinct before D: reject
        alive = [False] * total
        for v in levels[gen.depth]:
            alive[v] = True
        for lvl in range(gen.depth - 1, -1, -1):
            for v in levels[lvl]:
                alive[v] = any(alive[c] for c in children[v])
        relabel = {}
        pruned: list = []
        stack = [0]
        while stack:  # BFS relabel of surviving nodes
            v = stack.pop(0)
            relabel[v] = len(pruned)
            pruned.append(v)
            stack.extend(c for c in children[v] if alive[c])
        kept = [[relabel[c] for c in children[v] if alive[c]] for v in pruned]
        return _from_children_lists(kept)
    raise TreeError("rejection sampling failed to reach the target depth")


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def attach_flow(tree: FlowTree, flow_spec, beta: Optional[float] = None) -> FlowTree:
    """Return a copy of the tree carrying the requested boundary flow.

    flow_spec is 'uniform' (equal split among children), 'max-flow' (the
    unit flow minimizing sup_v beta^{|v|} Psi(v), computed by the tree
    max-flow DP on capacities beta^{-|v|}), or an explicit mass array.
    """
    if isinstance(flow_spec, str):
        if flow_spec == "uniform":
            return tree.with_flow(_uniform_flow(tree))
        if flow_spec == "max-flow":
            if beta is None or beta <= 0:
                raise TreeError("max-flow spec needs beta > 0")
            return tree.with_flow(_max_flow_for_beta(tree, float(beta)))
        raise TreeError(f"unknown flow spec {flow_spec!r}")
    return tree.with_flow(flow_spec)


def _max_flow_for_beta(tree: FlowTree, beta: float) -> np.ndarray:
    cap = np.empty(tree.n_nodes)
    first_stub = tree.level_offsets[tree.depth]
    cap[first_stub:] = beta ** (-float(tree.depth))
    for lvl in range(tree.depth - 1, 0, -1):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        nxt = tree.level_offsets[lvl + 1]
        sums = np.add.reduceat(cap[nxt:tree.level_offsets[lvl + 2]],
                               tree.child_start[s:e] - nxt)
        cap[s:e] = np.minimum(beta ** (-float(lvl)), sums)
    route = np.zeros(tree.n_nodes)
    r1_lo, r1_hi = tree.level_offsets[1], tree.level_offsets[2]
    total = cap[r1_lo:r1_hi].sum()
    if total <= 0.0:
        raise TreeError("zero max flow; beta too large for this depth")
    route[0] = total
    route[r1_lo:r1_hi] = cap[r1_lo:r1_hi]
    for lvl in range(1, tree.depth):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        nxt = tree.level_offsets[lvl + 1]
        sums = np.add.reduceat(cap[nxt:tree.level_offsets[lvl + 2]],
                               tree.child_start[s:e] - nxt)
        scale = np.where(sums > 0, route[s:e] / np.where(sums > 0, sums, 1.0), 0.0)
        route[nxt:tree.level_offsets[lvl + 2]] = cap[nxt:tree.level_offsets[lvl + 2]] * np.repeat(scale, tree.child_count[s:e])
    return route / total


# ---------------------------------------------------------------------------
# cuts and the branching number
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cut:
    """An antichain of vertices; `separating` marks root/boundary cuts."""

    vertices: tuple
    separating: bool

    @classmethod
    def level(cls, tree: FlowTree, depth: int) -> "Cut":
        if not 1 <= depth <= tree.depth:
            raise TreeError("level cut depth out of range")
        return cls(tuple(int(v) for v in tree.level(depth)), separating=True)

    @classmethod
    def validated(cls, tree: FlowTree, vertices: Iterable[int],
                  require_separating: bool = True) -> "Cut":
        verts = tuple(sorted(int(v) for v in set(vertices)))
        if any(v == 0 for v in verts):
            raise TreeError("the root cannot belong to a cut")
        lo = tree.stub_lo[list(verts)] if verts else np.empty(0, dtype=np.int32)
        hi = tree.stub_hi[list(verts)] if verts else np.empty(0, dtype=np.int32)
        order = np.argsort(lo)
        lo, hi = lo[order], hi[order]
        if np.any(lo[1:] < hi[:-1]):
            raise TreeError("not an antichain: one vertex is an ancestor of another")
        separating = bool(verts) and int(hi[-1] - lo[0]) == tree.n_stubs and bool(
            np.all(lo[1:] == hi[:-1]) and lo[0] == 0
        )
        if require_separating and not separating:
            raise TreeError("cut does not separate the root from the boundary")
        return cls(verts, separating=separating)

    def __len__(self) -> int:
        return len(self.vertices)


def min_cut_sum(tree: FlowTree, beta) -> Union[float, Fraction]:
    """min over separating cuts C of sum_{u in C} beta^{-|u|}, root excluded.

    DP: val(stub) = beta^-D, val(v) = min(beta^-|v|, sum over children),
    answer is the child sum at the root.  Fraction beta gives an exact
    result; float beta is evaluated level-vectorized.
    """
    if isinstance(beta, Fraction) or isinstance(beta, int):
        return _min_cut_sum_exact(tree, Fraction(beta))
    beta = float(beta)
    if beta <= 0:
        raise TreeError("beta must be > 0")
    val = np.empty(tree.n_nodes)
    first_stub = tree.level_offsets[tree.depth]
    val[first_stub:] = beta ** (-float(tree.depth))
    for lvl in range(tree.depth - 1, 0, -1):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        nxt = tree.level_offsets[lvl + 1]
        sums = np.add.reduceat(val[nxt:tree.level_offsets[lvl + 2]],
                               tree.child_start[s:e] - nxt)
        val[s:e] = np.minimum(beta ** (-float(lvl)), sums)
    lo, hi = tree.level_offsets[1], tree.level_offsets[2]
    return float(val[lo:hi].sum())


def _min_cut_sum_exact(tree: FlowTree, beta: Fraction):
    if beta <= 0:
        raise TreeError("beta must be > 0")
    val = [None] * tree.n_nodes
    for v in range(tree.n_nodes - 1, 0, -1):
        lvl = int(tree.depths[v])
        own = beta ** (-lvl)
        if lvl == tree.depth:
            val[v] = own
        else:
            s = int(tree.child_start[v])
            child_sum = sum(val[c] for c in range(s, s + int(tree.child_count[v])))
            val[v] = min(own, child_sum)
    s = int(tree.child_start[0])
    return sum(val[c] for c in range(s, s + int(tree.child_count[0])))


def level_cut_sums(tree: FlowTree, beta: float) -> np.ndarray:
    """sum_{u in level l} beta^{-l} for l = 1..depth (diagnostic table)."""
    sizes = np.diff(tree.level_offsets)[1:]
    ls = np.arange(1, tree.depth + 1, dtype=float)
    return sizes * np.power(float(beta), -ls)


@dataclass(frozen=True)
class BranchingEstimate:
    """Bisection bracket for the branching number."""

    lo: float
    hi: float
    conclusive: bool
    depth_schedule: tuple

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _log_min_cut_symmetric(child_counts: np.ndarray, beta: float) -> float:
    # min over levels of |L_l| * beta^-l, in log space
    logs = np.cumsum(np.log(child_counts.astype(float)))
    ls = np.arange(1, child_counts.size + 1)
    return float(np.min(logs - ls * math.log(beta)))


def branching_number(
    generator: TreeGenerator,
    tol: float = 0.01,
    max_depth: int = 25,
    depth_step: int = 5,
    bracket: Optional[tuple] = None,
) -> BranchingEstimate:
    """Bisection estimate of br(T) from cut-sum decay across deepening trees.

    beta counts as above br(T) when the minimal cut sum keeps strictly
    decaying along the depth schedule, below otherwise.  Only generators
    that deepen (b-ary, spherically symmetric) are supported.
    """
    if tol <= 0:
        raise TreeError("tol must be positive")
    if not isinstance(generator, (BAry, SphericallySymmetric)):
        raise TreeError("branching_number needs a deepening generator")
    schedule = tuple(range(depth_step, max_depth + 1, depth_step))
    if len(schedule) < 2:
        raise TreeError("depth schedule too short; raise max_depth")
    counts = generator.level_child_counts(max_depth)

    def above(beta: float) -> bool:
        sums = [_log_min_cut_symmetric(counts[:d], beta) for d in schedule]
        return all(b - a < -1e-9 for a, b in zip(sums, sums[1:]))

    if bracket is None:
        hi = float(counts.max()) + 1.0
        lo = 1.0
    else:
        lo, hi = float(bracket[0]), float(bracket[1])
    if not above(hi):
        return BranchingEstimate(lo, hi, conclusive=False, depth_schedule=schedule)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if above(mid):
            hi = mid
        else:
            lo = mid
    return BranchingEstimate(lo, hi, conclusive=True, depth_schedule=schedule)


# ---------------------------------------------------------------------------
# rays, local dimension, crossing antichains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RayPrefix:
    """Root-to-depth node path (finite prefix of a boundary ray)."""

    nodes: tuple
    tree: Optional[FlowTree] = None

    def __post_init__(self):
        nodes = tuple(int(v) for v in self.nodes)
        if not nodes or nodes[0] != 0:
            raise TreeError("ray prefixes start at the root (node 0)")
        if self.tree is not None:
            for a, b in zip(nodes, nodes[1:]):
                s = int(self.tree.child_start[a])
                if not s <= b < s + int(self.tree.child_count[a]):
                    raise TreeError("ray step is not a parent-child edge")
        object.__setattr__(self, "nodes", nodes)

    @property
    def depth(self) -> int:
        return len(self.nodes) - 1


def sample_ray(tree: FlowTree, rng: np.random.Generator) -> RayPrefix:
    """Descend from the root with probabilities Psi(child)/Psi(v)."""
    if tree.flow[0] <= 0.0:
        raise TreeError("no flow to sample")
    nodes = [0]
    v = 0
    for _ in range(tree.depth):
        s = int(tree.child_start[v])
        e = s + int(tree.child_count[v])
        w = tree.flow[s:e]
        total = w.sum()
        if total <= 0.0:
            raise TreeError("flow vanishes below a positive-flow node")
        cdf = np.cumsum(w / total)
        cdf[-1] = 1.0
        v = s + int(np.searchsorted(cdf, rng.random(), side="right"))
        nodes.append(v)
    return RayPrefix(tuple(nodes), tree=tree)


def local_dimension_estimate(tree: FlowTree, ray: RayPrefix) -> float:
    """Finite-depth liminf proxy: min of -log Psi(v_n)/n over the deep half.

    Zero flow anywhere on the deep half returns +inf.
    """
    if ray.depth < 10:
        raise TreeError("ray must reach depth >= 10 for a stable estimate")
    start = (ray.depth + 1) // 2
    vals = []
    for n in range(start, ray.depth + 1):
        psi = tree.flow[ray.nodes[n]]
        if psi <= 0.0:
            return math.inf
        vals.append(-math.log(psi) / n)
    return min(vals)


@dataclass(frozen=True)
class RaySplitReport:
    """Fractions of sampled rays with dimension above/below the H band."""

    fraction_plus: float
    fraction_minus: float
    fraction_undecided: float
    n_rays: int


def split_rays_by_dimension(
    tree: FlowTree,
    entropy: float,
    gamma: float,
    n_rays: int,
    rng: np.random.Generator,
) -> RaySplitReport:
    """Classify flow-sampled rays by local dimension against H +- gamma."""
    if gamma <= 0:
        raise TreeError("gamma must be a positive explicit band width")
    plus = minus = und = 0
    for _ in range(n_rays):
        est = local_dimension_estimate(tree, sample_ray(tree, rng))
        if est > entropy + gamma:
            plus += 1
        elif est < entropy - gamma:
            minus += 1
        else:
            und += 1
    return RaySplitReport(plus / n_rays, minus / n_rays, und / n_rays, n_rays)


@dataclass(frozen=True)
class CrossingAntichain:
    """k-th crossing vertices plus the rays that never crossed k times."""

    cut: Cut
    dropped_stubs: int
    dropped_mass: float


def first_crossing_antichain(
    tree: FlowTree,
    entropy: float,
    gamma: float,
    k: int,
) -> CrossingAntichain:
    """Vertices where rays cross -log Psi(v_n)/n < H - gamma for the k-th time.

    Crossings are enumerated over all boundary rays; rays with fewer than
    k crossings by depth D are dropped and counted.
    """
    if k < 1:
        raise TreeError("crossing index k must be >= 1")
    if gamma <= 0:
        raise TreeError("gamma must be a positive explicit band width")
    flag = np.zeros(tree.n_nodes, dtype=bool)
    with np.errstate(divide="ignore"):
        logpsi = np.where(tree.flow > 0, np.log(np.maximum(tree.flow, 1e-300)), -np.inf)
    depths = tree.depths.astype(float)
    nonroot = np.arange(1, tree.n_nodes)
    flag[nonroot] = (-logpsi[nonroot] / depths[nonroot]) < (entropy - gamma)
    count = np.zeros(tree.n_nodes, dtype=np.int32)
    for lvl in range(1, tree.depth + 1):
        s, e = tree.level_offsets[lvl], tree.level_offsets[lvl + 1]
        idx = np.arange(s, e)
        count[idx] = count[tree.parent[idx]] + flag[idx]
    members = np.flatnonzero(flag & (count == k))
    stub_counts = count[tree.level_offsets[tree.depth]:]
    dropped = stub_counts < k
    cut = Cut.validated(tree, members.tolist(), require_separating=False)
    return CrossingAntichain(
        cut=cut,
        dropped_stubs=int(dropped.sum()),
        dropped_mass=float(tree.flow[tree.stubs][dropped].sum()),
    )


# ---------------------------------------------------------------------------
# simple random walk on the (b+1)-regular tree
# ---------------------------------------------------------------------------

class RegularTreeWalker:
    """Vertex interning for walks on the infinite (b+1)-regular tree.

    The root has b+1 child slots and every other vertex has b; ids are
    shared across walks from the same walker so ranges can be compared.
    """

    def __init__(self, b: int):
        if b < 2:
            raise TreeError("regular tree walks need branching b >= 2")
        self.b = b
        self._parent = [-1]
        self._slot_table: dict = {}

    def _child(self, v: int, slot: int) -> int:
        key = (v, slot)
        c = self._slot_table.get(key)
        if c is None:
            c = len(self._parent)
            self._parent.append(v)
            self._slot_table[key] = c
        return c

    def walk(self, horizon: int, rng: np.random.Generator) -> "TreeWalkSample":
        draws = rng.integers(0, self.b + 1, size=horizon)
        v = 0
        ids = [0]
        parent = self._parent
        child = self._child
        b = self.b
        for r in draws:
            if v == 0:
                v = child(0, int(r))
            elif r == b:
                v = parent[v]
            else:
                v = child(v, int(r))
            ids.append(v)
        return TreeWalkSample(tuple(ids))


@dataclass(frozen=True)
class TreeWalkSample:
    """Vertex-id trace of a tree walk; ids come from one shared walker."""

    ids: tuple

    @property
    def visited(self) -> frozenset:
        return frozenset(self.ids)

    def __len__(self) -> int:
        return len(self.ids) - 1


def sample_tree_walk(b: int, horizon: int, rng: np.random.Generator,
                     walker: Optional[RegularTreeWalker] = None) -> TreeWalkSample:
    """Simple random walk trace on the (b+1)-regular tree from the root."""
    w = walker if walker is not None else RegularTreeWalker(b)
    return w.walk(horizon, rng)


def tree_walk_intersection(w1: TreeWalkSample, w2: TreeWalkSample) -> int:
    """Shared-range size of two walks from the same walker."""
    return len(w1.visited & w2.visited)
