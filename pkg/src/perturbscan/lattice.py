"""Z^d geometry: walk samplers, range intersections, drift tubes, l1 shells.

Paths live on the integer lattice with 64-bit coordinates.  Heavy Monte
Carlo paths are sampled in fixed-size blocks so that a given seed always
produces the same path regardless of stop rule timing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ._stats import wilson_interval

MAX_DIM = 8
DEFAULT_STEP_BUDGET = 10**8
_BLOCK = 1 << 20


class LatticeError(ValueError):
    """Invalid lattice configuration or arguments."""


class DimensionMismatchError(LatticeError):
    """Operands live in different dimensions."""


class StepBudgetError(RuntimeError):
    """Walk failed to satisfy its stop rule within the step budget."""


def _check_dim(d: int) -> int:
    d = int(d)
    if not 1 <= d <= MAX_DIM:
        raise LatticeError(f"dimension {d} outside supported range 1..{MAX_DIM}")
    return d


# ---------------------------------------------------------------------------
# walk specifications and stop rules
# ---------------------------------------------------------------------------

def _unit_steps(d: int, oriented: bool) -> np.ndarray:
    if oriented:
        return np.eye(d, dtype=np.int64)
    steps = np.zeros((2 * d, d), dtype=np.int64)
    for i in range(d):
        steps[2 * i, i] = 1
        steps[2 * i + 1, i] = -1
    return steps


@dataclass(frozen=True)
class WalkSpec:
    """Nearest-neighbor walk law: increment distribution over unit steps.

    kind 'simple' is the uniform law on the 2d signed steps, 'biased' takes
    explicit probabilities over the 2d signed steps (zeros allowed off the
    support), and 'oriented' puts probabilities on the d positive basis
    steps only.
    """

    kind: str
    dimension: int
    probs: np.ndarray
    steps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = _check_dim(self.dimension)
        if self.kind not in ("simple", "biased", "oriented"):
            raise LatticeError(f"unknown walk kind {self.kind!r}")
        steps = _unit_steps(d, self.kind == "oriented")
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (steps.shape[0],):
            raise LatticeError(f"need {steps.shape[0]} step probabilities, got {p.shape}")
        if np.any(p < 0.0) or abs(float(p.sum()) - 1.0) > 1e-12:
            raise LatticeError("step probabilities must be nonnegative and sum to 1")
        if not np.any(p > 0.0):
            raise LatticeError("empty support")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        steps.setflags(write=False)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def simple(cls, d: int) -> "WalkSpec":
        return cls("simple", d, np.full(2 * d, 1.0 / (2 * d)))

    @classmethod
    def oriented(cls, d: int, probs: Optional[Sequence[float]] = None) -> "WalkSpec":
        if probs is None:
            probs = np.full(d, 1.0 / d)
        return cls("oriented", d, np.asarray(probs, dtype=np.float64))

    @classmethod
    def biased(cls, d: int, probs: Sequence[float]) -> "WalkSpec":
        return cls("biased", d, np.asarray(probs, dtype=np.float64))

    @property
    def mean(self) -> np.ndarray:
        """Mean increment vector."""
        return self.probs @ self.steps.astype(np.float64)

    def sample_increment_indices(self, rng: np.random.Generator, size) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(size), side="right")


@dataclass(frozen=True)
class Box:
    """Axis-aligned integer box with inclusive bounds."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise LatticeError("box bounds must be equal-length nonempty tuples")
        if any(l > h for l, h in zip(lo, hi)):
            raise LatticeError("box has empty extent")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def centered(cls, n: int, d: int, half_open: bool = True) -> "Box":
        """[-n, n)^d when half_open (the window convention), else [-n, n]^d."""
        hi = n - 1 if half_open else n
        return cls(tuple([-n] * d), tuple([hi] * d))

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


@dataclass(frozen=True)
class StopRule:
    """When a sampled walk terminates."""

    kind: str
    steps: Optional[int] = None
    radius: Optional[int] = None
    box: Optional[Box] = None

    @classmethod
    def fixed_steps(cls, t: int) -> "StopRule":
        if t < 0:
            raise LatticeError("fixed step count must be >= 0")
        return cls("fixed-steps", steps=int(t))

    @classmethod
    def sup_norm_exit(cls, k: int) -> "StopRule":
        if k < 1:
            raise LatticeError("sup-norm exit radius must be >= 1")
        return cls("sup-norm-exit", radius=int(k))

    @classmethod
    def window_exit(cls, box: Box) -> "StopRule":
        return cls("window-exit", box=box)


class PathSample:
    """Ordered vertex sequence of a walk from the origin, plus its range."""

    __slots__ = ("vertices", "_visited")

    def __init__(self, vertices: np.ndarray, validate: bool = True):
        v = np.asarray(vertices)
        if v.ndim != 2:
            raise LatticeError("vertices must be a (steps+1, d) array")
        _check_dim(v.shape[1])
        if validate:
            if np.any(v[0] != 0):
                raise LatticeError("paths start at the origin")
            if v.shape[0] > 1:
                inc = np.diff(v, axis=0)
                if np.any(np.abs(inc).sum(axis=1) != 1):
                    raise LatticeError("consecutive vertices must differ by one unit step")
        self.vertices = v
        self._visited = None

    @classmethod
    def from_increments(cls, increments: Iterable[Sequence[int]], d: Optional[int] = None) -> "PathSample":
        inc = np.asarray(list(increments), dtype=np.int64)
        if inc.size == 0:
            inc = inc.reshape(0, d if d else 1)
        verts = np.zeros((inc.shape[0] + 1, inc.shape[1]), dtype=np.int64)
        np.cumsum(inc, axis=0, out=verts[1:])
        return cls(verts)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        """Number of steps (vertices minus one)."""
        return self.vertices.shape[0] - 1

    @property
    def visited(self) -> frozenset:
        """The range [X] as a frozenset of coordinate tuples."""
        if self._visited is None:
            self._visited = frozenset(map(tuple, self.vertices.tolist()))
        return self._visited

    def range_size(self) -> int:
        return _row_unique(self.vertices).shape[0]

    def is_oriented(self) -> bool:
        if len(self) == 0:
            return True
        inc = np.diff(self.vertices, axis=0)
        return bool(np.all(inc >= 0) and np.all(inc.sum(axis=1) == 1))


def _row_unique(pts: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(pts)
    view = a.view([("", a.dtype)] * a.shape[1]).ravel()
    _, idx = np.unique(view, return_index=True)
    return a[np.sort(idx)]


def _rows_as_void(pts: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(pts)
    return a.view([("", a.dtype)] * a.shape[1]).ravel()


def sample_walk(
    spec: WalkSpec,
    stop: StopRule,
    rng: np.random.Generator,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> PathSample:
    """Sample a walk from the origin until the stop rule fires.

    Raises StepBudgetError if the rule has not fired within step_budget
    steps; long walks are never silently truncated.
    """
    d = spec.dimension
    if stop.kind == "fixed-steps":
        t = stop.steps
        if t > step_budget:
            raise StepBudgetError(f"fixed-steps {t} exceeds budget {step_budget}")
        verts = np.zeros((t + 1, d), dtype=np.int64)
        pos = 0
        while pos < t:
            b = min(_BLOCK, t - pos)
            idx = spec.sample_increment_indices(rng, b)
            np.cumsum(spec.steps[idx], axis=0, out=verts[pos + 1 : pos + b + 1])
            verts[pos + 1 : pos + b + 1] += verts[pos]
            pos += b
        return PathSample(verts, validate=False)

    chunks = [np.zeros((1, d), dtype=np.int64)]
    cur = np.zeros(d, dtype=np.int64)
    taken = 0
    block = 256  # grows geometrically; the fixed schedule keeps paths seed-stable
    while True:
        if taken >= step_budget:
            raise StepBudgetError(f"stop rule {stop.kind} not reached in {step_budget} steps")
        b = min(block, step_budget - taken)
        block = min(block * 4, _BLOCK)
        idx = spec.sample_increment_indices(rng, b)
        pos = np.cumsum(spec.steps[idx], axis=0)
        pos += cur
        if stop.kind == "sup-norm-exit":
            hit = np.abs(pos).max(axis=1) >= stop.radius
        elif stop.kind == "window-exit":
            hit = ~stop.box.contains_points(pos)
        else:
            raise LatticeError(f"unknown stop rule {stop.kind!r}")
        if hit.any():
            j = int(np.argmax(hit))
            chunks.append(pos[: j + 1])
            break
        chunks.append(pos)
        cur = pos[-1]
        taken += b
    return PathSample(np.concatenate(chunks, axis=0), validate=False)


# ---------------------------------------------------------------------------
# range intersections
# ---------------------------------------------------------------------------

def range_intersection(p1: PathSample, p2: PathSample) -> int:
    """|[X1] cap [X2]|: number of lattice points visited by both paths."""
    if p1.dimension != p2.dimension:
        raise DimensionMismatchError(
            f"paths in dimensions {p1.dimension} and {p2.dimension}"
        )
    a = np.unique(_rows_as_void(p1.vertices))
    b = np.unique(_rows_as_void(p2.vertices))
    return int(np.intersect1d(a, b, assume_unique=True).size)


def oriented_intersection_via_difference(p1: PathSample, p2: PathSample) -> int:
    """Range intersection of two oriented paths via returns of the difference walk.

    Oriented paths visit l1-shell k exactly at step k, so ranges can only
    meet at equal times: the count is 1 (shared origin) plus the number of
    k >= 1 with X1_k == X2_k.
    """
    if p1.dimension != p2.dimension:
        raise DimensionMismatchError("dimension mismatch")
    if len(p1) != len(p2):
        raise LatticeError("oriented reduction needs equal-length paths")
    if not (p1.is_oriented() and p2.is_oriented()):
        raise LatticeError("both paths must be oriented")
    diff = p1.vertices[1:] - p2.vertices[1:]
    return 1 + int(np.all(diff == 0, axis=1).sum())


def _pack_rows(pts: np.ndarray, bound: int) -> np.ndarray:
    """Pack small-coordinate rows into int64 keys (collision-free)."""
    d = pts.shape[-1]
    base = 2 * bound + 1
    if base ** d >= 2**62:
        raise LatticeError("coordinates too large to pack")
    code = np.zeros(pts.shape[:-1], dtype=np.int64)
    for i in range(d):
        code *= base
        code += pts[..., i] + bound
    return code


def _batch_range_intersections(pos1: np.ndarray, pos2: np.ndarray, bound: int) -> np.ndarray:
    """Row-wise |range cap range| for two (N, T+1, d) position batches."""
    a = _pack_rows(pos1, bound)
    b = _pack_rows(pos2, bound)
    a = np.sort(a, axis=1)
    b = np.sort(b, axis=1)
    t = a.shape[1]
    # replace duplicate entries by per-column negative sentinels so each
    # distinct visited point appears exactly once per row
    cols = np.arange(1, t)
    for arr, offset in ((a, 0), (b, t)):
        dup = arr[:, 1:] == arr[:, :-1]
        sent = -(cols + offset + 1)
        arr[:, 1:] = np.where(dup, np.broadcast_to(sent, dup.shape), arr[:, 1:])
    c = np.concatenate([a, b], axis=1)
    c.sort(axis=1)
    return (c[:, 1:] == c[:, :-1]).sum(axis=1)


def _oriented_zero_returns(idx1: np.ndarray, idx2: np.ndarray, d: int) -> np.ndarray:
    """1 + equal-time coincidences for oriented increment index batches."""
    t = idx1.shape[1]
    dtype = np.int16 if t < 32000 else np.int32
    zero = np.ones(idx1.shape, dtype=bool)
    for dim in range(d - 1):
        diff = np.cumsum(
            (idx1 == dim).astype(dtype) - (idx2 == dim).astype(dtype),
            axis=1, dtype=dtype,
        )
        zero &= diff == 0
    return 1 + zero.sum(axis=1)


@dataclass(frozen=True)
class TailFit:
    """Least-squares fit of log tail probability against n."""

    available: bool
    c_hat: float
    r_squared: float
    n_points: int
    n_lo: int
    n_hi: int
    reason: str = ""


@dataclass(frozen=True)
class IntersectionTailEstimate:
    """Empirical tail of |[X1] cap [X2]| with fitted decay exponent."""

    ns: np.ndarray
    tail: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    samples: int
    horizon: int
    fit: TailFit
    half_horizon_fit: TailFit


def fit_tail(tail: np.ndarray, samples: int) -> TailFit:
    """Fit log(tail) ~ -C*n over the window where tail >= 10/samples."""
    ns = np.flatnonzero((tail >= 10.0 / samples) & (tail > 0.0))
    if ns.size < 3:
        return TailFit(False, float("nan"), float("nan"), int(ns.size), 0, 0,
                       reason="fewer than 3 usable tail points")
    y = np.log(tail[ns])
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= 0.0:
        return TailFit(False, float("nan"), float("nan"), int(ns.size),
                       int(ns[0]), int(ns[-1]), reason="degenerate flat tail")
    slope, intercept = np.polyfit(ns.astype(float), y, 1)
    resid = y - (slope * ns + intercept)
    r2 = 1.0 - float((resid**2).sum()) / ss_tot
    return TailFit(True, float(-slope), r2, int(ns.size), int(ns[0]), int(ns[-1]))


def _tail_table(counts: np.ndarray, samples: int) -> tuple[np.ndarray, ...]:
    nmax = int(counts.max())
    ns = np.arange(nmax + 1)
    exceed = np.array([(counts > n).sum() for n in ns], dtype=np.int64)
    tail = exceed / samples
    ci = np.array([wilson_interval(int(k), samples) for k in exceed])
    return ns, tail, ci[:, 0], ci[:, 1]


def estimate_intersection_tail(
    spec: WalkSpec,
    horizon: int,
    samples: int,
    rng: np.random.Generator,
) -> IntersectionTailEstimate:
    """Monte Carlo tail of the shared-range size of two independent walks.

    Finite-horizon proxy for the infinite-path tail; the half-horizon fit
    is reported alongside as a truncation sensitivity check.
    """
    if samples < 100:
        raise LatticeError("need at least 100 sample pairs")
    if horizon < 1:
        raise LatticeError("horizon must be >= 1")
    d = spec.dimension
    counts = np.zeros(samples, dtype=np.int64)
    counts_half = np.zeros(samples, dtype=np.int64)
    half = horizon // 2
    chunk = max(1, min(samples, int(4_000_000 // max(horizon, 1)) or 1))
    oriented = spec.kind == "oriented"
    pos = 0
    while pos < samples:
        b = min(chunk, samples - pos)
        i1 = spec.sample_increment_indices(rng, (b, horizon))
        i2 = spec.sample_increment_indices(rng, (b, horizon))
        if oriented:
            counts[pos : pos + b] = _oriented_zero_returns(i1, i2, d)
            counts_half[pos : pos + b] = _oriented_zero_returns(i1[:, :half], i2[:, :half], d)
        else:
            p1 = np.zeros((b, horizon + 1, d), dtype=np.int64)
            p2 = np.zeros((b, horizon + 1, d), dtype=np.int64)
            np.cumsum(spec.steps[i1], axis=1, out=p1[:, 1:])
            np.cumsum(spec.steps[i2], axis=1, out=p2[:, 1:])
            counts[pos : pos + b] = _batch_range_intersections(p1, p2, horizon)
            counts_half[pos : pos + b] = _batch_range_intersections(
                p1[:, : half + 1], p2[:, : half + 1], horizon
            )
        pos += b
    ns, tail, lo, hi = _tail_table(counts, samples)
    _, tail_half, _, _ = _tail_table(counts_half, samples)
    return IntersectionTailEstimate(
        ns=ns, tail=tail, ci_lo=lo, ci_hi=hi,
        samples=samples, horizon=horizon,
        fit=fit_tail(tail, samples),
        half_horizon_fit=fit_tail(tail_half, samples),
    )


# ---------------------------------------------------------------------------
# drift tubes and l1 shells
# ---------------------------------------------------------------------------

def _as_fraction_vector(mean) -> tuple[Fraction, ...]:
    out = []
    for v in mean:
        if isinstance(v, float):
            raise LatticeError("drift vector must be exact (int or Fraction), not float")
        out.append(Fraction(v))
    return tuple(out)


@dataclass(frozen=True)
class DriftTube:
    """Far half-box points within l1 distance sqrt(n) of the drift ray k*m."""

    n: int
    mean: tuple

    def __post_init__(self):
        m = _as_fraction_vector(self.mean)
        if all(v == 0 for v in m):
            raise LatticeError("drift tube undefined for zero-mean walks")
        if m[0] <= 0:
            raise LatticeError("normalize so the drift has positive first coordinate")
        if any(abs(v) > m[0] for v in m[1:]):
            raise LatticeError("normalize so the first coordinate dominates the drift")
        if self.n < 1:
            raise LatticeError("tube scale n must be >= 1")
        object.__setattr__(self, "mean", m)

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def _scaled(self) -> tuple[int, tuple]:
        q = 1
        for v in self.mean:
            q = q * v.denominator // math.gcd(q, v.denominator)
        p = tuple(int(v * q) for v in self.mean)
        return q, p

    def _k_range(self, x1: int) -> range:
        q, p = self._scaled()
        r = math.isqrt(self.n) + 1
        lo = max(0, (q * (x1 - r)) // p[0] - 1)
        hi = (q * (x1 + r)) // p[0] + 2
        return range(lo, hi)

    def _in_box(self, x) -> bool:
        n = self.n
        if not (2 * x[0] > n and x[0] <= n):
            return False
        return all(-n <= c <= n for c in x[1:])

    def __contains__(self, x) -> bool:
        x = tuple(int(c) for c in x)
        if len(x) != self.dimension:
            raise DimensionMismatchError("point dimension mismatch")
        if not self._in_box(x):
            return False
        q, p = self._scaled()
        qq_n = q * q * self.n
        for k in self._k_range(x[0]):
            dist = sum(abs(q * c - k * pi) for c, pi in zip(x, p))
            if dist * dist < qq_n:
                return True
        return False

    def points(self) -> np.ndarray:
        """All member points (cached per (n, mean)), lexicographically sorted."""
        return _drift_tube_points(self.n, self.mean)

    def _enumerate_points(self) -> np.ndarray:
        """Exact integer arithmetic throughout: x is a member iff the scaled
        l1 distance D = sum |q x_i - k p_i| satisfies D^2 < q^2 n for
        some k, with q the common denominator of the drift."""
        q, p = self._scaled()
        d = self.dimension
        n = self.n
        r = math.isqrt(n) + 1
        qq_n = q * q * n
        kmax = (q * (n + r)) // p[0] + 2
        # integer offsets covering the l1 ball of radius r around any center
        grids = np.meshgrid(*([np.arange(-r - 1, r + 2, dtype=np.int64)] * d),
                            indexing="ij")
        offsets = np.stack([g.ravel() for g in grids], axis=1)
        offsets = offsets[np.abs(offsets).sum(axis=1) <= r + 1]
        chunks = []
        for k in range(kmax + 1):
            center = np.array([k * pi for pi in p], dtype=np.int64)  # scaled by q
            if center[0] < q * (n // 2 - r) or center[0] > q * (n + r):
                continue
            base = center // q
            cand = base[None, :] + offsets
            dist = np.abs(q * cand - center[None, :]).sum(axis=1)
            chunks.append(cand[dist * dist < qq_n])
        if not chunks:
            return np.empty((0, d), dtype=np.int64)
        pts = _row_unique(np.concatenate(chunks, axis=0))
        in_box = (2 * pts[:, 0] > n) & (pts[:, 0] <= n)
        for i in range(1, d):
            in_box &= (pts[:, i] >= -n) & (pts[:, i] <= n)
        pts = pts[in_box]
        order = np.lexsort(pts.T[::-1])
        return pts[order]

    @property
    def size(self) -> int:
        return self.points().shape[0]


@lru_cache(maxsize=64)
def _drift_tube_points(n: int, mean: tuple) -> np.ndarray:
    pts = DriftTube(n, mean)._enumerate_points()
    pts.setflags(write=False)
    return pts


def drift_tube(n: int, mean) -> DriftTube:
    """Membership predicate for the drift tube D(n) of a mean-m walk."""
    return DriftTube(int(n), tuple(mean))


def l1_shell(k: int) -> np.ndarray:
    """The 4k points of the plane with l1 norm k (counterclockwise order).

    k == 0 returns the single origin point.
    """
    k = int(k)
    if k < 0:
        raise LatticeError("shell index must be >= 0")
    if k == 0:
        return np.zeros((1, 2), dtype=np.int64)
    i = np.arange(k)
    quads = [
        np.stack([k - i, i], axis=1),
        np.stack([-i, k - i], axis=1),
        np.stack([-(k - i), -i], axis=1),
        np.stack([i, -(k - i)], axis=1),
    ]
    return np.concatenate(quads, axis=0).astype(np.int64)


def l1_shell_nd(k: int, d: int) -> np.ndarray:
    """All points of Z^d with l1 norm k, in lexicographic order."""
    _check_dim(d)
    if k == 0:
        return np.zeros((1, d), dtype=np.int64)

    def build(dim: int, budget: int):
        if dim == 1:
            return [(budget,), (-budget,)] if budget else [(0,)]
        pts = []
        for v in range(-budget, budget + 1):
            for rest in build(dim - 1, budget - abs(v)):
                pts.append((v,) + rest)
        return pts

    pts = [p for p in build(d, k)]
    return np.array(sorted(pts), dtype=np.int64)
