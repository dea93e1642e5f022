"""Finite-alphabet measure pairs and the scalar functionals driving detection.

Alphabet labels are integers 0..m-1.  A MeasurePair holds two strictly
positive distributions (mu, nu) on the same alphabet; everything downstream
(likelihood ratios, entropy thresholds, chi-square weights) derives from it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-12


class MeasureError(ValueError):
    """Invalid probability vector or measure pair."""


class DegeneratePairError(MeasureError):
    """Operation requires mu != nu."""


def _as_prob_vector(p, name: str) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise MeasureError(f"{name} must be a 1-d vector with at least 2 entries")
    if not np.all(v > 0.0):
        raise MeasureError(f"{name} must be strictly positive everywhere")
    s = float(v.sum())
    if abs(s - 1.0) > PROB_TOL:
        # Renormalizing silently would hide config bugs; refuse instead.
        raise MeasureError(f"{name} sums to {s!r}, not 1 within {PROB_TOL}")
    v = v.copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class Alphabet:
    """Finite sample space of m >= 2 integer labels."""

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise MeasureError("alphabet needs at least 2 labels")

    def __contains__(self, label) -> bool:
        return 0 <= int(label) < self.size


@dataclass(frozen=True)
class MeasurePair:
    """Strictly positive distributions (mu, nu) on a shared finite alphabet."""

    mu: np.ndarray
    nu: np.ndarray
    _ratios: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = _as_prob_vector(self.mu, "mu")
        nu = _as_prob_vector(self.nu, "nu")
        if mu.shape != nu.shape:
            raise MeasureError("mu and nu must live on the same alphabet")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        r = nu / mu
        r.setflags(write=False)
        object.__setattr__(self, "_ratios", r)

    @property
    def m(self) -> int:
        return self.mu.size

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.m)

    @property
    def ratios(self) -> np.ndarray:
        """Per-label likelihood ratio vector nu/mu."""
        return self._ratios

    def is_degenerate(self) -> bool:
        """True when mu == nu (perturbation invisible)."""
        return bool(np.array_equal(self.mu, self.nu))

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "nu": self.nu.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurePair":
        return cls(mu=d["mu"], nu=d["nu"])


def relative_entropy(pair: MeasurePair) -> float:
    """Entropy of nu relative to mu: sum nu * log(nu/mu), in nats.

    Nonnegative; zero iff mu == nu; bounded above by log(1/min mu).
    """
    return float(np.sum(pair.nu * np.log(pair.ratios)))


def chi_square_zeta(pair: MeasurePair) -> float:
    """Second moment of the per-site likelihood ratio under mu: sum nu^2/mu.

    Always >= 1, with equality iff mu == nu.
    """
    return float(np.sum(pair.nu * pair.nu / pair.mu))


def likelihood_ratio(pair: MeasurePair, label: int) -> float:
    """Per-label ratio nu(label)/mu(label)."""
    label = int(label)
    if not 0 <= label < pair.m:
        raise MeasureError(f"label {label} outside alphabet of size {pair.m}")
    return float(pair.ratios[label])


def centered_statistic_fn(pair: MeasurePair) -> np.ndarray:
    """Canonical per-label statistic f with E_mu f = 0 and E_nu f = 1.

    f(label) = (r(label) - 1) / (zeta - 1).  Requires mu != nu, otherwise
    the normalizer zeta - 1 vanishes.
    """
    if pair.is_degenerate():
        raise DegeneratePairError("mu == nu gives zeta == 1; no centered statistic")
    z = chi_square_zeta(pair)
    f = (pair.ratios - 1.0) / (z - 1.0)
    f.setflags(write=False)
    return f


def sample_label(measure, rng: np.random.Generator, size=None):
    """Draw labels from a probability vector using the supplied generator.

    Unlike MeasurePair members, plain sampling vectors may put zero mass
    on some labels (point masses included).
    """
    v = np.asarray(measure, dtype=np.float64)
    if v.ndim != 1 or v.size < 1 or np.any(v < 0.0):
        raise MeasureError("sampling vector must be 1-d and nonnegative")
    if abs(float(v.sum()) - 1.0) > PROB_TOL:
        raise MeasureError("sampling vector must sum to 1; renormalization refused")
    cdf = np.cumsum(v)
    cdf[-1] = 1.0
    if size is None:
        return int(np.searchsorted(cdf, rng.random(), side="right"))
    u = rng.random(size)
    return np.searchsorted(cdf, u, side="right").astype(np.uint8)
