"""View-angle sampling schemes for time-sequential acquisition.

Three schemes are supported: a progressive sweep, uniform random draws,
and the bit-reversed permutation of the progressive sweep.  The angular
span is ``pi`` when the half-turn symmetry of parallel-beam projections
is exploited downstream, and ``2*pi`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AngularScheme",
    "progressive",
    "random_scheme",
    "bit_reversed",
    "bit_reversal_permutation",
    "span_for",
]


@dataclass(frozen=True)
class AngularScheme:
    """An ordered sequence of view angles theta_p in [0, span)."""

    angles: np.ndarray
    span: float
    kind: str
    seed: int | None = field(default=None)

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        object.__setattr__(self, "angles", angles)
        if angles.ndim != 1 or angles.size == 0:
            raise ValueError("angles must be a non-empty 1-D array")
        if self.span <= 0:
            raise ValueError("span must be positive")
        if np.any(angles < 0) or np.any(angles >= self.span):
            raise ValueError("angles must lie in [0, span)")
        if len(np.unique(angles)) != angles.size:
            raise ValueError("angles must be distinct")

    @property
    def P(self) -> int:
        return self.angles.size


def span_for(symmetric: bool) -> float:
    """Angular span to use: [0, pi) with half-turn symmetry, else [0, 2*pi)."""
    return np.pi if symmetric else 2.0 * np.pi


def progressive(P: int, span: float = 2.0 * np.pi) -> AngularScheme:
    """Progressive sweep theta_p = p * span / P."""
    if P < 1:
        raise ValueError("P must be >= 1")
    angles = np.arange(P) * (span / P)
    return AngularScheme(angles=angles, span=span, kind="progressive")


def random_scheme(P: int, span: float = 2.0 * np.pi, seed: int = 0) -> AngularScheme:
    """Angles drawn iid uniform over [0, span), deterministic given seed.

    Exact duplicates (possible in floating point, probability ~0) are
    re-drawn so that all angles are distinct.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, span, size=P)
    while len(np.unique(angles)) != P:
        uniq, counts = np.unique(angles, return_counts=True)
        for val in uniq[counts > 1]:
            idx = np.flatnonzero(angles == val)[1:]
            angles[idx] = rng.uniform(0.0, span, size=idx.size)
    return AngularScheme(angles=angles, span=span, kind="random", seed=seed)


def bit_reversal_permutation(P: int) -> np.ndarray:
    """Permutation p -> reverse of the log2(P)-bit binary representation of p."""
    if P < 1 or (P & (P - 1)) != 0:
        raise ValueError(f"P must be a power of two, got {P}")
    m = P.bit_length() - 1
    idx = np.arange(P)
    rev = np.zeros(P, dtype=np.int64)
    for b in range(m):
        rev |= ((idx >> b) & 1) << (m - 1 - b)
    return rev


def bit_reversed(P: int, span: float = 2.0 * np.pi) -> AngularScheme:
    """Bit-reversed ordering of the progressive sweep; P must be a power of two."""
    rev = bit_reversal_permutation(P)
    angles = rev * (span / P)
    return AngularScheme(angles=angles, span=span, kind="bit_reversed")
