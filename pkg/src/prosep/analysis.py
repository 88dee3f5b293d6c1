"""Numerical stability analysis: condition numbers, rank checks, and bounds.

Reproduces the view-angle sampling study (condition numbers of the two
linearized subproblems for progressive, random, and bit-reversed
schemes), validates the full-rank and conditioning guarantees on random
instances, and evaluates the truncation bounds for translational and
rotational motion of a bandlimited object.

Condition numbers here are computed on the complex-exponential form of
the harmonic matrices; the real trigonometric form used by the solver is
unitarily equivalent and shares the spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .psmodel import HarmonicOrder, build_theta, face_split, legendre_basis
from .radon import DetectorGrid, Frame, radon_energy_check
from .sampling import AngularScheme, bit_reversed, progressive, random_scheme

__all__ = [
    "ConditionReport",
    "MotionBoundSpec",
    "CondL2Result",
    "Theorem1Result",
    "KAPPA_SINGULAR",
    "cond_L1",
    "cond_L2",
    "rank_check_L1",
    "theorem3_sweep",
    "theorem1_check",
    "translation_bound",
    "rotation_bound",
    "table1",
]

# kappa beyond double precision is reported as the +inf sentinel
KAPPA_SINGULAR = 1e15


@dataclass(frozen=True)
class ConditionReport:
    """One row of the conditioning study."""

    scheme_kind: str
    symmetric: bool
    K: int
    N: int
    P: int
    d: int | None = None
    kappa_L1: float | None = None
    kappa_L2: float | None = None
    kappa_Gamma: float | None = None
    bound_sqrt_kappa_Gamma: float | None = None
    full_rank: bool | None = None


def _kappa_from_singvals(s: np.ndarray, n_cols: int) -> float:
    """Condition number with full-column-rank accounting and inf sentinel."""
    if s.size < n_cols or s[-1] < 1e-300:
        return np.inf
    kappa = float(s[0] / s[-1])
    return np.inf if kappa > KAPPA_SINGULAR else kappa


def _scheme_psi(P: int, K: int, psi_source: str, seed: int | None) -> np.ndarray:
    if psi_source == "legendre":
        return legendre_basis(P, K)
    if psi_source == "random_stiefel":
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.standard_normal((P, K + 1)))
        return Q
    raise ValueError(f"unknown psi_source {psi_source!r}")


def _l1_complex(scheme: AngularScheme, N: int, Psi: np.ndarray, symmetric: bool) -> np.ndarray:
    H = build_theta(scheme, N)
    if symmetric:
        return face_split(H.theta_hat, np.vstack([Psi, Psi]).astype(complex))
    return face_split(H.theta, Psi.astype(complex))


def cond_L1(
    scheme: AngularScheme,
    K: int,
    N: int,
    psi_source: str = "legendre",
    symmetric: bool = False,
    seed: int | None = None,
) -> float:
    """Condition number of Theta_hat * Psi_hat (or Theta * Psi without symmetry).

    Returns the +inf sentinel when the smallest singular value underflows
    or kappa exceeds 1e15, i.e. when the model is numerically singular.
    """
    Psi = _scheme_psi(scheme.P, K, psi_source, seed)
    L1 = _l1_complex(scheme, N, Psi, symmetric)
    s = np.linalg.svd(L1, compute_uv=False)
    return _kappa_from_singvals(s, L1.shape[1])


class CondL2Result(NamedTuple):
    kappa_L2: float
    kappa_Gamma: float


def _build_L2_fast(theta_hat: np.ndarray, u_hat: np.ndarray, beta_cols: np.ndarray,
                   order: HarmonicOrder) -> np.ndarray:
    B3 = beta_cols.reshape(order.n_harmonics, order.n_temporal, beta_cols.shape[1])
    C = np.einsum("in,nkj->ijk", theta_hat, B3)
    L2 = C[:, :, :, None] * u_hat[:, None, None, :]
    return L2.reshape(theta_hat.shape[0] * beta_cols.shape[1],
                      order.n_temporal * u_hat.shape[1])


def cond_L2(
    K: int,
    N: int,
    P: int,
    d: int,
    J: int,
    seed: int = 0,
    scheme: AngularScheme | None = None,
    orthonormal_u: bool = False,
) -> CondL2Result:
    """Condition numbers of L2(beta) and of Gamma = sum_j beta(s_j) beta(s_j)^T.

    Both the 2P x d interpolator entries and the coefficient vectors
    beta(s_j) are drawn iid standard normal, seeded.  With
    ``orthonormal_u`` the interpolator is orthonormalized first, which is
    the premise of the kappa(L2) <= sqrt(kappa(Gamma)) guarantee; the raw
    Gaussian draw matches the conditioning study setup.  kappa(Gamma) is
    the +inf sentinel when Gamma is singular (needs J >= (2N+1)(K+1));
    kappa(L2) is still computed and reported.
    """
    order = HarmonicOrder(N=N, K=K, d=d)
    if scheme is None:
        scheme = bit_reversed(P, span=np.pi)
    H = build_theta(scheme, N)
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((2 * P, d))
    if orthonormal_u:
        U, _ = np.linalg.qr(U)
    beta_cols = rng.standard_normal((order.cols, J))
    L2 = _build_L2_fast(H.theta_hat, U, beta_cols, order)
    s = np.linalg.svd(L2, compute_uv=False)
    kappa_L2 = _kappa_from_singvals(s, L2.shape[1])
    ev = np.linalg.eigvalsh(beta_cols @ beta_cols.T)
    kappa_Gamma = np.inf if ev[0] <= ev[-1] * 1e-12 or ev[0] <= 0 else float(ev[-1] / ev[0])
    return CondL2Result(kappa_L2=kappa_L2, kappa_Gamma=kappa_Gamma)


def rank_check_L1(P: int, K: int, N: int, trials: int = 100, seed: int = 0) -> int:
    """Count full-column-rank draws of L1 with random Psi and random angles.

    Each trial draws P distinct angles uniform in [0, pi) and Psi
    uniformly from the Stiefel manifold (orthonormal factor of a Gaussian
    matrix); L1 is the half-turn augmented product.  Full column rank
    requires rows >= columns; otherwise sigma_min of the column space is
    zero by dimension count and the trial fails.
    """
    order = HarmonicOrder(N=N, K=K, d=K + 1)
    if not order.solvable(P):
        import warnings

        warnings.warn(
            f"2P = {2 * P} < (2N+1)(K+1) = {order.cols}: full column rank "
            "is impossible by dimension count",
            stacklevel=2,
        )
    passes = 0
    seeds = np.random.SeedSequence(seed).spawn(trials)
    for t in range(trials):
        rng = np.random.default_rng(seeds[t])
        scheme = random_scheme(P, span=np.pi, seed=rng.integers(2**63))
        Psi, _ = np.linalg.qr(rng.standard_normal((P, K + 1)))
        L1 = _l1_complex(scheme, N, Psi, symmetric=True)
        if L1.shape[0] < L1.shape[1]:
            continue
        s = np.linalg.svd(L1, compute_uv=False)
        if s[-1] / s[0] > 1e-12:
            passes += 1
    return passes


def theorem3_sweep(
    trials: int = 100,
    K: int = 1,
    N: int = 2,
    P: int = 16,
    d: int = 3,
    J: int | None = None,
    seed: int = 0,
    slack: float = 1e-9,
):
    """Check kappa(L2) <= sqrt(kappa(Gamma)) on random instances with Gamma > 0.

    J defaults to twice the coefficient count so Gamma is positive
    definite; the interpolator is orthonormalized, matching the
    guarantee's premise.  Returns (passes, worst_ratio).
    """
    order = HarmonicOrder(N=N, K=K, d=d)
    if J is None:
        J = 2 * order.cols
    if J < order.cols:
        raise ValueError("need J >= (2N+1)(K+1) for Gamma > 0")
    passes = 0
    worst = 0.0
    for t in range(trials):
        res = cond_L2(K=K, N=N, P=P, d=d, J=J, seed=seed + t,
                      scheme=random_scheme(P, span=np.pi, seed=seed + t),
                      orthonormal_u=True)
        if not np.isfinite(res.kappa_Gamma):
            continue
        ratio = res.kappa_L2 / math.sqrt(res.kappa_Gamma)
        worst = max(worst, ratio)
        if ratio <= 1.0 + slack:
            passes += 1
    return passes, worst


class Theorem1Result(NamedTuple):
    lhs: float
    rhs: float
    per_angle_ratio: np.ndarray


def theorem1_check(frame: Frame, angles, detector: DetectorGrid | None = None) -> Theorem1Result:
    """Projection-energy bound for a residual frame, integrated over angles.

    lhs integrates the per-angle projection energy over a full turn
    (weight 2*pi / len(angles)); rhs = 2*pi*L*||f||^2 is the stated
    projection-domain bound.  ``per_angle_ratio`` holds each angle's
    energy against its own bound 2*L*||f||^2, which is the inequality the
    proof actually uses and the one asserted by the tests; see the module
    tests for the constant ambiguity in the integrated form.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if detector is None:
        detector = DetectorGrid.for_frame(frame)
    per_angle = np.empty(angles.size)
    rhs_single = 2.0 * frame.support_radius * frame.norm2_sq()
    for a, th in enumerate(angles):
        lhs_a, _ = radon_energy_check(frame, th, detector)
        per_angle[a] = lhs_a
    dtheta = 2.0 * np.pi / angles.size
    lhs = float(per_angle.sum() * dtheta)
    rhs = float(np.pi * 2.0 * frame.support_radius * frame.norm2_sq())
    ratio = per_angle / rhs_single if rhs_single > 0 else np.zeros_like(per_angle)
    return Theorem1Result(lhs=lhs, rhs=rhs, per_angle_ratio=ratio)


@dataclass(frozen=True)
class MotionBoundSpec:
    """Inputs of the truncation bounds for affine motion of a bandlimited object."""

    B: float = 0.0
    c_max: float = 0.0
    L: float = 0.0
    theta_max: float = 0.0
    K: int = 0

    def __post_init__(self):
        if min(self.B, self.c_max, self.L, self.theta_max) < 0 or self.K < 0:
            raise ValueError("all bound parameters must be nonnegative")


def _taylor_remainder(x: float, K: int) -> float:
    """|x|^{K+1} / (K+1)!, evaluated stably through lgamma."""
    x = abs(x)
    if x == 0.0:
        return 0.0
    return math.exp((K + 1) * math.log(x) - math.lgamma(K + 2))


def translation_bound(spec: MotionBoundSpec) -> float:
    """Temporal truncation bound |B c_max|^{K+1} / (K+1)! for translation."""
    return _taylor_remainder(spec.B * spec.c_max, spec.K)


def rotation_bound(spec: MotionBoundSpec) -> float:
    """Truncation bound |B L theta_max|^{K+1} / (K+1)! for rotation.

    B * L is the angular bandlimit of the object in its polar
    representation.
    """
    return _taylor_remainder(spec.B * spec.L * spec.theta_max, spec.K)


def table1(
    P: int = 512,
    K: int = 5,
    N: int = 28,
    random_trials: int = 1000,
    seed: int = 0,
    d: int = 8,
    J: int = 128,
):
    """The conditioning study: kappa(L1) per scheme and symmetry, plus kappa(L2).

    Deterministic schemes are evaluated once; the random-scheme entries
    take the best (smallest) kappa over ``random_trials`` seeded draws.
    Returns seven ConditionReport rows: six kappa(L1) entries and one
    kappa(L2) entry.
    """
    rows = []
    for symmetric in (False, True):
        span = np.pi if symmetric else 2.0 * np.pi
        for kind in ("progressive", "random", "bit_reversed"):
            if kind == "progressive":
                kappa = cond_L1(progressive(P, span), K, N, symmetric=symmetric)
            elif kind == "bit_reversed":
                kappa = cond_L1(bit_reversed(P, span), K, N, symmetric=symmetric)
            else:
                seeds = np.random.SeedSequence(seed).spawn(random_trials)
                kappa = np.inf
                for t in range(random_trials):
                    sub_seed = int(np.random.default_rng(seeds[t]).integers(2**63))
                    sch = random_scheme(P, span, seed=sub_seed)
                    kappa = min(kappa, cond_L1(sch, K, N, symmetric=symmetric))
            rows.append(
                ConditionReport(
                    scheme_kind=kind,
                    symmetric=symmetric,
                    K=K,
                    N=N,
                    P=P,
                    kappa_L1=kappa,
                    full_rank=bool(np.isfinite(kappa)),
                )
            )
    res = cond_L2(K=K, N=N, P=P, d=d, J=J, seed=seed)
    rows.append(
        ConditionReport(
            scheme_kind="bit_reversed",
            symmetric=True,
            K=K,
            N=N,
            P=P,
            d=d,
            kappa_L2=res.kappa_L2,
            kappa_Gamma=res.kappa_Gamma,
            bound_sqrt_kappa_Gamma=float(np.sqrt(res.kappa_Gamma))
            if np.isfinite(res.kappa_Gamma)
            else np.inf,
            full_rank=bool(np.isfinite(res.kappa_L2)),
        )
    )
    return rows
