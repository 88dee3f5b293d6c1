"""Shared test helpers: analytic oracles independent of the library paths."""

import numpy as np
import pytest

from prosep.phantom import TimeSequentialSinogram
from prosep.psmodel import (
    HarmonicOrder,
    face_split,
    harmonic_parity,
    real_trig_theta,
    spline_interpolator,
)
from prosep.radon import DetectorGrid, Frame, grid_coords, support_mask
from prosep.sampling import bit_reversed


def indicator_disk(width, pixel_size, radius, center=(0.0, 0.0)):
    """Pixel-center rasterization of a disk (matches the renderer's rule)."""
    X, Y = grid_coords(width, pixel_size)
    vals = (((X - center[0]) ** 2 + (Y - center[1]) ** 2) <= radius**2).astype(float)
    return Frame(values=vals, pixel_size=pixel_size)


def area_disk(width, pixel_size, radius, center=(0.0, 0.0), subsamples=16):
    """Area rasterization of a disk: per-pixel coverage fraction.

    Uses dense sub-pixel sampling as the quadrature for the exact
    pixel/disk overlap area; this is the reference an FBP image (which is
    band-limited, not binary) should be compared against.
    """
    X, Y = grid_coords(width, pixel_size)
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    acc = np.zeros((width, width))
    for dx in offs:
        for dy in offs:
            acc += ((X + dx * pixel_size - center[0]) ** 2 +
                    (Y + dy * pixel_size - center[1]) ** 2) <= radius**2
    vals = acc / subsamples**2 * support_mask(width, pixel_size)
    return Frame(values=vals, pixel_size=pixel_size)


def random_masked_frame(rng, width=48, pixel_size=None):
    if pixel_size is None:
        pixel_size = 2.0 / width
    return Frame(values=rng.standard_normal((width, width)), pixel_size=pixel_size)


def make_exact_model_data(P, K, N, d, J, seed=0, psi0=None):
    """Synthetic data that follows the projection model exactly.

    Draws a random orthonormal Z0 (or uses the provided temporal
    functions), draws coefficient columns with the mirror parity
    beta(-s) = diag((-1)^n) beta(s) that physical projections obey, and
    evaluates the face-splitting forward model.  J must be even so that
    detector bins pair up under s -> -s.

    Returns (data, U, Z0, beta0, order).
    """
    assert J % 2 == 0, "use an even bin count so mirrored bins pair up"
    rng = np.random.default_rng(seed)
    order = HarmonicOrder(N=N, K=K, d=d)
    scheme = bit_reversed(P, span=np.pi)
    U = spline_interpolator(P, d)
    if psi0 is None:
        Z0 = np.linalg.qr(rng.standard_normal((d, K + 1)))[0]
    else:
        Z0 = np.linalg.qr(U.T @ psi0)[0]
    T = real_trig_theta(scheme, N)
    M = face_split(T, U @ Z0)  # P x cols
    beta0 = rng.standard_normal((order.cols, J))
    parity = np.repeat(harmonic_parity(N), K + 1)
    for j in range(J // 2):
        beta0[:, J - 1 - j] = parity * beta0[:, j]
    values = (M @ beta0).T  # J x P
    det = DetectorGrid(count=J, spacing=2.0 / J)
    data = TimeSequentialSinogram(values=values, scheme=scheme, detector=det)
    return data, U, Z0, beta0, order


def max_principal_angle(A, B):
    """Largest principal angle (radians) between the column spans of A and B."""
    Qa, _ = np.linalg.qr(np.asarray(A, dtype=float))
    Qb, _ = np.linalg.qr(np.asarray(B, dtype=float))
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
