"""Positive-definite kernels and Gaussian-process function draws.

Two kernel families are supported: Matern 5/2 with unit variance,

    k(a, b) = (1 + sqrt(5) r + 5/3 r^2) exp(-sqrt(5) r),   r = ||a - b|| / lengthscale

and a squared-exponential with variance 1/4,

    k(a, b) = 1/4 exp(-(2/9) r^2).

Both are the standard decaying forms: dropping the distance (or the sign)
from an exponent would destroy positive definiteness, so the conventional
forms are used with these prefactors and coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from pmar.numerics import (
    DimensionMismatch,
    NotPositiveDefinite,
    as_generator,
    cholesky,
)

MATERN52 = "matern52"
SQUARED_EXPONENTIAL = "se"
CUBIC = "cubic"

#: families whose Gram matrix is positive definite on distinct points and
#: can therefore back Gaussian-process draws
PD_FAMILIES = (MATERN52, SQUARED_EXPONENTIAL)

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus a lengthscale that rescales all distances.

    ``matern52`` and ``se`` are positive definite and usable everywhere.
    ``cubic`` is the polyharmonic spline kernel r^3: only conditionally
    positive definite (relative to affine functions), so it is valid for
    kernel ridge fits with an affine null space - where it makes the fit a
    weighted smoothing spline - but not for covariance matrices.
    """

    family: str = MATERN52
    lengthscale: float = 1.0

    def __post_init__(self):
        if self.family not in (MATERN52, SQUARED_EXPONENTIAL, CUBIC):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.lengthscale > 0:
            raise ValueError("lengthscale must be positive")


def _eval_on_r(family: str, r: np.ndarray) -> np.ndarray:
    if family == MATERN52:
        return (1.0 + _SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-_SQRT5 * r)
    if family == CUBIC:
        return r * r * r
    return 0.25 * np.exp(-(2.0 / 9.0) * r * r)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DimensionMismatch(f"points must be 1- or 2-dimensional, got shape {pts.shape}")
    return pts


def kernel_eval(k: KernelSpec, a, b) -> float:
    """Evaluate the kernel at a single pair of points."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise DimensionMismatch(f"point dimensions differ: {a.shape} vs {b.shape}")
    r = np.linalg.norm(a - b) / k.lengthscale
    return float(_eval_on_r(k.family, np.asarray(r)))


def gram_matrix(k: KernelSpec, points, points2=None) -> np.ndarray:
    """Kernel matrix between two point sets (square Gram if one set)."""
    a = _as_points(points)
    b = a if points2 is None else _as_points(points2)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"point dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[1] == 0:
        r = np.zeros((a.shape[0], b.shape[0]))
    else:
        r = cdist(a, b) / k.lengthscale
    return _eval_on_r(k.family, r)


def median_lengthscale(points, fallback: float = 1.0) -> float:
    """Median pairwise distance of the points (the bandwidth heuristic).

    Zero distances (duplicated points) are excluded; if every pair
    coincides, ``fallback`` is returned.
    """
    pts = _as_points(points)
    if pts.shape[0] < 2 or pts.shape[1] == 0:
        return fallback
    d = cdist(pts, pts)[np.triu_indices(pts.shape[0], k=1)]
    d = d[d > 0]
    if d.size == 0:
        return fallback
    return float(np.median(d))


def default_jitter(gram: np.ndarray) -> float:
    """Diagonal boost for factoring near-singular Gram matrices."""
    diag = np.diagonal(gram)
    mean = float(diag.mean()) if diag.size else 1.0
    return 1e-8 * max(mean, np.finfo(float).tiny)


def draw_gp(points, k: KernelSpec, rng, jitter: float | None = None) -> np.ndarray:
    """One function draw from a zero-mean GP, evaluated at ``points``.

    Returns L @ xi where L is the Cholesky factor of the jittered Gram
    matrix and xi are i.i.d. standard normals from ``rng``. Exactly n
    normal variates are consumed. With the default jitter, a failed
    factorization is retried twice at x100 the jitter before
    :class:`NotPositiveDefinite` propagates; an explicit ``jitter`` is
    used as-is.
    """
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    if k.family not in PD_FAMILIES:
        raise ValueError(f"kernel family {k.family!r} is not positive definite")
    gen = as_generator(rng)
    gram = gram_matrix(k, pts)
    xi = gen.standard_normal(pts.shape[0])
    if jitter is not None:
        return cholesky(gram, jitter=jitter) @ xi
    base = default_jitter(gram)
    for boost in (1.0, 1e2):
        try:
            return cholesky(gram, jitter=base * boost) @ xi
        except NotPositiveDefinite:
            continue
    return cholesky(gram, jitter=base * 1e4) @ xi
