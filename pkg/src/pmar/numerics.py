"""Dense linear algebra, vector statistics, link functions, and seeded RNG streams.

Everything downstream (graph simulation, kernel regression, experiment
harness) builds on the handful of primitives in this module. All randomness
flows through :class:`RngStream` descriptors; there is no global RNG state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class NumericsError(Exception):
    """Base class for numerical-contract violations."""


class DimensionMismatch(NumericsError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(NumericsError):
    """A matrix required to be positive definite is not (after jitter)."""


class DegenerateVector(NumericsError):
    """A vector with zero sample variance (or fewer than two entries)."""


_SYMMETRY_TOL = 1e-9


def _as_square_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def cholesky(a, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L @ L.T = a + jitter * I.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Symmetric matrix.
    jitter : float
        Nonnegative diagonal boost, used to factor rank-deficient Gram
        matrices (duplicated inputs).

    Raises
    ------
    DimensionMismatch
        If ``a`` is not square.
    NotPositiveDefinite
        If ``a + jitter * I`` has a nonpositive leading minor.
    """
    a = _as_square_matrix(a)
    scale = np.max(np.abs(a)) if a.size else 1.0
    if scale > 0 and np.max(np.abs(a - a.T)) > _SYMMETRY_TOL * max(1.0, scale):
        raise ValueError("matrix is not symmetric to tolerance 1e-9")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    if jitter > 0:
        a = a + jitter * np.eye(a.shape[0])
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def solve_spd(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric positive-definite ``a`` via Cholesky."""
    a = _as_square_matrix(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"right-hand side length {b.shape[0]} does not match matrix order {a.shape[0]}"
        )
    lower = cholesky(a)
    y = np.linalg.solve(lower, b)
    return np.linalg.solve(lower.T, y)


def standardize(v) -> np.ndarray:
    """Affinely map ``v`` to mean 0 and sample standard deviation 1.

    The sample standard deviation uses denominator n - 1.

    Raises
    ------
    DegenerateVector
        If ``v`` has fewer than two entries or zero sample variance.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DegenerateVector("standardize requires a vector of length >= 2")
    sd = v.std(ddof=1)
    if sd == 0.0:
        raise DegenerateVector("vector has zero sample standard deviation")
    return (v - v.mean()) / sd


def sigmoid_steep(x):
    """Steep decreasing sigmoid (1 + exp(20 x))^-1, overflow-safe."""
    return expit(-20.0 * np.asarray(x, dtype=float))


def sigmoid_ex1(x):
    """Decreasing sigmoid 1 / (1 + exp(x)), overflow-safe."""
    return expit(-np.asarray(x, dtype=float))


_HASH_SEP = b"\x1f"
_MASK64 = (1 << 64) - 1


def stream_id_for(*parts) -> int:
    """Stable 64-bit stream id derived from a tuple of labels.

    Used to give replication r of experiment e its own independent stream,
    e.g. ``stream_id_for("example1", "test", r)``. Stable across processes
    and platforms (unlike built-in ``hash``).
    """
    payload = _HASH_SEP.join(str(p).encode("utf-8") for p in parts)
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a reproducible random stream.

    Identical (seed, stream_id) pairs reproduce identical draw sequences;
    distinct stream ids give statistically independent sequences. Call
    :meth:`generator` to materialize a fresh NumPy generator positioned at
    the start of the stream.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=[self.seed & _MASK64, self.stream_id & _MASK64])
        )

    def split(self, *parts) -> "RngStream":
        """Derive an independent child stream keyed by ``parts``."""
        return RngStream(self.seed, stream_id_for(self.stream_id, *parts))


def as_generator(rng) -> np.random.Generator:
    """Coerce an RngStream, Generator, or integer seed to a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)
