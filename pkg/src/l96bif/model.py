"""Lorenz-96 vector field, its Jacobian and the cyclic shift symmetry.

States are plain 1-D numpy arrays. Indices are 0-based and every index
expression is taken modulo ``n``, so the small dimensions (``n <= 3``), where
neighbours coincide, need no special treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionFactorization",
    "ModelParams",
    "SymmetrySignature",
    "divisors",
    "factorize_dimension",
    "jacobian",
    "lift",
    "project",
    "shift",
    "shift_matrix",
    "symmetry_signature",
    "trivial_equilibrium",
    "vector_field",
]

MAX_DIMENSION = 1024


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``n`` and forcing ``F`` of the model."""

    n: int
    F: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n!r}")
        if self.n > MAX_DIMENSION:
            raise ValueError(f"dimension {self.n} exceeds supported maximum {MAX_DIMENSION}")
        if not math.isfinite(self.F):
            raise ValueError(f"forcing must be finite, got {self.F!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "F", float(self.F))

    def with_forcing(self, F: float) -> "ModelParams":
        return ModelParams(self.n, F)


@dataclass(frozen=True)
class DimensionFactorization:
    """``n = 2**q * p`` with ``p`` odd."""

    n: int
    q: int
    p: int


@dataclass(frozen=True)
class SymmetrySignature:
    """Smallest block length ``m`` such that the state repeats every ``m`` sites."""

    m: int
    block: np.ndarray
    n: int

    @property
    def orbit_size(self) -> int:
        """Number of distinct shift conjugates of a state with this signature."""
        return self.m


def _as_state(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"state must be one-dimensional, got shape {x.shape}")
    if n is not None and x.size != n:
        raise ValueError(f"state has length {x.size}, expected n={n}")
    return x


def factorize_dimension(n: int) -> DimensionFactorization:
    if n < 1:
        raise ValueError("n must be positive")
    q = (n & -n).bit_length() - 1
    return DimensionFactorization(n=n, q=q, p=n >> q)


def divisors(n: int) -> list[int]:
    """Positive divisors of ``n`` in increasing order."""
    small, large = [], []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def trivial_equilibrium(params: ModelParams) -> np.ndarray:
    return np.full(params.n, params.F)


def vector_field(x, params: ModelParams) -> np.ndarray:
    """Evaluate ``x_{j-1} (x_{j+1} - x_{j-2}) - x_j + F`` for every site ``j``."""
    x = _as_state(x, params.n)
    return np.roll(x, 1) * (np.roll(x, -1) - np.roll(x, 2)) - x + params.F


def jacobian(x, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`vector_field`.

    Entries are accumulated, so coinciding neighbour indices (``n <= 3``)
    add up instead of overwriting each other.
    """
    x = _as_state(x, params.n)
    n = params.n
    j = np.arange(n)
    jm1, jp1, jm2 = (j - 1) % n, (j + 1) % n, (j - 2) % n
    J = np.zeros((n, n))
    np.add.at(J, (j, jm1), x[jp1] - x[jm2])
    np.add.at(J, (j, jp1), x[jm1])
    np.add.at(J, (j, jm2), -x[jm1])
    np.add.at(J, (j, j), -1.0)
    return J


def shift(x, k: int = 1) -> np.ndarray:
    """Cyclic left shift: ``result[j] = x[(j + k) % n]``."""
    x = _as_state(x)
    return np.roll(x, -(k % x.size))


def shift_matrix(n: int, k: int = 1) -> np.ndarray:
    """Permutation matrix of the left shift by ``k`` sites."""
    return np.roll(np.eye(n), k % n, axis=1)


def lift(x, k: int) -> np.ndarray:
    """Repeat an ``m``-dimensional state ``k`` times into dimension ``k*m``."""
    if k < 1:
        raise ValueError("lift factor must be >= 1")
    return np.tile(_as_state(x), k)


def project(x, m: int) -> np.ndarray:
    """Keep the leading ``m`` coordinates (inverse of :func:`lift` on Fix(G^m))."""
    x = _as_state(x)
    if m < 1 or x.size % m:
        raise ValueError(f"block length {m} does not divide n={x.size}")
    return x[:m].copy()


def block_deviation(x, m: int) -> float:
    """Largest ``|x[j+m] - x[j]|``; zero exactly when ``x`` lies in Fix(G^m)."""
    x = _as_state(x)
    return float(np.max(np.abs(np.roll(x, -m) - x))) if x.size else 0.0


def symmetry_signature(x, tol: float = 1e-8) -> SymmetrySignature:
    """Smallest divisor ``m`` of ``n`` with ``max_j |x[j+m] - x[j]| <= tol``.

    ``x`` may also be a 2-D array of snapshots (one state per row); the
    block condition then has to hold for every snapshot.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    arr = np.asarray(x, dtype=float)
    snaps = arr[None, :] if arr.ndim == 1 else arr
    n = snaps.shape[1]
    for m in divisors(n):
        if m == n or np.max(np.abs(np.roll(snaps, -m, axis=1) - snaps)) <= tol:
            block = snaps[0, :m].copy()
            return SymmetrySignature(m, block, n)
    raise AssertionError("unreachable")
