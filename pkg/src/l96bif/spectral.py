"""Spectra of Lorenz-96 equilibria.

Closed forms cover the trivial equilibrium ``x_F`` (circulant Jacobian) and the
first bifurcated pair in dimension four. For numerically computed equilibria
lying in Fix(G^m) the Jacobian commutes with the shift by ``m`` sites, so it
splits into ``n/m`` blocks of size ``m``, one per shift multiplier
``omega_k = exp(-2 pi i k m / n)``. :func:`block_spectrum` exploits this; it is
exact and much cheaper than a dense ``n x n`` eigensolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from l96bif.model import ModelParams, shift

__all__ = [
    "BlockSpectrum",
    "NormalFormPF",
    "Spectrum",
    "block_matrix",
    "block_spectrum",
    "classify_zero_bifurcation",
    "half_eigenvalue",
    "hopf_value",
    "numerical_spectrum",
    "pf1_normal_form",
    "pf2_normal_form_n4",
    "trivial_spectrum",
    "xi1_closed_form",
    "xi1_spectrum_n4",
]

REAL_TOL = 1e-10
PARITY_TOL = 1e-6


@dataclass
class Spectrum:
    """Eigenvalues (and optionally eigenvectors, as columns) of a Jacobian."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def real_eigenvalues(self, tol: float = REAL_TOL) -> np.ndarray:
        lam = self.eigenvalues
        return lam.real[np.abs(lam.imag) <= tol]

    def sorted(self) -> "Spectrum":
        order = np.lexsort((-self.eigenvalues.imag, -self.eigenvalues.real))
        vecs = None if self.eigenvectors is None else self.eigenvectors[:, order]
        return Spectrum(self.eigenvalues[order], vecs)


def numerical_spectrum(J: np.ndarray, vectors: bool = False) -> Spectrum:
    """Dense eigendecomposition, ordered by descending real part."""
    if vectors:
        lam, V = np.linalg.eig(J)
        return Spectrum(lam.astype(complex), V).sorted()
    return Spectrum(np.linalg.eigvals(J).astype(complex)).sorted()


# ---------------------------------------------------------------------------
# symmetry-adapted blocks


def _block_stack(block, n: int, omegas) -> np.ndarray:
    y = np.asarray(block, dtype=float)
    m = y.size
    if n % m:
        raise ValueError(f"block length {m} does not divide n={n}")
    omegas = np.asarray(omegas, dtype=complex).reshape(-1)
    j = np.arange(m)
    ym1, yp1, ym2 = y[(j - 1) % m], y[(j + 1) % m], y[(j - 2) % m]
    B = np.zeros((omegas.size, m, m), dtype=complex)
    for d, coeff in ((-1, yp1 - ym2), (1, ym1), (-2, -ym1), (0, -np.ones(m))):
        i = j + d
        np.add.at(B, (slice(None), j, i % m), coeff * omegas[:, None] ** (i // m))
    return B


def block_matrix(block, n: int, omega: complex) -> np.ndarray:
    """Jacobian block acting on Bloch vectors ``v[j + m*b] = omega**b * u[j]``.

    ``block`` is the repeating ``m``-site pattern of an equilibrium in
    Fix(G^m) of the ``n``-dimensional model; ``omega**(n/m)`` must equal one.
    """
    return _block_stack(block, n, [omega])[0]


@dataclass
class BlockSpectrum:
    """Full spectrum of an equilibrium in Fix(G^m), organised by shift multiplier.

    ``blocks[k]`` holds the eigenvalues belonging to ``omega_k``. Blocks ``k``
    and ``n/m - k`` are complex conjugates of each other.
    """

    n: int
    block: np.ndarray
    multipliers: np.ndarray
    blocks: list[np.ndarray]
    vectors: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.block.size

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def as_spectrum(self) -> Spectrum:
        return Spectrum(self.eigenvalues).sorted()

    def representative_blocks(self) -> list[int]:
        """One block index per conjugate pair, ``0 .. (n/m) // 2``."""
        return list(range(self.n // self.m // 2 + 1))

    def is_real_block(self, k: int) -> bool:
        return (2 * k) % (self.n // self.m) == 0

    def unstable_count(self, k: int) -> int:
        return int(np.count_nonzero(self.blocks[k].real > 0))

    def full_vector(self, k: int, u: np.ndarray) -> np.ndarray:
        """Expand a block eigenvector to ``R^n`` (complex in general)."""
        reps = self.n // self.m
        phases = self.multipliers[k] ** np.arange(reps)
        return np.kron(phases, u)


def _multiplier(k: int, reps: int) -> complex:
    if k == 0:
        return 1.0
    if 2 * k == reps:
        return -1.0
    return complex(np.exp(-2j * np.pi * k / reps))


def block_spectrum(block, n: int, vectors: bool = False) -> BlockSpectrum:
    y = np.asarray(block, dtype=float)
    reps = n // y.size
    multipliers = np.array([_multiplier(k, reps) for k in range(reps)], dtype=complex)
    half = reps // 2 + 1
    B = _block_stack(y, n, multipliers[:half])
    real = [k for k in range(half) if (2 * k) % reps == 0]
    cplx = [k for k in range(half) if (2 * k) % reps != 0]
    vals: list = [None] * reps
    vecs: list = [None] * reps
    for k in real:
        if vectors:
            lam, V = np.linalg.eig(B[k].real)
            vals[k], vecs[k] = lam.astype(complex), V.astype(complex)
        else:
            vals[k] = np.linalg.eigvals(B[k].real).astype(complex)
    if cplx:
        if vectors:
            lam, V = np.linalg.eig(B[cplx])
        else:
            lam, V = np.linalg.eigvals(B[cplx]), None
        for i, k in enumerate(cplx):
            vals[k] = lam[i]
            # block reps - k is the complex conjugate of block k
            vals[reps - k] = np.conj(lam[i])
            if vectors:
                vecs[k], vecs[reps - k] = V[i], np.conj(V[i])
    return BlockSpectrum(n, y.copy(), multipliers, vals, vecs if vectors else None)


# ---------------------------------------------------------------------------
# closed forms at the trivial equilibrium


def trivial_spectrum(params: ModelParams) -> Spectrum:
    """Eigenpairs of the circulant Jacobian at ``x_F``, indexed ``j = 0..n-1``."""
    n, F = params.n, params.F
    j = np.arange(n)
    rho = np.exp(-2j * np.pi * j / n)
    # rho**(n-2) = exp(2 i theta); written in cos/sin so the real modes come out exactly real
    theta = 2 * np.pi * j / n
    lam = (-1.0 + F * (np.cos(theta) - np.cos(2 * theta))) - 1j * F * (np.sin(theta) + np.sin(2 * theta))
    lam[(2 * j) % n == 0] = lam[(2 * j) % n == 0].real
    # impose the conjugate pairing exactly
    upper = j > n // 2
    lam[upper] = np.conj(lam[n - j[upper]])
    V = rho[None, :] ** np.arange(n)[:, None] / math.sqrt(n)
    return Spectrum(lam, V)


def half_eigenvalue(params: ModelParams) -> float:
    """The real eigenvalue ``lambda_{n/2} = -1 - 2F`` of ``x_F`` (even ``n`` only)."""
    if params.n % 2:
        raise ValueError("lambda_{n/2} exists only for even n")
    return -1.0 - 2.0 * params.F


def hopf_value(j: int, n: int) -> float:
    """Forcing at which the ``j``-th eigenpair of ``x_F`` crosses the imaginary axis."""
    denom = math.cos(2 * math.pi * j / n) - math.cos(4 * math.pi * j / n)
    if abs(denom) < 1e-12:
        raise ZeroDivisionError(f"mode j={j} of n={n} never crosses the imaginary axis")
    return 1.0 / denom


# ---------------------------------------------------------------------------
# Z2 parity test for a zero eigenvalue


def classify_zero_bifurcation(half_shift: int, v, tol: float = PARITY_TOL) -> str:
    """Fold or pitchfork, from the parity of the critical eigenvector.

    The involution is ``R = gamma^half_shift`` (for the first pitchfork in
    dimension 2 that is ``gamma_2``, for the second in dimension 4 it is
    ``gamma_4^2``). ``R`` must square to the identity on ``v``. Returns
    ``"pitchfork"`` when ``R v = -v`` and ``"fold"`` when ``R v = v``.
    """
    v = np.asarray(v)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("eigenvector must be nonzero")
    Rv = np.roll(v, -half_shift)
    if np.linalg.norm(np.roll(Rv, -half_shift) - v) > tol * norm:
        raise ValueError("R does not square to the identity on v")
    if np.linalg.norm(Rv + v) <= tol * norm:
        return "pitchfork"
    if np.linalg.norm(Rv - v) <= tol * norm:
        return "fold"
    raise ValueError("eigenvector is neither R-symmetric nor R-antisymmetric")


# ---------------------------------------------------------------------------
# first bifurcated branch and normal forms


def xi1_closed_form(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """The two alternating equilibria born at ``F = -1/2`` (even ``n``)."""
    n, F = params.n, params.F
    if n % 2:
        raise ValueError("the alternating branch requires even n")
    disc = -1.0 - 2.0 * F
    if disc < 0:
        raise ValueError(f"the alternating branch exists only for F <= -1/2 (got F={F})")
    root = 0.5 * math.sqrt(disc)
    a_plus, a_minus = -0.5 + root, -0.5 - root
    xi0 = np.tile([a_plus, a_minus], n // 2)
    return xi0, shift(xi0, 1)


def xi1_spectrum_n4(F: float) -> np.ndarray:
    """Closed-form eigenvalues ``lambda^1_0..3`` of the alternating branch for ``n = 4``."""
    r1 = np.sqrt(complex(9.0 + 16.0 * F))
    r2 = np.sqrt(complex(-3.0 - 4.0 * F))
    return np.array([(-1 + r1) / 2, (-1 - r1) / 2, (-3 + r2) / 2, (-3 - r2) / 2])


@dataclass(frozen=True)
class NormalFormPF:
    """``du/dt = linear_coeff * u + cubic_coeff * u**3`` on the centre manifold."""

    alpha: float
    linear_coeff: float
    cubic_coeff: float

    @property
    def criticality(self) -> str:
        return "supercritical" if self.cubic_coeff < 0 else "subcritical"

    def amplitude(self) -> float:
        """Nonzero equilibrium amplitude ``|u|``, or nan when the pair does not exist."""
        ratio = -self.linear_coeff / self.cubic_coeff
        return math.sqrt(ratio) if ratio >= 0 else math.nan


def pf1_normal_form(n: int, F: float) -> NormalFormPF:
    if n % 2:
        raise ValueError("the first pitchfork requires even n")
    alpha = F + 0.5
    return NormalFormPF(alpha, -2.0 * alpha, -4.0 / n)


def pf2_normal_form_n4(alpha: float) -> NormalFormPF:
    """Centre-manifold coefficients of the second pitchfork for ``n = 4``, ``alpha = F + 3``."""
    if not alpha < 2.5:
        raise ValueError("alpha must be below 5/2")
    s5 = math.sqrt(5.0)
    root = math.sqrt(5.0 - 2.0 * alpha)
    a = alpha * (18 * s5 * root + alpha) / (54 * (-5 + 2 * alpha))
    c = 145 + 61 * s5
    b = (450 * c + alpha * (root * (854 + 406 * s5) - 180 * c)) / (
        135 * (23 + 3 * s5) * (-5 + 2 * alpha)
    )
    return NormalFormPF(alpha, a, b)
