"""Newton solves, stability and group orbits of Lorenz-96 equilibria."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from l96bif.model import (
    ModelParams,
    SymmetrySignature,
    jacobian,
    lift,
    shift,
    symmetry_signature,
    vector_field,
)
from l96bif.spectral import Spectrum, block_spectrum

__all__ = [
    "ConvergenceError",
    "Equilibrium",
    "SingularJacobianError",
    "StabilityReport",
    "deduplicate",
    "group_orbit",
    "make_equilibrium",
    "newton_solve",
    "stability",
]

RESIDUAL_TOL = 1e-10
STABILITY_MARGIN = 1e-10
DEDUP_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """Newton (or a corrector built on it) failed to reach the tolerance."""


class SingularJacobianError(ConvergenceError):
    pass


@dataclass
class Equilibrium:
    coords: np.ndarray
    F: float
    spectrum: Spectrum
    signature: SymmetrySignature
    label: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return self.coords.size

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.n, self.F)

    @property
    def stable(self) -> bool:
        return self.spectrum.max_real < -STABILITY_MARGIN

    def residual(self) -> float:
        return float(np.max(np.abs(vector_field(self.coords, self.params))))


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real: float
    n_unstable: int


def make_equilibrium(coords, F: float, label=None, sig_tol: float = 1e-8) -> Equilibrium:
    """Wrap a solved state; the spectrum comes from the symmetry-adapted blocks."""
    coords = np.asarray(coords, dtype=float)
    sig = symmetry_signature(coords, sig_tol)
    # blocks are only valid when the state is exactly periodic, so rebuild it from the block
    spectrum = block_spectrum(sig.block, coords.size).as_spectrum()
    return Equilibrium(coords, float(F), spectrum, sig, label)


def _newton(fun, jac, x0, tol: float, max_iter: int, max_halvings: int = 10):
    x = np.array(x0, dtype=float)
    r = fun(x)
    res = np.max(np.abs(r))
    for _ in range(max_iter):
        if res <= tol:
            return x
        lu, piv = scipy.linalg.lu_factor(jac(x), check_finite=True)
        if np.any(np.abs(np.diag(lu)) < 1e-300):
            raise SingularJacobianError("singular Jacobian at Newton iterate")
        dx = scipy.linalg.lu_solve((lu, piv), -r)
        step = 1.0
        for _ in range(max_halvings + 1):
            x_try = x + step * dx
            r_try = fun(x_try)
            res_try = np.max(np.abs(r_try))
            if np.isfinite(res_try) and res_try < res:
                break
            step *= 0.5
        x, r, res = x_try, r_try, res_try
        if not np.isfinite(res):
            break
    if res <= tol:
        return x
    raise ConvergenceError(f"Newton did not converge: residual {res:.3e} after {max_iter} iterations")


def newton_solve(
    x0,
    params: ModelParams,
    tol: float = 1e-12,
    max_iter: int = 50,
    block: int | None = None,
    label=None,
) -> Equilibrium:
    """Solve ``f(x, F) = 0`` by damped Newton from ``x0``.

    With ``block=m`` the solve is carried out in Fix(G^m) using the
    ``m``-dimensional model on the leading ``m`` coordinates and the result is
    lifted back to dimension ``n``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.size != params.n:
        raise ValueError(f"initial guess has length {x0.size}, expected n={params.n}")
    m = params.n if block is None else block
    if params.n % m:
        raise ValueError(f"block length {m} does not divide n={params.n}")
    reduced = ModelParams(m, params.F)
    y = _newton(
        lambda y: vector_field(y, reduced),
        lambda y: jacobian(y, reduced),
        x0[:m],
        tol,
        max_iter,
    )
    x = lift(y, params.n // m)
    if np.max(np.abs(vector_field(x, params))) > tol:
        raise ConvergenceError("lifted solution violates the residual tolerance")
    return make_equilibrium(x, params.F, label)


def stability(eq: Equilibrium) -> StabilityReport:
    lam = eq.spectrum.eigenvalues
    max_real = float(np.max(lam.real))
    return StabilityReport(
        stable=max_real < -STABILITY_MARGIN,
        max_real=max_real,
        n_unstable=int(np.count_nonzero(lam.real > STABILITY_MARGIN)),
    )


def deduplicate(states, tol: float = DEDUP_TOL) -> list[int]:
    """Indices of the first occurrence of each distinct state (max-norm ``tol``)."""
    kept: list[int] = []
    arr = [np.asarray(s, dtype=float) for s in states]
    for i, s in enumerate(arr):
        if all(np.max(np.abs(s - arr[k])) > tol for k in kept):
            kept.append(i)
    return kept


def _conjugate_label(label, k: int):
    if label is None:
        return None
    level, j = label
    return (level, (j + k) % (2**level)) if level > 0 else label


def group_orbit(eq: Equilibrium, tol: float = DEDUP_TOL) -> list[Equilibrium]:
    """Distinct shift conjugates ``shift(eq, k)``, ``k = 0 .. m-1``.

    Conjugates share the spectrum, so it is reused rather than recomputed.
    """
    out = []
    states = [shift(eq.coords, k) for k in range(eq.signature.m)]
    for k in deduplicate(states, tol):
        x = states[k]
        if np.max(np.abs(vector_field(x, eq.params))) > max(RESIDUAL_TOL, eq.residual() * 10):
            raise ConvergenceError("shifted state is not an equilibrium")
        sig = symmetry_signature(x)
        out.append(replace(eq, coords=x, signature=sig, label=_conjugate_label(eq.label, k)))
    return out
