"""Pseudo-arclength continuation of equilibrium branches in the forcing ``F``.

A branch whose seed lies in Fix(G^m) stays there, so it is traced with the
``m``-dimensional model (exact, by the lifting property) while bifurcations
are detected on the full ``n``-dimensional spectrum, assembled block by block
from the shift multipliers. Arclength uses the RMS norm on the state, which
makes step sizes independent of ``n``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from l96bif.equilibria import (
    ConvergenceError,
    Equilibrium,
    deduplicate,
    group_orbit,
    make_equilibrium,
    newton_solve,
)
from l96bif.model import (
    ModelParams,
    factorize_dimension,
    jacobian,
    lift,
    shift,
    trivial_equilibrium,
    vector_field,
)
from l96bif.spectral import BlockSpectrum, block_spectrum, classify_zero_bifurcation

__all__ = [
    "BifurcationPoint",
    "Branch",
    "CascadeReport",
    "ContinuationError",
    "ContinuationOptions",
    "TestFunctions",
    "branch_switch",
    "cascade_scan",
    "continue_branch",
    "detect_test_functions",
    "expected_cascade",
    "feigenbaum_ratios",
]

log = logging.getLogger(__name__)

FEIGENBAUM_DELTA = 4.66920
HOPF_IMAG_TOL = 1e-6


class ContinuationError(RuntimeError):
    pass


@dataclass
class ContinuationOptions:
    ds0: float = 1e-2
    ds_min: float = 1e-5
    ds_max: float = 2e-1
    grow: float = 1.3
    grow_after: int = 3
    corrector_tol: float = 1e-12
    corrector_max_iter: int = 10
    min_cos_angle: float = 0.95
    test_tol: float = 1e-9
    max_bisections: int = 80
    max_steps: int = 20000
    detect: bool = True
    switch_offset: float = 1e-4
    switch_retries: int = 6


@dataclass
class BifurcationPoint:
    """A detected bifurcation on a branch.

    ``eigenvalue`` is the critical eigenvalue, found in the block with shift
    multiplier ``omega``; ``m`` is the block length of the branch it sits on.
    For zero-eigenvalue points ``eigenvector`` is the real critical vector in
    ``R^n`` and ``parity`` its behaviour under the shift by ``m`` sites.
    """

    kind: str
    F_star: float
    coords: np.ndarray
    m: int
    block_index: int
    omega: complex
    eigenvalue: complex
    parity: str | None = None
    eigenvector: np.ndarray | None = field(default=None, repr=False)
    branch_label: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return self.coords.size


@dataclass
class Branch:
    points: list[Equilibrium]
    label: tuple[int, int] | None
    m: int
    bifurcations: list[BifurcationPoint] = field(default_factory=list)
    arclength: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.points[0].n

    @property
    def F(self) -> np.ndarray:
        return np.array([p.F for p in self.points])

    def pitchforks(self) -> list[BifurcationPoint]:
        return [b for b in self.bifurcations if b.kind == "pitchfork"]

    def hopfs(self) -> list[BifurcationPoint]:
        return [b for b in self.bifurcations if b.kind == "hopf"]


@dataclass(frozen=True)
class TestFunctions:
    """Signed real parts closest to zero, for sign-change bracketing.

    ``real`` is the real eigenvalue of smallest modulus, ``hopf`` the real part
    of the complex pair nearest the imaginary axis (nan when absent).
    ``det_sign`` is the sign of the product of all eigenvalues.
    """

    __test__ = False

    real: float
    hopf: float
    det_sign: int


def detect_test_functions(eq: Equilibrium, real_tol: float = 1e-10) -> TestFunctions:
    lam = eq.spectrum.eigenvalues
    is_real = np.abs(lam.imag) <= real_tol
    reals = lam.real[is_real]
    cplx = lam.real[~is_real]
    real = float(reals[np.argmin(np.abs(reals))]) if reals.size else math.nan
    hopf = float(cplx[np.argmin(np.abs(cplx))]) if cplx.size else math.nan
    det_sign = int(np.sign(np.prod(np.sign(reals)))) if reals.size else 1
    return TestFunctions(real, hopf, det_sign)


# ---------------------------------------------------------------------------
# predictor-corrector in the reduced space


class _ReducedSystem:
    """The ``m``-dimensional model standing in for Fix(G^m) of dimension ``n``."""

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m

    def f(self, y, F):
        return vector_field(y, ModelParams(self.m, F))

    def jac(self, y, F):
        return jacobian(y, ModelParams(self.m, F))

    def inner(self, a, b):
        # RMS-weighted inner product on (y, F)
        return float(a[:-1] @ b[:-1]) / self.m + float(a[-1] * b[-1])

    def normalize(self, t):
        return t / math.sqrt(self.inner(t, t))

    def correct(self, z_pred, tangent, tol, max_iter):
        """Newton on ``f(y, F) = 0`` plus ``<tangent, z - z_pred> = 0``."""
        z = z_pred.copy()
        m = self.m
        w = np.append(tangent[:-1] / m, tangent[-1])
        A = np.empty((m + 1, m + 1))
        A[m, :] = w
        for _ in range(max_iter):
            y, F = z[:-1], z[-1]
            r = np.append(self.f(y, F), w @ (z - z_pred))
            if not np.all(np.isfinite(r)):
                break
            if np.max(np.abs(r)) <= tol:
                return z
            A[:m, :m] = self.jac(y, F)
            A[:m, m] = 1.0
            try:
                dz = scipy.linalg.solve(A, -r, check_finite=False)
            except (scipy.linalg.LinAlgError, ValueError):
                break
            z = z + dz
            if np.max(np.abs(dz)) <= tol * 1e-2 * max(1.0, np.max(np.abs(z))):
                r = np.append(self.f(z[:-1], z[-1]), w @ (z - z_pred))
                if np.max(np.abs(r)) <= tol:
                    return z
                break
        raise ConvergenceError("corrector failed")

    def solve_at_F(self, y0, F, tol, max_iter=20):
        y = y0.copy()
        for _ in range(max_iter):
            r = self.f(y, F)
            if np.max(np.abs(r)) <= tol:
                return y
            y = y + scipy.linalg.solve(self.jac(y, F), -r, check_finite=False)
        if np.max(np.abs(self.f(y, F))) <= tol:
            return y
        raise ConvergenceError(f"fixed-F Newton failed at F={F}")

    def initial_tangent(self, y, F, direction):
        dy = scipy.linalg.solve(self.jac(y, F), -np.ones(self.m))
        t = self.normalize(np.append(dy, 1.0))
        return t if t[-1] * direction > 0 else -t


def _counts(bs: BlockSpectrum) -> dict[int, int]:
    return {k: bs.unstable_count(k) for k in bs.representative_blocks()}


def _ordered_real_part(bs: BlockSpectrum, k: int, idx: int) -> float:
    re = np.sort(bs.blocks[k].real)[::-1]
    return float(re[idx])


def continue_branch(
    seed: Equilibrium,
    F_to: float,
    opts: ContinuationOptions | None = None,
    *,
    secant_from: tuple[np.ndarray, float] | None = None,
    label=None,
) -> Branch:
    """Trace the equilibrium branch through ``seed`` until ``F = F_to``.

    The initial direction is the branch tangent oriented towards ``F_to``,
    or the secant from ``secant_from`` (a ``(coords, F)`` pair) to the seed
    when given. Sign changes of the per-block unstable counts are located by
    root finding in arclength and stored as :class:`BifurcationPoint`.
    """
    opts = opts or ContinuationOptions()
    if F_to == seed.F:
        raise ValueError("F_to must differ from the seed's forcing")
    n, m = seed.n, seed.signature.m
    label = seed.label if label is None else label
    sys = _ReducedSystem(n, m)
    direction = 1.0 if F_to > seed.F else -1.0

    z = np.append(seed.coords[:m], seed.F)
    if secant_from is not None:
        z0 = np.append(np.asarray(secant_from[0], dtype=float)[:m], secant_from[1])
        tangent = sys.normalize(z - z0)
    else:
        tangent = sys.initial_tangent(z[:-1], z[-1], direction)

    branch = Branch([seed], label, m, arclength=[0.0])
    bs = block_spectrum(z[:-1], n)
    ds = opts.ds0
    successes = 0
    s_total = 0.0

    for _ in range(opts.max_steps):
        last = False
        z_pred = z + ds * tangent
        if (z_pred[-1] - F_to) * direction >= 0 and tangent[-1] * direction > 0:
            # land exactly on F_to
            frac = (F_to - z[-1]) / (z_pred[-1] - z[-1])
            y_guess = z[:-1] + frac * (z_pred[:-1] - z[:-1])
            try:
                y_new = sys.solve_at_F(y_guess, F_to, opts.corrector_tol)
                z_new = np.append(y_new, F_to)
                last = True
            except (ConvergenceError, scipy.linalg.LinAlgError):
                z_new = None
        else:
            try:
                z_new = sys.correct(z_pred, tangent, opts.corrector_tol, opts.corrector_max_iter)
            except ConvergenceError:
                z_new = None

        if z_new is not None:
            secant = z_new - z
            step_len = math.sqrt(sys.inner(secant, secant))
            new_tangent = secant / step_len if step_len > 0 else tangent
            if sys.inner(new_tangent, tangent) < opts.min_cos_angle and not last:
                z_new = None

        if z_new is None:
            ds *= 0.5
            successes = 0
            if ds < opts.ds_min:
                raise ContinuationError(
                    f"step size fell below {opts.ds_min} at F={z[-1]:.10g} (label {label})"
                )
            continue

        bs_new = block_spectrum(z_new[:-1], n)
        if opts.detect:
            for bp in _locate_events(sys, z, tangent, step_len, z_new, bs, bs_new, opts):
                bp.branch_label = label
                branch.bifurcations.append(bp)

        s_total += step_len
        z, tangent, bs = z_new, new_tangent, bs_new
        eq = make_equilibrium(lift(z[:-1], n // m), z[-1], label)
        branch.points.append(eq)
        branch.arclength.append(s_total)
        if last:
            return branch
        successes += 1
        if successes >= opts.grow_after:
            ds = min(ds * opts.grow, opts.ds_max)
            successes = 0
    raise ContinuationError(f"no arrival at F={F_to} within {opts.max_steps} steps")


def _locate_events(sys, z0, tangent, ds, z1, bs0, bs1, opts):
    """Find every per-block count change between two accepted samples."""
    c0, c1 = _counts(bs0), _counts(bs1)
    events = []
    cache: dict[float, tuple[np.ndarray, BlockSpectrum]] = {0.0: (z0, bs0)}

    # the branch between the samples, parametrised by the projection on the old tangent
    seg_tangent = sys.normalize(z1 - z0)
    seg_len = math.sqrt(sys.inner(z1 - z0, z1 - z0))
    cache[seg_len] = (z1, bs1)

    def point(sigma):
        if sigma not in cache:
            zp = sys.correct(z0 + sigma * seg_tangent, seg_tangent, opts.corrector_tol, 20)
            cache[sigma] = (zp, block_spectrum(zp[:-1], sys.n))
        return cache[sigma]

    for k in c0:
        if c0[k] == c1[k]:
            continue
        lo, hi = sorted((c0[k], c1[k]))
        roots = []
        for idx in range(lo, hi):
            g = lambda s, idx=idx: _ordered_real_part(point(s)[1], k, idx)
            try:
                root = brentq(g, 0.0, seg_len, xtol=1e-14, maxiter=opts.max_bisections)
            except ValueError:
                log.warning("could not bracket event in block %d near F=%.6f", k, z0[-1])
                continue
            if all(abs(root - r) > 1e-9 for r in roots):
                roots.append(root)
        events.extend((root, _classify(sys, *point(root), k, opts)) for root in roots)
    events.sort(key=lambda e: e[0])
    return [bp for _, bp in events]


def _classify(sys, z, bs: BlockSpectrum, k: int, opts) -> BifurcationPoint:
    n, m = sys.n, sys.m
    bs_v = block_spectrum(z[:-1], n, vectors=True)
    lam = bs_v.blocks[k]
    i = int(np.argmin(np.abs(lam.real)))
    crit = complex(lam[i])
    omega = complex(bs_v.multipliers[k])
    coords = lift(z[:-1], n // m)
    if abs(crit.real) > 1e-8:
        log.warning("critical real part %.2e exceeds 1e-8 at F=%.10f", crit.real, z[-1])
    if abs(crit.imag) > HOPF_IMAG_TOL:
        return BifurcationPoint("hopf", float(z[-1]), coords, m, k, omega, crit)
    if not bs_v.is_real_block(k):
        # a real eigenvalue in a complex block comes with its conjugate block: two-dimensional kernel
        return BifurcationPoint("steady", float(z[-1]), coords, m, k, omega, crit)
    u = bs_v.vectors[k][:, i]
    v = bs_v.full_vector(k, u)
    v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
    v /= np.linalg.norm(v)
    parity_kind = classify_zero_bifurcation(m, v)
    parity = "antisymmetric" if parity_kind == "pitchfork" else "symmetric"
    return BifurcationPoint(parity_kind, float(z[-1]), coords, m, k, omega, crit, parity, v)


# ---------------------------------------------------------------------------
# branch switching


def branch_switch(
    bp: BifurcationPoint,
    opts: ContinuationOptions | None = None,
    F_target: float | None = None,
) -> tuple[Equilibrium, Equilibrium]:
    """Equilibria on the two emerging branches of a pitchfork.

    The children solve ``f = 0`` together with ``<x - x*, v> = +-a`` in
    Fix(G^{2m}), ``v`` the critical eigenvector. With ``F_target`` they are
    moved on to that forcing value. The second child is the shift of the
    first by ``m`` sites.
    """
    opts = opts or ContinuationOptions()
    if bp.kind != "pitchfork":
        raise ValueError(f"branch switching needs a pitchfork, got {bp.kind}")
    n, m = bp.n, bp.m
    mc = 2 * m
    sys = _ReducedSystem(n, mc)
    y_star = bp.coords[:mc]
    v = bp.eigenvector[:mc] / np.linalg.norm(bp.eigenvector[:mc])
    level = 0 if bp.branch_label is None else bp.branch_label[0]
    j = 0 if bp.branch_label is None else bp.branch_label[1]

    a = opts.switch_offset * max(1.0, float(np.linalg.norm(y_star)))
    for _ in range(opts.switch_retries + 1):
        try:
            children = [_offset_solve(sys, y_star, bp.F_star, v, sgn * a, opts) for sgn in (1, -1)]
        except ConvergenceError:
            a *= 2.0
            continue
        if all(np.max(np.abs(c[:-1] - np.roll(c[:-1], -m))) > 1e-8 for c in children):
            break
        a *= 2.0
    else:
        raise ContinuationError(f"branch switch at F={bp.F_star} fell back onto the parent")

    if F_target is not None:
        children = [_move_to(sys, y_star, bp.F_star, v, c, F_target, opts) for c in children]

    xa, xb = (lift(c[:-1], n // mc) for c in children)
    if np.max(np.abs(xb - shift(xa, m))) > 1e-8:
        log.warning("children at F=%.10f are not shift conjugate", bp.F_star)
    eq_a = make_equilibrium(xa, children[0][-1], (level + 1, j))
    eq_b = make_equilibrium(xb, children[1][-1], (level + 1, j + m))
    return eq_a, eq_b


def _offset_solve(sys, y_star, F_star, v, a, opts):
    m = sys.m
    target = y_star + a * v
    z = np.append(target, F_star)
    A = np.zeros((m + 1, m + 1))
    A[m, :m] = v
    for _ in range(40):
        y, F = z[:-1], z[-1]
        r = np.append(sys.f(y, F), v @ (y - y_star) - a)
        if np.max(np.abs(r)) <= opts.corrector_tol:
            return z
        A[:m, :m] = sys.jac(y, F)
        A[:m, m] = 1.0
        z = z + scipy.linalg.solve(A, -r, check_finite=False)
    raise ConvergenceError("branch-switch corrector failed")


def _move_to(sys, y_star, F_star, v, child, F_target, opts):
    # on a pitchfork, F - F* scales with the squared offset
    a = float(v @ (child[:-1] - y_star))
    for _ in range(8):
        dF = child[-1] - F_star
        if dF == 0 or (F_target - F_star) / dF <= 0:
            raise ContinuationError("F_target lies on the wrong side of the pitchfork")
        a *= math.sqrt((F_target - F_star) / dF)
        child = _offset_solve(sys, y_star, F_star, v, a, opts)
        if abs(child[-1] - F_target) < 1e-6 * max(1.0, abs(F_target - F_star)):
            break
    y = sys.solve_at_F(child[:-1], F_target, opts.corrector_tol)
    return np.append(y, F_target)


# ---------------------------------------------------------------------------
# full cascades


@dataclass
class CascadeReport:
    n: int
    F_floor: float
    pf_values: list[float]
    counts: int
    ratios: list[float]
    branches: list[Branch] = field(default_factory=list, repr=False)
    equilibria: list[Equilibrium] = field(default_factory=list, repr=False)
    failures: list[str] = field(default_factory=list)

    @property
    def n_pitchforks(self) -> int:
        return len(self.pf_values)

    def summary(self) -> str:
        eq_word = "equilibrium" if self.counts == 1 else "equilibria"
        pf_word = "pitchfork" if self.n_pitchforks == 1 else "pitchforks"
        return f"{self.n_pitchforks} {pf_word}, {self.counts} {eq_word}"


def feigenbaum_ratios(pf_values) -> list[float]:
    """``r_l = (F_{l-1} - F_{l-2}) / (F_l - F_{l-1})`` for ``l = 3 ..``."""
    if isinstance(pf_values, CascadeReport):
        pf_values = pf_values.pf_values
    F = list(pf_values)
    if len(F) < 3:
        raise ValueError("need at least three pitchfork values")
    return [(F[i - 1] - F[i - 2]) / (F[i] - F[i - 1]) for i in range(2, len(F))]


def cascade_scan(
    n: int,
    F_floor: float = -10.0,
    opts: ContinuationOptions | None = None,
) -> CascadeReport:
    """Follow ``x_F`` from ``F = 0`` down to ``F_floor``, switching at every pitchfork.

    Only one representative per group orbit is continued; its conjugates are
    reconstructed by shifts.
    """
    if not F_floor < -0.5:
        raise ValueError("F_floor must lie below -1/2")
    opts = opts or ContinuationOptions()
    seed = newton_solve(trivial_equilibrium(ModelParams(n, 0.0)), ModelParams(n, 0.0), label=(0, 0))
    pending = [(seed, None)]
    branches: list[Branch] = []
    failures: list[str] = []
    pf: list[float] = []

    while pending:
        start, secant = pending.pop(0)
        try:
            br = continue_branch(start, F_floor, opts, secant_from=secant)
        except (ContinuationError, ConvergenceError) as exc:
            failures.append(f"branch {start.label}: {exc}")
            continue
        branches.append(br)
        for bp in br.pitchforks():
            pf.append(bp.F_star)
            try:
                child, twin = branch_switch(bp, opts)
            except (ContinuationError, ConvergenceError) as exc:
                failures.append(f"switch at F={bp.F_star:.8f}: {exc}")
                continue
            pending.append((child, (bp.coords, bp.F_star)))

    ends = []
    for br in branches:
        end = br.points[-1]
        if end.F == F_floor:
            ends.extend(group_orbit(end))
    distinct = [ends[i] for i in deduplicate([e.coords for e in ends])]
    pf_values = _distinct_sorted(pf)
    ratios = feigenbaum_ratios(pf_values) if len(pf_values) >= 3 else []
    return CascadeReport(n, F_floor, pf_values, len(distinct), ratios, branches, distinct, failures)


def _distinct_sorted(values, tol=1e-9):
    out: list[float] = []
    for v in sorted(values, reverse=True):
        if not out or abs(out[-1] - v) > tol:
            out.append(v)
    return out


def expected_cascade(n: int) -> tuple[int, int]:
    """Pitchfork count ``q`` and equilibrium count ``2**(q+1) - 1`` for ``n = 2**q * p``."""
    q = factorize_dimension(n).q
    return q, 2 ** (q + 1) - 1
