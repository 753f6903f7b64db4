"""Time integration, periodic orbits and their symmetry.

Integration is delegated to scipy's adaptive Dormand-Prince 8(5,3) scheme with
dense output. Periodic orbits are located with a Poincare section through the
mean of a trajectory tail and then refined by single shooting on
``(x0, T)``, with the section as phase condition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from l96bif.model import (
    ModelParams,
    SymmetrySignature,
    jacobian,
    shift,
    symmetry_signature,
    trivial_equilibrium,
    vector_field,
)

__all__ = [
    "BlowUpError",
    "ConjugacyResult",
    "GcdCheck",
    "IntegrationError",
    "NoSectionCrossingError",
    "PeriodicOrbit",
    "ScanRow",
    "Trajectory",
    "attractor_orbit",
    "find_periodic_orbit",
    "gcd_symmetry_check",
    "integrate",
    "loop_distance",
    "orbit_conjugacy",
    "symmetry_scan",
    "wave_number",
]

log = logging.getLogger(__name__)

RTOL = 1e-9
ATOL = 1e-11
BLOWUP_NORM = 1e8
BURN_IN = 500.0
WINDOW = 200.0


class IntegrationError(RuntimeError):
    pass


class BlowUpError(IntegrationError):
    pass


class NoSectionCrossingError(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    sol: object = field(default=None, repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def tail(self, t_start: float) -> "Trajectory":
        keep = self.times >= t_start
        return Trajectory(self.times[keep], self.states[keep], self.params, self.sol)


def _rhs(params: ModelParams):
    F = params.F

    def f(t, x):
        return np.roll(x, 1) * (np.roll(x, -1) - np.roll(x, 2)) - x + F

    return f


def _blowup_event(t, x):
    return BLOWUP_NORM - np.max(np.abs(x))


_blowup_event.terminal = True


def integrate(
    x0,
    params: ModelParams,
    t_end: float,
    *,
    t_eval=None,
    dt: float | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    dense: bool = False,
    events=None,
) -> Trajectory:
    """Integrate from ``t = 0`` to ``t_end``.

    Samples are returned at ``t_eval``, or every ``dt`` time units, or at the
    solver's own steps when neither is given. Raises :class:`BlowUpError` when
    the state norm exceeds ``1e8``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.size != params.n:
        raise ValueError(f"initial state has length {x0.size}, expected n={params.n}")
    if not np.all(np.isfinite(x0)) or np.max(np.abs(x0)) > BLOWUP_NORM:
        raise BlowUpError("initial state is not finite or already exceeds the blow-up norm")
    if t_eval is None and dt is not None:
        t_eval = np.arange(0.0, t_end + 0.5 * dt, dt)
        t_eval = t_eval[t_eval <= t_end]
    evs = [_blowup_event] + list(events or [])
    sol = solve_ivp(
        _rhs(params), (0.0, t_end), x0, method="DOP853", t_eval=t_eval,
        rtol=rtol, atol=atol, dense_output=dense, events=evs,
    )
    if sol.status == 1 and sol.t_events[0].size:
        raise BlowUpError(f"state norm exceeded {BLOWUP_NORM:g} at t={sol.t_events[0][0]:.4g}")
    if sol.status < 0:
        raise IntegrationError(sol.message)
    traj = Trajectory(sol.t, sol.y.T.copy(), params, sol.sol)
    traj.events = sol.t_events[1:], sol.y_events[1:]
    return traj


# ---------------------------------------------------------------------------
# periodic orbits


@dataclass
class PeriodicOrbit:
    """One period of a closed orbit, sampled at ``times`` in ``[0, T)``."""

    period: float
    times: np.ndarray
    samples: np.ndarray
    params: ModelParams
    wave_number: int
    signature: SymmetrySignature
    closure: float

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def x0(self) -> np.ndarray:
        return self.samples[0]

    def state_at(self, t: float) -> np.ndarray:
        """Orbit state at time ``t`` (any real), integrated from the nearest sample."""
        t = t % self.period
        dt = self.period / len(self.times)
        i = int(t // dt) % len(self.times)
        tau = t - self.times[i]
        if tau <= 0:
            return self.samples[i].copy()
        return integrate(self.samples[i], self.params, tau, t_eval=[tau], rtol=1e-12, atol=1e-13).final

    def shifted(self, k: int) -> np.ndarray:
        return np.roll(self.samples, -k, axis=1)


def _flow_with_monodromy(x0, params: ModelParams, T: float):
    n = params.n
    f = _rhs(params)

    def rhs(t, z):
        x = z[:n]
        M = z[n:].reshape(n, n)
        return np.concatenate([f(t, x), (jacobian(x, params) @ M).ravel()])

    z0 = np.concatenate([x0, np.eye(n).ravel()])
    sol = solve_ivp(rhs, (0.0, T), z0, method="DOP853", rtol=1e-11, atol=1e-12)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    z = sol.y[:, -1]
    return z[:n], z[n:].reshape(n, n)


def _shoot(x0, T, normal, anchor, params: ModelParams, tol=1e-10, max_iter=12):
    """Newton on ``phi_T(x0) - x0 = 0`` with ``normal . (x0 - anchor) = 0``."""
    n = params.n
    x0 = np.array(x0, dtype=float)
    for _ in range(max_iter):
        xT, M = _flow_with_monodromy(x0, params, T)
        r = np.append(xT - x0, normal @ (x0 - anchor))
        if np.max(np.abs(r[:n])) <= tol:
            break
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = M - np.eye(n)
        A[:n, n] = vector_field(xT, params)
        A[n, :n] = normal
        dz = np.linalg.lstsq(A, -r, rcond=None)[0]
        x0 += dz[:n]
        T += dz[n]
    xT, _ = _flow_with_monodromy(x0, params, T)
    return x0, T, float(np.linalg.norm(xT - x0))


def find_periodic_orbit(
    traj: Trajectory,
    burn_in: float = 0.0,
    *,
    n_samples: int = 512,
    recurrence_tol: float = 1e-3,
    sig_tol: float = 1e-6,
) -> PeriodicOrbit | None:
    """Extract a periodic orbit from the tail of ``traj``.

    Returns ``None`` when the tail has settled on an equilibrium or shows no
    recurrence on the section. Raises :class:`NoSectionCrossingError` when a
    non-stationary tail never crosses the section (drift).
    """
    tail = traj.tail(traj.times[0] + burn_in)
    params = traj.params
    if len(tail.times) < 10:
        raise ValueError("trajectory tail is too short; sample it more densely")
    anchor = tail.states.mean(axis=0)
    dev = tail.states - anchor
    scale = float(np.max(np.abs(dev)))
    if scale <= 1e-6 * max(1.0, float(np.max(np.abs(anchor)))):
        return None

    normal = np.linalg.svd(dev, full_matrices=False)[2][0]

    def section(t, x):
        return normal @ (x - anchor)

    section.direction = 1.0
    span = tail.times[-1] - tail.times[0]
    run = integrate(tail.states[0], params, span, t_eval=[span], events=[section])
    t_cross, x_cross = run.events[0][0], run.events[1][0]
    if len(t_cross) < 2:
        raise NoSectionCrossingError("trajectory tail does not cross the Poincare section")

    dist = np.linalg.norm(x_cross[1:] - x_cross[0], axis=1)
    hits = np.flatnonzero(dist <= recurrence_tol * max(1.0, scale))
    if hits.size == 0:
        return None
    k = int(hits[0]) + 1
    x0, T = x_cross[0], float(t_cross[k] - t_cross[0])

    x0, T, closure = _shoot(x0, T, normal, anchor, params)
    if not closure <= 1e-6:
        log.info("shooting closure %.2e too large; treating as not periodic", closure)
        return None

    times = np.linspace(0.0, T, n_samples, endpoint=False)
    samples = integrate(x0, params, T, t_eval=times, rtol=1e-11, atol=1e-12).states
    return PeriodicOrbit(
        period=T,
        times=times,
        samples=samples,
        params=params,
        wave_number=wave_number(samples),
        signature=symmetry_signature(samples, sig_tol),
        closure=closure,
    )


def attractor_orbit(
    x0,
    params: ModelParams,
    burn_in: float = BURN_IN,
    window: float = WINDOW,
    **kwargs,
) -> PeriodicOrbit | None:
    """Integrate past the transient and extract the periodic attractor, if any."""
    warm = integrate(x0, params, burn_in, t_eval=[burn_in])
    traj = integrate(warm.final, params, window, dt=0.01)
    return find_periodic_orbit(traj, **kwargs)


# ---------------------------------------------------------------------------
# symmetry of orbits


@dataclass(frozen=True)
class ConjugacyResult:
    identical: bool
    phase: float | None
    distance: float

    @property
    def disjoint(self) -> bool:
        return not self.identical


def _distance_to_orbit(P: PeriodicOrbit, z: np.ndarray) -> tuple[float, float]:
    """Smallest distance from ``z`` to the orbit and the time where it is attained."""
    d = np.linalg.norm(P.samples - z, axis=1)
    i = int(np.argmin(d))
    dt = P.period / len(P.times)
    t0 = P.times[i] - dt
    start = P.state_at(t0)
    local = integrate(start, P.params, 2 * dt, dense=True, t_eval=[2 * dt], rtol=1e-12, atol=1e-13)
    res = minimize_scalar(
        lambda tau: float(np.linalg.norm(local.sol(tau) - z)),
        bounds=(0.0, 2 * dt),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, P.period)},
    )
    return float(res.fun), float((t0 + res.x) % P.period)


def _sample_spacing(P: PeriodicOrbit) -> float:
    steps = np.diff(np.vstack([P.samples, P.samples[:1]]), axis=0)
    return float(np.max(np.linalg.norm(steps, axis=1)))


def loop_distance(
    P: PeriodicOrbit,
    Q: PeriodicOrbit,
    k: int = 0,
    n_test: int = 48,
    cutoff: float = math.inf,
) -> float:
    """Hausdorff-type distance between the loops of ``P`` and ``shift(Q, k)``.

    ``n_test`` points of each loop are mapped onto the other and their
    distance is refined on the dense orbit. Once the running maximum exceeds
    ``cutoff`` the estimate is returned early.
    """
    dist = 0.0
    for A, B, s in ((P, Q, k), (Q, P, -k)):
        spacing = _sample_spacing(A)
        for i in np.linspace(0, len(B.times), n_test, endpoint=False).astype(int):
            z = shift(B.samples[i], s)
            coarse = float(np.min(np.linalg.norm(A.samples - z, axis=1)))
            d = coarse if coarse - spacing > cutoff else _distance_to_orbit(A, z)[0]
            dist = max(dist, d)
            if dist > cutoff:
                return dist
    return dist


def orbit_conjugacy(P: PeriodicOrbit, k: int, tol: float = 1e-4, n_test: int = 48) -> ConjugacyResult:
    """Compare the orbit of ``shift(P, k)`` with the orbit of ``P``.

    The two loops are identical when :func:`loop_distance` is at most
    ``tol``; ``phase`` is then the time shift ``s/T`` with
    ``shift(P(t), k) = P(t + s)``, reduced to ``[0, 1)``.
    """
    dist = loop_distance(P, P, k, n_test=n_test, cutoff=tol)
    if dist > tol:
        return ConjugacyResult(False, None, dist)
    _, t_star = _distance_to_orbit(P, shift(P.samples[0], k))
    phase = (t_star / P.period) % 1.0
    if phase > 1.0 - 1e-9:
        phase = 0.0
    return ConjugacyResult(True, phase, dist)


def wave_number(samples) -> int:
    """Dominant nonzero spatial Fourier mode, majority-voted over snapshots."""
    if isinstance(samples, PeriodicOrbit):
        samples = samples.samples
    snaps = np.atleast_2d(np.asarray(samples, dtype=float))
    dev = snaps - snaps.mean(axis=1, keepdims=True)
    varying = np.max(np.abs(dev), axis=1) > 1e-10 * max(1.0, float(np.max(np.abs(snaps))))
    n = snaps.shape[1]
    if not np.any(varying) or n < 2:
        return 0
    amp = np.abs(np.fft.rfft(dev[varying], axis=1))[:, 1 : n // 2 + 1]
    modes = np.argmax(amp, axis=1) + 1
    return int(np.argmax(np.bincount(modes)))


@dataclass(frozen=True)
class GcdCheck:
    wave_number: int
    predicted_m: int
    observed_m: int

    @property
    def agrees(self) -> bool:
        return self.predicted_m == self.observed_m


def predicted_block(n: int, wave: int) -> int:
    g = math.gcd(wave, n)
    return n // g if g > 1 else n


def gcd_symmetry_check(P: PeriodicOrbit) -> GcdCheck:
    """Block length ``n / gcd(l, n)`` implied by the wave number, against the observed one."""
    return GcdCheck(P.wave_number, predicted_block(P.n, P.wave_number), P.signature.m)


# ---------------------------------------------------------------------------
# attractor symmetry along a parameter sweep


@dataclass(frozen=True)
class ScanRow:
    F: float
    m: int


def symmetry_scan(
    n: int,
    F_grid,
    *,
    seed: int = 0,
    burn_in: float = BURN_IN,
    window: float = WINDOW,
    noise: float = 1e-6,
    init_noise: float = 1e-2,
    tol: float = 1e-5,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> list[ScanRow]:
    """Block length ``m`` of the attractor at each forcing in ``F_grid``.

    The grid is walked in the given order; each point starts from the final
    state of the previous one plus noise of size ``noise``, so the scan
    follows the stable attractor. After a blow-up (row ``m = -1``) the next
    point restarts from ``x_F`` plus noise of size ``init_noise``.
    """
    F_grid = np.asarray(F_grid, dtype=float)
    d = np.diff(F_grid)
    if d.size and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("F_grid must be strictly monotone")
    rng = np.random.default_rng(seed)
    rows: list[ScanRow] = []
    state = None
    for F in F_grid:
        params = ModelParams(n, F)
        if state is None:
            x0 = trivial_equilibrium(params) + init_noise * rng.standard_normal(n)
        else:
            x0 = state + noise * rng.standard_normal(n)
        try:
            warm = integrate(x0, params, burn_in, t_eval=[burn_in], rtol=rtol, atol=atol)
            traj = integrate(warm.final, params, window, dt=0.05, rtol=rtol, atol=atol)
        except IntegrationError as exc:
            log.warning("scan point F=%g failed: %s", F, exc)
            rows.append(ScanRow(float(F), -1))
            state = None
            continue
        rows.append(ScanRow(float(F), symmetry_signature(traj.states, tol).m))
        state = traj.final
    return rows
