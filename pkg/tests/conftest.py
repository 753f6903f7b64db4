import contextlib
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from l96bif.model import ModelParams, vector_field


def multiset_distance(a, b) -> float:
    """Largest gap after optimally pairing two equal-size sets of complex numbers."""
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    assert a.shape == b.shape
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def fd_jacobian(x, params: ModelParams, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of the vector field."""
    x = np.asarray(x, dtype=float)
    J = np.empty((x.size, x.size))
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h
        J[:, k] = (vector_field(x + e, params) - vector_field(x - e, params)) / (2 * h)
    return J


def brute_force_block(x, tol: float) -> int:
    """Smallest m dividing n with x[j] == x[(j + m) % n] for every j, by explicit loops."""
    n = len(x)
    for m in range(1, n + 1):
        if n % m:
            continue
        if all(abs(x[j] - x[(j + m) % n]) <= tol for j in range(n)):
            return m
    raise AssertionError("unreachable")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def charpoly_gap(A, B, n_points: int = 5) -> float:
    """Relative gap between det(zI - A) and det(zI - B) on a circle enclosing both spectra.

    Stays well conditioned for defective matrices, where eigenvalue
    comparisons lose half the digits.
    """
    A, B = np.asarray(A), np.asarray(B)
    n = A.shape[0]
    radius = 2.0 * (1.0 + max(np.linalg.norm(A, 2), np.linalg.norm(B, 2)))
    gap = 0.0
    for z in radius * np.exp(2j * np.pi * np.arange(n_points) / n_points + 0.3j):
        da = np.linalg.det(z * np.eye(n) - A)
        db = np.linalg.det(z * np.eye(n) - B)
        gap = max(gap, abs(da - db) / abs(da))
    return gap


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Context manager that records the outcome of one acceptance criterion."""

    @contextlib.contextmanager
    def record(tag: str, title: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            if not isinstance(exc, pytest.skip.Exception):
                line = f"FAIL  {tag:<8} {title}  ({time.perf_counter() - start:.1f}s): {exc}".splitlines()[0]
                request.config.stash[_ACCEPTANCE].append(line)
                print(line)
            raise
        line = f"PASS  {tag:<8} {title}  ({time.perf_counter() - start:.1f}s)"
        request.config.stash[_ACCEPTANCE].append(line)
        print(line)

    return record


def _criterion_order(line: str):
    tag = line.split()[1]
    digits = "".join(c for c in tag if c.isdigit())
    return (int(digits) if digits else 0, tag)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_order):
            terminalreporter.write_line(line)
