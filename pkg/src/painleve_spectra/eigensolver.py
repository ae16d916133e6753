"""Bound states of -(hbar^2/2) d^2/dx^2 + V(x) on [-L, L] with Dirichlet ends.

Uniform grid, three-point Laplacian, eigenvalues by Sturm-sequence
bisection, eigenvectors by shifted inverse iteration, and Richardson
refinement over nested grids (n -> 2n - 1 halves the step).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, List

import numba
import numpy as np
from scipy.linalg import solve_banded

from .errors import BudgetExceeded, ConfigError, ConvergenceError, GridTooCoarse, SingularPotential
from .susy import GridFunction

# the default TBB layer warns on older TBB builds; workqueue is always there
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

THREADS_ENV = "PAINLEVE_SPECTRA_THREADS"
V_LIMIT = 1e12
BISECT_TOL = 1e-12
MAX_GRID = 2 ** 20


def configure_threads():
    """Cap numba threads from PAINLEVE_SPECTRA_THREADS; returns the count used."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return numba.get_num_threads()
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    k = min(k, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(k)
    return k


@dataclass(frozen=True)
class Discretization:
    L: float
    n: int                # grid points including the two Dirichlet ends
    hbar: float
    diag: np.ndarray      # interior nodes only, length n - 2
    offdiag: np.ndarray   # length n - 3, all equal to -hbar^2 / (2 h^2)

    @property
    def h(self):
        return 2 * self.L / (self.n - 1)

    @property
    def x(self):
        return np.linspace(-self.L, self.L, self.n)

    def matvec(self, v):
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out


@dataclass(frozen=True)
class Level:
    energy: float
    psi: GridFunction
    error_estimate: float    # nan when no refinement was done


@dataclass(frozen=True)
class EigenResult:
    levels: List[Level]
    n: int

    @property
    def energies(self):
        return np.array([lv.energy for lv in self.levels])


def discretize(V: Callable, L: float, n: int, hbar: float = 1.0) -> Discretization:
    if n < 64:
        raise GridTooCoarse("discretize needs n >= 64")
    if not (L > 0 and hbar > 0):
        raise ConfigError("L and hbar must be positive")
    x = np.linspace(-L, L, n)[1:-1]
    v = np.asarray(V(x), dtype=float)
    if v.shape != x.shape:
        v = np.broadcast_to(v, x.shape).astype(float)
    bad = ~np.isfinite(v) | (np.abs(v) > V_LIMIT)
    if bad.any():
        raise SingularPotential(f"|V| exceeds {V_LIMIT:g} at x={x[bad][0]:.6g}")
    h = 2 * L / (n - 1)
    kin = hbar * hbar / (h * h)
    return Discretization(L, n, hbar, kin + v, np.full(n - 3, -0.5 * kin))


@numba.njit(cache=True)
def _count_below(d, e2, sigma):
    """Number of eigenvalues < sigma (negative pivots of T - sigma I)."""
    count = 0
    q = d[0] - sigma
    if q < 0.0:
        count += 1
    for i in range(1, d.shape[0]):
        if q == 0.0:
            q = 1e-300
        q = d[i] - sigma - e2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


@numba.njit(parallel=True, cache=True)
def _bisect_lowest(d, e2, k, lo0, hi0, tol):
    out = np.empty(k)
    for j in numba.prange(k):
        lo, hi = lo0, hi0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _count_below(d, e2, mid) > j:
                hi = mid
            else:
                lo = mid
        out[j] = 0.5 * (lo + hi)
    return out


def _gershgorin(disc: Discretization):
    r = np.zeros_like(disc.diag)
    r[:-1] += np.abs(disc.offdiag)
    r[1:] += np.abs(disc.offdiag)
    return float(np.min(disc.diag - r)), float(np.max(disc.diag + r))


def _inverse_iteration(disc: Discretization, lam: float, previous, index: int,
                       max_iter=50, rtol=1e-10):
    m = disc.diag.shape[0]
    scale = max(1.0, abs(lam))
    shift = lam + 1e-13 * scale
    ab = np.zeros((3, m))
    ab[0, 1:] = disc.offdiag
    ab[1] = disc.diag - shift
    ab[2, :-1] = disc.offdiag
    # deterministic start with no symmetry, so odd and even states both appear
    v = 1.0 + 0.1 * np.cos(np.arange(m) * 0.7548776662466927)
    v /= np.linalg.norm(v)
    norm_T = max(abs(disc.diag).max() + 2 * abs(disc.offdiag).max(), 1.0)
    for _ in range(max_iter):
        try:
            w = solve_banded((1, 1), ab, v, check_finite=False)
        except np.linalg.LinAlgError:
            shift += 1e-11 * scale
            ab[1] = disc.diag - shift
            continue
        for u in previous:
            w -= (u @ w) * u
        nrm = np.linalg.norm(w)
        if not np.isfinite(nrm) or nrm == 0.0:
            break
        v = w / nrm
        res = np.linalg.norm(disc.matvec(v) - lam * v)
        if res < rtol * norm_T:
            return v
    raise ConvergenceError(f"inverse iteration did not converge for level {index}", index)


def _fix_sign(v):
    big = np.abs(v) > 1e-8 * np.abs(v).max()
    first = np.argmax(big)
    return -v if v[first] < 0 else v


def eigen_lowest(disc: Discretization, k: int) -> EigenResult:
    """k lowest eigenpairs of the discretised operator. Energies come from
    bisection to 1e-12 absolute; psi is normalised with the trapezoid rule."""
    m = disc.diag.shape[0]
    if k < 1:
        raise ConfigError("k must be at least 1")
    if k > disc.n // 4:
        raise ConfigError(f"k={k} exceeds n/4 for n={disc.n}")
    configure_threads()
    lo, hi = _gershgorin(disc)
    e2 = disc.offdiag ** 2
    energies = _bisect_lowest(disc.diag, e2, k, lo, hi, BISECT_TOL)
    if np.any(np.diff(energies) <= 0):
        j = int(np.argmax(np.diff(energies) <= 0)) + 1
        raise ConvergenceError(f"bisection returned a repeated eigenvalue at level {j}", j)
    vecs = []
    levels = []
    for j, lam in enumerate(energies):
        # explicit orthogonalisation only matters for near-degenerate pairs
        near = [u for u, mu in zip(vecs, energies[:j]) if abs(lam - mu) < 1e-9]
        v = _fix_sign(_inverse_iteration(disc, float(lam), near, j))
        vecs.append(v)
        full = np.zeros(disc.n)
        full[1:-1] = v / math.sqrt(disc.h)
        levels.append(Level(float(lam), GridFunction(disc.L, disc.n, full), math.nan))
    return EigenResult(levels, disc.n)


def refine(V: Callable, k: int, L: float = 12.0, tol: float = 1e-6, hbar: float = 1.0,
           n0: int = 2000) -> EigenResult:
    """Richardson-extrapolated k lowest levels.

    Solves on n, 2n - 1, 4n - 3, ... and combines neighbouring grids as
    (4 E_fine - E_coarse) / 3; stops when two successive extrapolations agree
    to tol on every level. error_estimate is that last difference.
    """
    if tol < 1e-10:
        raise ConfigError("tol must be >= 1e-10")
    n = n0
    coarse = eigen_lowest(discretize(V, L, n, hbar), k).energies
    prev_extrap = None
    while True:
        n = 2 * n - 1
        if n > MAX_GRID:
            raise BudgetExceeded(f"refinement needs more than {MAX_GRID} grid points")
        fine_res = eigen_lowest(discretize(V, L, n, hbar), k)
        fine = fine_res.energies
        extrap = (4 * fine - coarse) / 3
        if prev_extrap is not None:
            diff = np.abs(extrap - prev_extrap)
            if np.all(diff < tol):
                levels = [Level(float(e), lv.psi, float(dv))
                          for e, lv, dv in zip(extrap, fine_res.levels, diff)]
                return EigenResult(levels, n)
        prev_extrap, coarse = extrap, fine
