"""Fourth Painlevé transcendent: closed-form special solutions, an adaptive
integrator for generic initial data, and the complementary error function
used by the erfc family.

The ODE throughout is

    f'' = f'^2/(2f) + 3/2 f^3 + 4 z f^2 + 2 (z^2 - alpha) f + beta / f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import BPoly

from .errors import DomainError, PoleError, PoleEscape, ZeroCrossing

POLE_DENOMINATOR = 1e-12
ESCAPE_THRESHOLD = 1e6
SMALL_F = 1e-12

_SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# complementary error function
# ---------------------------------------------------------------------------

_SERIES_TERMS = 64
_CF_DEPTH = 160


def _erf_series(z):
    # erf(z) = 2/sqrt(pi) e^{-z^2} sum_n (2 z^2)^n z / (2n+1)!!  -- all terms positive
    z2 = 2.0 * z * z
    term = z.copy()
    total = z.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * z2 / (2 * n + 1)
        total = total + term
    return 2.0 / _SQRT_PI * np.exp(-z * z) * total


def _erfc_cf(z):
    # Laplace continued fraction, evaluated bottom-up; z > 2 only
    tail = np.zeros_like(z)
    for k in range(_CF_DEPTH, 0, -1):
        tail = (0.5 * k) / (z + tail)
    return np.exp(-z * z) / _SQRT_PI / (z + tail)


def erfc(z):
    """Complementary error function, (2/sqrt(pi)) * integral_z^inf exp(-t^2) dt.

    Accepts scalars or arrays; returns the same shape. Uses the positive-term
    series for |z| <= 2 and a continued fraction above, reflected through
    erfc(-z) = 2 - erfc(z) for negative arguments.
    """
    arr = np.asarray(z, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    a = np.abs(flat)
    inner = a <= 2.0
    if inner.any():
        out[inner] = 1.0 - _erf_series(flat[inner])
    outer = ~inner
    if outer.any():
        tail = _erfc_cf(a[outer])
        out[outer] = np.where(flat[outer] > 0, tail, 2.0 - tail)
    out = out.reshape(np.shape(arr))
    return float(out) if np.ndim(arr) == 0 else out


# ---------------------------------------------------------------------------
# parameters and solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class P4Params:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise DomainError("alpha and beta must be finite")


def p4_rhs(z, f, fprime, params: P4Params):
    """Right-hand side of the ODE, f'' as a function of (z, f, f')."""
    f = np.asarray(f, dtype=float)
    if np.any(np.abs(f) < SMALL_F):
        raise DomainError("1/f term undefined: |f| < 1e-12")
    return (fprime ** 2 / (2 * f) + 1.5 * f ** 3 + 4 * z * f ** 2
            + 2 * (z ** 2 - params.alpha) * f + params.beta / f)


def real_array(x):
    """x as a float array, keeping long double input in long double."""
    arr = np.asarray(x)
    if arr.dtype == np.longdouble:
        return arr
    return arr.astype(float)


@dataclass(frozen=True)
class _RationalForm:
    """f(z) = slope * z + num(z) / den(z), with exact derivatives."""
    slope: float
    num: Polynomial
    den: Polynomial

    def __call__(self, z, order=2):
        z = real_array(z)
        q = self.den(z)
        if np.any(np.abs(q) < POLE_DENOMINATOR):
            bad = np.atleast_1d(z)[np.atleast_1d(np.abs(q) < POLE_DENOMINATOR)][0]
            raise PoleError(f"pole of the closed form at z={bad:g}")
        p = self.num(z)
        p1, q1 = self.num.deriv()(z), self.den.deriv()(z)
        p2, q2 = self.num.deriv(2)(z), self.den.deriv(2)(z)
        cross = p1 * q - p * q1
        f = self.slope * z + p / q
        f1 = self.slope + cross / q ** 2
        f2 = ((p2 * q - p * q2) * q - 2 * q1 * cross) / q ** 3
        return f, f1, f2


def _poly(*coeffs):
    return Polynomial(coeffs)


# coefficients lowest order first
_RATIONAL = {
    # 4z(2z^2-1)(2z^2+3) / ((2z^2+1)(4z^4+3))
    "A": _RationalForm(0.0, _poly(0, -12, 0, 16, 0, 16), _poly(3, 0, 6, 0, 4, 0, 8)),
    "B": _RationalForm(-2.0 / 3.0, _poly(0.0), _poly(1.0)),
    # -2z/3 - (2z^2-3) / (z(2z^2+3))
    "C": _RationalForm(-2.0 / 3.0, _poly(3, 0, -2), _poly(0, 3, 0, 2)),
}

CATALOGUE_PARAMS = {
    "A": P4Params(5.0, -8.0),
    "B": P4Params(0.0, -2.0 / 9.0),
    "C": P4Params(-1.0, -32.0 / 9.0),
    "D": P4Params(0.0, -2.0),
    "E": P4Params(0.0, -2.0),
}

# epsilon of the section heading each catalogue function first appears under
CATALOGUE_EPSILON = {"A": 1, "B": 1, "C": 1, "D": 1, "E": -1}


@dataclass(frozen=True)
class P4Solution:
    """An evaluable solution f(z) of the ODE.

    ``kind`` is ``"catalogue"`` (rational closed form, ``case_id`` in A-C),
    ``"erfc"`` (the one-parameter family f = -2z - psi'/psi with
    psi = 1 - t erfc(z), ``case_id`` D or E) or ``"integrated"`` (samples
    from :func:`p4_integrate`).
    """
    params: P4Params
    kind: str
    case_id: Optional[str] = None
    t: float = 0.0
    z: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    f: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    fp: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    fpp: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("catalogue", "erfc", "integrated"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "integrated":
            object.__setattr__(self, "_interp", _hermite(self.z, self.f, self.fp, self.fpp))

    def derivatives(self, z):
        """Return (f, f', f'') at z. f'' is computed independently of the
        ODE for closed forms, so residuals of those are genuine checks."""
        if self.kind == "catalogue":
            return _RATIONAL[self.case_id](z)
        if self.kind == "erfc":
            return _erfc_family(z, self.t)
        z = np.asarray(z, dtype=float)
        lo, hi = self.z[0], self.z[-1]
        if np.any((z < lo - 1e-12) | (z > hi + 1e-12)):
            raise DomainError(f"z outside integrated range [{lo:g}, {hi:g}]")
        ip = self._interp
        if ip is None:
            one = np.ones_like(z)
            return self.f[0] * one, self.fp[0] * one, self.fpp[0] * one
        return ip(z), ip.derivative(1)(z), ip.derivative(2)(z)

    def __call__(self, z):
        f, fp, _ = self.derivatives(z)
        return f, fp

    @property
    def z_range(self):
        if self.kind == "integrated":
            return float(self.z[0]), float(self.z[-1])
        return -math.inf, math.inf


def _hermite(z, f, fp, fpp):
    if len(z) < 2:
        return None
    return BPoly.from_derivatives(z, np.column_stack([f, fp, fpp]))


def _erfc_family(z, t):
    z = np.asarray(z, dtype=float)
    psi = 1.0 - t * erfc(z)
    if np.any(np.abs(psi) < POLE_DENOMINATOR):
        raise PoleError("1 - t erfc(z) vanishes: pole of the erfc family")
    if np.any(psi < 0):
        raise DomainError("1 - t erfc(z) < 0 outside the admissible window")
    # Psi = psi'/psi; psi'' = -2 z psi' gives Psi' = -2 z Psi - Psi^2
    big_psi = (2.0 * t / _SQRT_PI) * np.exp(-z * z) / psi
    d1 = -2 * z * big_psi - big_psi ** 2
    d2 = -2 * big_psi - 2 * z * d1 - 2 * big_psi * d1
    return -2 * z - big_psi, -2 - d1, -d2


def catalogue(case_id: str, t: float = 0.0) -> P4Solution:
    """Closed-form special solution by catalogue id (A, B, C, D, E).

    D and E share the erfc family f = -2z - psi'/psi; they differ only in
    the epsilon they are paired with in the potential (+1 and -1).
    """
    case_id = case_id.upper()
    if case_id not in CATALOGUE_PARAMS:
        raise KeyError(f"unknown catalogue entry {case_id!r}")
    params = CATALOGUE_PARAMS[case_id]
    if case_id in ("D", "E"):
        return P4Solution(params, "erfc", case_id=case_id, t=float(t))
    return P4Solution(params, "catalogue", case_id=case_id)


def p4_eval(sol: P4Solution, z):
    """(f(z), f'(z)) for any solution kind."""
    return sol(z)


def p4_residual(f, fprime, fsecond, z, params: P4Params):
    """f'' minus the right-hand side of the ODE; zero on exact solutions."""
    return np.asarray(fsecond) - p4_rhs(z, f, fprime, params)


# ---------------------------------------------------------------------------
# adaptive integration
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4). The state is carried in extended precision: the
# rational solutions are unstable along the real axis (nearby solutions
# separate like exp(z^2)), so double rounding alone would swamp a 1e-8
# target after a few units of z.
_LD = np.longdouble


def _q(num, den=1):
    return _LD(num) / _LD(den)


_C = [_q(0), _q(1, 5), _q(3, 10), _q(4, 5), _q(8, 9), _q(1), _q(1)]
_A = [
    [],
    [_q(1, 5)],
    [_q(3, 40), _q(9, 40)],
    [_q(44, 45), _q(-56, 15), _q(32, 9)],
    [_q(19372, 6561), _q(-25360, 2187), _q(64448, 6561), _q(-212, 729)],
    [_q(9017, 3168), _q(-355, 33), _q(46732, 5247), _q(49, 176), _q(-5103, 18656)],
    [_q(35, 384), _q(0), _q(500, 1113), _q(125, 192), _q(-2187, 6784), _q(11, 84)],
]
_B5 = _A[6] + [_q(0)]
_B4 = [_q(5179, 57600), _q(0), _q(7571, 16695), _q(393, 640), _q(-92097, 339200),
       _q(187, 2100), _q(1, 40)]
_E = [b5 - b4 for b5, b4 in zip(_B5, _B4)]


class _ZeroHit(Exception):
    def __init__(self, z):
        self.z = z


class _Escape(Exception):
    def __init__(self, z):
        self.z = z


class _System:
    """First-order form of the ODE.

    For beta < 0 the state is (f, w) with
        f' = f^2 + 2 z f - 2 f w + k,
        w' = w^2 - 2 w f - 2 z w + (k + 2 + 2 alpha) / 2,
    where k^2 = -2 beta. This is polynomial, so simple zeros of f (where
    f'^2 = -2 beta) are crossed without dividing by f. The sign of k is
    switched to follow sign(f') so that w stays bounded at each zero.
    For beta >= 0 the plain state (f, f') is used.
    """

    def __init__(self, params: P4Params):
        self.alpha = _LD(params.alpha)
        self.beta = _LD(params.beta)
        self.kmag = np.sqrt(-2 * self.beta) if params.beta < 0 else None
        self.k = self.kmag

    @property
    def regularised(self):
        return self.kmag is not None

    def rhs(self, z, y):
        f, v = y
        if self.regularised:
            k = self.k
            return (f * f + 2 * z * f - 2 * f * v + k,
                    v * v - 2 * v * f - 2 * z * v + (k + 2 + 2 * self.alpha) / 2)
        if abs(f) < SMALL_F:
            raise _ZeroHit(float(z))
        return (v, v * v / (2 * f) + _q(3, 2) * f ** 3 + 4 * z * f * f
                + 2 * (z * z - self.alpha) * f + self.beta / f)

    def to_state(self, z, f, fp):
        f, fp = _LD(f), _LD(fp)
        if not self.regularised:
            return (f, fp)
        self.k = self.kmag if fp >= 0 else -self.kmag
        return (f, (f * f + 2 * z * f + self.k - fp) / (2 * f))

    def observe(self, z, y):
        """(f, f', f'') from the state."""
        f, v = y
        if not self.regularised:
            return f, v, self.rhs(z, y)[1]
        fp, wp = self.rhs(z, y)
        fpp = 2 * f * fp + 2 * f + 2 * z * fp - 2 * fp * v - 2 * f * wp
        return f, fp, fpp

    def maybe_flip(self, y, fp):
        if not self.regularised:
            return y
        f, v = y
        if fp * self.k < 0 and abs(fp) > self.kmag / 2 and f != 0:
            v = v - self.k / f
            self.k = -self.k
        return (f, v)


def _dopri_step(system, z, y, k1, h):
    ks = [k1]
    for i in range(1, 7):
        yi = tuple(y[j] + h * sum(a * kk[j] for a, kk in zip(_A[i], ks)) for j in (0, 1))
        ks.append(system.rhs(z + _C[i] * h, yi))
    y5 = tuple(y[j] + h * sum(b * kk[j] for b, kk in zip(_B5, ks)) for j in (0, 1))
    err = tuple(h * sum(e * kk[j] for e, kk in zip(_E, ks)) for j in (0, 1))
    return y5, err, ks[6]


def _integrate_one_way(system, z0, y0, targets, tol, max_steps, record):
    """Integrate from z0 through ``targets`` (sorted away from z0, one side)."""
    direction = 1 if targets[-1] > z0 else -1
    z, y = _LD(z0), y0
    k1 = system.rhs(z, y)
    h = _LD(direction * min(0.01, abs(targets[-1] - z0)))
    tol = _LD(tol)
    for target in targets:
        target = _LD(target)
        while direction * (target - z) > 0:
            if max_steps <= 0:
                raise RuntimeError("step budget exhausted")
            max_steps -= 1
            landing = direction * (z + h - target) >= 0
            if landing:
                h = target - z
            y_new, err, k_new = _dopri_step(system, z, y, k1, h)
            if all(np.isfinite(c) for c in y_new):
                ratio = max(abs(e) / (tol * max(1, abs(a), abs(b)))
                            for e, a, b in zip(err, y, y_new))
            else:
                ratio = _LD(np.inf)
            if ratio <= 1:
                z = target if landing else z + h
                y = y_new
                f, fp, fpp = system.observe(z, y)
                if abs(f) > ESCAPE_THRESHOLD:
                    raise _Escape(float(z + f / fp) if fp != 0 else float(z))
                record(z, f, fp, fpp)
                flipped = system.maybe_flip(y, fp)
                k1 = k_new if flipped is y else system.rhs(z, flipped)
                y = flipped
                grow = 5 if ratio == 0 else min(5, 0.9 * float(ratio) ** -0.2)
                h = h * _LD(grow)
            else:
                shrink = 0.2 if not np.isfinite(ratio) else max(0.2, 0.9 * float(ratio) ** -0.2)
                h = h * _LD(shrink)
                if abs(h) < 1e-15 * max(1.0, abs(float(z))):
                    if abs(y[0]) > 1e3:
                        raise _Escape(float(z))
                    raise _ZeroHit(float(z))


def p4_integrate(params: P4Params, z0: float, f0: float, f0prime: float,
                 z_targets: Sequence[float], tol: float = 1e-12,
                 max_steps: int = 500_000) -> P4Solution:
    """Integrate the ODE from (z0, f0, f0') and return an ``integrated``
    P4Solution sampled at every accepted step, landing exactly on each of
    ``z_targets`` (either side of z0).

    Raises PoleEscape when |f| passes 1e6 and ZeroCrossing when f vanishes
    where the 1/f term cannot be regularised (initial data at a zero, or
    beta >= 0); both carry the samples computed so far in ``partial``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    targets = np.unique(np.asarray(z_targets, dtype=float))
    samples = {float(z0): (float(f0), float(f0prime), None)}

    def record(z, f, fp, fpp):
        samples[float(z)] = (float(f), float(fp), float(fpp))

    def partial():
        zs = np.array(sorted(samples))
        cols = np.array([samples[k] for k in zs], dtype=float)
        return P4Solution(params, "integrated", z=zs, f=cols[:, 0], fp=cols[:, 1], fpp=cols[:, 2])

    if abs(f0) < 1e-8:
        raise ZeroCrossing(f"initial value f0={f0:g} is at a zero of f", z0)
    system = _System(params)
    samples[float(z0)] = (float(f0), float(f0prime),
                          float(system.observe(_LD(z0), system.to_state(_LD(z0), f0, f0prime))[2]))
    try:
        for side in (targets[targets > z0], targets[targets < z0][::-1]):
            if len(side):
                system = _System(params)
                y0 = system.to_state(_LD(z0), f0, f0prime)
                _integrate_one_way(system, z0, y0, side, tol, max_steps, record)
    except _Escape as exc:
        raise PoleEscape(f"|f| exceeded {ESCAPE_THRESHOLD:g}; pole near z={exc.z:.12g}",
                         exc.z, partial()) from None
    except _ZeroHit as exc:
        raise ZeroCrossing(f"f reached zero near z={exc.z:.12g}", exc.z, partial()) from None
    return partial()
