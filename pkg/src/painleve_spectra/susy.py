"""Third-order shape invariance for the x part of the potential.

SUSY units: H = -d^2/dx^2 + V, with physical energy
E_phys = (hbar^2 / 2) E_susy + c, where c is the additive constant between
g1 and (hbar^2 / 2) V (see ``calibration_offset``). The variant V1 goes
with epsilon = -1 and V2 with epsilon = +1.

With h(x) = sqrt(lam)/2 f(sqrt(lam) x) and s = sqrt(-d):
    W3 = -2h - lam x,   W1,2 = -h +- (h' - s) / (2h)
    q+ = d/dx + W3,     q = -d/dx + W3
    M+ = d^2 - 2h d + b,  M = d^2 + 2h d + b + 2h'
where b = -h' - 2h^2 - 4 lam x h - lam^2 x^2 + lam + gamma. M is the formal
adjoint of M+; the ladder intertwining needs that exact pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import DomainError, GridTooCoarse, InconsistentError, PoleError, SingularWavefunction
from .potentials import ModelParams, g1_from_f
from .special_functions import P4Solution, _RATIONAL, real_array

NORM_WINDOWS = (8.0, 12.0, 16.0)
NORM_RTOL = 1e-6


@dataclass(frozen=True)
class SusyParams:
    lam: float
    gamma: float
    d: float

    @property
    def reducible(self):
        return self.d <= 0

    @property
    def s(self):
        """sqrt(-d); only defined in the reducible regime."""
        if self.d > 0:
            raise DomainError("sqrt(-d) is imaginary for d > 0")
        return math.sqrt(-self.d)


def map_params(params: ModelParams) -> SusyParams:
    lam = params.omega / params.hbar
    return SusyParams(lam, lam * (params.alpha - 1), params.beta * lam * lam / 2)


def variant_for(params: ModelParams) -> str:
    return "V2" if params.epsilon == 1 else "V1"


@dataclass(frozen=True)
class GridFunction:
    L: float
    n: int
    values: np.ndarray
    flagged: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 16:
            raise GridTooCoarse("GridFunction needs n >= 16")
        vals = real_array(self.values)
        if vals.shape != (self.n,):
            raise ValueError("values must have length n")
        if not np.all(np.isfinite(vals)):
            raise ValueError("GridFunction values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def x(self):
        t = self.values.dtype.type
        return np.linspace(t(-self.L), t(self.L), self.n)

    @property
    def h(self):
        tp = self.values.dtype.type
        return tp(2) * tp(self.L) / (self.n - 1)

    @classmethod
    def sample(cls, fn: Callable, L: float, n: int, dtype=float):
        """fn on the grid; ``dtype=np.longdouble`` keeps extra digits for
        high-order operator checks."""
        return cls(L, n, fn(np.linspace(dtype(-L), dtype(L), n)))

    def interior(self, margin=2):
        mask = np.ones(self.n, dtype=bool)
        mask[:margin] = False
        mask[self.n - margin:] = False
        if self.flagged:
            mask[list(self.flagged)] = False
        return mask

    def with_values(self, values, flagged=()):
        return GridFunction(self.L, self.n, values, tuple(sorted(set(self.flagged) | set(flagged))))


# ---------------------------------------------------------------------------
# superpotentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Superpotentials:
    sp: SusyParams
    solution: P4Solution

    def h(self, x):
        """(h, h', h'') at x."""
        lam = self.sp.lam
        r = math.sqrt(lam)
        f, fp, fpp = self.solution.derivatives(r * real_array(x))
        return 0.5 * r * f, 0.5 * lam * fp, 0.5 * lam * r * fpp

    def W3(self, x):
        h, _, _ = self.h(x)
        return -2 * h - self.sp.lam * real_array(x)

    def W12(self, x):
        h, hp, _ = self.h(x)
        s = self.sp.s
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (hp - s) / (2 * h)
        return -h + t, -h - t

    def W1(self, x):
        return self.W12(x)[0]

    def W2(self, x):
        return self.W12(x)[1]

    def b(self, x):
        """Zeroth-order coefficient of M+, written without 1/h terms."""
        h, hp, _ = self.h(x)
        x = real_array(x)
        lam = self.sp.lam
        return -hp - 2 * h * h - 4 * lam * x * h - lam * lam * x * x + lam + self.sp.gamma

    def b_quotient(self, x):
        """The same coefficient in its original quotient form (singular where h = 0)."""
        h, hp, hpp = self.h(x)
        return -hp + h * h - hpp / (2 * h) + hp * hp / (4 * h * h) + self.sp.d / (4 * h * h)

    def potential(self, variant, x):
        h, hp, _ = self.h(x)
        x = real_array(x)
        lam = self.sp.lam
        sign = -2 if variant == "V1" else 2
        if variant not in ("V1", "V2"):
            raise ValueError(f"unknown variant {variant!r}")
        return sign * hp + 4 * h * h + 4 * lam * x * h + lam * lam * x * x - lam

    def singular_points(self, L):
        """Zeros of h and poles of f with |x| <= L: the places where some W
        has a simple pole."""
        r = math.sqrt(self.sp.lam)
        pts = set()
        sol = self.solution
        if sol.kind == "catalogue":
            form = _RATIONAL[sol.case_id]
            for z in form.den.roots():
                if abs(z.imag) < 1e-12 and abs(z.real) <= r * L:
                    pts.add(float(z.real) / r)
            num = form.num + form.den * np.polynomial.Polynomial([0, form.slope])
            for z in num.roots():
                if abs(z.imag) < 1e-10 and abs(z.real) <= r * L:
                    pts.add(float(z.real) / r)
        else:
            xs = np.linspace(-L, L, 4001)
            lo, hi = sol.z_range
            xs = xs[(r * xs >= lo) & (r * xs <= hi)]
            hv = self.h(xs)[0]
            for i in np.nonzero(hv == 0)[0]:
                pts.add(float(xs[i]))
            for i in np.nonzero(hv[:-1] * hv[1:] < 0)[0]:
                pts.add(brentq(lambda t: float(self.h(t)[0]), xs[i], xs[i + 1], xtol=1e-15))
        return np.array(sorted(_dedupe(pts)))


def _dedupe(values, tol=1e-9):
    out = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > tol:
            out.append(v)
    return out


def superpotentials(params: ModelParams, solution: P4Solution) -> Superpotentials:
    sol_p = solution.params
    if (sol_p.alpha, sol_p.beta) != (params.alpha, params.beta):
        raise DomainError("P4Solution parameters differ from ModelParams")
    return Superpotentials(map_params(params), solution)


def susy_potentials(sp: SusyParams, f: P4Solution, variant: str):
    """V1 or V2 as a callable of x in SUSY units."""
    W = Superpotentials(sp, f)
    return lambda x: W.potential(variant, x)


def expected_offset(params: ModelParams, variant: str) -> float:
    """Analytic value of g1 - (hbar^2/2) V for the variant matching epsilon."""
    eps = 1 if variant == "V2" else -1
    return params.hbar * params.omega * (0.5 + (eps - params.alpha) / 3)


def calibration_offset(params: ModelParams, W: Superpotentials, variant: str, grid, rtol=1e-9):
    """Measured constant c with g1(x) = (hbar^2/2) V(x) + c on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    f, fp = W.solution(np.sqrt(W.sp.lam) * grid)
    if variant != variant_for(params):
        raise DomainError(f"variant {variant} does not belong to epsilon={params.epsilon:+d}")
    diff = g1_from_f(params, grid, f, fp) - params.hbar ** 2 / 2 * W.potential(variant, grid)
    c = float(np.median(diff))
    if np.max(np.abs(diff - c)) > rtol * max(1.0, abs(c)):
        raise InconsistentError("g1 and the SUSY potential differ by a non-constant amount")
    return c


def physical_energy(params: ModelParams, e_susy, offset):
    return params.hbar ** 2 / 2 * np.asarray(e_susy) + offset


# ---------------------------------------------------------------------------
# zero modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Candidate:
    label: str
    operator: str
    energy: Callable          # SusyParams -> float
    prefactor: Callable       # (W, x, h, hp) -> array
    exponent: Tuple[int, str]  # (sign, which W) : psi ~ exp(sign * int W)
    needs_s: bool = True


def _pf_one(W, x, h, hp):
    return np.ones_like(x)


def _pf_minus2h(W, x, h, hp):
    return -2 * h


def _pf_v1_psi2(W, x, h, hp):
    # W2 - W3
    with np.errstate(divide="ignore", invalid="ignore"):
        return h + W.sp.lam * x - (hp - W.sp.s) / (2 * h)


def _pf_v1_psi3(W, x, h, hp):
    # 2s + (W2 - W3)(W1 + W2)
    return W.sp.s + hp - 2 * h * h - 2 * W.sp.lam * x * h


def _pf_v1_phi3(W, x, h, hp):
    # gamma + 2 lam + s + (W1 + W2)(W2 - W3)
    return W.sp.gamma + 2 * W.sp.lam + hp - 2 * h * h - 2 * W.sp.lam * x * h


def _pf_v2_psi1(W, x, h, hp):
    # gamma - s + (W1 + W2)(W1 - W3); the s terms cancel, valid for any d
    return W.sp.gamma - hp - 2 * h * h - 2 * W.sp.lam * x * h


def _pf_v2_phi2(W, x, h, hp):
    # W1 - W3
    with np.errstate(divide="ignore", invalid="ignore"):
        return h + W.sp.lam * x + (hp - W.sp.s) / (2 * h)


def _pf_v2_phi3(W, x, h, hp):
    # -2s + (W1 - W3)(W1 + W2)
    return -W.sp.s - hp - 2 * h * h - 2 * W.sp.lam * x * h


_CANDIDATES = {
    ("V1", "annihilation"): [
        _Candidate("psi1", "annihilation", lambda p: 0.0, _pf_one, (1, "W3"), False),
        _Candidate("psi2", "annihilation", lambda p: p.gamma + 2 * p.lam + p.s, _pf_v1_psi2, (-1, "W2")),
        _Candidate("psi3", "annihilation", lambda p: p.gamma + 2 * p.lam - p.s, _pf_v1_psi3, (-1, "W1")),
    ],
    ("V1", "creation"): [
        _Candidate("phi1", "creation", lambda p: p.gamma - p.s, _pf_one, (1, "W1")),
        _Candidate("phi2", "creation", lambda p: p.gamma + p.s, _pf_minus2h, (1, "W2")),
        _Candidate("phi3", "creation", lambda p: -2 * p.lam, _pf_v1_phi3, (-1, "W3")),
    ],
    ("V2", "annihilation"): [
        _Candidate("psi1", "annihilation", lambda p: 0.0, _pf_v2_psi1, (1, "W3"), False),
        _Candidate("psi2", "annihilation", lambda p: p.gamma - p.s, _pf_minus2h, (-1, "W1")),
        _Candidate("psi3", "annihilation", lambda p: p.gamma + p.s, _pf_one, (-1, "W2")),
    ],
    ("V2", "creation"): [
        _Candidate("phi1", "creation", lambda p: -2 * p.lam, _pf_one, (-1, "W3"), False),
        _Candidate("phi2", "creation", lambda p: p.gamma - 2 * p.lam - p.s, _pf_v2_phi2, (1, "W1")),
        _Candidate("phi3", "creation", lambda p: p.gamma - 2 * p.lam + p.s, _pf_v2_phi3, (1, "W2")),
    ],
}


@dataclass
class ZeroMode:
    label: str
    operator: str
    energy: float                 # SUSY units
    normalizable: bool
    reason: str = ""
    norms: Tuple[float, ...] = ()  # log of int psi^2 over the three windows
    wavefunction: Optional[GridFunction] = field(default=None, repr=False)
    condition: float = 0.0        # relative sensitivity of the prefactor to h, h'


@dataclass
class ZeroModeSet:
    variant: str
    operator: str
    modes: List[ZeroMode]

    @property
    def normalizable(self):
        return [m for m in self.modes if m.normalizable]


class _LogWave:
    """log|psi| and sign(psi) for psi = P exp(sign * int W).

    Simple poles of W (at zeros of h and poles of f) have integer residues
    and are integrated analytically as r log|x - x0|; the smooth remainder
    goes through cumulative Simpson on a grid four times finer. At each
    singular point the local power k of psi is measured: k < 0 means psi
    diverges there, k > 0 gives psi = 0, k = 0 takes the two-sided limit.
    """

    HIT = 1e-6      # relative distance treated as "on" a singular point
    STEP = 1e-4     # offset used to evaluate limits

    def __init__(self, W: Superpotentials, cand: _Candidate, span: float):
        self.W, self.cand = W, cand
        self.scale = 1 / math.sqrt(W.sp.lam)
        self.sign_w = cand.exponent[0]
        sing = W.singular_points(span + self.scale)
        self.res = [(x0, self.sign_w * self._residue(x0)) for x0 in sing]

    def _w(self, x):
        which = self.cand.exponent[1]
        if which == "W3":
            return self.W.W3(x)
        w1, w2 = self.W.W12(x)
        return w1 if which == "W1" else w2

    def _residue(self, x0):
        d = 1e-6 * self.scale
        return int(round(0.5 * d * (self._w(x0 + d) - self._w(x0 - d))))

    def _regular(self, x):
        reg = self.sign_w * self._w(x)
        for x0, r in self.res:
            reg = reg - r / (x - x0)
        return reg

    def _pieces(self, x):
        """log|P| + sum r log|x - x0| and the matching sign, off singular points."""
        h, hp, _ = self.W.h(x)
        P = self.cand.prefactor(self.W, x, h, hp)
        with np.errstate(divide="ignore"):
            out = np.log(np.abs(P))
        sign = np.sign(P)
        for x0, r in self.res:
            out = out + r * np.log(np.abs(x - x0))
            if r % 2:
                sign = sign * np.sign(x - x0)
        return out, sign

    def local_power(self, x0):
        d1, d2 = self.STEP * self.scale, 1e-2 * self.STEP * self.scale
        pts = np.array([x0 + d1, x0 + d2, x0 - d1, x0 - d2])
        la, _ = self._pieces(pts)
        k_plus = (la[0] - la[1]) / math.log(d1 / d2)
        k_minus = (la[2] - la[3]) / math.log(d1 / d2)
        return int(round(min(k_plus, k_minus)))

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        tol = self.HIT * self.scale
        for x0, _ in self.res:
            if x[0] - tol <= x0 <= x[-1] + tol and self.local_power(x0) < 0:
                raise SingularWavefunction(f"{self.cand.label} diverges at x={x0:.6g}")
        fine = np.linspace(x[0], x[-1], 4 * (len(x) - 1) + 1)
        hit = np.zeros(fine.shape, dtype=bool)
        for x0, _ in self.res:
            hit |= np.abs(fine - x0) < tol
        d = self.STEP * self.scale
        reg = self._regular(np.where(hit, fine + d, fine))
        if hit.any():
            reg[hit] = self._direct(self._regular, fine[hit])
        bad = hit & ~np.isfinite(reg)
        if bad.any():
            reg[bad] = self._limit(self._regular, fine[bad], d)
        if not np.all(np.isfinite(reg)):
            raise SingularWavefunction(f"{self.cand.label}: exponent not integrable on the grid")
        G = cumulative_simpson(reg, x=fine, initial=0.0)[::4]
        G = G - G[np.argmin(np.abs(x))]

        on = np.zeros(x.shape, dtype=bool)
        for x0, _ in self.res:
            on |= np.abs(x - x0) < tol
        log_abs, sign = self._pieces(np.where(on, x + d, x))
        if on.any():
            log_abs[on] = self._direct(lambda t: self._pieces(t)[0], x[on])
            sign[on] = np.sign(self._direct(lambda t: self._pieces(t)[1], x[on]))
        for i in np.nonzero(on & ~np.isfinite(log_abs))[0]:
            x0 = min(self.res, key=lambda t: abs(t[0] - x[i]))[0]
            if self.local_power(x0) > 0:
                log_abs[i], sign[i] = -np.inf, 0.0
                continue
            # scale by the value just off the point so the limit is O(1)
            ref = self._pieces(np.array([x0 + d]))[0][0]

            def scaled(t, ref=ref):
                lv, sv = self._pieces(t)
                return sv * np.exp(lv - ref)
            val = float(self._limit(scaled, np.array([x0]), d)[0])
            log_abs[i] = ref + math.log(abs(val)) if val != 0 else -np.inf
            sign[i] = np.sign(val)
        return log_abs + G, sign

    @staticmethod
    def _direct(fn, x):
        """fn at points that may sit on a pole of f; those come back as nan."""
        out = np.empty(len(x))
        for i, xi in enumerate(x):
            try:
                with np.errstate(divide="ignore", invalid="ignore"):
                    out[i] = fn(np.array([xi]))[0]
            except PoleError:
                out[i] = np.nan
        return out

    def vanishes(self, x):
        """True when the prefactor is identically zero on the sample x."""
        h, hp, _ = self.W.h(x)
        P = self.cand.prefactor(self.W, x, h, hp)
        scale = np.max(np.abs(h)) ** 2 + np.max(np.abs(hp)) + self.W.sp.lam * (1 + np.max(np.abs(x)))
        return bool(np.all(np.abs(P) <= 1e-12 * scale))

    @staticmethod
    def _limit(fn, x0, d):
        """Two-sided limit of fn at x0: symmetric averages at d and d/2
        combined by Richardson, error O(d^4)."""
        a1 = 0.5 * (fn(x0 + d) + fn(x0 - d))
        a2 = 0.5 * (fn(x0 + d / 2) + fn(x0 - d / 2))
        return (4 * a2 - a1) / 3


def _zero_mode(W, cand, L, n):
    lam = W.sp.lam
    if cand.needs_s and not W.sp.reducible:
        return None
    energy = float(cand.energy(W.sp))
    span = NORM_WINDOWS[-1] / math.sqrt(lam)
    span = max(span, L)
    try:
        wave = _LogWave(W, cand, span)
        probe = np.linspace(-2.0, 2.0, 41) / math.sqrt(lam) + 0.0123
        if wave.vanishes(probe):
            return ZeroMode(cand.label, cand.operator, energy, False, "prefactor vanishes identically")
        xb = np.linspace(-span, span, 8 * 400 + 1)
        lb, _ = wave.evaluate(xb)
    except SingularWavefunction as exc:
        return ZeroMode(cand.label, cand.operator, energy, False, str(exc))
    except DomainError as exc:
        return ZeroMode(cand.label, cand.operator, energy, False, f"undefined: {exc}")
    hb = xb[1] - xb[0]
    logw = np.full(xb.shape, math.log(hb))
    logw[[0, -1]] = math.log(hb / 2)
    norms = []
    for Lw in NORM_WINDOWS:
        m = np.abs(xb) <= Lw / math.sqrt(lam) + 1e-12
        norms.append(float(logsumexp(2 * lb[m] + logw[m])))
    converged = all(abs(1 - math.exp(v - norms[-1])) < NORM_RTOL for v in norms[:-1])
    if not converged:
        return ZeroMode(cand.label, cand.operator, energy, False, "norm grows with the window",
                        tuple(norms))
    xs = np.linspace(-L, L, n)
    la, sa = wave.evaluate(xs)
    psi = sa * np.exp(la - np.max(la))
    psi = psi / math.sqrt(np.trapezoid(psi * psi, dx=2 * L / (n - 1)))
    return ZeroMode(cand.label, cand.operator, energy, True, "", tuple(norms),
                    GridFunction(L, n, psi), _condition(W, cand, xs, psi))


def _condition(W, cand, x, psi, delta=1e-8):
    """Largest relative change of the prefactor per unit relative change of
    (h, h') where psi is not negligible. Near 1/eps the prefactor is lost to
    cancellation and the sampled psi is noise."""
    keep = np.abs(psi) > 1e-10 * np.abs(psi).max()
    # singular points are filled by limits, not by the prefactor
    for x0 in W.singular_points(float(np.max(np.abs(x)))):
        keep &= np.abs(x - x0) > 1e-3 / math.sqrt(W.sp.lam)
    x = x[keep]
    h, hp, _ = W.h(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        p0 = cand.prefactor(W, x, h, hp)
        p1 = cand.prefactor(W, x, h * (1 + delta), hp * (1 + delta))
        kappa = np.abs(p1 - p0) / (delta * np.abs(p0))
    kappa = kappa[np.isfinite(kappa)]
    return float(kappa.max()) if kappa.size else 0.0


def zero_modes(sp: SusyParams, W: Superpotentials, variant: str, operator: str,
               L: float = 12.0, n: int = 2001) -> ZeroModeSet:
    """The three zero-mode candidates of the annihilation or creation
    operator, each with its SUSY energy and a numerical normalizability
    verdict. In the irreducible regime (d > 0) only the E = 0 candidate
    exists."""
    if (variant, operator) not in _CANDIDATES:
        raise ValueError(f"unknown variant/operator {variant!r}/{operator!r}")
    W = Superpotentials(sp, W.solution)
    modes = [_zero_mode(W, c, L, n) for c in _CANDIDATES[(variant, operator)]]
    return ZeroModeSet(variant, operator, [m for m in modes if m is not None])


# ---------------------------------------------------------------------------
# operators on grids
# ---------------------------------------------------------------------------

def _d1(v, h, order=2):
    out = np.gradient(v, h, edge_order=2)
    if order == 4:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    return out


def _d2(v, h, order=2):
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    if order == 4:
        out[2:-2] = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * h * h)
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (h * h)
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / (h * h)
    return out


def _check_order(order):
    if order not in (2, 4):
        raise ValueError(f"stencil order must be 2 or 4, got {order!r}")


class _Coefficients:
    def __init__(self, W: Superpotentials, x):
        self.h, self.hp, _ = W.h(x)
        self.w3 = W.W3(x)
        self.b = W.b(x)
        if not (np.all(np.isfinite(self.w3)) and np.all(np.isfinite(self.b))):
            raise PoleError("operator coefficients are singular on the grid")


def _op(name, c: _Coefficients, v, step, order=2):
    if name == "q+":
        return _d1(v, step, order) + c.w3 * v
    if name == "q":
        return -_d1(v, step, order) + c.w3 * v
    if name == "M+":
        return _d2(v, step, order) - 2 * c.h * _d1(v, step, order) + c.b * v
    if name == "M":
        return _d2(v, step, order) + 2 * c.h * _d1(v, step, order) + (c.b + 2 * c.hp) * v
    raise ValueError(name)


# operators are applied right to left
_LADDER = {
    ("V1", "raise"): ("q+", "M"),
    ("V1", "lower"): ("M+", "q"),
    ("V2", "raise"): ("M", "q+"),
    ("V2", "lower"): ("q", "M+"),
}


def apply_ladder(W: Superpotentials, direction: str, variant: str, psi: GridFunction,
                 order: int = 2) -> GridFunction:
    """a+ psi (``raise``) or a psi (``lower``) by centred differences of the
    given order (2 or 4). The two points at each end come from one-sided
    stencils and are flagged."""
    _check_order(order)
    if psi.n < 64:
        raise GridTooCoarse("apply_ladder needs n >= 64")
    key = (variant, direction)
    if key not in _LADDER:
        raise ValueError(f"unknown variant/direction {variant!r}/{direction!r}")
    c = _Coefficients(W, psi.x)
    v = psi.values
    for name in reversed(_LADDER[key]):
        v = _op(name, c, v, psi.h, order)
    return psi.with_values(v, flagged=(0, 1, psi.n - 2, psi.n - 1))


def apply_hamiltonian(W: Superpotentials, variant: str, psi: GridFunction,
                      order: int = 2) -> GridFunction:
    _check_order(order)
    v = -_d2(psi.values, psi.h, order) + W.potential(variant, psi.x) * psi.values
    return psi.with_values(v, flagged=(0, psi.n - 1))


def _inner(a: GridFunction, b: GridFunction, mask):
    return float(np.sum(a.values[mask] * b.values[mask]) * a.h)


def rayleigh_quotient(W: Superpotentials, variant: str, psi: GridFunction, margin=4,
                      order: int = 2) -> float:
    Hpsi = apply_hamiltonian(W, variant, psi, order)
    mask = psi.interior(margin)
    return _inner(psi, Hpsi, mask) / _inner(psi, psi, mask)


def product_polynomial(sp: SusyParams, variant: str, E):
    """a+ a as a polynomial in H, evaluated at E."""
    if variant == "V1":
        return E * ((E - sp.gamma - 2 * sp.lam) ** 2 + sp.d)
    return E * ((E - sp.gamma) ** 2 + sp.d)


def product_identity_residual(W: Superpotentials, variant: str, psi: GridFunction, E: float,
                              margin=8, order: int = 2) -> float:
    """|<psi|a+ a|psi>/<psi|psi> - P(E)|."""
    apsi = apply_ladder(W, "lower", variant, psi, order)
    aapsi = apply_ladder(W, "raise", variant, apsi, order)
    mask = psi.interior(margin)
    return abs(_inner(psi, aapsi, mask) / _inner(psi, psi, mask)
               - product_polynomial(W.sp, variant, E))


def zero_mode_residual(W: Superpotentials, variant: str, mode: ZeroMode, margin=8,
                       order: int = 2) -> float:
    """||a psi|| / ||psi|| (annihilation) or ||a+ psi|| / ||psi|| (creation)."""
    direction = "lower" if mode.operator == "annihilation" else "raise"
    psi = mode.wavefunction
    out = apply_ladder(W, direction, variant, psi, order)
    mask = psi.interior(margin)
    return math.sqrt(_inner(out, out, mask) / _inner(psi, psi, mask))


def intertwining_residual(W: Superpotentials, variant: str, psi: GridFunction, margin=8,
                          order: int = 2) -> float:
    """||(H a+ - a+ (H + 2 lam)) psi|| / ||a+ psi|| over interior points."""
    if psi.n < 256:
        raise GridTooCoarse("intertwining_residual needs n >= 256")
    up = apply_ladder(W, "raise", variant, psi, order)
    left = apply_hamiltonian(W, variant, up, order)
    Hpsi = apply_hamiltonian(W, variant, psi, order)
    shifted = psi.with_values(Hpsi.values + 2 * W.sp.lam * psi.values)
    right = apply_ladder(W, "raise", variant, shifted, order)
    mask = psi.interior(margin)
    denom = _inner(up, up, mask)
    if denom == 0:
        return 0.0
    diff = left.values - right.values
    return math.sqrt(float(np.sum(diff[mask] ** 2) * psi.h) / denom)


def _hamiltonian_basis(W: Superpotentials, variant: str, L: float, n: int, size: int):
    """Lowest ``size`` eigenvectors of the three-point Dirichlet SUSY
    Hamiltonian, normalised on the grid."""
    x = np.linspace(-L, L, n)[1:-1]
    step = 2 * L / (n - 1)
    diag = 2.0 / step ** 2 + W.potential(variant, x)
    off = np.full(n - 3, -1.0 / step ** 2)
    _, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, size - 1))
    basis = np.zeros((n, size))
    basis[1:-1] = vec / math.sqrt(step)
    return basis


def ladder_rayleigh(W: Superpotentials, variant: str, psi: GridFunction, rungs: int = 4,
                    order: int = 4, basis_size: int = 24) -> List[float]:
    """Rayleigh quotients of psi, a+ psi, ..., (a+)^rungs psi.

    Stacking the third-order stencil rungs times on raw grid values loses
    about three powers of 1/h per rung to rounding, so the chain runs in
    the span of the lowest ``basis_size`` eigenvectors of the discretised
    Hamiltonian: a+ becomes a small matrix built from one stencil
    application per basis vector.
    """
    _check_order(order)
    if psi.n < 64:
        raise GridTooCoarse("ladder_rayleigh needs n >= 64")
    if basis_size > psi.n // 4:
        raise ValueError("basis_size must not exceed n/4")
    basis = _hamiltonian_basis(W, variant, float(psi.L), psi.n, basis_size)
    step = float(psi.h)

    def project(op):
        cols = []
        for j in range(basis_size):
            col = op(psi.with_values(basis[:, j])).values
            col[:3] = 0.0
            col[-3:] = 0.0
            cols.append(col)
        return basis.T @ np.column_stack(cols) * step

    raise_mat = project(lambda g: apply_ladder(W, "raise", variant, g, order))
    ham = project(lambda g: apply_hamiltonian(W, variant, g, order))
    c = basis.T @ np.asarray(psi.values, dtype=float) * step
    out = []
    for k in range(rungs + 1):
        out.append(float(c @ ham @ c / (c @ c)))
        if k < rungs:
            c = raise_mat @ c
    return out


# ---------------------------------------------------------------------------
# spectra realised by normalizable zero modes
# ---------------------------------------------------------------------------

@dataclass
class RealizedLadder:
    label: str
    base: float                 # physical x energy of the lowest rung
    length: Optional[int]       # None: unbounded
    susy_energy: float

    def levels(self, count, hw):
        n = count if self.length is None else min(count, self.length)
        return [self.base + k * hw for k in range(n)]


def distinct_modes(modes, tol=1e-6):
    """Drop modes that repeat another one (same energy, overlap 1). Of a
    repeated pair the one with the better conditioned prefactor stays."""
    kept = []
    for m in modes:
        a = m.wavefunction
        twin = None
        for i, k in enumerate(kept):
            if abs(k.energy - m.energy) > 1e-9:
                continue
            if abs(float(np.sum(a.values * k.wavefunction.values) * a.h)) > 1 - tol:
                twin = i
                break
        if twin is None:
            kept.append(m)
        elif m.condition < kept[twin].condition:
            kept[twin] = m
    return kept


def normalizable_state_count(W: Superpotentials, variant: str, L: float = 12.0, n: int = 2001) -> int:
    """Number of distinct normalizable functions among the six zero-mode
    candidates of a and a+ (a state killed by both counts once)."""
    modes = []
    for op in ("annihilation", "creation"):
        modes += zero_modes(W.sp, W, variant, op, L, n).normalizable
    return len(distinct_modes(modes))


def realized_ladders(params: ModelParams, solution: P4Solution, L: float = 12.0,
                     n: int = 2001, offset: Optional[float] = None) -> List[RealizedLadder]:
    """x-part ladders seeded by normalizable annihilation zero modes and cut
    by normalizable creation zero modes that sit on the same ladder."""
    W = superpotentials(params, solution)
    variant = variant_for(params)
    if offset is None:
        grid = np.linspace(-4, 4, 41) / math.sqrt(W.sp.lam) + 0.0123
        offset = calibration_offset(params, W, variant, grid)
    ann = distinct_modes(zero_modes(W.sp, W, variant, "annihilation", L, n).normalizable)
    cre = zero_modes(W.sp, W, variant, "creation", L, n).normalizable
    two_lam = 2 * W.sp.lam
    out = []
    for a in ann:
        length = None
        for c in cre:
            steps = (c.energy - a.energy) / two_lam
            if steps > -1e-9 and abs(steps - round(steps)) < 1e-9:
                k = int(round(steps)) + 1
                length = k if length is None else min(length, k)
        base = float(physical_energy(params, a.energy, offset))
        out.append(RealizedLadder(a.label, base, length, a.energy))
    return out


def realized_levels(params: ModelParams, solution: P4Solution, count: int, **kw) -> List[float]:
    hw = params.hbar * params.omega
    levels = []
    for lad in realized_ladders(params, solution, **kw):
        levels.extend(lad.levels(count, hw))
    return sorted(levels)[:count]
