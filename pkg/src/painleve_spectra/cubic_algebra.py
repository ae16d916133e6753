"""Cubic algebra of the integrals of motion, its deformed-oscillator
structure function Phi, and the energy spectra selected by unitarity.

Energies are in physical units (hbar * omega). Inside the factored
structure function every root is an affine function of e = E / (hbar omega):

    r_y  = e/2 + 1/2
    r_0  = -e/2 + k0            k0 = 5/6 - alpha/3 (eps=+1), 1/6 - alpha/3 (eps=-1)
    r_+- = -e/2 + c +- s/2      c  = (alpha+2)/6 (eps=+1), (alpha+4)/6 (eps=-1)

with s = sqrt(-beta/2) (imaginary for beta > 0), and
Phi(x) = -4 omega^2 hbar^4 prod_i (x + u - r_i).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DomainError
from .potentials import ModelParams

VALIDITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# algebra coefficients and Casimir
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubicAlgebraCoeffs:
    delta0: float
    delta1: float
    mu0: float
    nu0: float
    nu1: float
    xi0: float
    xi1: float
    xi2: float
    zeta0: float
    zeta1: float
    zeta2: float
    zeta3: float

    @classmethod
    def from_params(cls, params: ModelParams):
        a, b, e = params.alpha, params.beta, params.epsilon
        hb, w = params.hbar, params.omega
        return cls(
            delta0=16 * w ** 2 * hb ** 2, delta1=0.0,
            mu0=-2 * hb ** 2,
            nu0=0.0, nu1=-6 * hb ** 2,
            xi0=(w ** 2 * hb ** 4 / 3) * (4 * a * a - 20 - 6 * b - 8 * e * a), xi1=0.0, xi2=0.0,
            zeta0=(hb ** 5 * w ** 3 / 27) * (-8 * a ** 3 - 24 * a - 36 * a * b + 24 * e * a * a
                                             + 8 * e + 36 * e * b),
            zeta1=-8 * w ** 2 * hb ** 4, zeta2=0.0, zeta3=8 * hb ** 2,
        )

    def at(self, E):
        """(delta, mu, nu, xi, zeta) with H replaced by E."""
        return (self.delta0 + self.delta1 * E, self.mu0, self.nu0 + self.nu1 * E,
                self.xi0 + self.xi1 * E + self.xi2 * E ** 2,
                self.zeta0 + self.zeta1 * E + self.zeta2 * E ** 2 + self.zeta3 * E ** 3)


@dataclass(frozen=True)
class CasimirValue:
    value: float
    coefficients: Dict[int, float]   # power of H -> coefficient
    variant: str


def casimir_coefficients(params: ModelParams, variant: str = "printed") -> Dict[int, float]:
    """Coefficients of the Casimir as a polynomial in H.

    ``printed`` is the published polynomial. ``consistent`` replaces the H^2
    and H^0 coefficients by the ones that make the general structure
    function agree with the factored one (see ``casimir_discrepancy``).
    """
    a, b, e = params.alpha, params.beta, params.epsilon
    hb, w = params.hbar, params.omega
    c4 = -16 * hb ** 2
    c1 = -(4 * hb ** 5 * w ** 3 / 27) * (8 * a ** 3 - 24 * e * a * a + 24 * a + 36 * a * b
                                          - 8 * e - 36 * e * b)
    if variant == "printed":
        c2 = (4 * hb ** 4 * w ** 2 / 3) * (4 * a * a - 8 * a + 4 - a * b)
        c0 = -(4 * hb ** 6 * w ** 4 / 3) * (4 * a - 8 * e * a - 8 - 6 * b)
    elif variant == "consistent":
        c2 = (4 * hb ** 4 * w ** 2 / 3) * (4 * a * a - 8 * e * a + 4 - 6 * b)
        c0 = -(4 * hb ** 6 * w ** 4 / 3) * (4 * a * a - 8 * e * a - 8 - 6 * b)
    else:
        raise ValueError(f"unknown Casimir variant {variant!r}")
    return {4: c4, 3: 0.0, 2: c2, 1: c1, 0: c0}


def casimir_value(params: ModelParams, E: float, variant: str = "printed") -> CasimirValue:
    coeffs = casimir_coefficients(params, variant)
    value = sum(c * E ** k for k, c in coeffs.items())
    return CasimirValue(float(value), coeffs, variant)


def structure_function_general(coeffs: CubicAlgebraCoeffs, K: float, E: float, u: float, x):
    """Quartic in (x + u) built from the algebra coefficients and Casimir K."""
    delta, mu, nu, xi, zeta = coeffs.at(E)
    if delta <= 0:
        raise DomainError("delta must be positive")
    sd = math.sqrt(delta)
    y = np.asarray(x, dtype=float) + u
    return ((K / (-4 * delta) - zeta / (4 * sd))
            + (-xi / 4 + zeta / (2 * sd) + nu * sd / 12) * y
            + (-nu * sd / 4 + xi / 4 + mu * delta / 8) * y ** 2
            + (nu * sd / 6 - mu * delta / 4) * y ** 3
            + (mu * delta / 8) * y ** 4)


# ---------------------------------------------------------------------------
# factored structure function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Root:
    """Affine root r(e) = slope * e + offset, e = E / (hbar omega)."""
    name: str
    slope: float
    offset: complex

    def at(self, e):
        return self.slope * e + self.offset


def roots(params: ModelParams) -> Dict[str, Root]:
    a, b = params.alpha, params.beta
    if params.epsilon == 1:
        k0, c = 5 / 6 - a / 3, (a + 2) / 6
    else:
        k0, c = 1 / 6 - a / 3, (a + 4) / 6
    half_s = cmath.sqrt(-b / 2) / 2
    if b <= 0:
        half_s = half_s.real
    return {
        "r_y": Root("r_y", 0.5, 0.5),
        "r_0": Root("r_0", -0.5, k0),
        "r_+": Root("r_+", -0.5, c + half_s),
        "r_-": Root("r_-", -0.5, c - half_s),
    }


def u_candidates(params: ModelParams, E: float) -> List[complex]:
    """u_1..u_4 (values of u with Phi(0) = 0). For beta > 0 the middle two
    are complex and are returned as a conjugate pair; callers building
    spectra use only the real ones."""
    e = E / (params.hbar * params.omega)
    r = roots(params)
    out = [r["r_0"].at(e), r["r_+"].at(e), r["r_-"].at(e), r["r_y"].at(e)]
    return [complex(v) if isinstance(v, complex) and v.imag != 0 else float(np.real(v)) for v in out]


@dataclass(frozen=True)
class StructureFunction:
    leading: float
    roots: Tuple[complex, ...]
    u: float
    E: float
    p: Optional[int] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.leading, dtype=complex)
        for r in self.roots:
            out = out * (x + self.u - r)
        return out

    def scale(self, x):
        x = np.asarray(x, dtype=float)
        s = np.full(x.shape, abs(self.leading))
        for r in self.roots:
            s = s * (1.0 + np.abs(x + self.u - r))
        return s

    def real(self, x, tol=VALIDITY_TOL):
        val = self(x)
        if np.any(np.abs(val.imag) > tol * self.scale(x)):
            raise DomainError("structure function is not real at the requested points")
        return val.real


def factored_structure_function(params: ModelParams, E: float, u, p=None) -> StructureFunction:
    e = E / (params.hbar * params.omega)
    rs = tuple(complex(r.at(e)) for r in roots(params).values())
    lead = -4 * params.omega ** 2 * params.hbar ** 4
    return StructureFunction(lead, rs, u, E, p)


@dataclass(frozen=True)
class Validation:
    ok: bool
    phi_zero: float
    phi_close: float
    interior_min: Optional[float]
    reason: str = ""


def validate_representation(phi: StructureFunction, p: int, tol=VALIDITY_TOL) -> Validation:
    """Unitarity of the (p+1)-dimensional representation: Phi(0) = Phi(p+1)
    = 0 and Phi real and strictly positive on 1..p."""
    if p < 0:
        raise ValueError("p must be non-negative")
    xs = np.arange(0, p + 2, dtype=float)
    vals = phi(xs)
    scale = phi.scale(xs)
    if np.any(np.abs(vals.imag) > tol * scale):
        return Validation(False, abs(vals[0]), abs(vals[-1]), None, "complex values")
    re = vals.real
    interior = re[1:-1]
    imin = float(interior.min()) if len(interior) else None
    if abs(re[0]) > tol * scale[0]:
        return Validation(False, re[0], re[-1], imin, "Phi(0) != 0")
    if abs(re[-1]) > tol * scale[-1]:
        return Validation(False, re[0], re[-1], imin, "Phi(p+1) != 0")
    if len(interior) and np.any(interior <= tol * scale[1:-1]):
        return Validation(False, re[0], re[-1], imin, "Phi not strictly positive inside")
    return Validation(True, re[0], re[-1], imin)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

# (label, root fixing u, root closing the representation at p+1)
_CASE_TABLE = [
    ("Case1", "r_0", "r_y"),
    ("Case2", "r_+", "r_y"),
    ("Case3", "r_-", "r_y"),
    ("Case4a", "r_y", "r_0"),
    ("Case4b", "r_y", "r_+"),
    ("Case4c", "r_y", "r_-"),
]
_BETA_POS_TABLE = [("BetaPosA", "r_0", "r_y"), ("BetaPosB", "r_y", "r_0")]


@dataclass
class SpectrumSeries:
    case_id: str
    epsilon: int
    u_root: str
    close_root: str
    intercept: float          # E at p = 0, energy units
    slope: float              # dE/dp, +-hbar*omega
    valid_p: Tuple[int, ...]
    p_max: int
    physical: bool
    x_ladder: Optional[int]   # number of x rungs, None if unbounded
    params: ModelParams = field(repr=False)
    coincident: Tuple[str, ...] = ()

    def energy_at(self, p):
        return self.intercept + self.slope * p

    @property
    def finite(self):
        return self.x_ladder is not None or max(self.valid_p) < self.p_max

    @property
    def infinite(self):
        return not self.finite

    def structure_function(self, p) -> StructureFunction:
        E = self.energy_at(p)
        e = E / (self.params.hbar * self.params.omega)
        u = roots(self.params)[self.u_root].at(e)
        return factored_structure_function(self.params, E, u, p)

    def x_levels(self, count: int):
        """1D x-part energies carried by this series: the p = 0 state has no
        y excitation, so its x energy is E(0) - hbar omega / 2, and further
        rungs are spaced by hbar omega."""
        hw = self.params.hbar * self.params.omega
        n = count if self.x_ladder is None else min(count, self.x_ladder)
        return [self.intercept - hw / 2 + k * hw for k in range(n)]


def _solve_energy(u: Root, close: Root, p: int, hw: float):
    ds = close.slope - u.slope
    if ds == 0:
        return None
    return hw * ((p + 1) - (close.offset - u.offset)) / ds


def x_ladder_length(phi: StructureFunction, close_index: int, scan_to: int,
                    tol=VALIDITY_TOL) -> Tuple[bool, Optional[int]]:
    """Examine Phi with the closing factor (p+1-x), root ``close_index``,
    removed.

    That remainder depends only on the x oscillator, so it must stay positive
    until it first vanishes exactly; the first zero bounds the number of
    x rungs. Returns (admissible, length or None for unbounded).
    """
    others = [r for i, r in enumerate(phi.roots) if i != close_index]
    for x in range(1, scan_to + 1):
        g = -phi.leading
        s = abs(phi.leading)
        for r in others:
            g = g * (x + phi.u - r)
            s = s * (1 + abs(x + phi.u - r))
        if abs(g.imag) > tol * s:
            return False, None
        if g.real <= tol * s:
            return (abs(g.real) <= tol * s), x
    return True, None


def derive_spectra(params: ModelParams, p_max: int = 10, include_unphysical: bool = False,
                   tol: float = VALIDITY_TOL) -> List[SpectrumSeries]:
    """Series of energies E(p) = intercept + slope * p allowed by unitarity.

    Every candidate case is instantiated and checked with
    validate_representation for p = 0..p_max. Cases whose u comes from the
    y root (Case4*, BetaPosB) describe states with a negative y oscillator
    energy; they are kept only with ``include_unphysical``. The others must
    also pass ``x_ladder_length``. Coincident series are merged.
    """
    if p_max < 0:
        raise ValueError("p_max must be non-negative")
    hw = params.hbar * params.omega
    rs = roots(params)
    table = _CASE_TABLE if params.beta <= 0 else _BETA_POS_TABLE
    prefix = "Eps1" if params.epsilon == 1 else "EpsM1"
    out: List[SpectrumSeries] = []
    for label, u_name, close_name in table:
        physical = u_name != "r_y"
        if not physical and not include_unphysical:
            continue
        u_root, close_root = rs[u_name], rs[close_name]
        E0 = _solve_energy(u_root, close_root, 0, hw)
        E1 = _solve_energy(u_root, close_root, 1, hw)
        if E0 is None or abs(complex(E0).imag) > tol:
            continue
        E0, slope = float(np.real(E0)), float(np.real(E1 - E0))
        series = SpectrumSeries(prefix + label, params.epsilon, u_name, close_name, E0, slope,
                                (), p_max, physical, None, params)
        valid = []
        ladder = None
        admissible = True
        if physical:
            phi0 = series.structure_function(0)
            scan = p_max + 2 + int(max(abs(r) for r in phi0.roots))
            admissible, ladder = x_ladder_length(phi0, list(rs).index(close_name), scan, tol)
        if not admissible:
            continue
        for p in range(p_max + 1):
            if validate_representation(series.structure_function(p), p, tol).ok:
                valid.append(p)
        if ladder is not None:
            valid = [p for p in valid if p < ladder]
        if not valid:
            continue
        series.valid_p = tuple(valid)
        series.x_ladder = ladder
        out.append(series)
    return _merge_coincident(out, tol)


def _merge_coincident(series: List[SpectrumSeries], tol) -> List[SpectrumSeries]:
    kept: List[SpectrumSeries] = []
    for s in series:
        twin = next((k for k in kept
                     if abs(k.intercept - s.intercept) <= tol * max(1, abs(s.intercept))
                     and abs(k.slope - s.slope) <= tol and k.valid_p == s.valid_p
                     and k.x_ladder == s.x_ladder), None)
        if twin is None:
            kept.append(s)
        else:
            twin.coincident = twin.coincident + (s.case_id,)
    return kept


def x_part_levels(series: List[SpectrumSeries], count: int) -> List[float]:
    """Sorted lowest ``count`` 1D x energies generated by the physical series."""
    levels = []
    for s in series:
        if s.physical:
            levels.extend(s.x_levels(count))
    return sorted(levels)[:count]


# ---------------------------------------------------------------------------
# Casimir consistency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientReport:
    power: int
    printed: float
    required: float
    agrees: bool


def required_casimir(params: ModelParams, E: float, x: float = 0.37) -> float:
    """The Casimir value that makes the general Phi equal the factored Phi.

    Only the constant term of the general quartic depends on K, so the gap
    between the two forms at any x fixes K.
    """
    coeffs = CubicAlgebraCoeffs.from_params(params)
    u = 0.0
    fact = factored_structure_function(params, E, u)
    gap = fact.real(np.array([x]))[0] - structure_function_general(
        coeffs, casimir_value(params, E).value, E, u, x)
    delta = coeffs.at(E)[0]
    return casimir_value(params, E).value - 4 * delta * float(gap)


def casimir_discrepancy(params: ModelParams, rtol=1e-8) -> List[CoefficientReport]:
    """Per-power comparison of the printed Casimir with the one implied by
    the factored structure function, the latter fitted numerically."""
    hw = params.hbar * params.omega
    es = hw * np.linspace(-2.0, 2.0, 9)
    ks = np.array([required_casimir(params, E) for E in es])
    fit = np.polynomial.polynomial.polyfit(es, ks, 4)
    printed = casimir_coefficients(params, "printed")
    out = []
    for k in range(5):
        req = float(fit[k])
        pr = printed.get(k, 0.0)
        out.append(CoefficientReport(k, pr, req, abs(req - pr) <= rtol * max(1.0, abs(req), abs(pr))))
    return out
