"""Two-dimensional potentials V(x, y) = g1(x) + g2(y) built from a P4
solution, together with independent closed forms for the catalogue cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, InconsistentError, PoleError
from .special_functions import P4Params, P4Solution, catalogue, erfc

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    epsilon: int = 1
    hbar: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.epsilon not in (1, -1):
            raise ConfigError(f"epsilon must be +1 or -1, got {self.epsilon!r}")
        if not (self.hbar > 0 and self.omega > 0):
            raise ConfigError("hbar and omega must be strictly positive")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ConfigError("alpha and beta must be finite")

    @property
    def lam(self):
        """omega / hbar, the inverse squared length scale."""
        return self.omega / self.hbar

    def z_of_x(self, x):
        return np.sqrt(self.lam) * np.asarray(x, dtype=float)

    @property
    def p4(self) -> P4Params:
        return P4Params(self.alpha, self.beta)


@dataclass(frozen=True)
class CaseInfo:
    case_id: str
    solution_id: str     # catalogue key for f
    epsilon: int
    label: str


CASES = {
    "A": CaseInfo("A", "A", 1, "alpha=5, beta=-8, rational f, epsilon=+1"),
    "A2": CaseInfo("A2", "A", -1, "alpha=5, beta=-8, rational f, epsilon=-1"),
    "B": CaseInfo("B", "B", 1, "alpha=0, beta=-2/9, f=-2z/3, epsilon=+1"),
    "C": CaseInfo("C", "C", 1, "alpha=-1, beta=-32/9, rational f, epsilon=+1"),
    "D": CaseInfo("D", "D", 1, "alpha=0, beta=-2, erfc family, epsilon=+1"),
    "E": CaseInfo("E", "E", -1, "alpha=0, beta=-2, erfc family, epsilon=-1"),
}

_ALIASES = {"4.1": "A", "4.2": "A2", "4.3": "B", "4.4": "C", "4.5": "D", "4.6": "E"}


def resolve_case(case_id: str) -> CaseInfo:
    key = str(case_id).strip().upper()
    key = _ALIASES.get(key, key)
    if key not in CASES:
        raise ConfigError(f"unknown case {case_id!r}; choose from {sorted(CASES)} or 4.1-4.6")
    return CASES[key]


def case_params(case_id: str, hbar: float = 1.0, omega: float = 1.0) -> ModelParams:
    info = resolve_case(case_id)
    p = catalogue(info.solution_id).params
    return ModelParams(p.alpha, p.beta, info.epsilon, hbar, omega)


@dataclass(frozen=True)
class PotentialSpec:
    """Either a potential built from a P4 solution (``kind="p4"``) or a
    catalogue closed form (``kind="closed"``)."""
    kind: str
    params: ModelParams
    solution: Optional[P4Solution] = None
    case_id: Optional[str] = None
    t: float = 0.0

    def __post_init__(self):
        if self.kind == "p4":
            if self.solution is None:
                raise ConfigError("p4 potential needs a P4Solution")
            sp = self.solution.params
            if (sp.alpha, sp.beta) != (self.params.alpha, self.params.beta):
                raise ConfigError("P4Solution parameters differ from ModelParams")
        elif self.kind == "closed":
            _check_case(self.case_id, self.params)
        else:
            raise ConfigError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def from_case(cls, case_id, hbar=1.0, omega=1.0, t=0.0, closed=False):
        info = resolve_case(case_id)
        params = case_params(info.case_id, hbar, omega)
        if closed:
            return cls("closed", params, case_id=info.case_id, t=t)
        return cls("p4", params, solution=catalogue(info.solution_id, t), case_id=info.case_id, t=t)


def _check_case(case_id, params: ModelParams):
    info = resolve_case(case_id)
    expected = case_params(info.case_id)
    if (expected.alpha, expected.beta, expected.epsilon) != (params.alpha, params.beta, params.epsilon):
        raise ConfigError(
            f"case {info.case_id} needs (alpha, beta, epsilon) = "
            f"({expected.alpha:g}, {expected.beta:g}, {expected.epsilon:+d}), got "
            f"({params.alpha:g}, {params.beta:g}, {params.epsilon:+d})")
    return info


def g1_from_f(params: ModelParams, x, f, fp):
    """x part of the potential given f and f' already evaluated at z(x)."""
    a, e, hb, w = params.alpha, params.epsilon, params.hbar, params.omega
    x = np.asarray(x, dtype=float)
    return (w * w * x * x / 2 + e * hb * w / 2 * fp + hb * w / 2 * f * f
            + w * math.sqrt(hb * w) * x * f + hb * w / 3 * (-a + e))


def _g1_direct(spec: PotentialSpec, x):
    f, fp = spec.solution(spec.params.z_of_x(x))
    return g1_from_f(spec.params, x, f, fp)


def g1(spec: PotentialSpec, x):
    """x part of the potential in energy units.

    A pole of f can cancel in g1 (f^2/2 against eps f'/2 and x f). Points
    that land on such a pole get the two-sided limit; a genuine singularity
    comes back as inf.
    """
    if spec.kind == "closed":
        return closed_form(spec.case_id, spec.params, x, 0.0, t=spec.t)
    try:
        return _g1_direct(spec, x)
    except PoleError:
        pass
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    out = np.empty(flat.shape)
    d = 0.05 / math.sqrt(spec.params.lam)
    for start in range(0, flat.size, 64):
        chunk = flat[start:start + 64]
        try:
            out[start:start + 64] = _g1_direct(spec, chunk)
            continue
        except PoleError:
            pass
        for i, xi in enumerate(chunk, start):
            try:
                out[i] = _g1_direct(spec, np.array([xi]))[0]
            except PoleError:
                out[i] = _removable_limit(spec, xi, d)
    return out.reshape(x.shape)


def _removable_limit(spec, x0, d):
    """Limit of symmetric averages at s = d, d/2, d/4, d/8, extrapolated to
    s = 0 as a cubic in s^2; inf when the averages do not settle."""
    s = d / 2.0 ** np.arange(4)
    avg = np.array([0.5 * (_g1_direct(spec, np.array([x0 + si]))[0]
                           + _g1_direct(spec, np.array([x0 - si]))[0]) for si in s])
    if not np.all(np.isfinite(avg)):
        return math.inf
    steps = np.abs(np.diff(avg))
    if not steps[-1] < 0.5 * steps[0] + 1e-12 * max(1.0, abs(avg[-1])):
        return math.inf
    return float(np.polyval(np.polyfit(s * s, avg, 3), 0.0))


def g2(params: ModelParams, y):
    return params.omega ** 2 * np.asarray(y, dtype=float) ** 2 / 2


def potential(spec: PotentialSpec, x, y):
    return g1(spec, x) + g2(spec.params, y)


def closed_form(case_id, params: ModelParams, x, y, t: float = 0.0):
    """Catalogue potential V(x, y) written out directly in hbar, omega, x, y.

    Independent of the P4 route so the two can check each other. The D form
    is the one obtained by expanding g1 with f = -2z - psi'/psi.
    """
    info = _check_case(case_id, params)
    hb, w = params.hbar, params.omega
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    osc_y = w * w * y * y / 2
    cid = info.case_id
    if cid == "A":
        s = 2 * w * x * x + hb
        vx = (w * w * x * x / 2 - 8 * hb ** 3 * w / s ** 2 + 4 * hb ** 2 * w / s
              + 2 * hb * w / 3)
    elif cid == "A2":
        q = 4 * w * w * x ** 4 + 3 * hb * hb
        vx = (w * w * x * x / 2 - 192 * hb ** 4 * w * w * x * x / q ** 2
              + 16 * hb * hb * w * w * x * x / q)
    elif cid == "B":
        vx = w * w * x * x / 18
    elif cid == "C":
        s = 2 * w * x * x + 3 * hb
        vx = w * w * x * x / 18 - 24 * hb ** 3 * w / s ** 2 + 4 * hb ** 2 * w / s
    elif cid == "D":
        z = params.z_of_x(x)
        psi = 1.0 - t * erfc(z)
        g = np.exp(-z * z)
        vx = hb * w * (z * z / 2 - 2.0 / 3.0 + 4 * t * z * g / (_SQRT_PI * psi)
                       + 4 * t * t * g * g / (math.pi * psi * psi))
    else:  # E: the erfc terms cancel for every t
        vx = w * w * x * x / 2 + 2 * hb * w / 3
    return vx + osc_y


def consistency_offset(spec_from_p4: PotentialSpec, case_id, grid, rtol=1e-9):
    """Constant c with g1 (P4 route) - closed form = c on every grid point.

    Raises InconsistentError when the difference is not constant to
    rtol * max(1, |c|).
    """
    if spec_from_p4.kind != "p4":
        raise ConfigError("consistency_offset compares a P4-built potential")
    grid = np.asarray(grid, dtype=float)
    diff = g1(spec_from_p4, grid) - closed_form(case_id, spec_from_p4.params, grid, 0.0,
                                                t=spec_from_p4.t)
    c = float(np.median(diff))
    spread = float(np.max(np.abs(diff - c)))
    if spread > rtol * max(1.0, abs(c)):
        raise InconsistentError(
            f"g1 minus closed form varies by {spread:.3e} over the grid (mean {c:.6g})")
    return c
