"""Self-checks behind ``painleve-spectra verify``.

Each suite returns a list of Check records; a suite passes when every
check does. Tolerances are the ones the package is built to meet.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List

import numpy as np
import scipy.special

from .cubic_algebra import (CubicAlgebraCoeffs, casimir_coefficients, casimir_discrepancy,
                            casimir_value, derive_spectra, factored_structure_function,
                            structure_function_general, x_part_levels)
from .eigensolver import refine
from .potentials import PotentialSpec, case_params, g1, resolve_case
from .special_functions import _RATIONAL, catalogue, erfc, p4_integrate, p4_residual
from .susy import (GridFunction, calibration_offset, distinct_modes, expected_offset,
                   intertwining_residual, ladder_rayleigh, normalizable_state_count,
                   product_identity_residual, product_polynomial, rayleigh_quotient,
                   realized_ladders, realized_levels, superpotentials, variant_for, zero_mode_residual,
                   zero_modes, _hamiltonian_basis)

SUITES = ("painleve", "algebra", "susy", "spectra")
T_VALUES = (0.0, 0.3, -1.0)
E_MAX = 6.0   # in units of hbar * omega

# x-part levels the algebra admits but no normalizable state carries:
# case E, t-independent, a one-rung series at hbar*omega/6
KNOWN_UNREALIZED = {"E": (1.0 / 6.0,)}


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def to_dict(self):
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        d["measured"] = float(d["measured"])
        d["tolerance"] = float(d["tolerance"])
        return d


def _below(name, measured, tol, detail=""):
    measured = float(measured)
    return Check(name, bool(np.isfinite(measured) and measured < tol), measured, tol, detail)


def _solution_id(case_id):
    return "A" if case_id == "A2" else case_id


def _case_runs():
    """(label, case id, t) for every catalogue case, erfc cases at three t."""
    out = []
    for cid in ("A", "A2", "B", "C", "D", "E"):
        ts = T_VALUES if cid in ("D", "E") else (0.0,)
        for t in ts:
            label = cid if cid not in ("D", "E") else f"{cid}(t={t:g})"
            out.append((label, cid, t))
    return out


# ---------------------------------------------------------------------------
# painleve
# ---------------------------------------------------------------------------

def catalogue_residual(case_id, t=0.0, n=400, zmax=5.0, exclusion=0.05):
    """Max |f'' - rhs| over n points of [-zmax, zmax], skipping points within
    ``exclusion`` of a pole or zero of f."""
    sol = catalogue(case_id, t)
    z = np.linspace(-zmax, zmax, n)
    keep = np.ones(n, dtype=bool)
    if sol.kind == "catalogue":
        form = _RATIONAL[case_id]
        for r in form.den.roots():
            if abs(r.imag) < 1e-12:
                keep &= np.abs(z - r.real) >= exclusion
    f, _, _ = sol.derivatives(z[keep])
    # the 1/f term is undefined on zeros of f
    zk = z[keep][np.abs(f) >= 1e-3]
    f, fp, fpp = sol.derivatives(zk)
    return float(np.max(np.abs(p4_residual(f, fp, fpp, zk, sol.params))))


def integrator_error(case_id, z0=1.0, z1=4.0, tol=1e-15):
    """Max |f_integrated - f_closed| on [z0, z1] from the closed form's
    initial data at z0."""
    sol = catalogue(case_id)
    f0, fp0 = sol(np.array([z0]))
    zs = np.linspace(z0, z1, 61)
    num = p4_integrate(sol.params, z0, float(f0[0]), float(fp0[0]), zs, tol=tol)
    return float(np.max(np.abs(num(zs)[0] - sol(zs)[0])))


def suite_painleve() -> List[Check]:
    checks = []
    for label, cid, t in _case_runs():
        if cid == "A2":
            continue
        checks.append(_below(f"residual {label}", catalogue_residual(cid, t), 1e-8,
                             "400 points on [-5, 5], poles excluded"))
    z = np.concatenate([np.linspace(-6, 6, 241), np.linspace(6, 26, 81)])
    ref = scipy.special.erfc(z)
    rel = np.max(np.abs(erfc(z) - ref) / ref)
    checks.append(_below("erfc vs scipy", rel, 1e-13, "relative, z in [-6, 26]"))
    for cid in ("A", "B"):
        checks.append(_below(f"integrator reproduces {cid}", integrator_error(cid), 1e-8,
                             "from z0=1 over [1, 4], tol 1e-15"))
    return checks


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------

def _phi_relative(phi, x):
    return float(abs(phi(np.array([float(x)]))[0]) / phi.scale(np.array([float(x)]))[0])


def structure_function_gap(params, variant, samples=7, seed=0):
    """Max relative gap between the general (coefficient) and factored
    forms of Phi at random (E, u, x)."""
    rng = np.random.default_rng(seed)
    coeffs = CubicAlgebraCoeffs.from_params(params)
    hw = params.hbar * params.omega
    worst = 0.0
    for _ in range(samples):
        E, u = rng.uniform(-2, 3) * hw, rng.uniform(-1.5, 1.5)
        xs = np.linspace(0.0, 4.0, 9)
        K = casimir_value(params, E, variant).value
        gen = structure_function_general(coeffs, K, E, u, xs)
        fact = factored_structure_function(params, E, u)
        worst = max(worst, float(np.max(np.abs(gen - fact.real(xs)) / fact.scale(xs))))
    return worst


def suite_algebra() -> List[Check]:
    checks = []
    for cid in ("A", "A2", "B", "C", "D", "E"):
        params = case_params(cid)
        report = casimir_discrepancy(params)
        printed, consistent = (casimir_coefficients(params, v) for v in ("printed", "consistent"))
        differs = sorted(k for k in printed
                         if abs(printed[k] - consistent[k]) > 1e-12 * max(1.0, abs(consistent[k])))
        flagged = sorted(r.power for r in report if not r.agrees)
        fit_gap = max(abs(r.required - consistent[r.power]) / max(1.0, abs(r.required))
                      for r in report)
        checks.append(Check(f"Casimir flags {cid}", flagged == differs and set(flagged) <= {0, 2},
                            float(len(flagged)), 2.0,
                            f"printed polynomial disagrees at powers {flagged}"))
        checks.append(_below(f"corrected Casimir fits {cid}", fit_gap, 1e-8))
        checks.append(_below(f"general vs factored Phi {cid}",
                             structure_function_gap(params, "consistent"), 1e-10,
                             "corrected Casimir"))
        worst = 0.0
        for s in derive_spectra(params, p_max=8):
            for p in (q for q in s.valid_p if q <= 5):
                phi = s.structure_function(p)
                worst = max(worst, _phi_relative(phi, 0), _phi_relative(phi, p + 1))
        checks.append(_below(f"Phi boundary zeros {cid}", worst, 1e-10, "Phi(0), Phi(p+1), p <= 5"))

    series = {cid: derive_spectra(case_params(cid), p_max=8) for cid in ("A", "A2", "B", "D")}
    a1 = next((s for s in series["A"] if abs(s.intercept + 1 / 3) < 1e-9), None)
    checks.append(Check("A one-state series", a1 is not None and a1.valid_p == (0,), 0.0, 0.0,
                        f"valid_p={a1.valid_p if a1 else None}"))
    fin = [s for s in series["A2"] if s.finite]
    checks.append(Check("A2 finite series", len(fin) == 1 and fin[0].valid_p == (0, 1), 0.0, 0.0,
                        f"valid_p={[s.valid_p for s in fin]}"))
    merged = [s for s in series["D"] if s.coincident]
    checks.append(Check("D coincident series merge", len(merged) == 1 and len(series["D"]) == 2,
                        0.0, 0.0, f"merged={[(s.case_id,) + s.coincident for s in merged]}"))
    bases = sorted(s.intercept for s in series["B"] if s.infinite)
    gap = (max(abs(b - r) for b, r in zip(bases, (2 / 3, 1.0, 4 / 3)))
           if len(bases) == 3 else math.inf)
    checks.append(_below("B three infinite series", gap, 1e-12, f"bases={bases}"))
    return checks


# ---------------------------------------------------------------------------
# susy
# ---------------------------------------------------------------------------

def case_a_printed_w(x, hbar=1.0, omega=1.0):
    """Closed forms of W1, W2, W3 for case A written out in x."""
    hb, w = hbar, omega
    x = np.asarray(x, dtype=float)
    w1 = -((-hb + 2 * w * x ** 2) * (9 * hb ** 3 + 27 * hb ** 2 * w * x ** 2
                                     + 12 * hb * w ** 2 * x ** 4 + 4 * w ** 3 * x ** 6)
           / (hb * x * (3 * hb + 2 * w * x ** 2) * (3 * hb ** 2 + 4 * w ** 2 * x ** 4)))
    w2 = -((hb - 2 * w * x ** 2) * (3 * hb ** 2 + 3 * hb * w * x ** 2 + 2 * w ** 2 * x ** 4)
           / (hb * x * (3 * hb ** 2 + 8 * hb * w * x ** 2 + 4 * w ** 2 * x ** 4)))
    w3 = -(w * x * (-9 * hb ** 3 + 22 * hb ** 2 * w * x ** 2 + 20 * hb * w ** 2 * x ** 4
                    + 8 * w ** 3 * x ** 6)
           / (hb * (hb + 2 * w * x ** 2) * (3 * hb ** 2 + 4 * w ** 2 * x ** 4)))
    return w1, w2, w3


def case_b_printed_w(x, hbar=1.0, omega=1.0):
    x = np.asarray(x, dtype=float)
    return 1 / x + omega * x / (3 * hbar), -1 / x + omega * x / (3 * hbar), -omega * x / (3 * hbar)


def riccati_gap(W, variant, x):
    """V1 = W3^2 + W3' and V2 = W3^2 - W3' - 2 lam, max abs deviation."""
    _, hp, _ = W.h(x)
    w3 = W.W3(x)
    w3p = -2 * hp - W.sp.lam
    if variant == "V1":
        rhs = w3 * w3 + w3p
    else:
        rhs = w3 * w3 - w3p - 2 * W.sp.lam
    return float(np.max(np.abs(W.potential(variant, x) - rhs)))


def _model(cid, t=0.0):
    params = case_params(cid)
    W = superpotentials(params, catalogue(_solution_id(cid), t))
    return params, W, variant_for(params)


def _gaussian(n, dtype=np.longdouble):
    return GridFunction.sample(lambda x: np.exp(-x * x), 12.0, n, dtype=dtype)


def suite_susy() -> List[Check]:
    checks = []
    x = np.linspace(-3, 3, 601) + 0.0123
    for label, cid, t in _case_runs():
        params, W, v = _model(cid, t)
        checks.append(_below(f"Riccati W3 {label}", riccati_gap(W, v, x), 1e-9))
        if W.sp.reducible:
            w1, w2 = W.W12(x)
            h = W.h(x)[0]
            gap = float(np.max(np.abs(w1 + w2 + 2 * h)))
            checks.append(_below(f"W1 + W2 = -2h {label}", gap, 1e-10))
        c = calibration_offset(params, W, v, x)
        checks.append(_below(f"energy offset {label}", abs(c - expected_offset(params, v)), 1e-9))
        count = normalizable_state_count(W, v)
        checks.append(Check(f"distinct zero modes {label}", count <= 3, float(count), 3.0,
                            "at most 3 normalizable states"))

    for cid, printed in (("A", case_a_printed_w), ("B", case_b_printed_w)):
        _, W, _ = _model(cid)
        w1, w2, w3 = printed(x)
        gap = max(float(np.max(np.abs(W.W1(x) - w1))), float(np.max(np.abs(W.W2(x) - w2))),
                  float(np.max(np.abs(W.W3(x) - w3))))
        checks.append(_below(f"{cid} superpotentials closed form", gap, 1e-8))

    # grid operator checks need pole-free coefficients: C has a pole at x=0
    for label, cid, t in _case_runs():
        if cid == "C":
            continue
        _, W, v = _model(cid, t)
        modes = distinct_modes(zero_modes(W.sp, W, v, "annihilation", 12.0, 2000).normalizable)
        worst = max(zero_mode_residual(W, v, m, order=4) for m in modes)
        checks.append(_below(f"zero-mode residual {label}", worst, 1e-4,
                             f"{len(modes)} modes, n=2000, order 4"))
        basis = _hamiltonian_basis(W, v, 12.0, 2000, 3)
        prod = 0.0
        for j in range(3):
            psi = GridFunction(12.0, 2000, basis[:, j])
            E = rayleigh_quotient(W, v, psi, order=4)
            prod = max(prod, product_identity_residual(W, v, psi, E, order=4)
                       / max(1.0, abs(product_polynomial(W.sp, v, E))))
        checks.append(_below(f"a+ a = P(H) {label}", prod, 1e-3, "lowest 3 grid eigenvectors"))

    for cid in ("A", "A2", "B"):
        _, W, v = _model(cid)
        r1, r2 = (intertwining_residual(W, v, _gaussian(n), order=4) for n in (2000, 4000))
        checks.append(_below(f"intertwining {cid} n=2000", r1, 1e-3))
        checks.append(Check(f"intertwining {cid} convergence", r1 / r2 >= 3.5, r1 / r2, 3.5,
                            f"{r1:.3e} -> {r2:.3e}"))
        params, W, v = _model(cid)
        # seed an unbounded ladder: a finite one ends inside 4 rungs
        label = next(lad.label for lad in realized_ladders(params, W.solution, n=2000)
                     if lad.length is None)
        modes = zero_modes(W.sp, W, v, "annihilation", 12.0, 2000).normalizable
        seed = next(m for m in modes if m.label == label)
        rq = ladder_rayleigh(W, v, seed.wavefunction, rungs=4)
        spacing = float(np.max(np.abs(np.diff(rq) - 2 * W.sp.lam)))
        checks.append(_below(f"ladder spacing {cid}", spacing, 2e-3,
                             f"seed {seed.label}, 4 rungs"))
    return checks


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def domain_for(V, cutoff, margin, L0=12.0, step=4.0, L_max=64.0):
    """Smallest L = L0 + k step with V(+-L) >= cutoff + margin, so states
    below the cutoff decay well before the walls."""
    L = L0
    while L < L_max and min(float(V(np.array([-L]))[0]), float(V(np.array([L]))[0])) < cutoff + margin:
        L += step
    return L


def _levels_below(levels, cutoff):
    return np.array(sorted(e for e in levels if e < cutoff))


def suite_spectra() -> List[Check]:
    checks = []
    for label, cid, t in _case_runs():
        params = case_params(cid)
        hw = params.hbar * params.omega
        cutoff = E_MAX * hw
        sol = catalogue(_solution_id(cid), t)
        susy = _levels_below(realized_levels(params, sol, 64), cutoff)
        spec = PotentialSpec.from_case(cid, t=t)
        # one level more than expected, so a surplus level below the cutoff shows up
        V = lambda x, spec=spec: g1(spec, x)
        L = domain_for(V, cutoff, 5 * hw)
        eig = refine(V, len(susy) + 1, L=L, tol=1e-7).energies
        eig = _levels_below(eig, cutoff)
        if len(eig) == len(susy):
            gap = float(np.max(np.abs(eig - susy)))
        else:
            gap = math.inf
        checks.append(_below(f"eigensolver vs SUSY {label}", gap, 1e-4 * hw,
                             f"{len(eig)} eigenvalues, {len(susy)} SUSY levels below "
                             f"{E_MAX:g} hbar omega, L={L:g}"))
        alg = _levels_below(x_part_levels(derive_spectra(params, p_max=8), 64), cutoff)
        extra = [e for e in alg if np.min(np.abs(susy - e), initial=math.inf) > 1e-6]
        missing = [e for e in susy if np.min(np.abs(alg - e), initial=math.inf) > 1e-6]
        known = KNOWN_UNREALIZED.get(resolve_case(cid).case_id, ())
        unexplained = [e for e in extra if all(abs(e - k * hw) > 1e-9 for k in known)]
        ok = not missing and not unexplained and len(extra) == len(known)
        detail = f"algebra-only levels {[round(float(e), 12) for e in extra]}" if extra else ""
        checks.append(Check(f"algebra vs SUSY {label}", ok, float(len(missing) + len(unexplained)),
                            0.0, detail))
    return checks


_RUNNERS: Dict[str, Callable[[], List[Check]]] = {
    "painleve": suite_painleve,
    "algebra": suite_algebra,
    "susy": suite_susy,
    "spectra": suite_spectra,
}


def run(suite: str) -> Dict[str, List[Check]]:
    """Run one suite or ``all``; returns {suite name: checks}."""
    names = SUITES if suite == "all" else (suite,)
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown suite {suite!r}")
    return {name: _RUNNERS[name]() for name in names}


def all_passed(results: Dict[str, List[Check]]) -> bool:
    return all(c.passed for checks in results.values() for c in checks)
