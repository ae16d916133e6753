"""The nine acceptance criteria at their stated tolerances."""

import time

import numpy as np

from painleve_spectra.cubic_algebra import (
    CubicAlgebraCoeffs, casimir_coefficients, casimir_discrepancy, casimir_value, derive_spectra,
    factored_structure_function, structure_function_general, u_candidates, x_part_levels)
from painleve_spectra.eigensolver import refine
from painleve_spectra.potentials import ModelParams, PotentialSpec, case_params, g1
from painleve_spectra.special_functions import CATALOGUE_PARAMS, catalogue, p4_integrate, p4_residual
from painleve_spectra.susy import (
    GridFunction, distinct_modes, intertwining_residual, ladder_rayleigh, normalizable_state_count,
    realized_ladders, superpotentials, variant_for, zero_mode_residual, zero_modes)


def x_levels(case, k, t=0.0, L=12.0):
    spec = PotentialSpec.from_case(case, t=t)
    return refine(lambda x: g1(spec, x), k, L=L, tol=1e-7).energies


def gap(got, want):
    return float(np.max(np.abs(np.asarray(got) - np.asarray(want))))


def test_criterion_1_case_a_levels(criterion):
    start = time.perf_counter()
    got = x_levels("A", 5)
    elapsed = time.perf_counter() - start
    want = [-5 / 6] + [13 / 6 + n for n in range(4)]
    err = gap(got, want)
    criterion(1, "case A x levels", err < 1e-4 and elapsed < 10,
              f"max error {err:.2e}, {elapsed:.2f} s")


def test_criterion_2_case_a2_levels(criterion):
    err = gap(x_levels("A2", 5), [-1.5, -0.5, 2.5, 3.5, 4.5])
    criterion(2, "case A2 x levels", err < 1e-4, f"max error {err:.2e}")


def test_criterion_3_case_b_levels_and_series(criterion):
    want = [(n + 0.5) / 3 for n in range(6)]
    err = gap(x_levels("B", 6, L=16.0), want)
    series = [s for s in derive_spectra(case_params("B")) if s.infinite]
    bases = sorted(s.intercept for s in series)
    ok_series = len(series) == 3 and gap(bases, [2 / 3, 1, 4 / 3]) < 1e-12
    ladder = gap(x_part_levels(series, 6), want) if ok_series else np.inf
    criterion(3, "case B x levels and three series", err < 1e-5 and ok_series and ladder < 1e-12,
              f"eigen error {err:.2e}, series bases {np.round(bases, 6).tolist()}")


def test_criterion_4_case_c_levels(criterion):
    want = [-1 / 2, 1 / 2, 5 / 6, 7 / 6, 3 / 2, 11 / 6, 13 / 6, 5 / 2]
    err = gap(x_levels("C", 8, L=16.0), want)
    criterion(4, "case C x levels", err < 1e-4, f"max error {err:.2e}")


def test_criterion_5_erfc_isospectral(criterion):
    want = [n - 1 / 6 for n in range(5)]
    errs = {t: gap(x_levels("D", 5, t=t), want) for t in (0.0, 0.3, -1.0)}
    criterion(5, "erfc family t-independent levels", max(errs.values()) < 1e-4,
              ", ".join(f"t={t:g}: {e:.1e}" for t, e in errs.items()))


def test_criterion_6_painleve_residuals(criterion):
    worst = 0.0
    for case, t in [("A", 0), ("B", 0), ("C", 0), ("D", 0), ("D", 0.3), ("D", -1.0), ("E", 0.3)]:
        sol = catalogue(case, t)
        z = np.linspace(-5, 5, 400)
        z = z[np.abs(z) > 0.05]
        f, fp, fpp = sol.derivatives(z)
        keep = np.abs(f) > 1e-3
        r = p4_residual(f[keep], fp[keep], fpp[keep], z[keep], sol.params)
        worst = max(worst, float(np.max(np.abs(r))))
    z = np.linspace(1, 4, 61)
    integ = 0.0
    for case in ("A", "B"):
        exact = catalogue(case)
        f0, fp0 = exact(np.array([1.0]))
        sol = p4_integrate(CATALOGUE_PARAMS[case], 1.0, f0[0], fp0[0], z, tol=1e-15)
        integ = max(integ, gap(sol(z)[0], exact(z)[0]))
    criterion(6, "P4 residuals and integrator", worst < 1e-8 and integ < 1e-8,
              f"residual {worst:.1e}, integrator {integ:.1e}")


def test_criterion_7_validity_windows(criterion):
    a = derive_spectra(case_params("A"))
    a2 = derive_spectra(case_params("A2"))
    d = derive_spectra(case_params("D"))
    one = [s.valid_p for s in a if abs(s.intercept + 1 / 3) < 1e-9]
    two = [s.valid_p for s in a2 if abs(s.intercept + 1) < 1e-9]
    merged = [s for s in d if abs(s.intercept - 4 / 3) < 1e-9]
    ok = one == [(0,)] and two == [(0, 1)] and len(merged) == 1 and bool(merged[0].coincident)
    criterion(7, "representation validity windows", ok,
              f"A {one}, A2 {two}, D merged {[(s.case_id,) + s.coincident for s in merged]}")


def _model(case):
    params = case_params(case)
    return params, superpotentials(params, catalogue(case)), variant_for(params)


def test_criterion_8_susy_operators(criterion):
    details = []
    ok = True
    for case in ("A", "B"):
        params, W, v = _model(case)
        r = [intertwining_residual(W, v, GridFunction.sample(lambda x: np.exp(-x * x), 12.0, n,
                                                              dtype=np.longdouble), order=4)
             for n in (2000, 4000)]
        modes = distinct_modes(zero_modes(W.sp, W, v, "annihilation", 12.0, 2000).normalizable)
        zres = max(zero_mode_residual(W, v, m, order=4) for m in modes)
        seed_label = next(lad.label for lad in realized_ladders(params, W.solution, n=2000)
                          if lad.length is None)
        seed = next(m for m in modes if m.label == seed_label)
        rq = ladder_rayleigh(W, v, seed.wavefunction, rungs=4)
        spacing = float(np.max(np.abs(np.diff(rq) - 2 * W.sp.lam)))
        ok &= r[0] < 1e-3 and r[0] / r[1] >= 3.5 and zres < 1e-4 and spacing < 2e-3
        details.append(f"{case}: intertwining {r[0]:.1e} ratio {r[0] / r[1]:.2f}, "
                       f"zero mode {zres:.1e}, spacing {spacing:.1e}")
    criterion(8, "SUSY operator checks", ok, "; ".join(details))


def test_criterion_9_properties(criterion):
    rng = np.random.default_rng(9)
    agree = 0.0
    for eps in (1, -1):
        for _ in range(20):
            params = ModelParams(rng.uniform(-3, 3), rng.uniform(-6, -0.1), eps)
            E = rng.uniform(-2, 3)
            coeffs = CubicAlgebraCoeffs.from_params(params)
            K = casimir_value(params, E, "consistent").value
            x = np.arange(5.0)
            for u in u_candidates(params, E):
                phi = factored_structure_function(params, E, u)
                gen = structure_function_general(coeffs, K, E, u, x)
                agree = max(agree, float(np.max(np.abs(gen - phi.real(x)) / phi.scale(x))))
    # the published Casimir is reported per coefficient; only H^0 and H^2 differ
    flagged = set()
    for case in ("A", "A2", "B", "C", "D", "E"):
        params = case_params(case)
        flagged |= {r.power for r in casimir_discrepancy(params) if not r.agrees}
    closure = 0.0
    for case in ("A", "A2", "B", "C", "D", "E"):
        for s in derive_spectra(case_params(case), include_unphysical=True):
            for p in range(6):
                phi = s.structure_function(p)
                closure = max(closure, float(abs(phi(p + 1.0)) / phi.scale(p + 1.0)))
    counts = {}
    for case, sid, t in [("A", "A", 0), ("A2", "A", 0), ("B", "B", 0), ("C", "C", 0),
                         ("D", "D", 0.3), ("E", "E", 0.3)]:
        params = case_params(case)
        W = superpotentials(params, catalogue(sid, t))
        counts[case] = normalizable_state_count(W, variant_for(params))
    ok = agree < 1e-8 and flagged <= {0, 2} and closure < 1e-10 and max(counts.values()) <= 3
    criterion(9, "algebra and zero-mode properties", ok,
              f"Phi agreement {agree:.1e} with corrected Casimir, printed Casimir off at H^"
              f"{sorted(flagged)}, closure {closure:.1e}, zero modes {counts}")
