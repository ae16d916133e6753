import math

import numba
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal

from painleve_spectra.eigensolver import (
    THREADS_ENV, configure_threads, discretize, eigen_lowest, refine)
from painleve_spectra.errors import ConfigError, GridTooCoarse, SingularPotential
from painleve_spectra.potentials import PotentialSpec, g1


def osc(x):
    return 0.5 * x * x


def test_discretization_layout():
    d = discretize(osc, 5.0, 101, hbar=2.0)
    h = 10.0 / 100
    assert d.diag.shape == (99,) and d.offdiag.shape == (98,)
    assert np.all(d.offdiag == -0.5 * 4 / h ** 2)
    assert d.diag[49] == pytest.approx(4 / h ** 2)


def test_box_levels():
    res = eigen_lowest(discretize(lambda x: np.zeros_like(x), math.pi / 2, 4001), 4)
    assert res.energies == pytest.approx([k * k / 2 for k in range(1, 5)], rel=1e-5)


def test_oscillator_levels():
    res = eigen_lowest(discretize(osc, 10.0, 4001), 5)
    assert res.energies == pytest.approx([k + 0.5 for k in range(5)], abs=1e-4)


def test_soft_oscillator_levels():
    res = eigen_lowest(discretize(lambda x: x * x / 18, 16.0, 4001), 4)
    assert res.energies == pytest.approx([(k + 0.5) / 3 for k in range(4)], abs=1e-4)


def test_matches_library_eigensolver():
    # independent oracle: LAPACK on the same tridiagonal matrix
    disc = discretize(lambda x: 0.5 * x * x + np.sin(3 * x), 8.0, 1001)
    want = eigh_tridiagonal(disc.diag, disc.offdiag, eigvals_only=True, select="i",
                            select_range=(0, 9))
    assert eigen_lowest(disc, 10).energies == pytest.approx(want, abs=1e-11)


def test_second_order_convergence():
    errs = []
    for n in (501, 1001):
        e = eigen_lowest(discretize(osc, 10.0, n), 3).energies
        errs.append(np.abs(e - np.array([0.5, 1.5, 2.5])))
    ratio = errs[0] / errs[1]
    assert np.all((ratio > 3.2) & (ratio < 4.8))


def test_strictly_increasing_and_orthonormal():
    res = eigen_lowest(discretize(lambda x: 0.5 * x * x - 2 * np.exp(-x * x), 10.0, 2001), 8)
    assert np.all(np.diff(res.energies) > 0)
    vecs = np.array([lv.psi.values for lv in res.levels])
    gram = np.trapezoid(vecs[:, None, :] * vecs[None, :, :], dx=res.levels[0].psi.h, axis=2)
    assert np.max(np.abs(gram - np.eye(8))) < 1e-8


def test_eigenvector_residual():
    disc = discretize(osc, 10.0, 2001)
    res = eigen_lowest(disc, 3)
    for lv in res.levels:
        v = lv.psi.values[1:-1]
        assert np.linalg.norm(disc.matvec(v) - lv.energy * v) / np.linalg.norm(v) < 1e-8


def test_refine_oscillator():
    res = refine(osc, 3, L=10.0, tol=1e-6)
    assert res.energies == pytest.approx([0.5, 1.5, 2.5], abs=1e-6)
    assert all(lv.error_estimate < 1e-6 for lv in res.levels)


def test_refine_case_a():
    spec = PotentialSpec.from_case("A")
    res = refine(lambda x: g1(spec, x), 4)
    assert res.energies == pytest.approx([-5 / 6, 13 / 6, 19 / 6, 25 / 6], abs=1e-4)


def test_refine_case_a2():
    spec = PotentialSpec.from_case("A2")
    res = refine(lambda x: g1(spec, x), 5)
    assert res.energies == pytest.approx([-1.5, -0.5, 2.5, 3.5, 4.5], abs=1e-4)


@pytest.mark.parametrize("t", [0.0, 0.3, -1.0])
def test_refine_erfc_family_independent_of_t(t):
    spec = PotentialSpec.from_case("D", t=t)
    res = refine(lambda x: g1(spec, x), 4)
    assert res.energies == pytest.approx([-1 / 6 + m for m in range(4)], abs=1e-4)


def test_domain_robustness():
    spec = PotentialSpec.from_case("A")
    V = lambda x: g1(spec, x)
    a = refine(V, 4, L=12.0).energies
    b = refine(V, 4, L=16.0).energies
    assert np.max(np.abs(a - b)) < 1e-6


def test_errors():
    with pytest.raises(GridTooCoarse):
        discretize(osc, 5.0, 32)
    with pytest.raises(ConfigError):
        discretize(osc, -1.0, 128)
    with pytest.raises(SingularPotential), np.errstate(divide="ignore"):
        discretize(lambda x: 1 / x, 5.0, 129)
    with pytest.raises(SingularPotential):
        discretize(lambda x: 1e13 + 0 * x, 5.0, 128)
    disc = discretize(osc, 5.0, 128)
    with pytest.raises(ConfigError):
        eigen_lowest(disc, 33)
    with pytest.raises(ConfigError):
        eigen_lowest(disc, 0)
    with pytest.raises(ConfigError):
        refine(osc, 2, tol=1e-12)


def test_thread_setting(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ConfigError):
        configure_threads()
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(ConfigError):
        configure_threads()
    monkeypatch.setenv(THREADS_ENV, "1")
    assert configure_threads() == 1


def test_bit_identical_across_thread_counts(monkeypatch):
    disc = discretize(lambda x: 0.5 * x * x + 0.3 * x ** 3 * np.exp(-x * x), 10.0, 3001)
    runs = []
    for k in ("1", str(numba.config.NUMBA_NUM_THREADS)):
        monkeypatch.setenv(THREADS_ENV, k)
        res = eigen_lowest(disc, 12)
        runs.append((res.energies.tobytes(), b"".join(lv.psi.values.tobytes() for lv in res.levels)))
    assert runs[0] == runs[1]


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.5, 2.0))
def test_scaled_oscillator(w, hbar):
    # V = w^2 x^2 / 2 with hbar: levels hbar w (k + 1/2)
    L = 12 * math.sqrt(hbar / w)
    res = eigen_lowest(discretize(lambda x: 0.5 * w * w * x * x, L, 4001, hbar=hbar), 3)
    want = hbar * w * (np.arange(3) + 0.5)
    assert res.energies == pytest.approx(want, rel=2e-4)
