import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from painleve_spectra.errors import ConfigError, InconsistentError
from painleve_spectra.potentials import (
    ModelParams, PotentialSpec, case_params, closed_form, consistency_offset, g1, g2, potential,
    resolve_case)
from painleve_spectra.special_functions import catalogue

X = np.linspace(-4, 4, 50) + 0.013


def test_b_is_soft_oscillator():
    spec = PotentialSpec.from_case("B")
    assert np.allclose(g1(spec, X), X ** 2 / 18, atol=1e-13)


def test_d_at_t0_is_shifted_oscillator():
    spec = PotentialSpec.from_case("D", t=0.0)
    assert np.allclose(g1(spec, X), X ** 2 / 2 - 2 / 3, atol=1e-13)


def test_a_large_x_limit():
    # the rational terms die off, leaving x^2/2 plus the constant 2/3
    spec = PotentialSpec.from_case("A")
    x = np.array([200.0, 400.0])
    assert np.allclose(g1(spec, x) - x ** 2 / 2, 2 / 3, atol=1e-3)


def test_g2_values():
    p = case_params("A")
    assert g2(p, 0.0) == 0.0
    assert g2(p, 2.0) == pytest.approx(2.0)
    assert g2(ModelParams(5, -8, 1, 1.0, 3.0), 1.0) == pytest.approx(4.5)


def test_closed_form_values_at_origin():
    assert closed_form("A", case_params("A"), 0.0, 0.0) == pytest.approx(-10 / 3)
    assert closed_form("A2", case_params("A2"), 0.0, 0.0) == pytest.approx(0.0)
    assert closed_form("C", case_params("C"), 0.0, 0.0) == pytest.approx(-4 / 3)


@pytest.mark.parametrize("case,t", [("A", 0), ("A2", 0), ("B", 0), ("C", 0), ("D", 0), ("D", 0.3),
                                    ("D", -1.0), ("E", 0.3)])
def test_p4_route_matches_closed_form(case, t):
    spec = PotentialSpec.from_case(case, t=t)
    assert consistency_offset(spec, case, X) == pytest.approx(0.0, abs=1e-12)


def test_removable_pole_filled():
    # f has a pole at x=0 in case C but g1 stays finite there
    spec = PotentialSpec.from_case("C")
    v = g1(spec, np.array([-0.5, 0.0, 0.5]))
    assert v[1] == pytest.approx(-4 / 3, abs=1e-9)
    assert np.all(np.isfinite(v))


def test_closed_spec_routes_through_closed_form():
    spec = PotentialSpec.from_case("A", closed=True)
    assert np.allclose(g1(spec, X), closed_form("A", spec.params, X, 0.0))


def test_potential_is_separable():
    spec = PotentialSpec.from_case("B")
    assert potential(spec, 1.5, 2.0) == pytest.approx(g1(spec, np.array([1.5]))[0] + 2.0)


def test_inconsistent_t_detected():
    params = case_params("D")
    spec = PotentialSpec("p4", params, solution=catalogue("D", 0.3), case_id="D", t=0.0)
    with pytest.raises(InconsistentError):
        consistency_offset(spec, "D", X)


def test_aliases():
    for alias, cid in [("4.1", "A"), ("4.2", "A2"), ("4.3", "B"), ("4.4", "C"), ("4.5", "D"),
                       ("4.6", "E"), ("a2", "A2")]:
        assert resolve_case(alias).case_id == cid
    with pytest.raises(ConfigError):
        resolve_case("4.9")


def test_params_validation():
    with pytest.raises(ConfigError):
        ModelParams(1, -1, 0)
    with pytest.raises(ConfigError):
        ModelParams(1, -1, 1, hbar=0.0)
    with pytest.raises(ConfigError):
        ModelParams(math.nan, -1, 1)


def test_spec_rejects_mismatched_solution():
    with pytest.raises(ConfigError):
        PotentialSpec("p4", case_params("A"), solution=catalogue("B"))
    with pytest.raises(ConfigError):
        PotentialSpec("closed", ModelParams(5, -8, -1), case_id="A")


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["A", "A2", "B", "C", "D"]), st.floats(0.3, 4.0), st.floats(0.1, 3.0))
def test_frequency_scaling(case, s, x):
    # omega -> s omega with x -> x / sqrt(s) multiplies every energy by s
    base = PotentialSpec.from_case(case)
    scaled = PotentialSpec.from_case(case, omega=s)
    v0 = g1(base, np.array([x]))[0]
    v1 = g1(scaled, np.array([x / math.sqrt(s)]))[0]
    assert v1 == pytest.approx(s * v0, rel=1e-10, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["A", "A2", "B", "C"]), st.floats(0.05, 5.0))
def test_potentials_even(case, x):
    spec = PotentialSpec.from_case(case)
    v = g1(spec, np.array([x, -x]))
    assert v[0] == pytest.approx(v[1], rel=1e-12, abs=1e-12)
