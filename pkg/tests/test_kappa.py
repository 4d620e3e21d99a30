import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlab import kappa as kp
from beamlab.errors import ConditioningError, InsufficientDataError, PreconditionError, ReconciliationError

# exact solutions of the dependence system (sympy, 20 digits), frozen
FROZEN = [
    ((0.3, 0.2, 1, "kappa"), [-0.04, -1.3458571279792898675, 0.78832248413133949866, 0.59753464384795036883]),
    ((0.3, 0.2, 1, "kappa_tilde"),
     [-0.04, -1.3474415987390027065, 0.74871864145682477883, 0.59793080117343564900, 0.04]),
    ((-0.5, 0.05, -1, "kappa"), [-0.0025, -2.9956238266578634187, 1.4774112782343207432, 1.5207125484235426755]),
    ((0.0, 0.6, 1, "kappa"), [-0.36, -1.44, 1.2, 0.6]),
]


def eta(v, w):
    return -v[0] * w[0] + float(np.dot(v[1:], w[1:]))


@pytest.mark.parametrize("args,expected", FROZEN)
def test_weights_match_exact_solution(args, expected):
    s0, sigma, sign, variant = args
    w = kp.solve_kappa(kp.build_xi(s0, sigma, sign), variant).weights
    assert np.allclose(w, expected, rtol=0, atol=1e-13)


def test_inner_products():
    fam = kp.build_xi(0.0, 0.5)
    v = fam.vectors
    assert eta(v[2], v[3]) == pytest.approx(-0.5, abs=1e-15)
    assert eta(v[1], v[1]) == 0
    assert eta(kp.build_xi(0.0, 0.6).vectors[1], kp.build_xi(0.0, 0.6).vectors[2]) == pytest.approx(-0.2, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(0.01, 0.99), st.sampled_from([1, -1]), st.sampled_from([3, 4, 5]))
def test_family_is_null_with_fixed_members(s0, sigma, sign, dim):
    v = kp.build_xi(s0, sigma, sign, dim).vectors
    for row in v:
        assert abs(eta(row, row)) < 1e-14
    assert np.array_equal(v[1][:3], [1, 1, 0])
    assert v[0][2] == pytest.approx(sign * math.sqrt(1 - s0 * s0))
    assert not np.any(v[:, 3:])


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.01, 0.9), st.sampled_from([1, -1]), st.sampled_from(["kappa", "kappa_tilde"]))
def test_dependence_holds(s0, sigma, sign, variant):
    sol = kp.solve_kappa(kp.build_xi(s0, sigma, sign), variant)
    w = sol.weights
    v = sol.family.vectors[: w.size]
    assert np.max(np.abs(w @ v)) < 1e-12
    assert w[0] == pytest.approx(-sigma**2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.05, 0.3), st.sampled_from([1, -1]))
def test_closed_forms_agree_with_solve(s0, sigma, sign):
    for variant in ("kappa", "kappa_tilde"):
        w = kp.kappa_closed_form(s0, sigma, sign, variant)
        ref = kp.solve_kappa(kp.build_xi(s0, sigma, sign), variant).weights
        assert np.max(np.abs(w - ref)) < 1e-9


def test_printed_denominator_is_rejected():
    assert kp.reconcile_denominator() == "2c-2"
    with pytest.raises(ReconciliationError):
        kp.kappa_closed_form(0.3, 0.2, 1, "kappa", denominator="2c-1")


def test_input_ranges():
    with pytest.raises(PreconditionError):
        kp.build_xi(0.0, 1.5)
    with pytest.raises(PreconditionError):
        kp.build_xi(1.5, 0.2)
    with pytest.raises(ConditioningError):
        kp.solve_kappa(kp.build_xi(0.0, 1e-5))


def test_fit_exponent_exact_power_law():
    s = np.geomspace(0.02, 0.2, 8)
    fit = kp.fit_exponent(s, 3 * s**-4)
    assert fit.exponent == pytest.approx(-4, abs=1e-12)
    assert fit.coefficient == pytest.approx(3, rel=1e-12)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_exponent_needs_a_decade():
    with pytest.raises(InsufficientDataError):
        kp.fit_exponent(np.linspace(0.1, 0.2, 6), np.ones(6))
    with pytest.raises(InsufficientDataError):
        kp.fit_exponent([0.1, 1.0], [1.0, 2.0])


def test_fit_exponent_keeps_one_sign_run():
    s = np.geomspace(0.01, 1, 12)
    y = s**2
    y[:3] *= -1
    with pytest.warns(RuntimeWarning):
        fit = kp.fit_exponent(s, y)
    assert fit.exponent == pytest.approx(2)
    assert "sign change" in fit.note


def test_gram_scaling_laws():
    fits, _ = kp.exponent_suite()
    for key, law in kp.DERIVED_LAWS.items():
        assert fits[key].exponent == pytest.approx(law, abs=kp.LAW_TOLERANCE.get(key, 0.1)), key
    assert abs(fits["xi24"].coefficient) == pytest.approx(1 / 8, rel=0.1)
    assert fits["kappa1_correction"].coefficient == pytest.approx(1.5, rel=0.02)


@pytest.mark.parametrize("s0", [-0.4, 0.0, 0.5])
def test_kappa1_correction_coefficient_tracks_s0(s0):
    fits, _ = kp.exponent_suite(s0=s0)
    assert fits["kappa1_correction"].coefficient == pytest.approx((3 - s0) / 2, rel=0.02)


def test_sweep_table_shape():
    rows = kp.sweep_table(np.linspace(-0.5, 0.5, 5), np.linspace(0.05, 0.3, 5))
    assert len(rows) == 25
    assert max(r["residual"] for r in rows) <= 1e-12
