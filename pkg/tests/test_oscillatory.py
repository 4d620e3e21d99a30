import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from beamlab import oscillatory as osc
from beamlab.errors import PreconditionError


def gaussian_2d(h):
    return osc.OscillatoryIntegral(np.zeros(2), -3.0, 3.0, h, psi=lambda X: 0.5j * np.sum(X * X, axis=1),
                                   amplitude=lambda X: np.ones(X.shape[0]))


def test_isotropic_gaussian_leading_term():
    assert osc.stationary_phase_leading(gaussian_2d(0.01)) == pytest.approx(2 * math.pi * 0.01, rel=1e-12)


def test_fresnel_leading_term():
    h = 0.02
    I = osc.fresnel_case(h)
    expected = math.sqrt(2 * math.pi * h) * np.exp(1j * math.pi / 4)
    assert osc.stationary_phase_leading(I) == pytest.approx(expected, rel=1e-12)


def test_quadrature_against_error_function():
    h = 0.01
    I = osc.OscillatoryIntegral(np.zeros(1), -1.0, 1.0, h, psi=lambda X: 0.5j * X[:, 0] ** 2,
                                amplitude=lambda X: np.ones(X.shape[0]))
    ref = math.sqrt(2 * math.pi * h) * erf(1 / math.sqrt(2 * h))
    assert abs(osc.oscillatory_quadrature(I, tol=1e-12) - ref) <= 1e-10 * ref


def test_zero_amplitude():
    I = osc.OscillatoryIntegral(np.zeros(1), -1.0, 1.0, 0.1, psi=lambda X: 0.5 * X[:, 0] ** 2 + 0j,
                                amplitude=lambda X: np.zeros(X.shape[0]))
    assert osc.oscillatory_quadrature(I) == 0
    assert osc.stationary_phase_leading(I) == 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-0.5, 0.5), st.floats(0.3, 3.0), st.sampled_from([0.1, 0.01]))
def test_gaussian_family_is_exact(a, b, c, h):
    if a * c - b * b < 0.05:
        return
    I = osc.gaussian_case(h, ((a, b), (b, c)))
    exact = 2 * math.pi * h / math.sqrt(a * c - b * b)
    assert abs(osc.stationary_phase_leading(I) - exact) <= 1e-12 * exact
    assert abs(osc.oscillatory_quadrature(I, tol=1e-11) - exact) <= 1e-9 * exact


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_branch_of_square_root_determinant(re, im):
    H = np.array([[re + 1j * im]])
    r = osc.sqrt_det_minus_i_hessian(H)
    assert r * r == pytest.approx(-1j * H[0, 0])
    assert r.real > 0


def test_off_critical_point_is_rejected():
    I = osc.OscillatoryIntegral(np.array([0.3]), -1.0, 1.0, 0.1, psi=lambda X: 0.5 * X[:, 0] ** 2 + 0j,
                                amplitude=lambda X: np.ones(X.shape[0]))
    with pytest.raises(PreconditionError):
        osc.stationary_phase_leading(I)


def test_fresnel_error_is_first_order():
    r = osc.sp_error_slope(osc.fresnel_case, [0.1, 0.05, 0.02, 0.01])
    assert r.slope >= 0.9


@pytest.mark.slow
def test_complex_phase_error_is_first_order():
    r = osc.sp_error_slope(osc.complex_phase_case, [0.2, 0.1, 0.05, 0.02], tol=1e-9, panels=[6] * 3, max_levels=3)
    assert r.slope >= 0.9
