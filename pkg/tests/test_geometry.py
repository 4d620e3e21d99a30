import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlab import geometry as geo
from beamlab.errors import PreconditionError


def test_minkowski_metric_is_constant_diagonal():
    m = geo.minkowski(4)
    for x in (np.zeros(4), np.array([0.3, -1.0, 2.0, 5.0])):
        assert np.array_equal(m.g(x), np.diag([-1.0, 1, 1, 1]))
        assert not np.any(geo.christoffel(m, x))


def test_bump_metric_at_center():
    m = geo.gaussian_bump(3, amplitude=0.1, width=1.0)
    g = m.g(np.zeros(3))
    assert g[0, 0] == -1
    assert np.allclose(np.diag(g)[1:], 1.1, atol=1e-15)


def _fd_first(m, x, step=1e-5):
    out = np.zeros((m.dim,) * 3)
    for k in range(m.dim):
        e = np.zeros(m.dim)
        e[k] = step
        out[k] = (m.g(x + e) - m.g(x - e)) / (2 * step)
    return out


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_bump_derivatives_match_differences(x):
    m = geo.gaussian_bump(3, amplitude=0.2, width=0.8)
    x = np.array(x)
    assert np.allclose(m.dg(x), _fd_first(m, x), atol=1e-8)


def test_straight_null_geodesic_in_flat_space():
    m = geo.minkowski(4)
    g = geo.integrate_null_geodesic(m, np.zeros(4), np.array([1.0, 1, 0, 0]), (-1.0, 2.0))
    s = np.linspace(-1, 2, 7)
    assert np.allclose(g.position(s), np.outer(s, [1, 1, 0, 0]), atol=1e-14)


def test_non_null_start_rejected():
    with pytest.raises(PreconditionError):
        geo.integrate_null_geodesic(geo.minkowski(3), np.zeros(3), np.array([1.0, 0.5, 0.0]), (0.0, 1.0))


def test_curved_geodesic_stays_null_and_matches_rk4():
    m = geo.gaussian_bump(3, amplitude=0.15, width=1.0)
    p = np.array([0.0, -1.0, 0.3])
    xi = np.array([np.sqrt(m.g(p)[1, 1]), 1.0, 0.0])
    g = geo.integrate_null_geodesic(m, p, xi, (0.0, 2.0))
    assert g.null_defect() < 1e-8
    x_rk, v_rk = geo.geodesic_rk4(m, p, xi, 2.0, 4000)
    assert np.allclose(g.position(2.0), x_rk, atol=1e-8)


def test_flat_null_frame():
    m = geo.minkowski(4)
    e = geo.complete_null_frame(m, np.zeros(4), np.array([1.0, 1, 0, 0]))
    assert np.allclose(e[1], [1, -1, 0, 0])
    assert np.allclose(e[2:], [[0, 0, 1, 0], [0, 0, 0, 1]])
    gram = e @ m.g(np.zeros(4)) @ e.T
    assert np.allclose(gram, geo.frame_model(4), atol=1e-14)


def test_transported_frame_relations_on_curved_background():
    m = geo.gaussian_bump(3, amplitude=0.15, width=1.0)
    p = np.array([0.0, -1.0, 0.2])
    xi = np.array([np.sqrt(m.g(p)[1, 1]), 1.0, 0.0])
    g = geo.integrate_null_geodesic(m, p, xi, (0.0, 2.0))
    frame = geo.build_null_frame_and_transport(m, g)
    assert frame.relation_defect() < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.8, 1.8), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_fermi_chart_round_trip(s, z1, z2):
    m = geo.gaussian_bump(3, amplitude=0.1, width=1.0)
    p = np.array([0.0, -1.0, 0.3])
    xi = np.array([np.sqrt(m.g(p)[1, 1]), 1.0, 0.0])
    g = geo.integrate_null_geodesic(m, p, xi, (-1.0, 2.0))
    chart = geo.build_fermi_chart(m, g, geo.build_null_frame_and_transport(m, g), 0.5)
    c = np.array([s, z1, z2])
    assert np.allclose(chart.inverse(chart.forward(c)), c, atol=1e-9)


def test_fermi_metric_is_model_on_axis():
    m = geo.gaussian_bump(3, amplitude=0.1, width=1.0)
    p = np.array([0.0, -1.0, 0.3])
    xi = np.array([np.sqrt(m.g(p)[1, 1]), 1.0, 0.0])
    g = geo.integrate_null_geodesic(m, p, xi, (-1.0, 2.0))
    chart = geo.build_fermi_chart(m, g, geo.build_null_frame_and_transport(m, g), 0.5)
    for s in (-0.5, 0.4, 1.5):
        assert np.allclose(chart.pulled_back_metric(np.array([s, 0.0, 0.0])), geo.chart_model(3), atol=1e-6)
        assert np.max(np.abs(geo.axis_metric_derivatives(chart, s))) < 1e-5
