import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlab import geometry as geo
from beamlab.errors import DegeneratePhaseError, PreconditionError
from beamlab.interaction import (BoxGrid, PlanePhase, beta2_from_pairs, beta_theta, c_coefficients, c_recursion,
                                 combine_phases, interaction_residual, psi_sharp, residual_fields)
from beamlab.kappa import build_xi, solve_kappa
from beamlab.scenarios import interaction_pair, plane_pair

M3 = geo.minkowski(3)
ONE = lambda X: np.ones(np.atleast_2d(X).shape[0])


def eta(v, w):
    return -v[0] * w[0] + float(np.dot(v[1:], w[1:]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_plane_pair_square_is_constant(a, b):
    x1, x2 = np.array([1, np.cos(a), np.sin(a)]), np.array([1, np.cos(b), np.sin(b)])
    if abs(eta(x1, x2)) < 1e-3:
        return
    cp = combine_phases([PlanePhase(x1), PlanePhase(x2)], M3, None, 0.2)
    pts = cp.sample_points()
    assert np.allclose(cp.square(pts), 2 * eta(x1, x2), atol=1e-13)
    assert cp.pair_identity_gap() < 1e-13


def test_proportional_directions_are_degenerate():
    with pytest.raises(DegeneratePhaseError):
        combine_phases([PlanePhase((1, 1, 0)), PlanePhase((1, 1, 0), kappa=2.0)], M3)


def test_sharp_factor_from_kappa_weights():
    sol = solve_kappa(build_xi(0.0, 0.6), "kappa")
    k1, k2 = sol.weights[1], sol.weights[2]
    v = sol.family.vectors
    assert eta(v[1], v[2]) == pytest.approx(-0.2, abs=1e-15)
    cp = combine_phases([PlanePhase(v[1], k1), PlanePhase(v[2], k2)], M3)
    got = psi_sharp(cp, np.zeros((1, 3)))[0]
    assert abs(got - 1 / (2 * k1 * k2 * -0.2)) < 1e-10


def test_c2_for_unit_source():
    # square -2 and q b0 = 1 give c2 = -1/2 with the operator sign used here
    x1, x2 = np.array([1.0, 1, 0]), np.array([1.0, -1, 0])
    cp = combine_phases([PlanePhase(x1), PlanePhase(x2, kappa=0.5)], M3)
    assert cp.square(np.zeros((1, 3)))[0] == pytest.approx(-2)
    co = c_coefficients(cp, ONE, ONE, 1.0)
    assert co.c2(np.zeros(3))[0] == pytest.approx(-0.5)


def test_c3_for_linear_phases_and_constant_sources():
    cp = combine_phases([PlanePhase((1, 1, 0)), PlanePhase((1, 0, 1))], M3)
    co = c_coefficients(cp, ONE, lambda X: 0.7 * ONE(X), 1.0)
    pts = cp.sample_points()
    assert np.allclose(co.c3(pts), 0.7 / cp.square(pts), atol=1e-10)


def test_zero_coupling():
    cp, b0, b1 = plane_pair()
    co = c_coefficients(cp, b0, b1, 0.0)
    pts = cp.sample_points()
    assert not np.any(co.c2(pts)) and not np.any(co.c3(pts))
    grid = BoxGrid.box(np.zeros(3), 0.15, 11)
    assert interaction_residual(co, 0.0, 0.05, grid) == 0


def test_zero_sources_give_zero_recursion():
    cp, _, _ = plane_pair()
    out = c_recursion(cp, [None, None], 1, 1.0, 0.3, BoxGrid.box(np.zeros(3), 0.15, 11))
    assert all(not np.any(v) for v in out.values())


def test_recursion_limits():
    cp, b0, b1 = plane_pair()
    with pytest.raises(PreconditionError):
        c_recursion(cp, [b0, b1], 4, 1.0, 0.0, BoxGrid.box(np.zeros(3), 0.15, 11))


def test_defining_relations_hold_pointwise():
    cp, b0, b1 = plane_pair()
    co = c_coefficients(cp, b0, b1, 1.0)
    assert co.defining_relation_gap(cp.sample_points()) <= 1e-10
    triple = combine_phases([PlanePhase((1, 1, 0)), PlanePhase((1, 0, 1)), PlanePhase((1, -1, 0))], M3, None, 0.15)
    th = beta_theta(triple, b0, b1, 1.0)
    assert th.defining_relation_gap(triple.sample_points()) <= 1e-10
    assert th.theta4(np.zeros(3))[0] == pytest.approx(b0(np.zeros((1, 3)))[0] / triple.square(np.zeros((1, 3)))[0])


def test_theta4_for_unit_source():
    trip = combine_phases([PlanePhase((1.0, 1, 0)), PlanePhase((1.0, -1, 0), 0.25), PlanePhase((1.0, -1, 0), 0.25)], M3)
    assert trip.square(np.zeros((1, 3)))[0] == pytest.approx(-2)
    assert beta_theta(trip, ONE, ONE, 1.0).theta4(np.zeros(3))[0] == pytest.approx(-0.5)


def test_vanishing_pair_amplitudes_vanish_beta2():
    z = np.zeros(4)
    assert not np.any(beta2_from_pairs(z, z, z, 1.0, 2.0, 3.0))
    assert beta2_from_pairs(1.0, 2.0, 3.0, 0.5, 0.25, 0.125) == pytest.approx(0.5 + 0.5 + 0.375)


def test_recursion_matches_closed_form_c3():
    cp, b0, b1 = plane_pair()
    co = c_coefficients(cp, b0, b1, 1.0)
    grid = BoxGrid.box(np.zeros(3), 0.15, 41)
    rec = c_recursion(cp, [b0, b1], 1, 1.0, 0.0, grid)
    P = grid.points()[2:-2, 2:-2, 2:-2].reshape(-1, 3)
    c3 = rec[3][2:-2, 2:-2, 2:-2].ravel()
    assert np.max(np.abs(c3 - co.c3(P))) / np.max(np.abs(c3)) < 1e-6
    c2 = rec[2][2:-2, 2:-2, 2:-2].ravel()
    assert np.max(np.abs(c2 - co.c2(P))) < 1e-12


def test_residual_matches_direct_box_of_the_ansatz():
    """Differentiate w = e^{i Psi/h}(h^2 c2 + h^3 c3) as a whole and compare with the assembled powers."""
    cp, b0, b1 = plane_pair()
    co = c_coefficients(cp, b0, b1, 1.0)
    grid = BoxGrid.box(np.zeros(3), 0.15, 81)
    h = 0.05
    rf = residual_fields(co, 0.0, grid)
    assembled = np.exp(1j * rf.psi / h) * sum(h**p * r for p, r in enumerate(rf.powers))
    dx = grid.spacing[0]
    axes = [np.concatenate([a[0] - dx * np.arange(2, 0, -1), a, a[-1] + dx * np.arange(1, 3)]) for a in grid.axes]
    P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    X = P.reshape(-1, 3)
    shape = P.shape[:-1]
    phase = np.exp(1j * cp.value(X) / h).reshape(shape)
    w = phase * (h**2 * co.c2(X) + h**3 * co.c3(X)).reshape(shape)
    F = phase * (b0(X) + h * b1(X)).reshape(shape)

    def second(u, a):
        u = np.moveaxis(u, a, 0)
        d = (-u[4:] + 16 * u[3:-1] - 30 * u[2:-2] + 16 * u[1:-3] - u[:-4]) / (12 * dx * dx)
        return np.moveaxis(d, 0, a)

    inner = (slice(2, -2),) * 3
    box_w = second(w, 0)[:, 2:-2, 2:-2] - second(w, 1)[2:-2, :, 2:-2] - second(w, 2)[2:-2, 2:-2, :]
    direct = box_w - F[inner]
    assert np.max(np.abs(direct - assembled)) / np.max(np.abs(assembled)) < 2e-3


def test_beam_pair_residual_slope():
    _, co = interaction_pair()
    rf = residual_fields(co, 0.0, BoxGrid.box(np.zeros(3), 0.15, 41))
    hs = np.array([0.02, 0.01, 0.005, 0.0025])
    slope = np.polyfit(np.log(hs), np.log([rf.norm(h) for h in hs]), 1)[0]
    assert slope == pytest.approx(2.75, abs=0.25)
