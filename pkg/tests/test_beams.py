import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlab import geometry as geo
from beamlab.beams import (assemble_formal_beam, beam_residual_norm, c_matrix, cutoff_profile,
                           flat_riccati_transport, leading_amplitude, parse_h0, solve_riccati, straight_beam)
from beamlab.errors import ConfigError, PreconditionError


def test_parse_h0_forms():
    assert np.allclose(parse_h0("i/2*Id", 3), 0.5j * np.eye(3))
    assert np.allclose(parse_h0("2i", 2), 2j * np.eye(2))
    assert np.allclose(parse_h0([1j, 2j], 2), np.diag([1j, 2j]))
    with pytest.raises(ConfigError):
        parse_h0("__import__('os')", 2)


def test_flat_closed_forms():
    ph, am = straight_beam([1, 1, 0, 0], s_init=0.0, s_end=2.0, H0="i/2*Id")
    ric = ph.riccati
    tau = ric.s
    Y = np.zeros((tau.size, 3, 3), dtype=complex)
    Y[:, 0, 0] = 1
    Y[:, 1, 1] = Y[:, 2, 2] = 1 + 1j * tau
    assert np.max(np.abs(ric.Y - Y)) < 1e-12
    assert np.max(np.abs(ric.Z - 0.5j * np.eye(3))) < 1e-12
    assert np.max(np.abs(am.a0.samples - 1 / (1 + 1j * tau))) < 1e-12


def test_subleading_flat_part_for_constant_potential():
    q = 0.7
    ph, am = straight_beam([1, 1, 0, 0], s_init=0.0, s_end=2.0, H0="i/2*Id", Q=q)
    tau = ph.riccati.s
    assert np.max(np.abs(am.a1.flat_part.values - q * tau / (2 * (1 + 1j * tau)))) < 1e-10
    assert np.max(np.abs(am.a1.sharp.values)) < 1e-12


def test_zero_potential_gives_zero_flat_part():
    ph, am = straight_beam([1, 1, 0], s_init=0.0, s_end=1.0, H0="i")
    assert not np.any(am.a1.flat_part.values)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-1.0, 1.0), st.floats(0.05, 1.5))
def test_flat_transport_is_a_flow(im, re, ds):
    H0 = np.diag([re + 1j * im, 0.3 + 1j * (im + 0.2)])
    H0[0, 1] = H0[1, 0] = 0.1
    half = flat_riccati_transport(flat_riccati_transport(H0, ds / 2), ds / 2)
    assert np.allclose(half, flat_riccati_transport(H0, ds), atol=1e-12)
    assert np.allclose(flat_riccati_transport(flat_riccati_transport(H0, ds), -ds), H0, atol=1e-11)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-1.0, 1.0), st.floats(0.5, 3.0))
def test_riccati_invariants_flat(im, re, length):
    H0 = (re + 1j * im) * np.eye(2)
    ric = solve_riccati(None, H0, (0.0, length), samples=101)
    assert ric.determinant_identity_defect() < 1e-8
    assert ric.min_im_eigenvalue() > 0
    closed = np.array([flat_riccati_transport(H0, s) for s in ric.s])
    assert np.max(np.abs(ric.H - closed)) < 1e-10


def test_riccati_on_curved_background():
    m = geo.gaussian_bump(3, amplitude=0.1, width=1.0)
    p = np.array([0.0, -1.0, 0.3])
    xi = np.array([np.sqrt(m.g(p)[1, 1]), 1.0, 0.0])
    g = geo.integrate_null_geodesic(m, p, xi, (0.0, 2.0))
    chart = geo.build_fermi_chart(m, g, geo.build_null_frame_and_transport(m, g), 0.5)
    ric = solve_riccati(chart, "i/2*Id", (0.0, 2.0), samples=151, d_samples=16)
    assert not ric.flat
    assert np.max(np.abs(ric.D)) > 1e-4
    assert ric.determinant_identity_defect() < 1e-8
    assert ric.min_im_eigenvalue() > 0
    assert ric.residual() < 1e-8
    assert leading_amplitude(ric).transport_residual() < 1e-8


def test_riccati_rejects_bad_initial_data():
    with pytest.raises(PreconditionError):
        solve_riccati(None, np.diag([1j, -1j]), (0.0, 1.0))
    with pytest.raises(PreconditionError):
        solve_riccati(None, np.array([[1j, 0.1], [0.2, 1j]]), (0.0, 1.0))


def test_c_matrix_shape():
    assert np.array_equal(c_matrix(3), np.diag([0.0, 2, 2]))


def test_cutoff_profile_plateau_and_support():
    t = np.array([0.0, 0.1, 0.25, 0.4, 0.5, 1.0])
    chi = cutoff_profile(t)
    assert np.all(chi[:3] == 1) and np.all(chi[-2:] == 0)
    assert 0 < chi[3] < 1


def test_identity_scaling_and_conjugation():
    ph, am = straight_beam([1, 1, 0], s_init=-1.0, s_end=1.0, H0="i", Q=0.4)
    h = 0.05
    X = np.array([[0.2, 0.25, 0.05], [0.0, 0.02, -0.03]])
    plain = assemble_formal_beam(ph, am, h)
    f = plain.fields(X)
    assert np.allclose(plain(X), np.exp(1j * f["psi"] / h) * (f["a0"] + h * f["a1"]))
    conj = assemble_formal_beam(ph, am, h, kappa=-1.0, conjugate=True)
    g = conj.fields(X)
    assert np.allclose(g["psi"], -np.conj(f["psi"]))
    expected = np.exp(-1j * np.conj(f["psi"]) / h) * np.conj(f["a0"] + h * f["a1"])
    assert np.allclose(conj(X), expected)


def test_bad_h_and_kappa_rejected():
    ph, am = straight_beam([1, 1, 0], s_init=0.0, s_end=1.0, H0="i")
    with pytest.raises(PreconditionError):
        assemble_formal_beam(ph, am, 1.5)
    with pytest.raises(PreconditionError):
        assemble_formal_beam(ph, am, 0.1, kappa=0.0)


def test_beam_phase_solves_eikonal_on_axis():
    ph, am = straight_beam([1, 1, 0], s_init=-1.0, s_end=1.0, H0="i")
    beam = assemble_formal_beam(ph, am, 0.1)
    X = np.outer(np.linspace(-0.8, 0.8, 9), [1, 1, 0])
    f = beam.fields(X)
    g = f["grad"]
    sq = -g[:, 0] ** 2 + g[:, 1] ** 2 + g[:, 2] ** 2
    assert np.max(np.abs(sq)) < 1e-12
    assert np.max(np.abs(f["psi"])) < 1e-12


def test_residual_decays_in_four_dimensions():
    ph, am = straight_beam([1, 1, 0, 0], s_init=0.0, s_end=1.0, H0="i*Id", radius=4.0)
    hs = [0.04, 0.01]
    reps = [beam_residual_norm(assemble_formal_beam(ph, am, h), 0.0, full=True) for h in hs]
    assert reps[1].norm < reps[0].norm
    assert abs(reps[0].sup_beam - reps[1].sup_beam) < 0.05
    # h drops by four: expect about h^(1/4)
    slope = np.log(reps[0].norm / reps[1].norm) / np.log(4)
    assert slope == pytest.approx(0.25, abs=0.02)
