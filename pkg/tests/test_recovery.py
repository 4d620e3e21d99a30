import json

import numpy as np
import pytest

from beamlab.beams import assemble_formal_beam, straight_beam
from beamlab.errors import PreconditionError
from beamlab.fdsolver import CoefficientSet, GridSpec
from beamlab.recovery import (J0_SIGMA, RecoveryReport, assemble_I0, assemble_I1_R1, assemble_J0_and_recover_q2,
                              axis_samples, build_ensemble, bump_profile, check_F_gauge, i1_difference_sweep, ladder,
                              recover_a1_at_p0, recover_q2sq, recover_Q_along_geodesic, tabulate)

SIGMAS = [0.05, 0.07, 0.1, 0.14, 0.2]


@pytest.fixture(scope="module")
def four_beams():
    ens = build_ensemble(sigma=0.1, h=0.01)
    return ens, tabulate(ens)


@pytest.fixture(scope="module")
def five_beams():
    ens = build_ensemble(sigma=J0_SIGMA, variant="kappa_tilde", h=0.01)
    return ens, tabulate(ens)


def test_ensemble_is_critical_at_the_intersection(four_beams):
    inv = four_beams[0].invariants()
    assert inv["gradient_gap"] < 1e-8
    assert inv["dependence_residual"] < 1e-10
    assert abs(inv["psi_p0"]) < 1e-10 and inv["grad_psi_p0"] < 1e-8
    assert min(inv["im_hessian_eigs"]) > 0
    assert inv["min_im_psi"] >= -1e-10


def test_I0_vanishes_and_scales(four_beams):
    _, table = four_beams
    assert assemble_I0(table, 0.0) == 0
    base = assemble_I0(table, 1.0)
    assert assemble_I0(table, 1.7) == pytest.approx(1.7**2 * base, rel=1e-12)


def test_I0_approaches_its_leading_term(four_beams):
    ens, table = four_beams
    r = [recover_q2sq(assemble_I0(table, 1.0, h), ens, h).value for h in (0.02, 0.01)]
    assert abs(r[1] - 1) < 0.1
    # the error is first order in h; one Richardson step lands within 5%
    assert abs(2 * r[1] - r[0] - 1) < 0.05


def test_constant_q2sq_ladder(four_beams):
    _, table = four_beams
    lad = ladder(table, 1.0, 1.0, (0.04, 0.02, 0.01))
    assert lad["monotone"]
    assert lad["rows"][-1]["relative_error"] <= 0.1


def test_bump_q2sq_ladder(four_beams):
    ens, table = four_beams
    lad = ladder(table, bump_profile(ens.p0), 2.25, (0.04, 0.02, 0.01))
    assert lad["monotone"]
    assert lad["rows"][-1]["relative_error"] <= 0.2


def test_q2_sign_from_J0(five_beams):
    _, table = five_beams
    est = assemble_J0_and_recover_q2(table, -1.0)
    assert est.value < 0
    assert abs(est.value + 1) <= 0.15
    assert assemble_J0_and_recover_q2(table, 0.0).value == 0


def test_variant_guards(four_beams, five_beams):
    with pytest.raises(PreconditionError):
        assemble_I0(five_beams[1], 1.0)
    with pytest.raises(PreconditionError):
        assemble_J0_and_recover_q2(four_beams[1], 1.0)


def test_I1_vanishes_without_subleading_terms():
    ens = build_ensemble(sigma=0.1, h=0.01)
    I1, R1 = assemble_I1_R1(ens, 1.0, panels=4)
    assert I1 == 0
    assert R1 != 0


def test_R1_is_even_in_q2():
    ens = build_ensemble(sigma=0.1, h=0.02)
    q2 = bump_profile(ens.p0)
    _, Ra = assemble_I1_R1(ens, q2, panels=4)
    _, Rb = assemble_I1_R1(ens, lambda X: -q2(X), panels=4)
    assert Ra == pytest.approx(Rb, rel=1e-12)


def test_a1_verdict_identical_sets():
    s, D, c0 = i1_difference_sweep(0.3, 0.3, SIGMAS)
    assert recover_a1_at_p0(s, D, c0).verdict == "equal"


@pytest.mark.slow
def test_a1_verdict_detects_potential_before_p0():
    xi0 = build_ensemble(sigma=0.1).directions[0]
    center = -0.5 * xi0
    Q_b = lambda X: 0.3 * np.exp(-np.sum((np.atleast_2d(X) - center) ** 2, axis=-1) / 0.05)
    s, D, c0 = i1_difference_sweep(0.0, Q_b, SIGMAS)
    v = recover_a1_at_p0(s, D, c0)
    assert v.verdict == "unequal"
    assert v.gap == pytest.approx(0.042, rel=0.05)
    assert v.growth_exponent == pytest.approx(-4, abs=0.2)


def test_a1_verdict_needs_three_sigmas():
    with pytest.raises(PreconditionError):
        recover_a1_at_p0([0.1, 0.2], [1.0, 2.0], [1.0, 1.0])


def _beam(Q):
    ph, am = straight_beam((1.0, 1.0, 0.0), s_init=-1.0, s_end=2.0, H0="0.5i", Q=Q)
    return assemble_formal_beam(ph, am, 0.1)


def test_constant_potential_is_recovered():
    beam = _beam(0.7)
    s = np.arange(-0.5, 1.5 + 1e-9, 0.05)
    prof = recover_Q_along_geodesic(s, *axis_samples(beam, s))
    assert np.max(np.abs(prof.Q - 0.7)) <= 0.007
    prof0 = recover_Q_along_geodesic(s, *axis_samples(_beam(0.0), s))
    assert not np.any(prof0.Q)


def test_varying_potential_converges_at_second_order():
    beam = _beam(lambda x: np.sin(x[0]))
    errs = []
    for ds in (0.1, 0.05, 0.025):
        s = np.arange(-0.5, 1.5 + 0.5 * ds, ds)
        prof = recover_Q_along_geodesic(s, *axis_samples(beam, s))
        errs.append(np.max(np.abs(prof.Q - np.sin(s))[~prof.endpoint]))
    order = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(errs), 1)[0]
    assert order == pytest.approx(2, abs=0.2)


def test_potential_sampling_requirements():
    beam = _beam(0.7)
    with pytest.raises(PreconditionError):
        s = np.linspace(0, 1, 4)
        recover_Q_along_geodesic(s, *axis_samples(beam, s))
    with pytest.raises(PreconditionError):
        s = np.array([0, 0.1, 0.2, 0.35, 0.4, 0.5])
        recover_Q_along_geodesic(s, *axis_samples(beam, s))


def test_F_gauge_identical_and_corrupted():
    grid = GridSpec([-1.3, -1.3], [1.3, 1.3], [41, 41], T=1.0, boundary="sponge", margin=0.25, cfl=0.6)
    c = CoefficientSet(0.4, 1.0, lambda t, x, y: np.exp(-(x * x + y * y) / 0.1) * t)
    same = check_F_gauge(c, c, 0.0, grid)
    assert same.max_F == 0 and same.max_q1 == 0
    bad = CoefficientSet(0.4, 1.0, lambda t, x, y: c.F(t, x, y) + 0.1 * np.exp(
        -((x - 0.3) ** 2 + (y + 0.2) ** 2) / 0.04 - ((t - 0.5) / 0.1) ** 2))
    chk = check_F_gauge(c, bad, 0.0, grid)
    assert chk.max_F == pytest.approx(0.1, rel=0.05)
    t, x, y = chk.argmax
    assert abs(t - 0.5) < 0.05 and np.hypot(x - 0.3, y + 0.2) < 2 * grid.dx


def test_report_round_trips_to_json(tmp_path):
    rep = RecoveryReport()
    rep.record("q2sq", 0.93 + 0.01j, "recover_q2sq", h=0.01)
    rep.record("eigs", np.array([0.1, 0.2]), "invariants")
    text = rep.to_json(tmp_path / "r.json")
    back = json.loads((tmp_path / "r.json").read_text())
    assert back == json.loads(text)
    assert back["q2sq"]["value"] == {"re": 0.93, "im": 0.01}
