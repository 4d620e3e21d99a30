import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlab.errors import ConfigError, GuardError, PreconditionError
from beamlab.fdsolver import (CoefficientSet, GridSpec, discrete_box, export_field, fd_mixed_derivative,
                              gauge_transform, lipschitz_check, manufactured_convergence, solve_linear_wave,
                              solve_linearized_chain, solve_nonlinear_wave)


def bump(x0, y0, t0, w=0.15, tw=0.15, amp=1.0):
    return lambda t, x, y: amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / w**2 - ((t - t0) / tw) ** 2)


def small_grid(n=41, T=0.8):
    return GridSpec([-1.3, -1.3], [1.3, 1.3], [n, n], T=T, boundary="sponge", margin=0.25, cfl=0.6)


def test_cfl_violation_is_rejected():
    with pytest.raises(ConfigError):
        GridSpec([0, 0], [1, 1], [11, 11], T=1.0, dt=0.2)
    with pytest.raises(ConfigError):
        GridSpec([0, 0], [1, 1], [11, 11], T=1.0, boundary="reflecting")


def test_zero_data_gives_zero_solution():
    g = small_grid()
    assert not np.any(solve_linear_wave(0.5, 0.0, g).u)
    assert not np.any(solve_nonlinear_wave(CoefficientSet(0.3, 1.0, 0.0), 0.0, g).u)


@pytest.mark.parametrize("nonlinear", [False, True])
def test_manufactured_solution_is_second_order(nonlinear):
    r = manufactured_convergence(nonlinear)
    assert r.order == pytest.approx(2, abs=0.2)
    assert r.errors[-1] < 1e-3


@settings(max_examples=8, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_linear_solver_is_linear(a, b):
    g = small_grid(31, 0.5)
    f1, f2 = bump(-0.2, 0, 0.2), bump(0.3, 0.1, 0.25)
    Q = lambda t, x, y: 0.5 + 0.2 * x
    lhs = solve_linear_wave(Q, lambda t, x, y: a * f1(t, x, y) + b * f2(t, x, y), g).u
    rhs = a * solve_linear_wave(Q, f1, g).u + b * solve_linear_wave(Q, f2, g).u
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


def test_energy_stays_bounded_after_the_source():
    # the diagnostic uses centered gradients, not the scheme's own conserved form
    g = GridSpec([0, 0], [2, 2], [64, 64], T=2.0, boundary="periodic", cfl=0.5)
    sol = solve_linear_wave(0.0, bump(1.0, 1.0, 0.2, 0.2, 0.08, 5.0), g)
    e = sol.energy[int(0.6 / g.dt):]
    assert (e.max() - e.min()) / e.mean() < 0.05


def test_guard_aborts_growing_solutions():
    g = small_grid(31, 0.8)
    with pytest.raises(GuardError):
        solve_nonlinear_wave(CoefficientSet(0.0, 5.0, 0.0), bump(0, 0, 0.3, amp=2000.0), g, guard=10.0)


def test_chain_vanishes_without_quadratic_coupling():
    g = small_grid(31, 0.6)
    srcs = [bump(-0.3, 0, 0.2, amp=20), bump(0.3, 0, 0.2, amp=20), bump(0, 0.3, 0.2, amp=20)]
    ch = solve_linearized_chain(CoefficientSet(0.5, 0.0, 0.0), srcs, g)
    assert all(not np.any(w) for w in ch.w.values())
    md = fd_mixed_derivative(CoefficientSet(0.5, 0.0, 0.0), srcs, 1e-2, 3, g)
    assert np.max(np.abs(md.field)) < 1e-6 * np.max(np.abs(ch.get("1")))


def test_mixed_derivative_matches_chain_on_small_grid():
    g = small_grid(61, 1.0)
    A = 60.0
    srcs = [bump(-0.4, 0, 0.4, amp=A), bump(0.4, 0, 0.4, amp=A), bump(0, 0.4, 0.45, amp=A)]
    co = CoefficientSet(0.5, lambda t, x, y: 1 + 0.5 * np.exp(-(x * x + y * y) / 0.3), bump(0, 0, 0.3, 0.3, 0.2, 5))
    ch = solve_linearized_chain(co, srcs, g, save_every=5)
    md = fd_mixed_derivative(co, srcs, 1e-2, 3, g, save_every=5)
    ref = ch.get("123")
    assert np.linalg.norm(md.field - ref) / np.linalg.norm(ref) < 0.05


def test_discrete_box_of_polynomials():
    g = small_grid(21, 0.5)
    out = discrete_box(lambda t, x, y: t**2 + 0 * x, g)
    assert np.allclose(out[:, 1:-1, 1:-1], 2.0)
    out = discrete_box(lambda t, x, y: 0 * t + x**2 + y**2, g)
    inner = out[:, 1:-1, 1:-1]
    assert np.allclose(inner, -4.0)


def test_zero_gauge_is_identity():
    g = small_grid(21, 0.5)
    q1, q2, F = 0.4, (lambda t, x, y: 1 + 0 * x), bump(0, 0, 0.2)
    c = gauge_transform(q1, q2, F, 0.0, g)
    assert np.allclose(c.q1, 0.4) and np.allclose(c.q2, 1.0)
    assert np.allclose(c.F, np.array([F(t, *g.mesh) for t in g.times]))


def test_gauge_must_vanish_on_measurement_set():
    g = small_grid(21, 0.5)
    mask = np.ones((g.nt + 1,) + g.n, dtype=bool)
    with pytest.raises(PreconditionError):
        gauge_transform(0.0, 1.0, 0.0, lambda t, x, y: t**3 + 0 * x, g, U_mask=mask)


def test_small_data_bound_is_stable():
    g = small_grid(41, 0.8)
    co = CoefficientSet(0.3, 1.0, 0.0)
    rep = lipschitz_check(co, bump(0, 0, 0.3, amp=1.0), g, halvings=3, tol=0.05)
    assert rep.stable
    assert len(rep.ratios) == 4


def test_export_round_trip(tmp_path):
    g = small_grid(21, 0.3)
    sol = solve_linear_wave(0.0, bump(0, 0, 0.1), g, save_every=2)
    b, hdr = export_field(tmp_path / "u", sol.u, g, sol.saved_steps)
    back = np.fromfile(b, dtype="<f8").reshape(sol.u.shape)
    assert np.array_equal(back, sol.u)
    lines = dict(line.split(" ", 1) for line in open(hdr).read().splitlines())
    assert lines["shape"] == " ".join(map(str, sol.u.shape))
    assert float(lines["spacing"].split()[0]) == pytest.approx(g.spacing[0])
