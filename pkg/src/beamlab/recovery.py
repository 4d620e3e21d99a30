"""Closed-loop recovery of q2 and Q from beam-product integrals in 1+2 Minkowski space.

Beams 0 and 1 enter complex conjugated.  The total phase psi = sum_j kappa_j Phi_j
is stationary at p0, so each integral  int e^{i psi/h} u  is compared with its
stationary-phase leading term

    (2 pi h)^{3/2} u(p0) / sqrt det(-i Hess psi(p0)).

The beam fields do not depend on h.  They are tabulated once on a tensor Gauss
rule and reused for every h and every q2 profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry as geo
from .beams import _tracked_inverse_sqrt, assemble_formal_beam, cutoff_profile, straight_beam
from .errors import DegenerateConfigurationError, PreconditionError
from .fdsolver import CoefficientSet, GridSpec, _space_time, discrete_box, solve_nonlinear_wave
from .interaction import fd_gradient
from .kappa import PSI_PAIRS, UPS_PAIRS, UPS_TRIPLES, build_xi, solve_kappa, upsilon_full
from .oscillatory import OscillatoryIntegral, axis_nodes, stationary_phase_leading

ETA = np.diag([-1.0, 1.0, 1.0])
CONJUGATED = (0, 1)
SHARP_FLOOR = 1e-12

# Beam 0 carries the tiny weight sigma^2, so it needs a stiff Hessian across its
# e1 direction to stay concentrated (sigma^2 times the stiffness is held fixed); the
# others are wide, which keeps the quadratic model of psi accurate over the box.
LEAD_STIFFNESS = 0.5j
OTHER_H0 = 0.01j
LEAD_S_REF = 0.0
OTHER_S_REF = -1.0
HALF_WIDTH = 3.5
BEAM_RADIUS = 100.0
PANELS = 14
J0_SIGMA = 0.3  # the five-beam sharp factor needs a larger sigma than I0 to reach its limit at h = 0.01


def lead_h0(sigma: float) -> tuple:
    return (LEAD_STIFFNESS / sigma**2, OTHER_H0)


# ---------------------------------------------------------------- ensemble

def _s_extent(xi, p0, half_width: float, pad: float = 0.5) -> tuple[float, float]:
    """Range of the chart coordinate s over the cube p0 +- half_width."""
    metric = geo.minkowski(3)
    g = geo.integrate_null_geodesic(metric, p0, xi, (-1.0, 1.0), samples=3)
    chart = geo.build_fermi_chart(metric, g, geo.build_null_frame_and_transport(metric, g), 1.0)
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * 3, indexing="ij")).reshape(3, -1).T
    s = chart.inverse(p0 + half_width * signs)[:, 0]
    return float(s.min() - pad), float(s.max() + pad)


@dataclass
class BeamEnsemble:
    beams: list
    weights: np.ndarray
    directions: np.ndarray
    p0: np.ndarray
    h: float
    sigma: float
    s0: float
    sign: int
    variant: str
    half_width: float
    kappa: object = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return len(self.beams)

    def fields(self, X, gradient: bool = False, hessian: bool = False) -> list[dict]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return [b.fields(X, gradient=gradient, hessian=hessian) for b in self.beams]

    def total_phase(self, X) -> np.ndarray:
        return sum(f["psi"] for f in self.fields(X))

    def total_gradient(self, X) -> np.ndarray:
        return sum(f["grad"] for f in self.fields(X))

    def hessian_at_p0(self) -> np.ndarray:
        return sum(f["hess"][0] for f in self.fields(self.p0[None, :], hessian=True))

    def sharp_at_p0(self) -> complex:
        return complex(sharp_density(self.fields(self.p0[None, :]), self.variant)[0])

    def amplitude_at_p0(self) -> complex:
        return complex(np.prod([f["a0"][0] for f in self.fields(self.p0[None, :])]))

    def leading_factor(self, h: float | None = None) -> complex:
        """Stationary-phase leading term of int e^{i psi/h} u for u = 1 at p0 (critical point checked)."""
        h = self.h if h is None else float(h)
        integral = OscillatoryIntegral(
            self.p0, self.p0 - self.half_width, self.p0 + self.half_width, h,
            psi=self.total_phase, amplitude=lambda X: np.ones(np.atleast_2d(X).shape[0]),
            hessian=self.hessian_at_p0(), gradient=self.total_gradient)
        return complex(stationary_phase_leading(integral))

    def invariants(self, samples: int = 200, seed: int = 0) -> dict:
        x0 = self.p0[None, :]
        fs = self.fields(x0, hessian=True)
        expected = [w * (ETA @ xi) for w, xi in zip(self.weights, self.directions)]
        grad_gap = max(float(np.max(np.abs(f["grad"][0] - e))) for f, e in zip(fs, expected))
        dependence = float(np.max(np.abs(self.weights @ self.directions)))
        psi0 = complex(sum(f["psi"][0] for f in fs))
        grad0 = float(np.max(np.abs(sum(f["grad"][0] for f in fs))))
        H = sum(f["hess"][0] for f in fs)
        im_eigs = np.linalg.eigvalsh(0.5 * (H.imag + H.imag.T))
        rng = np.random.default_rng(seed)
        pts = self.p0 + rng.uniform(-self.half_width, self.half_width, (samples, 3))
        min_im = float(np.min(self.total_phase(pts).imag))
        return {"gradient_gap": grad_gap, "dependence_residual": dependence, "psi_p0": psi0,
                "grad_psi_p0": grad0, "im_hessian_eigs": im_eigs.tolist(), "min_im_psi": min_im}

    def check(self, grad_tol: float = 1e-8, dep_tol: float = 1e-10) -> dict:
        inv = self.invariants()
        if inv["gradient_gap"] > grad_tol:
            raise PreconditionError(f"beam gradients at p0 off by {inv['gradient_gap']:.2e}", op="BeamEnsemble")
        if inv["dependence_residual"] > dep_tol:
            raise PreconditionError("weighted directions do not sum to zero", op="BeamEnsemble")
        if abs(inv["psi_p0"]) > 1e-10 or inv["grad_psi_p0"] > grad_tol:
            raise PreconditionError("total phase is not critical at p0", op="BeamEnsemble")
        if min(inv["im_hessian_eigs"]) <= 0:
            raise PreconditionError("Im Hess psi(p0) is not positive definite", op="BeamEnsemble")
        if inv["min_im_psi"] < -1e-10:
            raise PreconditionError("Im psi is negative inside the box", op="BeamEnsemble")
        return inv


def build_ensemble(sigma: float = 0.1, s0: float = 0.0, sign: int = 1, variant: str = "kappa",
                   h: float = 0.01, p0=None, half_width: float = HALF_WIDTH, H0=None, s_ref=None,
                   Q=0.0, radius: float = BEAM_RADIUS, check: bool = True) -> BeamEnsemble:
    """Four (kappa) or five (kappa_tilde) beams through p0 with scaled, partly conjugated phases.

    ``H0`` and ``s_ref`` are per-beam sequences (defaults above); ``Q`` is a
    constant, a callable of ambient points, or a per-beam sequence of those.
    """
    p0 = np.zeros(3) if p0 is None else np.asarray(p0, dtype=float)
    sol = solve_kappa(build_xi(s0, sigma, sign), variant)
    m = sol.weights.size
    xis = sol.family.vectors[:m]
    H0 = [lead_h0(sigma)] + [OTHER_H0] * (m - 1) if H0 is None else list(H0)
    s_ref = [LEAD_S_REF] + [OTHER_S_REF] * (m - 1) if s_ref is None else list(s_ref)
    Qs = list(Q) if isinstance(Q, (list, tuple)) else [Q] * m
    if not (len(H0) == len(s_ref) == len(Qs) == m):
        raise PreconditionError(f"need {m} entries per beam", op="build_ensemble")
    beams = []
    for j in range(m):
        lo, hi = _s_extent(xis[j], p0, half_width)
        lo = min(lo, s_ref[j])
        phase, amp = straight_beam(xis[j], p0, s_init=lo, s_end=hi, H0=H0[j], radius=radius, Q=Qs[j],
                                   s_ref=s_ref[j])
        beams.append(assemble_formal_beam(phase, amp, h, float(sol.weights[j]), conjugate=j in CONJUGATED))
    ens = BeamEnsemble(beams, sol.weights.copy(), xis.copy(), p0, float(h), float(sigma), float(s0), int(sign),
                       variant, float(half_width), sol)
    if check:
        ens.check()
    return ens


# ---------------------------------------------------------------- pointwise densities

def _square(g):
    return np.einsum("...a,ab,...b->...", g, ETA, g)


def _sharp(fs, idx):
    return 1.0 / _square(sum(fs[i]["grad"] for i in idx))


def sharp_density(fs: list[dict], variant: str) -> np.ndarray:
    """Psi-sharp sum over the pairs of beams 1..3, or the five-beam Upsilon combination."""
    if variant == "kappa":
        return sum(_sharp(fs, p) for p in PSI_PAIRS)
    return upsilon_full({idx: _sharp(fs, idx) for idx in UPS_PAIRS + UPS_TRIPLES})


def _amplitude_products(fs):
    a0 = [f["a0"] for f in fs]
    lead = np.prod(a0, axis=0)
    sub = 0.0
    for j, f in enumerate(fs):
        others = np.prod([a0[k] for k in range(len(fs)) if k != j], axis=0)
        sub = sub + f["a1"] * others / abs(f["kappa"])
    return lead, sub


# ---------------------------------------------------------------- tabulation

@dataclass
class NodeTable:
    """h-independent integrand data on a tensor Gauss rule over the box.

    ``d0`` is weight * sharp * product of leading amplitudes, ``d1`` the same with
    the kappa-weighted subleading sum in place of the product.
    """

    ensemble: BeamEnsemble
    axes: list
    psi: np.ndarray
    d0: np.ndarray
    d1: np.ndarray

    @property
    def nodes(self) -> int:
        return self.psi.size

    def points(self, start: int, stop: int) -> np.ndarray:
        shape = [a[0].size for a in self.axes]
        idx = np.unravel_index(np.arange(start, stop), shape)
        return np.stack([self.axes[k][0][idx[k]] for k in range(3)], axis=-1)

    def sum(self, density: np.ndarray, q2, power: int, h: float, chunk: int = 1_000_000) -> complex:
        """sum over nodes of q2^power e^{i psi/h} density."""
        total = 0.0 + 0.0j
        for start in range(0, self.nodes, chunk):
            stop = min(start + chunk, self.nodes)
            osc = np.exp(1j * self.psi[start:stop] / h) * density[start:stop]
            if callable(q2):
                osc = osc * q2(self.points(start, stop)) ** power
            else:
                osc = osc * complex(q2) ** power
            total += complex(np.sum(osc))
        return total


def box_weights(ensemble: BeamEnsemble, panels: int, order: int = 8):
    """Composite Gauss axes over p0 +- half_width.  The plateau cutoff is 1 on the inner half cube."""
    lo, hi = ensemble.p0 - ensemble.half_width, ensemble.p0 + ensemble.half_width
    return [axis_nodes(lo[k], hi[k], panels, order) for k in range(3)]


def tabulate(ensemble: BeamEnsemble, panels: int = PANELS, order: int = 8, chunk: int = 200_000) -> NodeTable:
    axes = box_weights(ensemble, panels, order)
    shape = [a[0].size for a in axes]
    n = int(np.prod(shape))
    psi = np.empty(n, dtype=complex)
    d0 = np.empty(n, dtype=complex)
    d1 = np.empty(n, dtype=complex)
    table = NodeTable(ensemble, axes, psi, d0, d1)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        X = table.points(start, stop)
        idx = np.unravel_index(np.arange(start, stop), shape)
        w = axes[0][1][idx[0]] * axes[1][1][idx[1]] * axes[2][1][idx[2]]
        r = np.max(np.abs(X - ensemble.p0), axis=-1) / (2 * ensemble.half_width)
        w = w * cutoff_profile(r)
        fs = ensemble.fields(X)
        for f, b in zip(fs, ensemble.beams):
            f["kappa"] = b.kappa
        S = sharp_density(fs, ensemble.variant)
        lead, sub = _amplitude_products(fs)
        psi[start:stop] = sum(f["psi"] for f in fs)
        d0[start:stop] = w * S * lead
        d1[start:stop] = w * S * sub
    return table


# ---------------------------------------------------------------- q2 from I0 and J0

@dataclass
class Estimate:
    value: float
    imaginary_residue: float
    integral: complex
    normalization: complex
    h: float

    def __float__(self) -> float:
        return self.value


def assemble_I0(table: NodeTable, q2, h: float | None = None) -> complex:
    if table.ensemble.variant != "kappa":
        raise PreconditionError("I0 needs the four-beam ensemble", op="assemble_I0")
    h = table.ensemble.h if h is None else float(h)
    return table.sum(table.d0, q2, 2, h)


def _normalization(ensemble: BeamEnsemble, h: float) -> complex:
    S = ensemble.sharp_at_p0()
    if abs(S) < SHARP_FLOOR:
        raise DegenerateConfigurationError(f"sharp factor at p0 is {abs(S):.2e}", op="recover_q2sq")
    return ensemble.leading_factor(h) * S * ensemble.amplitude_at_p0()


def recover_q2sq(I0: complex, ensemble: BeamEnsemble, h: float | None = None) -> Estimate:
    """q2(p0)^2 as I0 over its stationary-phase prediction for q2 = 1."""
    h = ensemble.h if h is None else float(h)
    norm = _normalization(ensemble, h)
    ratio = complex(I0) / norm
    return Estimate(ratio.real, ratio.imag, complex(I0), norm, h)


def assemble_J0_and_recover_q2(table: NodeTable, q2, h: float | None = None) -> Estimate:
    """q2(p0) from the five-beam integral of q2^3 e^{i psi/h} Upsilon-sharp (real cube root)."""
    ens = table.ensemble
    if ens.variant != "kappa_tilde":
        raise PreconditionError("J0 needs the five-beam ensemble", op="assemble_J0_and_recover_q2")
    h = ens.h if h is None else float(h)
    J0 = table.sum(table.d0, q2, 3, h)
    norm = _normalization(ens, h)
    ratio = J0 / norm
    return Estimate(float(np.cbrt(ratio.real)), ratio.imag, J0, norm, h)


# ---------------------------------------------------------------- first-order terms

def _ensemble_weights_at_p0(ensemble: BeamEnsemble):
    fs = ensemble.fields(ensemble.p0[None, :])
    a0 = np.array([f["a0"][0] for f in fs])
    a1 = np.array([f["a1"][0] for f in fs])
    S = complex(sharp_density(fs, "kappa")[0])
    c = np.array([S / abs(k) * np.prod(np.delete(a0, j)) for j, k in enumerate(ensemble.weights)])
    return c, a1


def i1_weights_at_p0(ensemble: BeamEnsemble) -> np.ndarray:
    """c_j multiplying the subleading amplitude of beam j in the leading term of I1."""
    return _ensemble_weights_at_p0(ensemble)[0]


def _r1_density(fs, q2v, dq2):
    """R1 integrand without the oscillating factor: pairs (j,k) with the third beam i of 1..3."""
    out = 0.0
    for j, k in PSI_PAIRS:
        (i,) = {1, 2, 3} - {j, k}
        G = fs[j]["grad"] + fs[k]["grad"]
        Hs = fs[j]["hess"] + fs[k]["hess"]
        sq = _square(G)
        box = -np.einsum("ab,nab->n", np.linalg.inv(ETA), Hs)
        b0 = fs[j]["a0"] * fs[k]["a0"]
        db0 = fs[j]["da0"] * fs[k]["a0"][:, None] + fs[j]["a0"][:, None] * fs[k]["da0"]
        c2 = b0 / sq
        dsq = 2 * np.einsum("nab,bc,nc->na", Hs, ETA, G)
        dc2 = db0 / sq[:, None] - (b0 / sq**2)[:, None] * dsq
        grad_term = q2v[:, None] * (q2v[:, None] * dc2 + c2[:, None] * dq2)
        bracket = 2 * np.einsum("na,ab,nb->n", G, ETA, grad_term) - box * q2v**2 * c2
        out = out + (1.0 / sq) * fs[i]["a0"] * fs[0]["a0"] * bracket
    return 1j * out


def assemble_I1_R1(ensemble: BeamEnsemble, q2, h: float | None = None, panels: int = 10, order: int = 8,
                   chunk: int = 100_000, q2_step: float = 1e-4) -> tuple[complex, complex]:
    """(I1, R1) by quadrature.  ``q2`` is a constant or a callable of points."""
    if ensemble.variant != "kappa":
        raise PreconditionError("I1 and R1 need the four-beam ensemble", op="assemble_I1_R1")
    if any(b.amplitude.a1 is None for b in ensemble.beams):
        raise PreconditionError("subleading amplitudes are missing", op="assemble_I1_R1")
    h = ensemble.h if h is None else float(h)
    q2f = q2 if callable(q2) else (lambda X, v=complex(q2): np.full(np.atleast_2d(X).shape[0], v))
    axes = box_weights(ensemble, panels, order)
    shape = [a[0].size for a in axes]
    n = int(np.prod(shape))
    I1 = R1 = 0.0 + 0.0j
    for start in range(0, n, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, n)), shape)
        X = np.stack([axes[k][0][idx[k]] for k in range(3)], axis=-1)
        w = axes[0][1][idx[0]] * axes[1][1][idx[1]] * axes[2][1][idx[2]]
        w = w * cutoff_profile(np.max(np.abs(X - ensemble.p0), axis=-1) / (2 * ensemble.half_width))
        fs = ensemble.fields(X, gradient=True, hessian=True)
        for f, b in zip(fs, ensemble.beams):
            f["kappa"] = b.kappa
        osc = w * np.exp(1j * sum(f["psi"] for f in fs) / h)
        q2v = q2f(X)
        _, sub = _amplitude_products(fs)
        I1 += complex(np.sum(osc * q2v**2 * sharp_density(fs, "kappa") * sub))
        dq2 = fd_gradient(q2f, X, q2_step) if callable(q2) else np.zeros(X.shape)
        R1 += complex(np.sum(osc * _r1_density(fs, q2v, dq2)))
    return I1, R1


@dataclass
class A1Verdict:
    verdict: str  # "equal", "unequal" or "inconclusive"
    gap: float
    r2: float
    sigmas: np.ndarray
    differences: np.ndarray
    c0: np.ndarray
    growth_exponent: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "gap": self.gap, "r2": self.r2, "sigmas": self.sigmas.tolist(),
                "abs_differences": np.abs(self.differences).tolist(), "c0": np.abs(self.c0).tolist(),
                "growth_exponent": self.growth_exponent}


def i1_difference_sweep(Q_a, Q_b, sigmas: Sequence[float], **ensemble_kw):
    """Leading-order I1 difference between two potentials across sigma, and c0(sigma).

    Both sets share q2 and the geometry, so the common factor q2^2 times the
    stationary-phase normalization is dropped: D = sum_j c_j (a1_j - a1~_j)(p0).
    """
    diffs, c0s = [], []
    for s in sigmas:
        ea = build_ensemble(sigma=float(s), Q=Q_a, **ensemble_kw)
        eb = build_ensemble(sigma=float(s), Q=Q_b, **ensemble_kw)
        c, a1a = _ensemble_weights_at_p0(ea)
        _, a1b = _ensemble_weights_at_p0(eb)
        diffs.append(complex(c @ (a1a - a1b)))
        c0s.append(c[0])
    return np.asarray(sigmas, dtype=float), np.array(diffs), np.array(c0s)


def recover_a1_at_p0(sigmas, differences, c0, tol: float = 1e-6, noise: float = 1e-12) -> A1Verdict:
    """Decide whether beam 0's subleading amplitudes agree at p0.

    The other weights are smaller than c0 by sigma^2, so D/c0 = gap + B sigma^2 + ...;
    the intercept of that fit is the a1 difference of beam 0.
    """
    sig = np.asarray(sigmas, dtype=float)
    D = np.asarray(differences, dtype=complex)
    c0 = np.asarray(c0, dtype=complex)
    if sig.size < 3:
        raise PreconditionError("need at least three sigma values", op="recover_a1_at_p0")
    y = D / c0
    scale = float(np.max(np.abs(y)))
    if scale <= noise:
        return A1Verdict("equal", scale, 1.0, sig, D, c0, float("nan"))
    A = np.stack([np.ones_like(sig), sig**2], axis=1).astype(complex)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    spread = float(np.sum(np.abs(y - y.mean()) ** 2))
    r2 = 1.0 if spread <= (1e-12 * scale) ** 2 * sig.size else 1.0 - float(np.sum(np.abs(res) ** 2)) / spread
    gap = float(abs(coef[0]))
    growth = float(np.polyfit(np.log(sig), np.log(np.abs(D)), 1)[0]) if np.all(np.abs(D) > 0) else float("nan")
    if r2 < 0.98:
        verdict = "inconclusive"
    else:
        verdict = "unequal" if gap > tol else "equal"
    return A1Verdict(verdict, gap, float(r2), sig, D, c0, float(growth))


# ---------------------------------------------------------------- Q along a geodesic

@dataclass
class PotentialProfile:
    s: np.ndarray
    Q: np.ndarray
    endpoint: np.ndarray  # True where a one-sided difference was used
    spacing: float


def axis_samples(beam, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(a1, a1 sharp part, det Y) on the axis of an unscaled beam."""
    s = np.asarray(s, dtype=float)
    amp = beam.amplitude
    return amp.a1(s), amp.a1.sharp(s), beam.phase.riccati.det_Y(s)


def recover_Q_along_geodesic(s, a1, a1_sharp, det_y) -> PotentialProfile:
    """Q = d/ds [2 (det Y)^{1/2} (a1 - a1_sharp)] by central differences on a uniform grid."""
    s = np.asarray(s, dtype=float)
    if s.size < 5:
        raise PreconditionError("need at least 5 samples", op="recover_Q_along_geodesic")
    ds = np.diff(s)
    if np.max(np.abs(ds - ds[0])) > 1e-9 * abs(ds[0]):
        raise PreconditionError("samples must be uniformly spaced", op="recover_Q_along_geodesic")
    step = float(ds[0])
    root = 1.0 / _tracked_inverse_sqrt(np.asarray(det_y, dtype=complex))
    g = 2.0 * root * (np.asarray(a1, dtype=complex) - np.asarray(a1_sharp, dtype=complex))
    Q = np.empty_like(g)
    Q[1:-1] = (g[2:] - g[:-2]) / (2 * step)
    Q[0] = (-3 * g[0] + 4 * g[1] - g[2]) / (2 * step)
    Q[-1] = (3 * g[-1] - 4 * g[-2] + g[-3]) / (2 * step)
    endpoint = np.zeros(s.size, dtype=bool)
    endpoint[[0, -1]] = True
    return PotentialProfile(s, Q, endpoint, step)


# ---------------------------------------------------------------- F gauge

@dataclass
class GaugeCheck:
    F_residual: np.ndarray  # space-time array
    q1_residual: np.ndarray
    max_F: float
    max_q1: float
    argmax: tuple  # (t, x, y) of the largest F residual

    def to_dict(self) -> dict:
        return {"max_F": self.max_F, "max_q1": self.max_q1, "argmax": list(self.argmax)}


def background_gauge(coeffs: CoefficientSet, coeffs_t: CoefficientSet, grid: GridSpec) -> np.ndarray:
    """phi = u0~ - u0, the difference of the two source-free solutions."""
    u = solve_nonlinear_wave(coeffs, 0.0, grid, guard=np.inf, save_every=1).u
    ut = solve_nonlinear_wave(coeffs_t, 0.0, grid, guard=np.inf, save_every=1).u
    return ut - u


def check_F_gauge(coeffs: CoefficientSet, coeffs_t: CoefficientSet, phi, grid: GridSpec) -> GaugeCheck:
    """Residuals of F = F~ - box(phi) - q1~ phi - q2~ phi^2 and q1 = q1~ + 2 q2~ phi on the grid."""
    P = _space_time(phi, grid)
    q1, F = _space_time(coeffs.q1, grid), _space_time(coeffs.F, grid)
    q1t, q2t, Ft = (_space_time(x, grid) for x in (coeffs_t.q1, coeffs_t.q2, coeffs_t.F))
    box = discrete_box(P, grid)
    rF = F - (Ft - box - q1t * P - q2t * P**2)
    rq = q1 - (q1t + 2 * q2t * P)
    k = np.unravel_index(int(np.argmax(np.abs(rF))), rF.shape)
    where = (float(grid.times[k[0]]),) + tuple(float(grid.axes[a][k[a + 1]]) for a in range(grid.d))
    return GaugeCheck(rF, rq, float(np.max(np.abs(rF))), float(np.max(np.abs(rq))), where)


# ---------------------------------------------------------------- report

def _jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()] if v.dtype.kind == "c" else v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass
class RecoveryReport:
    """Named values, each tagged with the operation that produced it."""

    entries: dict = field(default_factory=dict)

    def record(self, name: str, value, op: str, **context):
        self.entries[name] = {"value": value, "op": op, **context}
        return value

    def to_dict(self) -> dict:
        return _jsonable(self.entries)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


# ---------------------------------------------------------------- closed loops

def bump_profile(center, base: float = 1.0, height: float = 0.5, width: float = 2.0) -> Callable:
    center = np.asarray(center, dtype=float)
    return lambda X: base + height * np.exp(-np.sum((np.atleast_2d(X) - center) ** 2, axis=-1) / width**2)


def ladder(table: NodeTable, q2, truth: float, hs=(0.04, 0.02, 0.01), mode: str = "q2sq") -> dict:
    """Recovered values and relative errors over an h ladder on one tabulation."""
    rows = []
    for h in hs:
        if mode == "q2sq":
            est = recover_q2sq(assemble_I0(table, q2, h), table.ensemble, h)
        else:
            est = assemble_J0_and_recover_q2(table, q2, h)
        err = abs(est.value - truth) / abs(truth) if truth != 0 else abs(est.value)
        rows.append({"h": float(h), "estimate": est.value, "imaginary_residue": est.imaginary_residue,
                     "relative_error": err})
    errs = [r["relative_error"] for r in rows]
    return {"truth": truth, "rows": rows, "monotone": all(b < a for a, b in zip(errs, errs[1:]))}
