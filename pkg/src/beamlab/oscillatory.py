"""Stationary-phase leading terms and a brute-force quadrature for integrals
of the form  int e^{i psi(x)/h} u(x) dx  with Im psi >= 0.

Leading term convention (checked against the Gaussian integral):

    (2 pi h)^{d/2} e^{i psi(x0)/h} u(x0) / prod_k sqrt(lambda_k),   lambda = eig(-i Hess psi(x0))

with the principal root taken per eigenvalue.  Each lambda_k has nonnegative
real part, so the product is the analytic continuation of the positive root
from the purely imaginary (Gaussian) case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegeneratePhaseError, InsufficientDataError, PreconditionError, ToleranceError

MASK_DECAY = 40.0  # points with Im psi > MASK_DECAY * h are dropped
CRIT_VALUE_TOL = 1e-10
CRIT_GRAD_TOL = 1e-8


@dataclass
class OscillatoryIntegral:
    """``psi`` and ``amplitude`` map an (N, d) point array to (N,) complex arrays.

    ``joint`` may replace both: it returns (psi, amplitude) in one pass, which
    lets callers share work between the two.  ``hessian`` (d x d) may be given
    at ``x0``; otherwise it is taken by central differences of ``psi``.
    """

    x0: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    h: float
    psi: Callable | None = None
    amplitude: Callable | None = None
    joint: Callable | None = None
    hessian: np.ndarray | None = None
    gradient: Callable | None = None
    fd_step: float = 1e-4
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), self.x0.shape).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), self.x0.shape).copy()
        if self.joint is None and (self.psi is None or self.amplitude is None):
            raise PreconditionError("need psi and amplitude, or joint", op="OscillatoryIntegral")
        if not (self.h > 0):
            raise PreconditionError("h must be positive", op="OscillatoryIntegral")
        if np.any(self.upper <= self.lower):
            raise PreconditionError("empty domain box", op="OscillatoryIntegral")

    @property
    def dim(self) -> int:
        return self.x0.size

    def evaluate(self, X: np.ndarray):
        if self.joint is not None:
            p, u = self.joint(X)
        else:
            p, u = self.psi(X), self.amplitude(X)
        return np.asarray(p, dtype=complex), np.broadcast_to(np.asarray(u, dtype=complex), (X.shape[0],))

    def phase(self, X):
        return self.evaluate(X)[0]

    def amp(self, X):
        return self.evaluate(X)[1]


def _phase_hessian(integral: OscillatoryIntegral) -> np.ndarray:
    if integral.hessian is not None:
        return np.asarray(integral.hessian, dtype=complex)
    d, e, x0 = integral.dim, integral.fd_step, integral.x0
    pts = [x0]
    for a in range(d):
        for b in range(a, d):
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                p = x0.copy()
                p[a] += sa * e
                p[b] += sb * e
                pts.append(p)
    vals = integral.phase(np.array(pts))
    H = np.zeros((d, d), dtype=complex)
    k = 1
    for a in range(d):
        for b in range(a, d):
            pp, pm, mp, mm = vals[k:k + 4]
            k += 4
            H[a, b] = H[b, a] = (pp - pm - mp + mm) / (4 * e * e)
    return H


def _phase_gradient(integral: OscillatoryIntegral) -> np.ndarray:
    if integral.gradient is not None:
        return np.asarray(integral.gradient(integral.x0[None, :])[0], dtype=complex)
    d, e, x0 = integral.dim, integral.fd_step, integral.x0
    pts = np.repeat(x0[None, :], 2 * d, axis=0)
    for a in range(d):
        pts[2 * a, a] += e
        pts[2 * a + 1, a] -= e
    v = integral.phase(pts)
    return (v[0::2] - v[1::2]) / (2 * e)


def check_critical_point(integral: OscillatoryIntegral, grad_tol: float = CRIT_GRAD_TOL) -> dict:
    """Verify the critical-point conditions at x0 and return the diagnostics."""
    psi0 = complex(integral.phase(integral.x0[None, :])[0])
    if abs(psi0.imag) > CRIT_VALUE_TOL:
        raise PreconditionError(f"Im psi(x0) = {psi0.imag:.3e} is not zero", op="stationary_phase_leading")
    grad = _phase_gradient(integral)
    gmax = float(np.max(np.abs(grad)))
    if gmax > grad_tol:
        raise PreconditionError(f"|grad psi(x0)| = {gmax:.3e} exceeds {grad_tol}", op="stationary_phase_leading")
    H = _phase_hessian(integral)
    im_eigs = np.linalg.eigvalsh(0.5 * (H.imag + H.imag.T))
    scale = max(1.0, float(np.max(np.abs(H))))
    if im_eigs.min() < -1e-8 * scale:
        raise PreconditionError("Im Hess psi(x0) is not positive semidefinite", op="stationary_phase_leading")
    return {"psi0": psi0, "grad_max": gmax, "hessian": H, "im_hessian_eigs": im_eigs}


def sqrt_det_minus_i_hessian(H: np.ndarray) -> complex:
    lam = np.linalg.eigvals(-1j * np.asarray(H, dtype=complex))
    big = float(np.max(np.abs(lam)))
    if big == 0 or float(np.min(np.abs(lam))) < 1e-12 * big:
        raise DegeneratePhaseError("Hessian of the phase is singular at x0", op="stationary_phase_leading")
    return complex(np.prod(np.sqrt(lam)))


def stationary_phase_leading(integral: OscillatoryIntegral, check: bool = True) -> complex:
    if check:
        diag = check_critical_point(integral)
        H, psi0 = diag["hessian"], diag["psi0"]
    else:
        H = _phase_hessian(integral)
        psi0 = complex(integral.phase(integral.x0[None, :])[0])
    u0 = complex(integral.amp(integral.x0[None, :])[0])
    root = sqrt_det_minus_i_hessian(H)
    d, h = integral.dim, integral.h
    return (2 * math.pi * h) ** (d / 2) * np.exp(1j * psi0 / h) * u0 / root


# ---------------------------------------------------------------- quadrature

def axis_nodes(lo, hi, panels, order):
    g, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    wx = (half[:, None] * w[None, :]).ravel()
    return x, wx


def tensor_rule(integral: OscillatoryIntegral, panels, order: int):
    return [axis_nodes(lo, hi, p, order) for lo, hi, p in zip(integral.lower, integral.upper, panels)]


def _tensor_sum(integral: OscillatoryIntegral, rule, chunk: int) -> complex:
    """Sum of w * e^{i psi/h} u over the tensor rule, streaming over the first axis."""
    h = integral.h
    d = integral.dim
    x_first, w_first = rule[0]
    if d == 1:
        rest_pts = np.zeros((1, 0))
        rest_w = np.ones(1)
    else:
        grids = np.meshgrid(*[r[0] for r in rule[1:]], indexing="ij")
        rest_pts = np.stack([g.ravel() for g in grids], axis=-1)
        wgrids = np.meshgrid(*[r[1] for r in rule[1:]], indexing="ij")
        rest_w = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    m = rest_pts.shape[0]
    per = max(1, chunk // m)
    total = 0.0 + 0.0j
    for start in range(0, x_first.size, per):
        xs = x_first[start:start + per]
        ws = w_first[start:start + per]
        X = np.empty((xs.size * m, d))
        X[:, 0] = np.repeat(xs, m)
        X[:, 1:] = np.tile(rest_pts, (xs.size, 1))
        W = np.repeat(ws, m) * np.tile(rest_w, xs.size)
        psi, u = integral.evaluate(X)
        keep = psi.imag <= MASK_DECAY * h
        vals = np.zeros(X.shape[0], dtype=complex)
        vals[keep] = np.exp(1j * psi[keep] / h) * u[keep]
        total += complex(np.sum(vals * W))
    return total


def default_panels(integral: OscillatoryIntegral, order: int, width_scale: float | None = None) -> list[int]:
    """Panels per axis so that one panel spans about one Gaussian width sqrt(h)."""
    s = math.sqrt(integral.h) if width_scale is None else width_scale
    return [max(1, int(math.ceil((hi - lo) / s))) for lo, hi in zip(integral.lower, integral.upper)]


@dataclass
class QuadratureResult:
    value: complex
    previous: complex
    levels: int
    panels: list
    nodes: int


def oscillatory_quadrature(integral: OscillatoryIntegral, tol: float = 1e-8, order: int = 8,
                           panels=None, max_levels: int = 4, chunk: int = 400_000,
                           abs_floor: float = 0.0, full: bool = False):
    """Gauss-Legendre tensor panels, doubled per axis until two passes agree to ``tol``.

    Agreement is relative to max(|value|, abs_floor).
    """
    panels = list(default_panels(integral, order) if panels is None else panels)
    prev = _tensor_sum(integral, tensor_rule(integral, panels, order), chunk)
    for level in range(1, max_levels + 1):
        panels = [2 * p for p in panels]
        cur = _tensor_sum(integral, tensor_rule(integral, panels, order), chunk)
        if abs(cur - prev) <= tol * max(abs(cur), abs_floor) or (cur == 0 and prev == 0):
            nodes = int(np.prod([p * order for p in panels]))
            res = QuadratureResult(cur, prev, level, panels, nodes)
            return res if full else cur
        prev = cur
    raise ToleranceError(f"no convergence after {max_levels} refinements: last values {prev!r}, {cur!r}",
                         op="oscillatory_quadrature")


# ---------------------------------------------------------------- error slope

@dataclass
class SlopeResult:
    slope: float
    hs: np.ndarray
    errors: np.ndarray
    saturated: bool
    r2: float


def sp_error_slope(family: Callable[[float], OscillatoryIntegral], hs, tol: float = 1e-11,
                   **quad_kw) -> SlopeResult:
    """Relative error of the leading term against quadrature, fitted in log-log against h."""
    hs = np.asarray(sorted(hs), dtype=float)
    if hs.size < 4 or hs[-1] / hs[0] < 10 * (1 - 1e-12):
        raise InsufficientDataError("need at least 4 values of h spanning a decade", op="sp_error_slope")
    errs = []
    for h in hs:
        I = family(float(h))
        ref = oscillatory_quadrature(I, tol=tol, **quad_kw)
        lead = stationary_phase_leading(I)
        errs.append(abs(ref - lead) / abs(ref))
    errs = np.array(errs)
    floor = 100 * tol
    saturated = bool(np.any(errs <= floor))
    use = errs > floor
    if use.sum() < 4:
        return SlopeResult(float("nan"), hs, errs, True, float("nan"))
    hs_u, errs_u = hs[use], errs[use]
    if hs_u[-1] / hs_u[0] < 10:
        return SlopeResult(float("nan"), hs, errs, True, float("nan"))
    lx, ly = np.log(hs_u), np.log(errs_u)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    r2 = 1.0 - float(resid @ resid) / float(np.sum((ly - ly.mean()) ** 2))
    return SlopeResult(float(slope), hs, errs, saturated, r2)


# ---------------------------------------------------------------- reference families

def _box_for_decay(h: float, im_min: float, d: int, decay: float = MASK_DECAY):
    """Cube on which exp(-Im psi/h) stays above e^{-decay} for Im psi >= im_min |x|^2 / 2."""
    L = math.sqrt(2 * decay * h / im_min)
    return np.full(d, -L), np.full(d, L)


def gaussian_case(h: float, A=((1.0, 0.3), (0.3, 2.0))) -> OscillatoryIntegral:
    """psi = (i/2) x.Ax, u = 1: the leading term is the exact value (up to e^{-40})."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    lo, hi = _box_for_decay(h, float(np.linalg.eigvalsh(A).min()), d)
    return OscillatoryIntegral(np.zeros(d), lo, hi, h,
                               joint=lambda X: (0.5j * np.einsum("na,ab,nb->n", X, A, X), np.ones(X.shape[0])),
                               hessian=1j * A)


def fresnel_case(h: float) -> OscillatoryIntegral:
    """Real quadratic phase in 1-D with a Gaussian-damped polynomial amplitude."""
    return OscillatoryIntegral(np.zeros(1), -7.0, 7.0, h,
                               joint=lambda X: (0.5 * X[:, 0] ** 2 + 0j, (1 + X[:, 0]) * np.exp(-X[:, 0] ** 2)),
                               hessian=np.ones((1, 1)))


COMPLEX_H = np.array([[1.0 + 1.0j, 0.2, 0.1j], [0.2, 0.5 + 1.5j, 0.3], [0.1j, 0.3, -0.4 + 1.2j]])


def complex_phase_case(h: float) -> OscillatoryIntegral:
    """Complex quadratic phase plus a cubic term in 3-D, amplitude (1 + x_1) e^{-|x|^2}."""
    H = COMPLEX_H

    def joint(X):
        psi = 0.5 * np.einsum("na,ab,nb->n", X, H, X) + 0.2 * X[:, 0] ** 3 + 0.1 * X[:, 0] * X[:, 1] * X[:, 2]
        return psi, (1 + X[:, 1]) * np.exp(-np.sum(X * X, axis=1))

    im_min = float(np.linalg.eigvalsh(H.imag).min())
    lo, hi = _box_for_decay(h, 0.8 * im_min, 3, decay=30.0)
    return OscillatoryIntegral(np.zeros(3), lo, hi, h, joint=joint, hessian=H)
