"""Degree-two formal Gaussian beams along null geodesics.

The phase in Fermi coordinates (s, z) is  Phi = z^1 + z^T H(s) z,  with H
solving  H' + H C H + D = 0,  C = diag(0, 2, ..., 2).  Because the chart has
g_{s1} = 1 on the axis, the eikonal equation at second order forces D to be
one quarter of the transverse Hessian of g^{11}; that is the D used here.

Amplitudes: a_0 is constant in z and equals (det Y)^{-1/2} on the axis; a_1 on
the axis is split into a geometric part and a part carrying the potential.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import geometry as geo
from .errors import BranchError, ConfigError, PreconditionError, ResolutionError, ToleranceError
from .stencils import d1, d2, derivative_along


def c_matrix(n: int) -> np.ndarray:
    c = 2.0 * np.eye(n)
    c[0, 0] = 0.0
    return c


def parse_h0(spec, n: int) -> np.ndarray:
    """Accept a matrix, a scalar (times identity) or strings like "i/2*Id"."""
    if isinstance(spec, str):
        txt = spec.replace(" ", "").replace("·", "*").lower()
        if txt.endswith("*id"):
            txt = txt[:-3]
        txt = re.sub(r"(\d+\.?\d*|\.\d+)?i", lambda m: "(" + (m.group(1) or "1") + "j)", txt)
        if not re.fullmatch(r"[0-9.j+\-*/()e]+", txt):
            raise ConfigError(f"cannot read H0 from {spec!r}", op="parse_h0")
        scalar = complex(eval(txt, {"__builtins__": {}}, {}))  # arithmetic on numeric literals only
        return scalar * np.eye(n, dtype=complex)
    arr = np.asarray(spec, dtype=complex)
    if arr.ndim == 0:
        return complex(arr) * np.eye(n, dtype=complex)
    if arr.ndim == 1:
        return np.diag(arr)
    return arr


# ---------------------------------------------------------------- Riccati

@dataclass(frozen=True)
class RiccatiSolution:
    s: np.ndarray
    H: np.ndarray  # (m, n, n)
    Y: np.ndarray
    Z: np.ndarray
    H0: np.ndarray
    C: np.ndarray
    D: np.ndarray  # (m, n, n) coefficient in Z' = -D Y
    flat: bool
    tol: float
    _splines: tuple = field(default=None, repr=False, compare=False)

    @property
    def s_init(self) -> float:
        return float(self.s[0])

    @property
    def n(self) -> int:
        return self.H0.shape[0]

    def Y_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.flat:
            tau = (s - self.s_init)[..., None, None]
            return np.eye(self.n) + tau * (self.C @ self.H0)
        return self._splines[0](s)

    def H_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.flat:
            if _is_diagonal(self.H0):
                d = np.diag(self.H0)
                tau = (s - self.s_init)[..., None]
                diag = d / (1.0 + tau * np.diag(self.C) * d)
                out = np.zeros(s.shape + (self.n, self.n), dtype=complex)
                idx = np.arange(self.n)
                out[..., idx, idx] = diag
                return out
            Y = self.Y_at(s)
            return np.swapaxes(np.linalg.solve(np.swapaxes(Y, -1, -2), np.swapaxes(np.broadcast_to(self.H0, Y.shape), -1, -2)), -1, -2)
        return self._splines[1](s)

    def D_at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.flat:
            return np.zeros(s.shape + (self.n, self.n))
        return self._splines[2](s)

    def H_prime(self, s) -> np.ndarray:
        H = self.H_at(s)
        return -(H @ self.C @ H) - self.D_at(s)

    def det_Y(self, s) -> np.ndarray:
        return np.linalg.det(self.Y_at(s))

    def determinant_identity_defect(self) -> float:
        """max relative deviation of det(Im H)|det Y|^2 from its initial value."""
        ref = float(np.linalg.det(self.H0.imag))
        vals = np.linalg.det(self.H.imag) * np.abs(np.linalg.det(self.Y)) ** 2
        return float(np.max(np.abs(vals - ref)) / abs(ref))

    def min_im_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.H.imag + np.swapaxes(self.H.imag, 1, 2)))))

    def residual(self) -> float:
        """max |H - H_direct| where H_direct integrates H' = -HCH - D itself at the same tolerance."""
        n, C = self.n, self.C

        def rhs(t, y):
            H = (y[: n * n] + 1j * y[n * n:]).reshape(n, n)
            dH = -(H @ C @ H) - self.D_at(np.array(t))
            return np.concatenate([dH.real.ravel(), dH.imag.ravel()])

        y0 = np.concatenate([self.H0.real.ravel(), self.H0.imag.ravel()])
        sol = solve_ivp(rhs, (self.s[0], self.s[-1]), y0, method="DOP853", t_eval=self.s,
                        rtol=self.tol, atol=self.tol * 1e-2)
        Hd = (sol.y[: n * n] + 1j * sol.y[n * n:]).T.reshape(-1, n, n)
        return float(np.max(np.abs(Hd - self.H)))


def _is_diagonal(A) -> bool:
    return not np.any(A - np.diag(np.diag(A)))


def solve_riccati(chart, H0, s_range, tol: float = 1e-12, samples: int = 401, d_samples: int = 41) -> RiccatiSolution:
    """Integrate Y' = CZ, Z' = -DY from Y = Id, Z = H0 at s_range[0]; H = Z Y^{-1}.

    ``chart`` may be None for flat space (D = 0).
    """
    s_a, s_b = map(float, s_range)
    if chart is not None:
        n = chart.dim - 1
    else:
        n = np.asarray(H0).shape[0] if np.ndim(H0) == 2 else 1
    H0 = parse_h0(H0, n)
    if H0.shape != (n, n):
        raise PreconditionError(f"H0 must be {n}x{n}", op="solve_riccati")
    if np.max(np.abs(H0 - H0.T)) > 1e-14:
        raise PreconditionError("H0 must be complex symmetric", op="solve_riccati")
    if np.min(np.linalg.eigvalsh(H0.imag)) <= 0:
        raise PreconditionError("Im H0 must be positive definite", op="solve_riccati")
    C = c_matrix(n)
    s = np.linspace(s_a, s_b, samples)
    flat = chart is None or chart.flat
    if flat:
        Dspl = None
        Dfun = lambda t: np.zeros((n, n))
    else:
        sd = np.linspace(s_a, s_b, d_samples)
        Dvals = np.array([geo.transverse_hessian_g11(chart, t) / 4.0 for t in sd])
        Dspl = CubicSpline(sd, Dvals, axis=0)
        Dfun = lambda t: Dspl(t)

    def rhs(t, y):
        Yc = (y[: n * n] + 1j * y[n * n: 2 * n * n]).reshape(n, n)
        Zc = (y[2 * n * n: 3 * n * n] + 1j * y[3 * n * n:]).reshape(n, n)
        dY = C @ Zc
        dZ = -Dfun(t) @ Yc
        return np.concatenate([dY.real.ravel(), dY.imag.ravel(), dZ.real.ravel(), dZ.imag.ravel()])

    I = np.eye(n)
    y0 = np.concatenate([I.ravel(), np.zeros(n * n), H0.real.ravel(), H0.imag.ravel()])
    sol = solve_ivp(rhs, (s_a, s_b), y0, method="DOP853", t_eval=s, rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise ToleranceError(f"Riccati integration failed: {sol.message}", op="solve_riccati")
    Y = (sol.y[: n * n] + 1j * sol.y[n * n: 2 * n * n]).T.reshape(-1, n, n)
    Z = (sol.y[2 * n * n: 3 * n * n] + 1j * sol.y[3 * n * n:]).T.reshape(-1, n, n)
    H = np.swapaxes(np.linalg.solve(np.swapaxes(Y, 1, 2), np.swapaxes(Z, 1, 2)), 1, 2)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    D = np.array([Dfun(t) for t in s])
    splines = None if flat else (CubicSpline(s, Y, axis=0), CubicSpline(s, H, axis=0), Dspl)
    out = RiccatiSolution(s, H, Y, Z, H0, C, D, flat, tol, splines)
    if out.min_im_eigenvalue() <= 0:
        raise ToleranceError("Im H lost positivity along the interval", op="solve_riccati")
    return out


# ---------------------------------------------------------------- amplitudes

@dataclass(frozen=True)
class AxisProfile:
    """Complex samples on a uniform s grid with spline evaluation."""

    s: np.ndarray
    values: np.ndarray
    _spline: object = field(default=None, repr=False, compare=False)

    def __call__(self, s):
        if self._spline is None:
            return np.zeros(np.shape(s), dtype=complex)
        return self._spline(s)

    def derivative(self, s):
        if self._spline is None:
            return np.zeros(np.shape(s), dtype=complex)
        return self._spline(s, 1)

    @staticmethod
    def from_samples(s, values) -> "AxisProfile":
        values = np.asarray(values, dtype=complex)
        spl = None if not np.any(values) else CubicSpline(s, values)
        return AxisProfile(np.asarray(s), values, spl)


def _tracked_inverse_sqrt(det_vals: np.ndarray) -> np.ndarray:
    if np.min(np.abs(det_vals)) < 1e-300:
        raise BranchError("det Y vanishes on the interval", op="leading_amplitude")
    root = np.sqrt(det_vals.astype(complex))
    out = np.empty_like(root)
    out[0] = root[0] if root[0].real > 0 else -root[0]
    for k in range(1, root.size):
        r = root[k]
        if abs(r - out[k - 1]) > abs(r + out[k - 1]):
            r = -r
        # a genuine jump larger than a quarter turn means the sampling cannot follow the branch
        if abs(np.angle(r / out[k - 1])) > math.pi / 4:
            raise BranchError("square-root branch cannot be tracked on this grid", op="leading_amplitude")
        out[k] = r
    return 1.0 / out


@dataclass(frozen=True)
class LeadingAmplitude:
    riccati: RiccatiSolution
    samples: np.ndarray
    _track: object = field(default=None, repr=False, compare=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        det = self.riccati.det_Y(s)
        val = 1.0 / np.sqrt(det.astype(complex))
        ref = self._track(s)
        flip = (val * np.conj(ref)).real < 0
        return np.where(flip, -val, val)

    def derivative(self, s):
        H = self.riccati.H_at(s)
        tr = np.einsum("ii,...ii->...", self.riccati.C, H)
        return -0.5 * tr * self(s)

    def transport_residual(self) -> float:
        """max |a - a_direct| where a_direct integrates 2a' + Tr(CH) a = 0 from a = 1."""
        r = self.riccati

        def rhs(t, y):
            tr = complex(np.einsum("ii,ii->", r.C, r.H_at(np.array(t))))
            da = -0.5 * tr * complex(y[0], y[1])
            return [da.real, da.imag]

        sol = solve_ivp(rhs, (r.s[0], r.s[-1]), [1.0, 0.0], method="DOP853", t_eval=r.s,
                        rtol=r.tol, atol=r.tol * 1e-2)
        return float(np.max(np.abs(sol.y[0] + 1j * sol.y[1] - self.samples)))


def leading_amplitude(riccati: RiccatiSolution) -> LeadingAmplitude:
    det = np.linalg.det(riccati.Y)
    a = _tracked_inverse_sqrt(det)
    return LeadingAmplitude(riccati, a, CubicSpline(riccati.s, a))


def box_a0_on_axis(chart, a0: LeadingAmplitude, s: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """box_g applied to a_0(s, z) := a_00(s) on the axis, in chart coordinates."""
    if chart is None or chart.flat:
        return np.zeros(np.shape(s), dtype=complex)
    out = []
    ds = s[1] - s[0]
    da = derivative_along(a0.samples, ds) if np.allclose(s, a0.riccati.s) else a0.derivative(s)
    dda = derivative_along(da, ds)
    for k, t in enumerate(s):
        c0 = np.zeros(chart.dim)
        c0[0] = t
        G = chart.pulled_back_metric(c0)
        Gi = np.linalg.inv(G)
        dG = geo.axis_metric_derivatives(chart, t, step)
        low = 0.5 * (dG.transpose(1, 0, 2) + dG.transpose(1, 2, 0) - dG)
        gam = np.einsum("bc,ad,dbc->a", Gi, Gi, low)
        out.append(-Gi[0, 0] * dda[k] + gam[0] * da[k])
    return np.array(out)


@dataclass(frozen=True)
class SubleadingAmplitude:
    sharp: AxisProfile
    flat_part: AxisProfile

    def __call__(self, s):
        return self.sharp(s) + self.flat_part(s)

    def derivative(self, s):
        return self.sharp.derivative(s) + self.flat_part.derivative(s)


def _cumulative(s, f):
    """int_{s[0]}^{s} f, by the antiderivative of an interpolating spline."""
    f = np.asarray(f, dtype=complex)
    if not np.any(f):
        return np.zeros_like(f)
    spl = CubicSpline(s, f).antiderivative()
    return spl(s) - spl(s[0])


def subleading_amplitude(riccati: RiccatiSolution, a0: LeadingAmplitude, Q_axis, chart=None) -> SubleadingAmplitude:
    """a_1 on the axis with a_1(s_init) = 0:

        sharp(s) = 1/2 det Y^{-1/2} int box(a_0) det Y^{1/2}
        flat(s)  = 1/2 det Y^{-1/2} int Q
    ``Q_axis`` is a callable of s or an array on ``riccati.s``.
    """
    s = riccati.s
    q = np.asarray(Q_axis(s) if callable(Q_axis) else Q_axis, dtype=complex)
    q = np.broadcast_to(q, s.shape)
    if not np.all(np.isfinite(q)):
        raise ToleranceError("potential is not finite on the axis", op="subleading_amplitude")
    inv_root = a0.samples
    root = 1.0 / inv_root
    box_a0 = box_a0_on_axis(chart, a0, s)
    sharp = 0.5 * inv_root * _cumulative(s, box_a0 * root)
    flat = 0.5 * inv_root * _cumulative(s, q)
    return SubleadingAmplitude(AxisProfile.from_samples(s, sharp), AxisProfile.from_samples(s, flat))


def recover_potential_integrand(riccati: RiccatiSolution, a1_samples, sharp_samples) -> np.ndarray:
    """2 det Y^{1/2} (a_1 - a_1^sharp): its s-derivative is the potential on the axis."""
    a0 = leading_amplitude(riccati).samples
    return 2.0 * (np.asarray(a1_samples) - np.asarray(sharp_samples)) / a0


# ---------------------------------------------------------------- cutoff

def cutoff_profile(t):
    """Smooth, equal to 1 on [0, 1/4] and 0 on [1/2, inf).

    chi(t) = f(1/2 - t) / (f(1/2 - t) + f(t - 1/4)),  f(u) = exp(-1/u) for u > 0.
    """
    t = np.asarray(t, dtype=float)
    a = 0.5 - t
    b = t - 0.25
    fa = np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
    fb = np.where(b > 0, np.exp(-1.0 / np.where(b > 0, b, 1.0)), 0.0)
    return fa / (fa + fb)


def cutoff_derivative(t):
    t = np.asarray(t, dtype=float)
    a = 0.5 - t
    b = t - 0.25
    ok_a, ok_b = a > 0, b > 0
    fa = np.where(ok_a, np.exp(-1.0 / np.where(ok_a, a, 1.0)), 0.0)
    fb = np.where(ok_b, np.exp(-1.0 / np.where(ok_b, b, 1.0)), 0.0)
    dfa = np.where(ok_a, -fa / np.where(ok_a, a, 1.0) ** 2, 0.0)  # d/dt f(1/2 - t)
    dfb = np.where(ok_b, fb / np.where(ok_b, b, 1.0) ** 2, 0.0)
    den = fa + fb
    return (dfa * den - fa * (dfa + dfb)) / den**2


# ---------------------------------------------------------------- phase

@dataclass(frozen=True)
class BeamPhase:
    chart: geo.FermiChart
    riccati: RiccatiSolution

    @property
    def dim(self) -> int:
        return self.chart.dim

    def chart_values(self, c: np.ndarray):
        """Phi, dPhi (chart covector) and chart Hessian at chart points c (..., dim)."""
        s, z = c[..., 0], c[..., 1:]
        H = self.riccati.H_at(s)
        Hp = self.riccati.H_prime(s)
        Hz = np.einsum("...ij,...j->...i", H, z)
        phi = z[..., 0] + np.einsum("...i,...i->...", z, Hz)
        grad = np.empty(c.shape, dtype=complex)
        grad[..., 0] = np.einsum("...i,...ij,...j->...", z, Hp, z)
        grad[..., 1:] = 2 * Hz
        grad[..., 1] += 1.0
        return phi, grad, H, Hp

    def chart_hessian(self, c: np.ndarray) -> np.ndarray:
        s, z = c[..., 0], c[..., 1:]
        H = self.riccati.H_at(s)
        Hp = self.riccati.H_prime(s)
        C = self.riccati.C
        # D is frozen in s here; its derivative is not tracked (zero in flat space)
        Hpp = -(Hp @ C @ H + H @ C @ Hp)
        n = self.dim
        out = np.empty(c.shape[:-1] + (n, n), dtype=complex)
        out[..., 0, 0] = np.einsum("...i,...ij,...j->...", z, Hpp, z)
        v = 2 * np.einsum("...ij,...j->...i", Hp, z)
        out[..., 0, 1:] = v
        out[..., 1:, 0] = v
        out[..., 1:, 1:] = 2 * H
        return out

    def evaluate(self, X: np.ndarray, hessian: bool = False):
        """Phi, ambient gradient (covector), optionally ambient Hessian, and chart coordinates."""
        X = np.asarray(X, dtype=float)
        if self.chart.flat:
            c = self.chart.inverse(X)
            phi, gc, _, _ = self.chart_values(c)
            Binv = np.linalg.inv(self.chart._affine[2])
            grad = gc @ Binv.T
            hess = None
            if hessian:
                hess = Binv @ self.chart_hessian(c) @ Binv.T
            return phi, grad, hess, c
        flat_X = X.reshape(-1, self.dim)
        cs, grads, phis, hs = [], [], [], []
        for x in flat_X:
            c = self.chart.inverse(x)
            phi, gc, _, _ = self.chart_values(c)
            Jinv = np.linalg.inv(self.chart.jacobian(c))
            cs.append(c)
            phis.append(phi)
            grads.append(gc @ Jinv)
        phi = np.array(phis).reshape(X.shape[:-1])
        grad = np.array(grads).reshape(X.shape)
        c = np.array(cs).reshape(X.shape)
        hess = None
        if hessian:
            hess = self._fd_hessian(flat_X).reshape(X.shape + (self.dim,))
        return phi, grad, hess, c

    def _fd_hessian(self, pts, step: float = 1e-5):
        out = []
        for x in pts:
            rows = []
            for a in range(self.dim):
                d = np.zeros(self.dim)
                d[a] = step
                gp = self.evaluate((x + d)[None])[1][0]
                gm = self.evaluate((x - d)[None])[1][0]
                rows.append((gp - gm) / (2 * step))
            Hm = np.array(rows)
            out.append(0.5 * (Hm + Hm.T))
        return np.array(out)

    def eikonal_defect(self, c: np.ndarray) -> np.ndarray:
        """<dPhi, dPhi> with the pulled-back metric, at chart points c (N, dim)."""
        out = []
        for point in np.atleast_2d(c):
            _, gc, _, _ = self.chart_values(point)
            Gi = np.linalg.inv(self.chart.pulled_back_metric(point))
            out.append(gc @ Gi @ gc)
        return np.array(out)


# ---------------------------------------------------------------- beams

@dataclass(frozen=True)
class BeamAmplitude:
    a0: LeadingAmplitude
    a1: SubleadingAmplitude | None
    radius: float
    degree: int = 1

    def cutoff(self, z):
        r = np.sqrt(np.sum(z * z, axis=-1))
        return cutoff_profile(r / self.radius)

    def cutoff_gradient(self, z):
        r = np.sqrt(np.sum(z * z, axis=-1))
        safe = np.where(r > 0, r, 1.0)
        dchi = cutoff_derivative(r / self.radius) / self.radius
        return (dchi / safe)[..., None] * z

    def axis_terms(self, s):
        a0 = self.a0(s)
        a1 = self.a1(s) if (self.a1 is not None and self.degree >= 1) else np.zeros_like(a0)
        return a0, a1


@dataclass(frozen=True)
class FormalBeam:
    phase: BeamPhase
    amplitude: BeamAmplitude
    h: float
    kappa: float = 1.0
    conjugate: bool = False
    _memo: tuple | None = field(default=None, repr=False, compare=False)

    def fields(self, X, gradient: bool = False, hessian: bool = False) -> dict:
        """Scaled phase Psi, its gradient (and Hessian), and amplitude pieces at X.

        a0 and a1 include the cutoff and the conjugation; the full amplitude is
        a0 + (h/|kappa|) a1.  The last call is memoized, since products of
        beams ask for the same points several times in a row.
        """
        X = np.asarray(X, dtype=float)
        m = self._memo
        if m is not None and m[0] == (gradient, hessian) and m[1].shape == X.shape and np.array_equal(m[1], X):
            return dict(m[2])
        out = self._fields(X, gradient, hessian)
        object.__setattr__(self, "_memo", ((gradient, hessian), X.copy(), out))
        return dict(out)

    def _fields(self, X, gradient, hessian):
        phi, grad, hess, c = self.phase.evaluate(X, hessian=hessian)
        s, z = c[..., 0], c[..., 1:]
        chi = self.amplitude.cutoff(z)
        a0, a1 = self.amplitude.axis_terms(s)
        k = self.kappa
        conj = np.conj if self.conjugate else (lambda v: v)
        out = {"psi": k * conj(phi), "grad": k * conj(grad), "a0": chi * conj(a0), "a1": chi * conj(a1),
               "s": s, "z": z, "chi": chi}
        if hess is not None:
            out["hess"] = k * conj(hess)
        if gradient:
            # gradients of a0, a1 in ambient coordinates: chain through the chart
            if self.phase.chart.flat:
                Binv = np.linalg.inv(self.phase.chart._affine[2])
            else:
                raise PreconditionError("amplitude gradients are implemented for flat charts", op="FormalBeam.fields")
            da0 = self.amplitude.a0.derivative(s)
            da1 = self.amplitude.a1.derivative(s) if self.amplitude.a1 is not None else np.zeros_like(da0)
            dchi = self.amplitude.cutoff_gradient(z)
            for key, val, dval in (("a0", a0, da0), ("a1", a1, da1)):
                gc = np.zeros(c.shape, dtype=complex)
                gc[..., 0] = chi * dval
                gc[..., 1:] = dchi * val[..., None]
                out["d" + key] = conj(gc @ Binv.T)
        return out

    def __call__(self, X):
        f = self.fields(np.asarray(X, dtype=float))
        return np.exp(1j * f["psi"] / self.h) * (f["a0"] + self.h / abs(self.kappa) * f["a1"])


def assemble_formal_beam(phase: BeamPhase, amplitude: BeamAmplitude, h: float, kappa: float = 1.0,
                         conjugate: bool = False) -> FormalBeam:
    if not 0 < h < 1:
        raise PreconditionError("h must lie in (0,1)", op="assemble_formal_beam")
    if kappa == 0:
        raise PreconditionError("kappa must be nonzero", op="assemble_formal_beam")
    return FormalBeam(phase, amplitude, float(h), float(kappa), bool(conjugate))


def flat_riccati_transport(H0, ds: float) -> np.ndarray:
    """H after a parameter step ``ds`` of the flat flow H' = -HCH, i.e. H0 (I + ds C H0)^{-1}."""
    H0 = np.asarray(H0, dtype=complex)
    n = H0.shape[0]
    H = H0 @ np.linalg.inv(np.eye(n) + ds * (c_matrix(n) @ H0))
    return 0.5 * (H + H.T)


def straight_beam(xi, p0=None, s_init: float = -1.0, s_end: float = 1.0, H0="i/2*Id", radius: float = 0.5,
                  Q=0.0, degree: int = 1, samples: int = 401, s_ref: float | None = None):
    """Beam phase and amplitude along the line p0 + s*xi in Minkowski space (s = 0 at p0).

    H0 is the phase Hessian at ``s_ref`` (default ``s_init``); the Riccati flow,
    a0 = 1 and a1 = 0 still start at ``s_init``.
    """
    xi = np.asarray(xi, dtype=float)
    dim = xi.size
    H0 = parse_h0(H0, dim - 1)
    if s_ref is not None and s_ref != s_init:
        H0 = flat_riccati_transport(H0, s_init - s_ref)
    p0 = np.zeros(dim) if p0 is None else np.asarray(p0, dtype=float)
    metric = geo.minkowski(dim)
    g = geo.integrate_null_geodesic(metric, p0, xi, (min(s_init, 0.0), max(s_end, 0.0)), samples=3)
    frame = geo.build_null_frame_and_transport(metric, g)
    chart = geo.build_fermi_chart(metric, g, frame, radius)
    ric = solve_riccati(chart, H0, (s_init, s_end), samples=samples)
    a0 = leading_amplitude(ric)
    q_axis = _axis_potential(Q, g, ric.s)
    a1 = subleading_amplitude(ric, a0, q_axis, chart)
    return BeamPhase(chart, ric), BeamAmplitude(a0, a1, radius, degree)


def _axis_potential(Q, geodesic, s):
    if callable(Q):
        return np.array([np.ravel(Q(x))[0] for x in geodesic.position(s)], dtype=complex)
    return np.full(np.shape(s), complex(Q))


# ---------------------------------------------------------------- residual

@dataclass
class ResidualReport:
    norm: float
    sup_beam: float
    concentration: float
    grid_points: int
    points_per_width: float


def beam_residual_norm(beam: FormalBeam, Q, h: float | None = None, k: int = 0, s_range=None,
                       n_s: int = 7, points_per_width: float = 6.0, decay: float = 12.0, full: bool = False):
    """Discrete H^k norm of (box + Q) v over the cutoff support, flat charts only.

    Transverse derivatives are fourth-order differences on the grid; s-derivatives
    of the axis data use the transport relations.  ``Q`` is a constant or a
    callable of ambient points.
    """
    chart = beam.phase.chart
    if not chart.flat:
        raise PreconditionError("residual norm is implemented on flat charts", op="beam_residual_norm")
    if abs(beam.kappa) != 1 or beam.conjugate:
        raise PreconditionError("use an unscaled beam for the residual", op="beam_residual_norm")
    if k not in (0, 1):
        raise PreconditionError("k must be 0 or 1", op="beam_residual_norm")
    h = beam.h if h is None else float(h)
    n = chart.dim - 1
    R = beam.amplitude.radius
    ric = beam.phase.riccati
    sa, sb = (ric.s[0], ric.s[-1]) if s_range is None else s_range
    # beyond Im Phi = decay*h the density is below e^{-2 decay}; the grid stops there
    c_min = float(np.min(np.linalg.eigvalsh(ric.H_at(np.linspace(sa, sb, 21)).imag)))
    half = min(R / 2, math.sqrt(decay * h / c_min))
    cells = 2 * int(math.ceil(half * points_per_width / math.sqrt(h)))
    dz = 2 * half / cells
    z = -half - 2 * dz + dz * np.arange(cells + 5)
    nz = z.size
    ppw = math.sqrt(h) / dz
    if ppw < 6:
        raise ResolutionError(f"{ppw:.1f} points per width sqrt(h); need 6", op="beam_residual_norm")
    svals = np.linspace(sa, sb, n_s)
    ws = np.full(n_s, svals[1] - svals[0])
    ws[[0, -1]] *= 0.5
    Z = np.stack(np.meshgrid(*([z] * n), indexing="ij"), axis=-1)
    inner = tuple(slice(2, -2) for _ in range(n))
    rr = np.sqrt(np.sum(Z * Z, axis=-1))
    chi = cutoff_profile(rr / R)
    vol = abs(np.linalg.det(chart._affine[2])) * dz**n
    total = 0.0
    near = 0.0
    sup = 0.0
    C = ric.C
    prev = []
    for si, s in enumerate(svals):
        H = ric.H_at(np.array(s))
        Hp = ric.H_prime(np.array(s))
        phi = Z[..., 0] + np.einsum("...i,ij,...j->...", Z, H, Z)
        phi_s = np.einsum("...i,ij,...j->...", Z, Hp, Z)
        a0, a1 = beam.amplitude.axis_terms(np.array(s))
        da0 = beam.amplitude.a0.derivative(np.array(s))
        da1 = beam.amplitude.a1.derivative(np.array(s)) if beam.amplitude.a1 is not None else 0.0
        A = a0 + h * a1
        dA = da0 + h * da1
        a = chi * A
        a_s = chi * dA
        gphi = [d1(phi, dz, i) for i in range(n)]
        ga = [d1(a, dz, i) for i in range(n)]
        phi_s1 = d1(phi_s, dz, 0)
        a_s1 = d1(a_s, dz, 0)
        eik = 2 * phi_s * gphi[0] + sum(gphi[i] ** 2 for i in range(1, n))
        dot = phi_s * ga[0] + gphi[0] * a_s + sum(gphi[i] * ga[i] for i in range(1, n))
        box_phi = -(2 * phi_s1 + sum(d2(phi, dz, i) for i in range(1, n)))
        box_a = -(2 * a_s1 + sum(d2(a, dz, i) for i in range(1, n)))
        if callable(Q):
            X = chart.forward(np.concatenate([np.full(Z.shape[:-1] + (1,), s), Z], axis=-1))
            qv = Q(X)
        else:
            qv = Q
        Rf = (box_a + qv * a) + eik * a / h**2 - 1j / h * (2 * dot - box_phi * a)
        phase = np.exp(1j * phi / h)
        r = phase * Rf
        dens = np.abs(r[inner]) ** 2
        if k == 1:
            grad_sq = 0.0
            for i in range(n):
                gi = phase * (1j / h * gphi[i] * Rf + d1(Rf, dz, i))
                grad_sq = grad_sq + np.abs(gi[inner]) ** 2
            prev.append(r[inner])
            if len(prev) > 3:
                prev.pop(0)
            if len(prev) >= 2:
                ds = svals[1] - svals[0]
                grad_sq = grad_sq + np.abs((prev[-1] - prev[-2]) / ds) ** 2
            dens = dens + grad_sq
        total += ws[si] * float(np.sum(dens)) * vol
        c_im = 0.5 * float(np.min(np.linalg.eigvalsh(H.imag)))
        ball = rr[inner] <= 5 * math.sqrt(h / c_im)
        near += ws[si] * float(np.sum(dens[ball])) * vol
        sup = max(sup, float(np.max(np.abs(phase * a)[inner])))
    norm = math.sqrt(total)
    rep = ResidualReport(norm, sup, near / total if total > 0 else 1.0, int(n_s * (nz - 4) ** n), ppw)
    return rep if full else norm
