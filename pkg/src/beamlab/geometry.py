"""Lorentzian chart geometry: metrics, Christoffel symbols, null geodesics,
transported null frames and Fermi charts along a geodesic.

Index conventions: coordinates x = (t, x^1, ..., x^n); ``dg[c, a, b]`` is
d_c g_ab and ``d2g[c, d, a, b]`` is d_c d_d g_ab.  The wave operator is

    box u = -g^{ab} d_a d_b u + Gamma^a d_a u,   Gamma^a = g^{bc} Gamma^a_{bc},

which is d_t^2 - Laplacian on Minkowski space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import ChartError, ConfigError, DegenerateMetricError, FrameError, PreconditionError

NULL_TOL = 1e-10
DET_FLOOR = 1e-14


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class MetricField:
    """Metric on a coordinate chart.  Derivatives fall back to central differences."""

    dim: int
    g_eval: Callable[[np.ndarray], np.ndarray]
    dg_eval: Callable | None = None
    d2g_eval: Callable | None = None
    fd_step: float = 1e-5
    name: str = "custom"
    flat: bool = False
    box: tuple | None = None  # (lower, upper) arrays; None means unbounded

    def g(self, x) -> np.ndarray:
        return np.asarray(self.g_eval(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dg_eval is not None:
            return np.asarray(self.dg_eval(x), dtype=float)
        if self.flat:
            return np.zeros((self.dim,) * 3)
        e = self._step()
        out = np.empty((self.dim, self.dim, self.dim))
        for c in range(self.dim):
            dx = np.zeros(self.dim)
            dx[c] = e
            out[c] = (self.g(x + dx) - self.g(x - dx)) / (2 * e)
        return out

    def d2g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d2g_eval is not None:
            return np.asarray(self.d2g_eval(x), dtype=float)
        if self.flat:
            return np.zeros((self.dim,) * 4)
        # differences of the first derivatives with a coarser step keep the rounding down
        e = max(self._step() * 100, 1e-3)
        out = np.empty((self.dim,) * 4)
        for d in range(self.dim):
            dx = np.zeros(self.dim)
            dx[d] = e
            out[:, d] = (self.dg(x + dx) - self.dg(x - dx)) / (2 * e)
        return 0.5 * (out + out.transpose(1, 0, 2, 3))

    def _step(self) -> float:
        if self.fd_step < 1e-12:
            raise ConfigError(f"finite-difference step {self.fd_step} underflows", op="christoffel")
        return self.fd_step

    def inside(self, x) -> bool:
        if self.box is None:
            return True
        lo, hi = self.box
        return bool(np.all(x >= lo) and np.all(x <= hi))


def minkowski(dim: int = 3) -> MetricField:
    eta = np.eye(dim)
    eta[0, 0] = -1.0
    eta.setflags(write=False)
    return MetricField(dim, lambda x: eta.copy(), lambda x: np.zeros((dim,) * 3),
                       lambda x: np.zeros((dim,) * 4), name="minkowski", flat=True)


def gaussian_bump(dim: int = 3, amplitude: float = 0.1, width: float = 1.0, center=None) -> MetricField:
    """g = -dt^2 + (1 + A exp(-|x' - c|^2 / w^2)) sum dx_i^2, with analytic derivatives."""
    n = dim - 1
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    w2 = width * width

    def bump(x):
        r = x[1:] - c
        return amplitude * math.exp(-float(r @ r) / w2), r

    def g(x):
        b, _ = bump(x)
        out = np.eye(dim) * (1.0 + b)
        out[0, 0] = -1.0
        return out

    def dg(x):
        b, r = bump(x)
        out = np.zeros((dim, dim, dim))
        grad = -2.0 * r / w2 * b
        for k in range(n):
            out[k + 1, 1:, 1:] = np.eye(n) * grad[k]
        return out

    def d2g(x):
        b, r = bump(x)
        hess = (4.0 * np.outer(r, r) / (w2 * w2) - 2.0 * np.eye(n) / w2) * b
        out = np.zeros((dim,) * 4)
        for k in range(n):
            for m in range(n):
                out[k + 1, m + 1, 1:, 1:] = np.eye(n) * hess[k, m]
        return out

    return MetricField(dim, g, dg, d2g, name="gaussian-bump")


def metric_from_name(name: str, dim: int, **params) -> MetricField:
    if name == "minkowski":
        return minkowski(dim)
    if name == "gaussian-bump":
        return gaussian_bump(dim, **params)
    raise ConfigError(f"unknown metric {name!r}", op="metric_from_name")


def metric_eval(metric: MetricField, x):
    """(g, g^{-1}, sqrt|det g|) at x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (metric.dim,) or not np.all(np.isfinite(x)):
        raise PreconditionError(f"point must be {metric.dim} finite coordinates", op="metric_eval")
    g = metric.g(x)
    det = float(np.linalg.det(g))
    if abs(det) < DET_FLOOR:
        raise DegenerateMetricError(f"|det g| = {abs(det):.3e} at {x}", op="metric_eval")
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + ginv.T)
    return g, ginv, math.sqrt(abs(det))


def signature_ok(metric: MetricField, x) -> bool:
    ev = np.linalg.eigvalsh(metric.g(x))
    return int(np.sum(ev < 0)) == 1 and bool(np.all(ev != 0))


def christoffel(metric: MetricField, x) -> np.ndarray:
    """Gamma[a, b, c] = Gamma^a_{bc}."""
    if metric.flat:
        return np.zeros((metric.dim,) * 3)
    _, ginv, _ = metric_eval(metric, x)
    dg = metric.dg(x)
    # lowered symbols Gamma_{d b c} = (d_b g_dc + d_c g_db - d_d g_bc) / 2
    low = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    return np.einsum("ad,dbc->abc", ginv, low)


def contracted_christoffel(metric: MetricField, x) -> np.ndarray:
    """Gamma^a = g^{bc} Gamma^a_{bc}."""
    if metric.flat:
        return np.zeros(metric.dim)
    _, ginv, _ = metric_eval(metric, x)
    return np.einsum("bc,abc->a", ginv, christoffel(metric, x))


def lorentz_inner(metric: MetricField, x, v, w) -> float:
    g = metric.g(x)
    return float(np.asarray(v, dtype=float) @ g @ np.asarray(w, dtype=float))


def box_operator(metric: MetricField, x, grad, hess):
    """Apply box to a function given its gradient and Hessian at x (complex allowed)."""
    _, ginv, _ = metric_eval(metric, x)
    return -np.einsum("ab,ab->", ginv, hess) + contracted_christoffel(metric, x) @ grad


# ---------------------------------------------------------------- geodesics

def _geodesic_rhs(metric):
    dim = metric.dim

    def rhs(s, y):
        x, v = y[:dim], y[dim:]
        G = christoffel(metric, x)
        return np.concatenate([v, -np.einsum("abc,b,c->a", G, v, v)])

    return rhs


@dataclass(frozen=True)
class NullGeodesic:
    metric: MetricField
    base: np.ndarray
    direction: np.ndarray
    s: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    truncated: bool = False
    s_ref: float = 0.0
    _interp: tuple = field(default=None, repr=False, compare=False)

    @property
    def interval(self):
        return float(self.s[0]), float(self.s[-1])

    def position(self, s):
        if self.metric.flat:
            s = np.asarray(s, dtype=float)
            return self.base + np.multiply.outer(s - self.s_ref, self.direction)
        return self._interp[0](s)

    def velocity(self, s):
        if self.metric.flat:
            s = np.asarray(s, dtype=float)
            return np.broadcast_to(self.direction, np.shape(s) + self.direction.shape).copy()
        return self._interp[1](s)

    def null_defect(self) -> float:
        return max(abs(lorentz_inner(self.metric, x, v, v)) for x, v in zip(self.x, self.xdot))


def integrate_null_geodesic(metric: MetricField, p, xi, s_span, tol: float = 1e-10,
                            samples: int = 401, s_ref: float = 0.0) -> NullGeodesic:
    """Adaptive RK4(5) from x(s_ref) = p, xdot(s_ref) = xi over s_span (both directions)."""
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    nrm = float(xi @ xi)
    if abs(lorentz_inner(metric, p, xi, xi)) > NULL_TOL * max(nrm, 1.0):
        raise PreconditionError("initial vector is not null", op="integrate_null_geodesic")
    sa, sb = map(float, s_span)
    if not sa <= s_ref <= sb:
        raise PreconditionError("s_ref must lie inside the interval", op="integrate_null_geodesic")
    dim = metric.dim
    grid = np.linspace(sa, sb, samples)
    y0 = np.concatenate([p, xi])
    rhs = _geodesic_rhs(metric)
    truncated = False

    def leave(s, y):
        if metric.box is None:
            return 1.0
        lo, hi = metric.box
        return float(min(np.min(y[:dim] - lo), np.min(hi - y[:dim])))

    leave.terminal = True
    parts_s, parts_y = [], []
    for lo, hi in ((s_ref, sa), (s_ref, sb)):
        if lo == hi:
            parts_s.append(np.array([s_ref]))
            parts_y.append(y0[:, None])
            continue
        pts = grid[(grid >= min(lo, hi)) & (grid <= max(lo, hi))]
        pts = np.unique(np.concatenate([[s_ref], pts]))
        if hi < lo:
            pts = pts[::-1]
        sol = solve_ivp(rhs, (lo, hi), y0, method="RK45", t_eval=pts, rtol=tol, atol=tol * 1e-2,
                        events=leave if metric.box is not None else None)
        if sol.status == 1:
            truncated = True
        parts_s.append(sol.t)
        parts_y.append(sol.y)
    s_all = np.concatenate([parts_s[0][::-1], parts_s[1]])
    y_all = np.concatenate([parts_y[0][:, ::-1], parts_y[1]], axis=1)
    s_all, idx = np.unique(s_all, return_index=True)
    y_all = y_all[:, idx]
    x, v = y_all[:dim].T, y_all[dim:].T
    interp = None
    if not metric.flat:
        acc = np.array([rhs(0.0, np.concatenate([a, b]))[dim:] for a, b in zip(x, v)])
        interp = (CubicHermiteSpline(s_all, x, v, axis=0), CubicHermiteSpline(s_all, v, acc, axis=0))
    return NullGeodesic(metric, p, xi, s_all, x, v, truncated, s_ref, interp)


def geodesic_rk4(metric: MetricField, p, v, s_end: float, steps: int):
    """Fixed-step classical RK4 for the geodesic equation; returns (x, xdot) at s_end."""
    rhs = _geodesic_rhs(metric)
    y = np.concatenate([np.asarray(p, dtype=float), np.asarray(v, dtype=float)])
    ds = s_end / steps
    for k in range(steps):
        s = k * ds
        k1 = rhs(s, y)
        k2 = rhs(s + ds / 2, y + ds / 2 * k1)
        k3 = rhs(s + ds / 2, y + ds / 2 * k2)
        k4 = rhs(s + ds, y + ds * k3)
        y = y + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[:metric.dim], y[metric.dim:]


# ---------------------------------------------------------------- frames

@dataclass(frozen=True)
class NullFrame:
    """``vectors[k, m]`` is e_m at sample s[k]; e_0 is the tangent, <e_0, e_1> = -2."""

    geodesic: NullGeodesic
    s: np.ndarray
    vectors: np.ndarray  # (samples, dim, dim)
    _interp: object = field(default=None, repr=False, compare=False)

    def at(self, s) -> np.ndarray:
        if self._interp is None:
            return self.vectors[0].copy() if np.ndim(s) == 0 else np.repeat(self.vectors[:1], np.size(s), 0)
        return self._interp(s)

    def relation_defect(self) -> float:
        worst = 0.0
        model = frame_model(self.geodesic.metric.dim)
        for k in range(self.s.size):
            g = self.geodesic.metric.g(self.geodesic.x[k])
            E = self.vectors[k]
            worst = max(worst, float(np.max(np.abs(E @ g @ E.T - model))))
        return worst


def frame_model(dim: int) -> np.ndarray:
    m = np.eye(dim)
    m[0, 0] = m[1, 1] = 0.0
    m[0, 1] = m[1, 0] = -2.0
    return m


def complete_null_frame(metric: MetricField, x, e0) -> np.ndarray:
    """e_1 in span(e_0, d_t) with <e_0,e_1> = -2, <e_1,e_1> = 0; Gram-Schmidt for the rest."""
    g = metric.g(x)
    dim = metric.dim
    e0 = np.asarray(e0, dtype=float)
    T = np.zeros(dim)
    T[0] = 1.0
    e0T = float(e0 @ g @ T)
    if abs(e0T) < 1e-12:
        raise FrameError("tangent is orthogonal to the time axis", op="build_null_frame_and_transport")
    beta = -2.0 / e0T
    alpha = -beta * float(T @ g @ T) / (2.0 * e0T)
    e1 = alpha * e0 + beta * T
    frame = [e0, e1]
    P = np.array([e0, e1])
    Ginv = np.linalg.inv(P @ g @ P.T)
    for axis in range(1, dim):
        if len(frame) == dim:
            break
        v = np.zeros(dim)
        v[axis] = 1.0
        coeff = Ginv @ (P @ g @ v)
        v = v - coeff @ P
        for u in frame[2:]:
            v = v - float(u @ g @ v) * u
        nn = float(v @ g @ v)
        if nn <= 1e-10:
            continue
        frame.append(v / math.sqrt(nn))
    if len(frame) != dim:
        raise FrameError("could not complete the frame", op="build_null_frame_and_transport")
    return np.array(frame)


def build_null_frame_and_transport(metric: MetricField, geodesic: NullGeodesic, tol: float = 1e-10) -> NullFrame:
    dim = metric.dim
    s = geodesic.s
    x0, v0 = geodesic.x[0], geodesic.xdot[0]
    if float(v0 @ v0) < 1e-24:
        raise FrameError("degenerate tangent", op="build_null_frame_and_transport")
    E0 = complete_null_frame(metric, x0, v0)
    if metric.flat:
        vecs = np.repeat(E0[None], s.size, axis=0)
        return NullFrame(geodesic, s, vecs, None)

    def rhs(t, y):
        x, v, E = y[:dim], y[dim:2 * dim], y[2 * dim:].reshape(dim, dim)
        G = christoffel(metric, x)
        acc = -np.einsum("abc,b,c->a", G, v, v)
        dE = -np.einsum("abc,b,mc->ma", G, v, E)
        return np.concatenate([v, acc, dE.ravel()])

    y0 = np.concatenate([x0, v0, E0.ravel()])
    sol = solve_ivp(rhs, (s[0], s[-1]), y0, method="RK45", t_eval=s, rtol=tol, atol=tol * 1e-2)
    vecs = sol.y[2 * dim:].T.reshape(-1, dim, dim)
    return NullFrame(geodesic, s, vecs, CubicSpline(s, vecs, axis=0))


# ---------------------------------------------------------------- Fermi charts

@dataclass(frozen=True)
class FermiChart:
    """Coordinates (s, z^1..z^n) with ambient point exp_{gamma(s)}(sum z^k f_k(s)).

    The transverse basis is f_1 = -e_1/2 and f_k = e_k for k >= 2, so that the
    pulled-back metric on the axis is ds dz^1 + dz^1 ds + sum_{k>=2} dz^k dz^k.
    """

    metric: MetricField
    geodesic: NullGeodesic
    frame: NullFrame
    radius: float
    exp_steps: int = 16
    _affine: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.metric.dim

    @property
    def flat(self) -> bool:
        return self._affine is not None

    def basis(self, s) -> np.ndarray:
        """Rows: gamma'(s), f_1(s), ..., f_n(s)."""
        E = self.frame.at(s).copy()
        E[..., 1, :] *= -0.5
        return E

    def forward(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=float)
        if self._affine is not None:
            origin, s_ref, B = self._affine
            shift = c.copy()
            shift[..., 0] -= s_ref
            return origin + shift @ B
        if c.ndim > 1:
            return np.array([self.forward(row) for row in c.reshape(-1, self.dim)]).reshape(c.shape)
        s, y = c[0], c[1:]
        base = self.geodesic.position(s)
        B = self.basis(s)
        v = y @ B[1:]
        if not np.any(v):
            return base.copy()
        x, _ = geodesic_rk4(self.metric, base, v, 1.0, self.exp_steps)
        return x

    def jacobian(self, coords, step: float = 1e-6) -> np.ndarray:
        """J[a, m] = d x^a / d c^m."""
        c = np.asarray(coords, dtype=float)
        if self._affine is not None:
            return self._affine[2].T.copy()
        J = np.empty((self.dim, self.dim))
        for m in range(self.dim):
            d = np.zeros(self.dim)
            d[m] = step
            J[:, m] = (self.forward(c + d) - self.forward(c - d)) / (2 * step)
        return J

    def inverse(self, x, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._affine is not None:
            origin, s_ref, B = self._affine
            c = np.linalg.solve(B.T, (x - origin).T).T
            c[..., 0] += s_ref
            return c
        if x.ndim > 1:
            return np.array([self.inverse(row, tol, max_iter) for row in x.reshape(-1, self.dim)]).reshape(x.shape)
        k = int(np.argmin(np.sum((self.geodesic.x - x) ** 2, axis=1)))
        s0 = self.geodesic.s[k]
        B = self.basis(s0)
        c = np.concatenate([[s0], np.zeros(self.dim - 1)])
        c = c + np.linalg.solve(B.T, x - self.geodesic.x[k])
        for _ in range(max_iter):
            r = self.forward(c) - x
            if np.max(np.abs(r)) <= tol * max(1.0, float(np.max(np.abs(x)))):
                return c
            c = c - np.linalg.solve(self.jacobian(c), r)
        raise ChartError("Newton iteration for the inverse chart did not converge",
                         suggested_radius=self.radius / 2, op="build_fermi_chart")

    def pulled_back_metric(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=float)
        J = self.jacobian(c)
        return J.T @ self.metric.g(self.forward(c)) @ J


def build_fermi_chart(metric: MetricField, geodesic: NullGeodesic, frame: NullFrame, radius: float,
                      exp_steps: int = 16, check_points: int = 8, seed: int = 0) -> FermiChart:
    affine = None
    if metric.flat:
        B = frame.vectors[0].copy()
        B[1] *= -0.5
        affine = (geodesic.base.copy(), geodesic.s_ref, B)
    chart = FermiChart(metric, geodesic, frame, float(radius), exp_steps, affine)
    if affine is None and check_points:
        rng = np.random.default_rng(seed)
        sa, sb = geodesic.interval
        for _ in range(check_points):
            c = np.concatenate([[rng.uniform(sa, sb)], rng.uniform(-radius, radius, metric.dim - 1) / math.sqrt(metric.dim - 1)])
            back = chart.inverse(chart.forward(c))
            if np.max(np.abs(back - c)) > 1e-8 * max(1.0, radius):
                raise ChartError("chart round trip failed on the tube", suggested_radius=radius / 2,
                                 op="build_fermi_chart")
    return chart


def chart_model(dim: int) -> np.ndarray:
    m = np.eye(dim)
    m[0, 0] = m[1, 1] = 0.0
    m[0, 1] = m[1, 0] = 1.0
    return m


def axis_metric_derivatives(chart: FermiChart, s: float, step: float = 1e-3) -> np.ndarray:
    """Central differences of the pulled-back metric at (s, 0); shape (dim, dim, dim)."""
    dim = chart.dim
    out = np.empty((dim, dim, dim))
    c0 = np.zeros(dim)
    c0[0] = s
    for m in range(dim):
        d = np.zeros(dim)
        d[m] = step
        out[m] = (chart.pulled_back_metric(c0 + d) - chart.pulled_back_metric(c0 - d)) / (2 * step)
    return out


def transverse_hessian_g11(chart: FermiChart, s: float, step: float = 2e-3) -> np.ndarray:
    """D_ij = d_i d_j g^{11} at (s, 0) in chart coordinates, i, j = 1..n."""
    n = chart.dim - 1
    if chart.flat:
        return np.zeros((n, n))

    def g11(z):
        c = np.concatenate([[s], z])
        return float(np.linalg.inv(chart.pulled_back_metric(c))[1, 1])

    D = np.empty((n, n))
    f0 = g11(np.zeros(n))
    for i in range(n):
        for j in range(i, n):
            if i == j:
                e = np.zeros(n)
                e[i] = step
                D[i, i] = (g11(e) - 2 * f0 + g11(-e)) / step**2
            else:
                ei = np.zeros(n)
                ej = np.zeros(n)
                ei[i] = step
                ej[j] = step
                D[i, j] = D[j, i] = (g11(ei + ej) - g11(ei - ej) - g11(-ei + ej) + g11(-ei - ej)) / (4 * step**2)
    return D
