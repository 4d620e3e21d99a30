"""WKB interaction calculus for products of beams.

With  box = -g^{ab} d_ab + Gamma^a d_a  one has

    (box + Q)(e^{i Psi/h} c) = e^{i Psi/h} [ h^-2 <dPsi,dPsi> c - (i/h)(2<dPsi,dc> - box(Psi) c) + (box + Q) c ].

Matching  (box + Q) w = e^{i Psi/h} q sum_l b_l h^l  with  w = e^{i Psi/h} sum_{j>=2} c_j h^j
order by order gives

    c_j = [ q b_{j-2} - (box + Q) c_{j-2} + i(2<dPsi, dc_{j-1}> - box(Psi) c_{j-1}) ] / <dPsi,dPsi>,

with c_0 = c_1 = 0, so c_2 = q b_0 / <dPsi,dPsi>.  The same recursion, started
at j = 4, gives the theta_j of a three-beam interaction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry as geo
from .errors import DegeneratePhaseError, PreconditionError, ResolutionError
from .stencils import d1, d2

NONDEGENERATE_FLOOR = 1e-10


def _metric_fields(metric: geo.MetricField, X: np.ndarray):
    """g^{-1} and Gamma^a at points X (N, d); constant arrays for flat metrics."""
    if metric.flat:
        eta = np.linalg.inv(metric.g(np.zeros(metric.dim)))
        return eta, None
    ginv = np.array([np.linalg.inv(metric.g(x)) for x in X])
    gam = np.array([geo.contracted_christoffel(metric, x) for x in X])
    return ginv, gam


def _pair(ginv, u, v):
    if ginv.ndim == 2:
        return np.einsum("...a,ab,...b->...", u, ginv, v)
    return np.einsum("na,nab,nb->n", u, ginv, v)


# ---------------------------------------------------------------- phases

class PlanePhase:
    """Psi(x) = kappa <xi, x - p0>_eta, a null plane wave phase in flat space."""

    def __init__(self, xi, kappa: float = 1.0, p0=None, metric: geo.MetricField | None = None):
        self.xi = np.asarray(xi, dtype=float)
        dim = self.xi.size
        self.metric = metric or geo.minkowski(dim)
        self.kappa = float(kappa)
        self.p0 = np.zeros(dim) if p0 is None else np.asarray(p0, dtype=float)
        self.covector = self.kappa * (self.metric.g(self.p0) @ self.xi)

    def phase_fields(self, X, hessian: bool = False):
        X = np.asarray(X, dtype=float)
        psi = (X - self.p0) @ self.covector + 0j
        grad = np.broadcast_to(self.covector + 0j, X.shape).copy()
        hess = np.zeros(X.shape + (X.shape[-1],), dtype=complex) if hessian else None
        return psi, grad, hess


class BeamPhaseTerm:
    """Adapter exposing a FormalBeam's scaled phase Psi = kappa Phi (or kappa conj Phi)."""

    def __init__(self, beam):
        self.beam = beam

    def phase_fields(self, X, hessian: bool = False):
        f = self.beam.fields(np.asarray(X, dtype=float), hessian=hessian)
        return f["psi"], f["grad"], f.get("hess")


@dataclass
class CombinedPhase:
    terms: Sequence
    metric: geo.MetricField
    p0: np.ndarray
    half_width: float
    min_square: float = float("nan")
    worst_point: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.metric.dim

    def fields(self, X, hessian: bool = False):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        psi = 0.0
        grad = 0.0
        hess = 0.0 if hessian else None
        for t in self.terms:
            p, g, hh = t.phase_fields(X, hessian)
            psi = psi + p
            grad = grad + g
            if hessian:
                hess = hess + hh
        return psi, grad, hess

    def value(self, X):
        return self.fields(X)[0]

    def gradient(self, X):
        return self.fields(X)[1]

    def square(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _, grad, _ = self.fields(X)
        ginv, _ = _metric_fields(self.metric, X)
        return _pair(ginv, grad, grad)

    def box(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _, grad, hess = self.fields(X, hessian=True)
        ginv, gam = _metric_fields(self.metric, X)
        if ginv.ndim == 2:
            out = -np.einsum("ab,nab->n", ginv, hess)
        else:
            out = -np.einsum("nab,nab->n", ginv, hess)
        if gam is not None:
            out = out + np.einsum("na,na->n", gam, grad)
        return out

    def pair_identity_gap(self) -> float:
        """Relative gap between <dPsi,dPsi>(p0) and 2<dPsi_i,dPsi_j>(p0) for two null terms."""
        if len(self.terms) != 2:
            raise PreconditionError("pair identity needs exactly two phases", op="combine_phases")
        x = self.p0[None, :]
        ginv, _ = _metric_fields(self.metric, x)
        gi = self.terms[0].phase_fields(x)[1]
        gj = self.terms[1].phase_fields(x)[1]
        lhs = complex(_pair(ginv, gi + gj, gi + gj)[0])
        rhs = complex(2 * _pair(ginv, gi, gj)[0])
        return abs(lhs - rhs) / abs(rhs)

    def sample_points(self, lattice: int = 7, random: int = 100, seed: int = 0) -> np.ndarray:
        axes = [np.linspace(c - self.half_width, c + self.half_width, lattice) for c in self.p0]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        rng = np.random.default_rng(seed)
        extra = self.p0 + rng.uniform(-self.half_width, self.half_width, (random, self.dim))
        return np.concatenate([grid, extra])


def combine_phases(terms, metric: geo.MetricField, p0=None, half_width: float = 0.15,
                   check: bool = True, lattice: int = 7, random: int = 100) -> CombinedPhase:
    p0 = np.zeros(metric.dim) if p0 is None else np.asarray(p0, dtype=float)
    cp = CombinedPhase(list(terms), metric, p0, float(half_width))
    if check:
        pts = cp.sample_points(lattice, random)
        sq = np.abs(cp.square(pts))
        k = int(np.argmin(sq))
        cp.min_square = float(sq[k])
        cp.worst_point = pts[k]
        if sq[k] < NONDEGENERATE_FLOOR:
            raise DegeneratePhaseError(f"<dPsi,dPsi> = {sq[k]:.3e} at {pts[k]}", op="combine_phases")
    return cp


def psi_sharp(combined: CombinedPhase, X) -> np.ndarray:
    sq = combined.square(X)
    if np.any(np.abs(sq) < NONDEGENERATE_FLOOR):
        raise DegeneratePhaseError("combined gradient is null at a requested point", op="psi_sharp")
    return 1.0 / sq


# ---------------------------------------------------------------- coefficients

def _as_field(f):
    if callable(f):
        return f
    val = complex(f)
    return lambda X: np.full(np.atleast_2d(X).shape[0], val)


def fd_gradient(f: Callable, X: np.ndarray, step: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    out = np.empty(X.shape, dtype=complex)
    for a in range(d):
        e = np.zeros(d)
        e[a] = step
        out[:, a] = (f(X + e) - f(X - e)) / (2 * step)
    return out


@dataclass
class PairCoefficients:
    combined: CombinedPhase
    q: float
    b0: Callable
    b1: Callable
    fd_step: float

    def c2(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.q * self.b0(X) / self.combined.square(X)

    def c3(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.q == 0:
            return np.zeros(X.shape[0], dtype=complex)
        sq = self.combined.square(X)
        c2 = self.q * self.b0(X) / sq
        _, grad, _ = self.combined.fields(X)
        ginv, _ = _metric_fields(self.combined.metric, X)
        dc2 = fd_gradient(self.c2, X, self.fd_step)
        box_psi = self.combined.box(X)
        return (self.q * self.b1(X) + 2j * _pair(ginv, grad, dc2) - 1j * box_psi * c2) / sq

    def defining_relation_gap(self, X) -> float:
        """max |c2 <dPsi,dPsi> - q b0|."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return float(np.max(np.abs(self.c2(X) * self.combined.square(X) - self.q * self.b0(X))))


def c_coefficients(combined: CombinedPhase, b0, b1, q: float, Q=0.0, fd_step: float | None = None) -> PairCoefficients:
    """c2 and c3 as callables.  Q enters only from c4 on; it is accepted for symmetry."""
    step = 1e-4 * 2 * combined.half_width / 0.6 if fd_step is None else fd_step
    return PairCoefficients(combined, float(q), _as_field(b0), _as_field(b1), step)


@dataclass
class BoxGrid:
    axes: list  # uniform 1-D coordinate arrays, one per dimension

    @property
    def spacing(self):
        return [float(a[1] - a[0]) for a in self.axes]

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @staticmethod
    def box(center, half_width: float, n: int) -> "BoxGrid":
        return BoxGrid([np.linspace(c - half_width, c + half_width, n) for c in center])


def _grid_operators(combined: CombinedPhase, grid: BoxGrid, Q):
    P = grid.points()
    shape = P.shape[:-1]
    flatP = P.reshape(-1, P.shape[-1])
    _, grad, _ = combined.fields(flatP)
    ginv, gam = _metric_fields(combined.metric, flatP)
    sq = _pair(ginv, grad, grad).reshape(shape)
    box_psi = combined.box(flatP).reshape(shape)
    grad = grad.reshape(shape + (-1,))
    if ginv.ndim == 3:
        ginv = ginv.reshape(shape + ginv.shape[1:])
        gam = gam.reshape(shape + (-1,))
    qv = Q(flatP).reshape(shape) if callable(Q) else np.full(shape, complex(Q))
    return P, grad, ginv, gam, sq, box_psi, qv


def _grid_gradient(f, dx):
    return np.stack([d1(f, h, a) for a, h in enumerate(dx)], axis=-1)


def _grid_box(f, dx, ginv, gam):
    d = len(dx)
    out = 0.0
    for a in range(d):
        for b in range(d):
            if a == b:
                dab = d2(f, dx[a], a)
            elif b > a:
                dab = d1(d1(f, dx[a], a), dx[b], b)
            else:
                continue
            w = ginv[..., a, b] if ginv.ndim > 2 else ginv[a, b]
            out = out - (w * dab if a == b else 2 * w * dab)
    if gam is not None:
        g = _grid_gradient(f, dx)
        out = out + np.einsum("...a,...a->...", gam, g)
    return out


def c_recursion(combined: CombinedPhase, b_list, K: int, q: float, Q, grid: BoxGrid) -> dict:
    """c_2..c_{2K+2} on grid nodes; derivatives by fourth-order differences.

    Values within two nodes of the boundary are not part of the contract.
    """
    if K > 3:
        raise PreconditionError("K > 3 is refused: nested differences amplify noise", op="c_recursion")
    if K < 0:
        raise PreconditionError("K must be nonnegative", op="c_recursion")
    P, grad, ginv, gam, sq, box_psi, qv = _grid_operators(combined, grid, Q)
    dx = grid.spacing
    flatP = P.reshape(-1, P.shape[-1])
    shape = P.shape[:-1]
    bs = []
    for l in range(2 * K + 1):
        if l < len(b_list) and b_list[l] is not None:
            bs.append(_as_field(b_list[l])(flatP).reshape(shape))
        else:
            bs.append(np.zeros(shape, dtype=complex))
    c = {0: np.zeros(shape, dtype=complex), 1: np.zeros(shape, dtype=complex)}
    for j in range(2, 2 * K + 3):
        prev = c[j - 1]
        dprev = _grid_gradient(prev, dx)
        dot = np.einsum("...a,ab,...b->...", grad, ginv, dprev) if ginv.ndim == 2 else \
            np.einsum("...a,...ab,...b->...", grad, ginv, dprev)
        lower = c[j - 2]
        box_lower = _grid_box(lower, dx, ginv, gam) + qv * lower
        c[j] = (q * bs[j - 2] - box_lower + 1j * (2 * dot - box_psi * prev)) / sq
    return {j: c[j] for j in range(2, 2 * K + 3)}


# ---------------------------------------------------------------- triple interactions

def beta2_from_pairs(a_i, a_j, a_k, c2_jk, c2_ik, c2_ij):
    """Lowest-order source coefficient of a v-w product:  a_i c2^(jk) + a_j c2^(ik) + a_k c2^(ij)."""
    return a_i * c2_jk + a_j * c2_ik + a_k * c2_ij


@dataclass
class TripleCoefficients:
    combined: CombinedPhase
    q: float
    beta2: Callable
    beta3: Callable
    fd_step: float

    def theta4(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.q * self.beta2(X) / self.combined.square(X)

    def theta5(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.q == 0:
            return np.zeros(X.shape[0], dtype=complex)
        sq = self.combined.square(X)
        t4 = self.q * self.beta2(X) / sq
        _, grad, _ = self.combined.fields(X)
        ginv, _ = _metric_fields(self.combined.metric, X)
        dt4 = fd_gradient(self.theta4, X, self.fd_step)
        return (self.q * self.beta3(X) + 2j * _pair(ginv, grad, dt4) - 1j * self.combined.box(X) * t4) / sq

    def defining_relation_gap(self, X) -> float:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return float(np.max(np.abs(self.theta4(X) * self.combined.square(X) - self.q * self.beta2(X))))


def beta_theta(combined: CombinedPhase, beta2, beta3, q: float, fd_step: float | None = None) -> TripleCoefficients:
    step = 1e-4 * 2 * combined.half_width / 0.6 if fd_step is None else fd_step
    return TripleCoefficients(combined, float(q), _as_field(beta2), _as_field(beta3), step)


# ---------------------------------------------------------------- residual

@dataclass
class InteractionResidual:
    norm: float
    source_norm: float
    h: float
    grid_points: int


@dataclass
class ResidualFields:
    """Residual of the two-term ansatz as  e^{i Psi/h} sum_p h^p R_p  on a grid.

    c2, c3 and the sources do not depend on h, so one set of fields serves a
    whole sweep in h.
    """

    psi: np.ndarray
    powers: list  # R_0 .. R_3
    source: list  # q b0, q b1
    weights: np.ndarray  # trapezoid weights on the nodes of N0

    def _norm(self, h, tot):
        w = np.exp(-2 * self.psi.imag / h) * self.weights
        return float(np.sqrt(np.sum(w * np.abs(tot) ** 2)))

    def norm(self, h: float) -> float:
        return self._norm(h, sum(h**p * r for p, r in enumerate(self.powers)))

    def source_norm(self, h: float) -> float:
        return self._norm(h, self.source[0] + h * self.source[1])


def residual_fields(coeffs: PairCoefficients, Q, grid: BoxGrid) -> ResidualFields:
    """Sample c2, c3 from their callables and differentiate them on the grid.

    The grid is padded by two layers so that the one-sided stencils stay off
    N0; the norm uses trapezoid weights on the original nodes.  The h^0 and h^1
    orders cancel up to the difference error and what remains is the
    truncation left at h^2 and h^3.
    """
    combined = coeffs.combined
    dx = grid.spacing
    padded = BoxGrid([np.concatenate([a[0] - d * np.arange(2, 0, -1), a, a[-1] + d * np.arange(1, 3)])
                       for a, d in zip(grid.axes, dx)])
    P, grad, ginv, gam, sq, box_psi, qv = _grid_operators(combined, padded, Q)
    flatP = P.reshape(-1, P.shape[-1])
    shape = P.shape[:-1]
    psi = combined.value(flatP).reshape(shape)
    c2 = coeffs.c2(flatP).reshape(shape)
    c3 = coeffs.c3(flatP).reshape(shape)
    qb0 = coeffs.q * coeffs.b0(flatP).reshape(shape)
    qb1 = coeffs.q * coeffs.b1(flatP).reshape(shape)

    def transport(cj):
        dcj = _grid_gradient(cj, dx)
        if ginv.ndim == 2:
            dot = np.einsum("...a,ab,...b->...", grad, ginv, dcj)
        else:
            dot = np.einsum("...a,...ab,...b->...", grad, ginv, dcj)
        return -1j * (2 * dot - box_psi * cj)

    def wave(cj):
        return _grid_box(cj, dx, ginv, gam) + qv * cj

    powers = [sq * c2 - qb0,
              transport(c2) + sq * c3 - qb1,
              wave(c2) + transport(c3),
              wave(c3)]
    inner = tuple(slice(2, -2) for _ in range(len(dx)))
    weights = 1.0
    for a, d in enumerate(dx):
        w = np.full(grid.axes[a].size, d)
        w[0] = w[-1] = d / 2
        weights = np.multiply.outer(weights, w) if a else w
    return ResidualFields(psi[inner], [r[inner] for r in powers], [qb0[inner], qb1[inner]], weights)


def interaction_residual(coeffs: PairCoefficients, Q, h: float, grid: BoxGrid, full: bool = False):
    """L2 norm over the grid interior of (box + Q) w - F, w = e^{i Psi/h}(h^2 c2 + h^3 c3), F = q e^{i Psi/h}(b0 + h b1)."""
    rf = residual_fields(coeffs, Q, grid)
    norm = rf.norm(h)
    if not full:
        return norm
    return InteractionResidual(norm, rf.source_norm(h), h, int(np.prod([a.size for a in grid.axes])))


def pair_sources(beam_i, beam_j):
    """b0 = a0_i a0_j and b1 = a1_i a0_j/|k_i| + a0_i a1_j/|k_j| for a product of two beams."""
    def b0(X):
        fi, fj = beam_i.fields(X), beam_j.fields(X)
        return fi["a0"] * fj["a0"]

    def b1(X):
        fi, fj = beam_i.fields(X), beam_j.fields(X)
        return fi["a1"] * fj["a0"] / abs(beam_i.kappa) + fi["a0"] * fj["a1"] / abs(beam_j.kappa)

    return b0, b1
