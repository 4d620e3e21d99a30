"""Leapfrog finite differences for  u_tt - Lap u + q1 u + q2 u^2 = F + f  on flat grids.

All solves start from zero Cauchy data.  The first step uses the Taylor
start u^1 = dt^2/2 * rhs^0, which is exact to second order when u(0) = u_t(0) = 0.

Coefficients and sources may be given as scalars, callables ``f(t, *mesh)``,
arrays with the spatial shape, arrays with shape (nt+1, *spatial), or objects
with a ``slice(n)`` method returning the field at step n (or None for zero).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, GuardError, PreconditionError

CFL_LIMIT = 0.9


@dataclass
class GridSpec:
    """Uniform space-time grid on a box in 1 or 2 space dimensions.

    ``boundary`` is "periodic" or "sponge" (Dirichlet zero at the edge with a
    damping layer of width ``margin``).
    """

    lower: Sequence[float]
    upper: Sequence[float]
    n: Sequence[int]
    T: float
    cfl: float = 0.5
    boundary: str = "sponge"
    margin: float = 0.0
    sponge_strength: float = 40.0
    dt: float | None = None

    def __post_init__(self):
        self.lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        self.upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        self.n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(self.lower) == len(self.upper) == len(self.n)) or self.d not in (1, 2):
            raise ConfigError("grid must have 1 or 2 space dimensions", op="GridSpec")
        if self.boundary not in ("periodic", "sponge"):
            raise ConfigError(f"unknown boundary policy {self.boundary!r}", op="GridSpec")
        if any(u <= l for l, u in zip(self.lower, self.upper)) or any(k < 5 for k in self.n):
            raise ConfigError("degenerate grid box", op="GridSpec")
        if self.T <= 0:
            raise ConfigError("final time must be positive", op="GridSpec")
        limit = CFL_LIMIT * self.dx / math.sqrt(self.d)
        if self.dt is None:
            steps = math.ceil(self.T / (self.cfl * self.dx / math.sqrt(self.d)))
            self.dt = self.T / steps
        if self.dt > limit * (1 + 1e-12):
            raise ConfigError(f"CFL violated: dt = {self.dt:.4g} > {limit:.4g}", op="GridSpec")

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def spacing(self):
        if self.boundary == "periodic":
            return tuple((u - l) / k for l, u, k in zip(self.lower, self.upper, self.n))
        return tuple((u - l) / (k - 1) for l, u, k in zip(self.lower, self.upper, self.n))

    @property
    def dx(self) -> float:
        return min(self.spacing)

    @property
    def nt(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def axes(self):
        if self.boundary == "periodic":
            return [l + h * np.arange(k) for l, h, k in zip(self.lower, self.spacing, self.n)]
        return [np.linspace(l, u, k) for l, u, k in zip(self.lower, self.upper, self.n)]

    @property
    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def cell(self) -> float:
        return float(np.prod(self.spacing))

    def damping(self) -> np.ndarray:
        """Sponge coefficient sigma(x): quadratic ramp inside the margin, zero elsewhere."""
        sig = np.zeros(self.n)
        if self.boundary != "sponge" or self.margin <= 0:
            return sig
        for a, (ax, l, u) in enumerate(zip(self.axes, self.lower, self.upper)):
            depth = np.maximum(np.maximum(l + self.margin - ax, ax - (u - self.margin)), 0.0) / self.margin
            shape = [1] * self.d
            shape[a] = -1
            sig = np.maximum(sig, self.sponge_strength * depth.reshape(shape) ** 2)
        return sig

    def interior_mask(self) -> np.ndarray:
        """True away from the sponge margin."""
        mask = np.ones(self.n, dtype=bool)
        if self.boundary != "sponge":
            return mask
        for a, (ax, l, u) in enumerate(zip(self.axes, self.lower, self.upper)):
            inside = (ax > l + self.margin) & (ax < u - self.margin)
            shape = [1] * self.d
            shape[a] = -1
            mask &= inside.reshape(shape)
        return mask

    def refined(self, factor: int = 2) -> "GridSpec":
        if self.boundary == "periodic":
            n = [k * factor for k in self.n]
        else:
            n = [(k - 1) * factor + 1 for k in self.n]
        return GridSpec(self.lower, self.upper, n, self.T, self.cfl, self.boundary, self.margin,
                        self.sponge_strength, None if self.dt is None else self.dt / factor)


def laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = np.zeros_like(u)
    for a, h in enumerate(grid.spacing):
        if grid.boundary == "periodic":
            out += (np.roll(u, 1, a) - 2 * u + np.roll(u, -1, a)) / (h * h)
        else:
            f = np.moveaxis(u, a, 0)
            o = np.moveaxis(out, a, 0)
            o[1:-1] += (f[:-2] - 2 * f[1:-1] + f[2:]) / (h * h)
            o[0] += (-2 * f[0] + f[1]) / (h * h)
            o[-1] += (f[-2] - 2 * f[-1]) / (h * h)
    return out


# ---------------------------------------------------------------- fields

class FieldAt:
    """Uniform access to a coefficient or source at time step n."""

    def __init__(self, spec, grid: GridSpec, reverse: bool = False):
        self.spec, self.grid, self.reverse = spec, grid, reverse
        self.zero = spec is None or (np.isscalar(spec) and spec == 0)
        self.constant = None
        if self.zero:
            self.constant = 0.0
        elif np.isscalar(spec):
            self.constant = spec
        elif isinstance(spec, np.ndarray) and spec.shape == tuple(grid.n):
            self.constant = spec
        elif isinstance(spec, np.ndarray) and spec.shape != (grid.nt + 1,) + tuple(grid.n):
            raise ConfigError(f"field shape {spec.shape} does not fit the grid", op="FieldAt")
        self._mesh = None

    def __call__(self, n: int):
        if self.constant is not None:
            return self.constant
        k = self.grid.nt - n if self.reverse else n
        s = self.spec
        if isinstance(s, np.ndarray):
            return s[k]
        if hasattr(s, "slice"):
            v = s.slice(k)
            return 0.0 if v is None else v
        if self._mesh is None:
            self._mesh = self.grid.mesh
        return s(self.grid.times[k], *self._mesh)


@dataclass
class WaveSolution:
    grid: GridSpec
    u: np.ndarray  # saved slices, shape (k, *spatial)
    saved_steps: np.ndarray
    max_amplitude: float
    energy: np.ndarray
    pairings: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.u[-1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[self.saved_steps]


def _pairing_add(acc, key, weight, a, b, cell):
    acc[key] = acc.get(key, 0.0) + weight * cell * np.sum(a * b)


def _time_weight(n, nt, dt):
    return dt * (0.5 if n in (0, nt) else 1.0)


def _stepper(grid: GridSpec):
    sig = grid.damping()
    a = 0.5 * grid.dt * sig
    plus, minus = 1.0 + a, 1.0 - a
    dt2 = grid.dt**2

    def step(u, u_old, rhs):
        new = (2 * u - minus * u_old + dt2 * (laplacian(u, grid) + rhs)) / plus
        if grid.boundary == "sponge":
            for ax in range(grid.d):
                f = np.moveaxis(new, ax, 0)
                f[0] = 0
                f[-1] = 0
        return new

    return step


def _energy(u, u_old, grid):
    ut = (u - u_old) / grid.dt
    grads = np.gradient(u, *grid.spacing) if grid.d > 1 else [np.gradient(u, grid.spacing[0])]
    return 0.5 * grid.cell * float(np.sum(np.abs(ut) ** 2) + sum(np.sum(np.abs(g) ** 2) for g in grads))


def _save_plan(grid, save_every):
    if save_every is None:
        return {grid.nt}
    return set(range(0, grid.nt + 1, save_every)) | {grid.nt}


def _finish(grid, saved, steps, amp, energy, pairings):
    return WaveSolution(grid, np.array(saved), np.array(steps), amp, np.array(energy), pairings)


def solve_linear_wave(Q, source, grid: GridSpec, save_every: int | None = 1, backward: bool = False,
                      pair_with: dict | None = None, guard: float = np.inf, dtype=None) -> WaveSolution:
    """u_tt - Lap u + Q u = source with zero Cauchy data (zero final data if ``backward``).

    ``pair_with`` maps names to fields g; the returned ``pairings`` hold the
    trapezoid space-time integrals  int u g.
    """
    Qf = FieldAt(Q, grid, backward)
    Sf = FieldAt(source, grid, backward)
    pairs = {k: FieldAt(v, grid) for k, v in (pair_with or {}).items()}
    step = _stepper(grid)
    nt = grid.nt
    s0 = Sf(0)
    dtype = dtype or np.result_type(np.asarray(s0), np.asarray(Qf(0)), float)
    u_old = np.zeros(grid.n, dtype=dtype)
    u = 0.5 * grid.dt**2 * (np.zeros(grid.n, dtype=dtype) + s0)
    plan = _save_plan(grid, save_every)
    out = {0: u_old.copy(), 1: u.copy()}
    amp = float(np.max(np.abs(u)))
    energy = []
    acc = {}
    layers = [u_old, u]
    for n in range(1, nt):
        rhs = Sf(n) - Qf(n) * u
        u_new = step(u, u_old, rhs)
        u_old, u = u, u_new
        amp = max(amp, float(np.max(np.abs(u))))
        if not np.isfinite(amp) or amp > guard:
            raise GuardError(f"amplitude {amp:.3e} exceeds guard {guard}", op="solve_linear_wave")
        energy.append(_energy(u, u_old, grid))
        if backward or n + 1 in plan:
            out[n + 1] = u.copy()
        if pairs and not backward:
            for k, g in pairs.items():
                _pairing_add(acc, k, _time_weight(n + 1, nt, grid.dt), u, g(n + 1), grid.cell)
    if pairs and not backward:
        for k, g in pairs.items():
            _pairing_add(acc, k, _time_weight(1, nt, grid.dt), out[1], g(1), grid.cell)
    if backward:
        full = [out[nt - m] for m in range(nt + 1)]
        keep = sorted(plan)
        sol = _finish(grid, [full[m] for m in keep], keep, amp, energy[::-1], {})
        for k, g in pairs.items():
            acc[k] = sum(_time_weight(m, nt, grid.dt) * grid.cell * np.sum(full[m] * g(m)) for m in range(nt + 1))
        sol.pairings = acc
        return sol
    steps = sorted(k for k in out if k in plan)
    return _finish(grid, [out[k] for k in steps], steps, amp, energy, acc)


@dataclass
class CoefficientSet:
    q1: object = 0.0
    q2: object = 0.0
    F: object = 0.0


def solve_nonlinear_wave(coeffs: CoefficientSet, f, grid: GridSpec, guard: float = 10.0,
                         save_every: int | None = 1, pair_with: dict | None = None) -> WaveSolution:
    """u_tt - Lap u + q1 u + q2 u^2 = F + f, nonlinearity explicit, aborting past ``guard``."""
    q1, q2 = FieldAt(coeffs.q1, grid), FieldAt(coeffs.q2, grid)
    Ff, ff = FieldAt(coeffs.F, grid), FieldAt(f, grid)
    pairs = {k: FieldAt(v, grid) for k, v in (pair_with or {}).items()}
    step = _stepper(grid)
    nt = grid.nt
    u_old = np.zeros(grid.n)
    u = 0.5 * grid.dt**2 * (np.zeros(grid.n) + Ff(0) + ff(0))
    plan = _save_plan(grid, save_every)
    saved, steps = [], []
    for k, layer in ((0, u_old), (1, u)):
        if k in plan:
            saved.append(layer.copy())
            steps.append(k)
    acc = {}
    for k, g in pairs.items():
        _pairing_add(acc, k, _time_weight(1, nt, grid.dt), u, g(1), grid.cell)
    amp = float(np.max(np.abs(u)))
    energy = []
    for n in range(1, nt):
        rhs = Ff(n) + ff(n) - q1(n) * u - q2(n) * u * u
        u_new = step(u, u_old, rhs)
        u_old, u = u, u_new
        amp = max(amp, float(np.max(np.abs(u))))
        if not np.isfinite(amp) or amp > guard:
            raise GuardError(f"|u| reached {amp:.3e} > guard {guard}: data not small enough",
                             op="solve_nonlinear_wave")
        energy.append(_energy(u, u_old, grid))
        if n + 1 in plan:
            saved.append(u.copy())
            steps.append(n + 1)
        for k, g in pairs.items():
            _pairing_add(acc, k, _time_weight(n + 1, nt, grid.dt), u, g(n + 1), grid.cell)
    return _finish(grid, saved, steps, amp, energy, acc)


def l2_norm(u: np.ndarray, grid: GridSpec, steps=None, mask=None) -> float:
    """Trapezoid space-time L2 norm of saved slices (uniform saving assumed)."""
    u = np.asarray(u)
    if mask is not None:
        u = u[:, mask] if u.ndim > 1 + 0 else u
    if steps is None or len(steps) < 2:
        return float(np.sqrt(grid.cell * np.sum(np.abs(u) ** 2)))
    steps = np.asarray(steps)
    dts = np.diff(grid.times[steps])
    w = np.zeros(len(steps))
    w[:-1] += dts / 2
    w[1:] += dts / 2
    tot = np.sum(w * np.sum(np.abs(u.reshape(len(steps), -1)) ** 2, axis=1))
    return float(np.sqrt(grid.cell * tot))


# ---------------------------------------------------------------- linearized chain

def _subsets(m: int, k: int):
    return list(itertools.combinations(range(1, m + 1), k))


def _key(idx) -> str:
    return "".join(str(i) for i in idx)


def _chain_rhs(q2n, v, w, idx):
    """Right side for the linearization indexed by the tuple idx (length >= 2)."""
    if len(idx) == 2:
        i, j = idx
        return -2 * q2n * v[i] * v[j]
    total = 0.0
    # split idx into two nonempty parts, each unordered pair counted once
    first = idx[0]
    rest = idx[1:]
    for r in range(0, len(rest)):
        for part in itertools.combinations(rest, r):
            a = (first,) + part
            b = tuple(x for x in rest if x not in part)
            if not b:
                continue
            fa = v[a[0]] if len(a) == 1 else w[a]
            fb = v[b[0]] if len(b) == 1 else w[b]
            total = total + fa * fb
    return -2 * q2n * total


@dataclass
class ChainSolution:
    grid: GridSpec
    u0: np.ndarray  # all steps
    v: dict
    w: dict  # keyed by index tuples, saved slices
    saved_steps: np.ndarray
    pairings: dict

    def get(self, name: str) -> np.ndarray:
        idx = tuple(int(c) for c in name)
        return self.v[idx[0]] if len(idx) == 1 else self.w[idx]


def solve_linearized_chain(coeffs: CoefficientSet, sources: Sequence, grid: GridSpec, order: int | None = None,
                           save_every: int | None = 1, pair_with: dict | None = None, u0=None,
                           keep=None, product_pairings: dict | None = None) -> ChainSolution:
    """u0, v^(i), and all w^(I) for index sets I up to ``order`` (default len(sources)), stepped in lockstep.

    Stage equations: (box + q1 + 2 q2 u0) X = rhs with rhs = f^(i) for v and
    -2 q2 * (sum over two-part splits of I of the product of the parts) for w^(I).

    ``pair_with`` maps (field name, label) to a field g and accumulates int X g,
    e.g. {("123", "f0"): f0}.  ``product_pairings`` maps a label to (I, g) and
    accumulates int q2 Sigma_I g, where Sigma_I is the split-product sum
    (so the right side of the w^(I) equation is -2 q2 Sigma_I).  ``keep``
    limits the saved fields to the given names ("1", "23", ...).
    """
    m = len(sources)
    order = m if order is None else order
    if u0 is None:
        u0 = solve_nonlinear_wave(coeffs, 0.0, grid, guard=np.inf, save_every=1).u
    q1, q2 = FieldAt(coeffs.q1, grid), FieldAt(coeffs.q2, grid)
    fs = {i + 1: FieldAt(s, grid) for i, s in enumerate(sources)}
    pairs = {k: FieldAt(g, grid) for k, g in (pair_with or {}).items()}
    prods = {k: (tuple(idx), FieldAt(g, grid)) for k, (idx, g) in (product_pairings or {}).items()}
    step = _stepper(grid)
    nt, dt2 = grid.nt, grid.dt**2
    keys = [tuple(c) for k in range(2, order + 1) for c in _subsets(m, k)]
    for idx, _ in prods.values():
        if any(tuple(sorted(p)) not in keys for r in range(2, len(idx)) for p in itertools.combinations(idx, r)):
            raise PreconditionError("product pairing needs every proper sub-linearization", op="solve_linearized_chain")
    keep_v = set(fs) if keep is None else {int(k) for k in keep if len(k) == 1}
    keep_w = set(keys) if keep is None else {tuple(int(c) for c in k) for k in keep if len(k) > 1}
    v_old = {i: np.zeros(grid.n) for i in fs}
    v = {i: 0.5 * dt2 * (np.zeros(grid.n) + fs[i](0)) for i in fs}
    w_old = {k: np.zeros(grid.n) for k in keys}
    w = {k: np.zeros(grid.n) for k in keys}
    plan = _save_plan(grid, save_every)
    sv = {i: [] for i in fs}
    sw = {k: [] for k in keys}
    steps = []
    acc = {}

    def record(n):
        if n in plan:
            steps.append(n)
            for i in keep_v:
                sv[i].append(v[i].copy())
            for k in keep_w:
                sw[k].append(w[k].copy())
        tw = _time_weight(n, nt, grid.dt)
        for (name, label), g in pairs.items():
            idx = tuple(int(c) for c in name)
            X = v[idx[0]] if len(idx) == 1 else w[idx]
            _pairing_add(acc, (name, label), tw, X, g(n), grid.cell)
        for label, (idx, g) in prods.items():
            sigma = _chain_rhs(q2(n), v, w, idx) / -2.0
            _pairing_add(acc, label, tw, sigma, g(n), grid.cell)

    if 0 in plan:
        steps.append(0)
        for i in keep_v:
            sv[i].append(v_old[i].copy())
        for k in keep_w:
            sw[k].append(w_old[k].copy())
    record(1)
    for n in range(1, nt):
        pot = q1(n) + 2 * q2(n) * u0[n]
        q2n = q2(n)
        new_v = {i: step(v[i], v_old[i], fs[i](n) - pot * v[i]) for i in fs}
        new_w = {k: step(w[k], w_old[k], _chain_rhs(q2n, v, w, k) - pot * w[k]) for k in keys}
        v_old, v = v, new_v
        w_old, w = w, new_w
        record(n + 1)
    return ChainSolution(grid, u0, {i: np.array(sv[i]) for i in keep_v}, {k: np.array(sw[k]) for k in keep_w},
                         np.array(steps), acc)


# ---------------------------------------------------------------- mixed derivatives

@dataclass
class MixedDerivative:
    field: np.ndarray  # saved slices
    saved_steps: np.ndarray
    pairings: dict
    corners: int


def fd_mixed_derivative(coeffs: CoefficientSet, sources: Sequence, eps: float, order: int, grid: GridSpec,
                        guard: float = 10.0, save_every: int | None = 1, pair_with: dict | None = None,
                        base=None) -> MixedDerivative:
    """d^m u / d eps_1 ... d eps_m at 0 by the central corner stencil

        sum_{s in {+-1}^m} (prod s) u(sum s_i eps f_i) / (2 eps)^m,

    where u(f) is the nonlinear solution with source f.  Pairings are combined
    with the same weights.
    """
    if order not in (3, 4):
        raise PreconditionError("order must be 3 or 4", op="fd_mixed_derivative")
    if len(sources) < order:
        raise PreconditionError("need one source per differentiation", op="fd_mixed_derivative")
    srcs = [FieldAt(s, grid) for s in sources[:order]]
    total = None
    acc = {}
    steps = None
    for signs in itertools.product((1, -1), repeat=order):
        weight = float(np.prod(signs)) / (2 * eps) ** order

        class Combined:
            def slice(self, n, signs=signs):
                return sum(s * eps * src(n) for s, src in zip(signs, srcs))

        try:
            sol = solve_nonlinear_wave(coeffs, Combined(), grid, guard=guard, save_every=save_every,
                                       pair_with=pair_with)
        except GuardError as exc:
            raise GuardError(f"corner {signs}: {exc}; reduce eps", op="fd_mixed_derivative") from exc
        total = weight * sol.u if total is None else total + weight * sol.u
        steps = sol.saved_steps
        for k, val in sol.pairings.items():
            acc[k] = acc.get(k, 0.0) + weight * val
    return MixedDerivative(total, steps, acc, 2**order)


# ---------------------------------------------------------------- gauge

def discrete_box(phi, grid: GridSpec) -> np.ndarray:
    """(phi^{n+1} - 2 phi^n + phi^{n-1})/dt^2 - Lap phi^n on every step.

    ``phi`` is a callable phi(t, *mesh) (sampled one step beyond each end) or a
    space-time array (one-sided second differences at the ends).
    """
    nt, dt = grid.nt, grid.dt
    if callable(phi):
        mesh = grid.mesh
        vals = np.array([phi(t, *mesh) for t in dt * np.arange(-1, nt + 2)])
        tt = (vals[2:] - 2 * vals[1:-1] + vals[:-2]) / dt**2
        core = vals[1:-1]
    else:
        core = np.asarray(phi)
        tt = np.empty_like(core)
        tt[1:-1] = (core[2:] - 2 * core[1:-1] + core[:-2]) / dt**2
        tt[0] = (2 * core[0] - 5 * core[1] + 4 * core[2] - core[3]) / dt**2
        tt[-1] = (2 * core[-1] - 5 * core[-2] + 4 * core[-3] - core[-4]) / dt**2
    lap = np.array([laplacian(c, grid) for c in core])
    return tt - lap


def _space_time(field_spec, grid: GridSpec) -> np.ndarray:
    acc = FieldAt(field_spec, grid)
    return np.array([np.zeros(grid.n) + acc(n) for n in range(grid.nt + 1)])


def gauge_transform(q1t, q2t, Ft, phi, grid: GridSpec, U_mask=None, box_phi=None, tol: float = 1e-12) -> CoefficientSet:
    """(q1, q2, F) = (q1~ + 2 q2~ phi, q2~, F~ - (box phi + q1~ phi + q2~ phi^2)) as space-time arrays.

    ``box_phi`` may supply box(phi) directly (any accepted field form); the
    default is the discrete operator of the solver, under which u~ = u + phi
    holds exactly up to the start-up step.  ``U_mask`` (space-time boolean)
    marks the measurement set, where phi must vanish; phi must also vanish
    with its time derivative at t = 0.
    """
    P = _space_time(phi, grid)
    scale = max(1.0, float(np.max(np.abs(P))))
    if U_mask is not None and np.max(np.abs(P[U_mask])) > tol * scale:
        raise PreconditionError("phi does not vanish on the measurement set", op="gauge_transform")
    if np.max(np.abs(P[0])) > tol * scale or np.max(np.abs(P[1] - P[0])) > 1e-6 * scale:
        raise PreconditionError("phi must have zero Cauchy data", op="gauge_transform")
    box = discrete_box(phi if callable(phi) else P, grid) if box_phi is None else _space_time(box_phi, grid)
    Q1t, Q2t, FFt = (_space_time(x, grid) for x in (q1t, q2t, Ft))
    return CoefficientSet(Q1t + 2 * Q2t * P, Q2t, FFt - (box + Q1t * P + Q2t * P**2))


# ---------------------------------------------------------------- integral identity

@dataclass
class IdentityReport:
    left: float
    right: float
    gap: float
    relative_gap: float
    left_parts: tuple
    right_parts: tuple

    def to_dict(self) -> dict:
        return {"left": self.left, "right": self.right, "gap": self.gap, "relative_gap": self.relative_gap,
                "left_parts": list(self.left_parts), "right_parts": list(self.right_parts)}


def backward_solution(coeffs: CoefficientSet, f0, grid: GridSpec, u0=None):
    """v0 with (box + q1 + 2 q2 u0) v0 = f0 and zero data at the final time."""
    if u0 is None:
        u0 = solve_nonlinear_wave(coeffs, 0.0, grid, guard=np.inf, save_every=1).u
    pot = _space_time(coeffs.q1, grid) + 2 * _space_time(coeffs.q2, grid) * u0
    sol = solve_linear_wave(pot, f0, grid, save_every=1, backward=True)
    return sol.u, u0


def third_order_source(chain: ChainSolution, coeffs: CoefficientSet) -> np.ndarray:
    q2 = _space_time(coeffs.q2, chain.grid)[chain.saved_steps]
    v, w = chain.v, chain.w
    return q2 * (v[1] * w[(2, 3)] + v[2] * w[(1, 3)] + v[3] * w[(1, 2)])


def fourth_order_source(chain: ChainSolution, coeffs: CoefficientSet) -> np.ndarray:
    q2 = _space_time(coeffs.q2, chain.grid)[chain.saved_steps]
    v, w = chain.v, chain.w
    pairs = w[(1, 4)] * w[(2, 3)] + w[(2, 4)] * w[(1, 3)] + w[(3, 4)] * w[(1, 2)]
    singles = v[1] * w[(2, 3, 4)] + v[2] * w[(1, 3, 4)] + v[3] * w[(1, 2, 4)] + v[4] * w[(1, 2, 3)]
    return q2 * (pairs + singles)


def space_time_pairing(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """Trapezoid-in-time inner product of two full space-time arrays."""
    w = np.full(a.shape[0], grid.dt)
    w[0] = w[-1] = grid.dt / 2
    return float(grid.cell * np.sum(w * np.sum((a * b).reshape(a.shape[0], -1), axis=1)))


def verify_integral_identity(pair: tuple, sources: Sequence, f0, grid: GridSpec, eps: float = 1e-2,
                             order: int = 3, guard: float = 10.0) -> IdentityReport:
    """Left: (d^m (S - S~) f, f0) by corner differences.  Right: the chain expression

        2 (q2~ Sigma~, v0~) - 2 (q2 Sigma, v0)

    with Sigma the third (or fourth) order product sum and v0 a backward solution.
    """
    coeffs, coeffs_t = pair
    idx = tuple(range(1, order + 1))
    left_parts, right_parts = [], []
    for c in (coeffs, coeffs_t):
        md = fd_mixed_derivative(c, sources, eps, order, grid, guard=guard, save_every=None,
                                 pair_with={"f0": f0})
        left_parts.append(float(md.pairings["f0"]))
        v0, u0 = backward_solution(c, f0, grid)
        chain = solve_linearized_chain(c, sources[:order], grid, order=order - 1, save_every=None, u0=u0,
                                       keep=(), product_pairings={"sigma": (idx, v0)})
        right_parts.append(2 * float(chain.pairings["sigma"]))
    left = left_parts[0] - left_parts[1]
    right = right_parts[1] - right_parts[0]
    scale = max(abs(left), abs(right), 1e-300)
    return IdentityReport(left, right, abs(left - right), abs(left - right) / scale, tuple(left_parts),
                          (-right_parts[0], -right_parts[1]))


# ---------------------------------------------------------------- beam sources

def smooth_step(x, a: float, b: float):
    """0 for x <= a, 1 for x >= b, smooth in between."""
    t = np.clip((np.asarray(x, dtype=float) - a) / (b - a), 0.0, 1.0)
    fa = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    fb = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return fa / (fa + fb)


class SlicedSource:
    """Sparse-in-time source: slices stored only for steps where it is nonzero."""

    def __init__(self, slices: dict):
        self.slices = slices

    def slice(self, n):
        return self.slices.get(n)

    @property
    def steps(self):
        return sorted(self.slices)


def _beam_slice(beam, t, mesh, s0, eps, reverse):
    X = np.stack([np.full(mesh[0].size, t)] + [m.ravel() for m in mesh], axis=-1)
    f = beam.fields(X)
    vhat = np.exp(1j * f["psi"] / beam.h) * (f["a0"] + beam.h / abs(beam.kappa) * f["a1"])
    s = f["s"]
    down = smooth_step(s, s0 - eps, s0)      # eta_-: 0 before s0 - eps, 1 after s0
    up = 1.0 - smooth_step(s, s0, s0 + eps)  # eta_+: 1 before s0, 0 after s0 + eps
    inner, outer = (up, down) if reverse else (down, up)
    shape = mesh[0].shape
    return (inner * vhat).reshape(shape), outer.reshape(shape), vhat.reshape(shape), s.reshape(shape)


def beam_source(beam, Q, grid: GridSpec, eps: float = 0.1, s0: float = 0.0, reverse: bool = False,
                support_tol: float = 1e-8) -> SlicedSource:
    """f = eta_+ (box + Q)(eta_- v) with the discrete box of the solver (roles swapped if ``reverse``).

    eta_- rises from 0 to 1 over s in [s0 - eps, s0] and eta_+ falls from 1 to 0
    over [s0, s0 + eps], with s the beam's geodesic parameter.
    """
    mesh = grid.mesh
    times = grid.times
    Qf = FieldAt(Q, grid)
    coarse = [m[tuple(slice(None, None, 4) for _ in range(grid.d))] for m in mesh]
    active = []
    for n, t in enumerate(times):
        s = _beam_slice(beam, t, coarse, s0, eps, reverse)[3]
        if s.max() >= s0 - eps - 2 * grid.dt and s.min() <= s0 + eps + 2 * grid.dt:
            active.append(n)
    if not active:
        raise ConfigError("the beam source window does not meet the grid", op="beam_source")
    lo, hi = max(active[0] - 1, 0), min(active[-1] + 1, grid.nt)
    cache = {}

    def g(n):
        if n not in cache:
            cache[n] = _beam_slice(beam, times[n], mesh, s0, eps, reverse) if 0 <= n <= grid.nt else None
        return cache[n]

    slices = {}
    interior = grid.interior_mask()
    for n in range(lo, hi + 1):
        cur = g(n)
        prev = g(n - 1) if n > 0 else None
        nxt = g(n + 1) if n < grid.nt else None
        gp = prev[0] if prev is not None else _beam_slice(beam, times[n] - grid.dt, mesh, s0, eps, reverse)[0]
        gn = nxt[0] if nxt is not None else _beam_slice(beam, times[n] + grid.dt, mesh, s0, eps, reverse)[0]
        Lg = (gn - 2 * cur[0] + gp) / grid.dt**2 - laplacian(cur[0], grid) + Qf(n) * cur[0]
        fn = cur[1] * Lg
        big = float(np.max(np.abs(fn)))
        if big > 0 and float(np.max(np.abs(fn[~interior]))) > support_tol * big:
            raise ConfigError("beam source reaches the absorbing margin", op="beam_source")
        slices[n] = fn
        for k in [k for k in cache if k < n - 1]:
            del cache[k]
    return SlicedSource(slices)


@dataclass
class BeamTracking:
    relative_error: float
    error_norm: float
    beam_norm: float


def beam_tracking_error(beam, Q, grid: GridSpec, eps: float = 0.1, s0: float = 0.0, stride: int = 4,
                        reverse: bool = False) -> BeamTracking:
    """||v_f - eta v|| / ||v|| over the slices past the source window (before it if ``reverse``)."""
    src = beam_source(beam, Q, grid, eps, s0, reverse)
    sol = solve_linear_wave(Q, src, grid, save_every=1, backward=reverse, dtype=complex)
    mesh = grid.mesh
    interior = grid.interior_mask()
    err = ref = 0.0
    for k, n in enumerate(sol.saved_steps):
        if n % stride:
            continue
        inner, outer, vhat, s = _beam_slice(beam, grid.times[n], mesh, s0, eps, reverse)
        window = (s < s0 - eps) if reverse else (s > s0 + eps)
        sel = window & interior
        if not sel.any():
            continue
        err += float(np.sum(np.abs(sol.u[k][sel] - inner[sel]) ** 2))
        ref += float(np.sum(np.abs(vhat[sel]) ** 2))
    if ref == 0:
        raise ConfigError("no grid slices after the source window", op="beam_tracking_error")
    return BeamTracking(math.sqrt(err / ref), math.sqrt(err * grid.cell * grid.dt * stride),
                        math.sqrt(ref * grid.cell * grid.dt * stride))


# ---------------------------------------------------------------- small-data checks

@dataclass
class LipschitzReport:
    ratios: list
    amplitudes: list
    stable: bool


def lipschitz_check(coeffs: CoefficientSet, f, grid: GridSpec, halvings: int = 3, tol: float = 0.05,
                    guard: float = 10.0) -> LipschitzReport:
    """||S(f) - S(0)|| / ||f|| for f, f/2, f/4, ...; stable if consecutive ratios agree to ``tol``."""
    base = solve_nonlinear_wave(coeffs, 0.0, grid, guard=guard, save_every=1)
    fnorm0 = l2_norm(_space_time(f, grid), grid, np.arange(grid.nt + 1))
    ratios, amps = [], []
    for k in range(halvings + 1):
        scale = 0.5**k
        fk = FieldAt(f, grid)

        class Scaled:
            def slice(self, n, fk=fk, scale=scale):
                return scale * fk(n)

        sol = solve_nonlinear_wave(coeffs, Scaled(), grid, guard=guard, save_every=1)
        diff = l2_norm(sol.u - base.u, grid, sol.saved_steps)
        ratios.append(diff / (scale * fnorm0))
        amps.append(scale)
    rel = [abs(ratios[i + 1] / ratios[i] - 1) for i in range(len(ratios) - 1)]
    return LipschitzReport(ratios, amps, bool(max(rel) <= tol))


@dataclass
class ConvergenceReport:
    n: list
    errors: list
    order: float


def manufactured_convergence(nonlinear: bool = False, ns=(20, 40, 80), T: float = 1.0,
                             cfl: float = 0.5) -> ConvergenceReport:
    """Max-norm error at time T against u = t^3 sin(pi x) sin(pi y) on the periodic box [0,2]^2.

    The source is computed from u so that u solves the problem exactly; the
    potential (linear case) or q1, q2 (nonlinear case) vary in space.
    """
    pi = math.pi

    def exact(t, x, y):
        return t**3 * np.sin(pi * x) * np.sin(pi * y)

    def box_exact(t, x, y):
        return (6 * t + 2 * pi**2 * t**3) * np.sin(pi * x) * np.sin(pi * y)

    Q = lambda t, x, y: 1 + 0.5 * np.cos(pi * x)
    q2 = lambda t, x, y: 0.8 + 0.2 * np.sin(pi * y)
    errs = []
    for n in ns:
        grid = GridSpec([0, 0], [2, 2], [n, n], T=T, cfl=cfl, boundary="periodic")
        if nonlinear:
            f = lambda t, x, y: box_exact(t, x, y) + Q(t, x, y) * exact(t, x, y) + q2(t, x, y) * exact(t, x, y) ** 2
            u = solve_nonlinear_wave(CoefficientSet(Q, q2, 0.0), f, grid, save_every=None).final
        else:
            f = lambda t, x, y: box_exact(t, x, y) + Q(t, x, y) * exact(t, x, y)
            u = solve_linear_wave(Q, f, grid, save_every=None).final
        errs.append(float(np.max(np.abs(u - exact(grid.times[-1], *grid.mesh)))))
    order = float(-np.polyfit(np.log(np.asarray(ns, float)), np.log(errs), 1)[0])
    return ConvergenceReport(list(ns), errs, order)


# ---------------------------------------------------------------- export

def export_field(path, u: np.ndarray, grid: GridSpec, steps=None) -> tuple[str, str]:
    """Write ``u`` (time-major, row-major float64) to PATH.bin with a text header PATH.hdr."""
    u = np.ascontiguousarray(np.asarray(u, dtype=np.float64))
    steps = np.arange(u.shape[0]) if steps is None else np.asarray(steps)
    t = grid.times[steps]
    header = [f"shape {' '.join(str(s) for s in u.shape)}",
              "order row-major time-major float64 little-endian",
              f"lower {' '.join(repr(float(x)) for x in grid.lower)}",
              f"spacing {' '.join(repr(float(x)) for x in grid.spacing)}",
              f"time {float(t[0])!r} {float(t[-1])!r} {u.shape[0]}"]
    bin_path, hdr_path = f"{path}.bin", f"{path}.hdr"
    u.astype("<f8").tofile(bin_path)
    with open(hdr_path, "w") as fh:
        fh.write("\n".join(header) + "\n")
    return bin_path, hdr_path
