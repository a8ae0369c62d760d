"""
Extremal controls generated by an adjoint covector p(t) = p0 e^{-tA}.

Normal extremals follow the bang-off law

    u = (pB)^T / |pB|   if |pB| > 1,      u = 0   if |pB| <= 1,

abnormal ones always take u = (pB)^T / |pB|. Trajectories are propagated
exactly for piecewise-constant controls through the exponential of the
augmented matrix [[A, B], [0, 0]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import optimize

from .errors import InvalidArgumentError
from .lti import LtiSystem

NORMAL = "normal"
ABNORMAL = "abnormal"

DEFAULT_GRID = 4096


@dataclass(frozen=True)
class Covector:
    """Adjoint state at t = 0 and the extremal type it generates."""

    p0: np.ndarray
    mode: str = NORMAL

    def __post_init__(self):
        p0 = np.atleast_1d(np.asarray(self.p0, dtype=float))
        if p0.ndim != 1:
            raise InvalidArgumentError("p0 must be a row vector")
        if self.mode not in (NORMAL, ABNORMAL):
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.mode == ABNORMAL and not np.any(p0):
            raise InvalidArgumentError("abnormal covector must be nonzero")
        object.__setattr__(self, "p0", p0)

    def at(self, sys: LtiSystem, t: float) -> np.ndarray:
        """p(t) = p0 e^{-tA}."""
        return self.p0 @ sys.expm(-t)


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant control: ``values[j]`` on [breaks[j], breaks[j+1]).

    ``kind`` is "grid" for uniform sampling and "switching" when the breaks
    include refined switch times.
    """

    breaks: np.ndarray
    values: np.ndarray
    kind: str = "grid"

    def __post_init__(self):
        br = np.asarray(self.breaks, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if br.ndim != 1 or br.size < 2 or vals.shape[0] != br.size - 1:
            raise InvalidArgumentError("need len(values) == len(breaks) - 1")
        if np.any(np.diff(br) <= 0):
            raise InvalidArgumentError("breaks must be strictly increasing")
        norms = np.linalg.norm(vals, axis=1)
        if np.any(norms > 1.0 + 1e-12):
            raise InvalidArgumentError(f"|u| exceeds 1 (max {norms.max():.3g})")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, T, m, N=1):
        return cls(np.linspace(0.0, T, N + 1), np.zeros((N, m)))

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def horizon(self):
        return float(self.breaks[-1] - self.breaks[0])

    @property
    def durations(self):
        return np.diff(self.breaks)

    def midpoints(self):
        return 0.5 * (self.breaks[:-1] + self.breaks[1:])

    def sample(self, t):
        """Right-continuous evaluation; the final break maps to the last piece."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return self.values[idx]

    def magnitudes(self):
        return np.linalg.norm(self.values, axis=1)

    def switch_times(self, tol=1e-12):
        """Breaks where the control value changes."""
        jumps = np.linalg.norm(np.diff(self.values, axis=0), axis=1) > tol
        return self.breaks[1:-1][jumps]

    def concat(self, other: "ControlSignal") -> "ControlSignal":
        shifted = other.breaks - other.breaks[0] + self.breaks[-1]
        return ControlSignal(np.concatenate([self.breaks, shifted[1:]]),
                             np.vstack([self.values, other.values]), "switching")

    def truncate(self, T_end):
        """Restriction to [breaks[0], T_end]."""
        if T_end >= self.breaks[-1]:
            return self
        k = int(np.searchsorted(self.breaks, T_end, side="left"))
        br = np.append(self.breaks[:k], T_end)
        if br[-1] - br[-2] <= 0:
            br = br[:-1]
            br[-1] = T_end
        return ControlSignal(br, self.values[: len(br) - 1], self.kind)

    def extend(self, T_end):
        """Zero extension to [breaks[0], T_end]."""
        if T_end <= self.breaks[-1]:
            return self
        return ControlSignal(np.append(self.breaks, T_end),
                             np.vstack([self.values, np.zeros((1, self.m))]), self.kind)


def cost_l1(u: ControlSignal) -> float:
    """Fuel int |u(t)| dt (exact for piecewise-constant signals)."""
    return math.fsum(u.magnitudes() * u.durations)


def l1_distance(u: ControlSignal, v: ControlSignal) -> float:
    """int |u - v| dt over the common horizon."""
    lo = max(u.breaks[0], v.breaks[0])
    hi = min(u.breaks[-1], v.breaks[-1])
    br = np.union1d(u.breaks, v.breaks)
    br = br[(br >= lo) & (br <= hi)]
    mids = 0.5 * (br[:-1] + br[1:])
    diff = np.linalg.norm(u.sample(mids) - v.sample(mids), axis=1)
    return math.fsum(diff * np.diff(br))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    control: ControlSignal | None = field(default=None, repr=False)

    @property
    def initial(self):
        return self.states[0]

    @property
    def terminal(self):
        return self.states[-1]


def switching_vector(sys: LtiSystem, covector, t) -> np.ndarray:
    """p(t)B = p0 e^{-tA} B; a row m-vector, or (len(t), m) for array t."""
    p0 = covector.p0 if isinstance(covector, Covector) else np.asarray(covector, float)
    if np.ndim(t) == 0:
        return p0 @ sys.expm(-float(t)) @ sys.B
    return np.array([p0 @ sys.expm(-float(s)) @ sys.B for s in np.asarray(t)])


def _law(s, mode):
    """Feedback law applied row-wise to switching values s (k, m)."""
    r = np.linalg.norm(s, axis=1)
    u = np.zeros_like(s)
    on = r > 1.0 if mode == NORMAL else r > 0.0
    u[on] = s[on] / r[on, None]
    return u


class KernelGrid:
    """Cached values of G(t) = e^{-tA}B on a uniform grid of [0, T].

    Holds node values, midpoint values and the exact cell integrals
    int_{t_k}^{t_{k+1}} G(t) dt; none of these depend on the covector, so a
    shooting iteration reuses them.
    """

    def __init__(self, sys: LtiSystem, T: float, N: int = DEFAULT_GRID):
        if not (T > 0 and np.isfinite(T)):
            raise InvalidArgumentError("horizon must be positive and finite")
        self.sys, self.T, self.N = sys, float(T), int(N)
        self.h = self.T / self.N
        self.grid = np.linspace(0.0, self.T, self.N + 1)
        n, m = sys.n, sys.m
        E = sys.expm(-self.h)
        Eh = sys.expm(-0.5 * self.h)
        _, cell0 = sys.backward_cell(self.h)
        nodes = np.empty((self.N + 1, n, m))
        cells = np.empty((self.N, n, m))
        block = 256
        for start in range(0, self.N + 1, block):
            R = sys.expm(-self.grid[start])
            cur = R @ sys.B
            ci = R @ cell0
            for k in range(start, min(start + block, self.N + 1)):
                nodes[k] = cur
                if k < self.N:
                    cells[k] = ci
                cur = E @ cur
                ci = E @ ci
        self.nodes = nodes
        self.cells = cells
        self.mids = np.einsum("ij,kjm->kim", Eh, nodes[:-1])

    def G(self, t):
        return self.sys.expm(-float(t)) @ self.sys.B

    def piece_integral(self, a, b):
        """int_a^b G(t) dt for a sub-interval of one cell."""
        _, cell = _backward_cell(self.sys, b - a)
        return self.sys.expm(-float(a)) @ cell


def _backward_cell(sys, h):
    n, m = sys.n, sys.m
    M = np.zeros((n + m, n + m))
    M[:n, :n] = -sys.A
    M[:n, n:] = sys.B
    E = sla.expm(h * M)
    return E[:n, :n], E[:n, n:]


def _phi(mode, m):
    """Scalar function whose sign changes mark switches."""
    if mode == NORMAL:
        return lambda s: np.linalg.norm(s, axis=-1) - 1.0
    if m == 1:
        return lambda s: s[..., 0]
    return None


def _brent(g, a, b):
    """Root of g in [a, b], or None when the end values share a sign.

    Node values come from a recurrence; with a large covector they can
    disagree in sign with direct evaluation right at a bracket end.
    """
    ga, gb = g(a), g(b)
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    if ga * gb > 0:
        return None
    return optimize.brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _switch_roots(kg: KernelGrid, p0, mode):
    """Switch times inside cells, as a dict cell -> sorted roots.

    Sign changes of the switching test between nodes are bracketed directly.
    For scalar control a normal extremal may also jump from +1 to -1 within
    one cell with |pB| > 1 at both nodes; the zero of pB then splits the
    cell into two brackets.
    """
    phi = _phi(mode, kg.sys.m)
    if phi is None:
        return {}
    B = kg.sys.B
    s_nodes = np.einsum("n,knm->km", p0, kg.nodes)
    f = phi(s_nodes)
    g = lambda t: float(phi((p0 @ kg.sys.expm(-t) @ B)[None, :])[0])
    out = {}
    for k in np.nonzero(f[:-1] * f[1:] < 0.0)[0]:
        r = _brent(g, kg.grid[k], kg.grid[k + 1])
        if r is not None:
            out[int(k)] = [r]
    if mode == NORMAL and kg.sys.m == 1:
        s = s_nodes[:, 0]
        flip = np.nonzero((f[:-1] > 0) & (f[1:] > 0) & (s[:-1] * s[1:] < 0))[0]
        sg = lambda t: float(p0 @ kg.sys.expm(-t) @ B[:, 0])
        for k in flip:
            a, b = kg.grid[k], kg.grid[k + 1]
            z = _brent(sg, a, b)
            if z is None:
                continue
            r = [_brent(g, a, z), _brent(g, z, b)]
            if None not in r:
                out[int(k)] = r
    return out


def refined_extremal(kg: KernelGrid, p0, mode=NORMAL):
    """Extremal control on kg's grid with switch times inserted exactly.

    Returns ``(control, pulled_back)`` where ``pulled_back`` is
    int_0^T e^{-tA} B u(t) dt computed piece by piece.
    """
    p0 = np.asarray(p0, dtype=float)
    s_mid = np.einsum("n,knm->km", p0, kg.mids)
    u_cell = _law(s_mid, mode)
    roots = _switch_roots(kg, p0, mode)
    total = np.einsum("knm,km->n", kg.cells, u_cell)
    if not roots:
        return ControlSignal(kg.grid, u_cell, "grid"), total

    B = kg.sys.B
    cells = sorted(roots)
    breaks = [kg.grid[: cells[0] + 1]]
    values = [u_cell[: cells[0]]]
    for j, k in enumerate(cells):
        # replace the cell's midpoint contribution by exact pieces
        total = total - kg.cells[k] @ u_cell[k]
        pts = [kg.grid[k]] + roots[k] + [kg.grid[k + 1]]
        for a, b in zip(pts[:-1], pts[1:]):
            if b <= a:
                continue
            s = (p0 @ kg.sys.expm(-0.5 * (a + b)) @ B)[None, :]
            val = _law(s, mode)[0]
            total = total + kg.piece_integral(a, b) @ val
            breaks.append([b])
            values.append(val[None, :])
        nxt = cells[j + 1] if j + 1 < len(cells) else kg.N
        breaks.append(kg.grid[k + 2: nxt + 1])
        values.append(u_cell[k + 1: nxt])
    br = np.concatenate(breaks)
    vals = np.vstack([v for v in values if len(v)])
    return ControlSignal(br, vals, "switching"), total


def extremal_control(sys: LtiSystem, covector: Covector, grid, refine=False) -> ControlSignal:
    """Sample the extremal feedback law at the midpoints of ``grid``.

    Ties |pB| = 1 are resolved to u = 0. With ``refine`` the switch times
    of a uniform grid are located to machine precision and inserted as
    breaks.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing")
    if covector.mode == ABNORMAL and not np.any(covector.p0):
        raise InvalidArgumentError("abnormal covector must be nonzero")
    if refine:
        if grid[0] != 0.0:
            raise InvalidArgumentError("refinement needs a grid starting at 0")
        kg = KernelGrid(sys, grid[-1], len(grid) - 1)
        return refined_extremal(kg, covector.p0, covector.mode)[0]
    mids = 0.5 * (grid[:-1] + grid[1:])
    s = switching_vector(sys, covector, mids)
    return ControlSignal(grid, _law(s, covector.mode), "grid")


def is_singular_arc(sys: LtiSystem, covector: Covector, grid, tol=1e-12) -> bool:
    """True when |p(t)B| is constant on the grid (singular case |pB| == 1)."""
    grid = np.asarray(grid, dtype=float)
    if len(grid) > 513:
        grid = np.linspace(grid[0], grid[-1], 513)
    r = np.linalg.norm(switching_vector(sys, covector, grid), axis=1)
    return bool(np.var(r) < tol and abs(r.mean() - 1.0) < 1e-6)


def integrate(sys: LtiSystem, x_anchor, anchor: str, u: ControlSignal) -> Trajectory:
    """Exact propagation of x' = Ax + Bu for a piecewise-constant control.

    ``anchor="initial"`` fixes x at the first break and integrates forward;
    ``anchor="terminal"`` fixes x at the last break and integrates backward.
    """
    x = np.atleast_1d(np.asarray(x_anchor, dtype=float))
    if x.shape != (sys.n,):
        raise InvalidArgumentError(f"anchor state must have length {sys.n}")
    if u.m != sys.m:
        raise InvalidArgumentError(f"control has {u.m} channels, system has {sys.m}")
    h = u.durations
    K = len(h)
    X = np.empty((K + 1, sys.n))
    if anchor == "initial":
        X[0] = x
        for j in range(K):
            Phi, Gam = sys.step_maps(h[j])
            X[j + 1] = Phi @ X[j] + Gam @ u.values[j]
    elif anchor == "terminal":
        X[K] = x
        for j in range(K - 1, -1, -1):
            Phi, Gam = sys.step_maps(-h[j])
            X[j] = Phi @ X[j + 1] + Gam @ u.values[j]
    else:
        raise InvalidArgumentError("anchor must be 'initial' or 'terminal'")
    return Trajectory(u.breaks.copy(), X, u)


@dataclass(frozen=True)
class Diagnostics:
    """PMP residuals of a candidate (x0, u, p0)."""

    maximality_gap: float
    terminal_miss: float
    transversality: float | None = None
    free_time_excess: float | None = None
    singular_arc: bool = False

    def to_dict(self):
        return {
            "maximality_gap": self.maximality_gap,
            "terminal_miss": self.terminal_miss,
            "transversality": self.transversality,
            "free_time_excess": self.free_time_excess,
            "singular_arc": self.singular_arc,
        }


def maximality_gaps(sys, covector: Covector, u: ControlSignal, times=None):
    """max_v h_v - h_{u(t)} at the given times (piece midpoints by default).

    The pAx term is common to both sides and cancels.
    """
    if times is None:
        times = u.midpoints()
    kg_s = switching_vector(sys, covector, times) if len(times) < 64 else _fast_switching(
        sys, covector.p0, times)
    uv = u.sample(times)
    r = np.linalg.norm(kg_s, axis=1)
    pbu = np.sum(kg_s * uv, axis=1)
    if covector.mode == NORMAL:
        return np.maximum(r - 1.0, 0.0) - (pbu - np.linalg.norm(uv, axis=1))
    return r - pbu


def _fast_switching(sys, p0, times):
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), sys.m))
    # group into runs on a common step to reuse one propagator
    prev_t, prev_row = None, None
    for i, t in enumerate(times):
        if prev_t is not None and 0.0 < t - prev_t < 1.0:
            row = prev_row @ sys.expm(-(t - prev_t))
        else:
            row = p0 @ sys.expm(-t)
        out[i] = row @ sys.B
        prev_t, prev_row = t, row
    return out


def pmp_residuals(sys: LtiSystem, x0, u: ControlSignal, covector: Covector | None,
                  free_time=False, tau_max=None) -> Diagnostics:
    """Maximality gap, terminal miss and (optionally) free-time conditions.

    The free-time conditions are | |p(T)B| - 1 | and
    max over tau in [0, tau_max] of (|p(T) e^{-tau A} B| - 1)_+.
    """
    traj = integrate(sys, x0, "initial", u)
    miss = float(np.linalg.norm(traj.terminal))
    if covector is None:
        return Diagnostics(float("nan"), miss)
    gaps = maximality_gaps(sys, covector, u)
    singular = covector.mode == NORMAL and is_singular_arc(sys, covector, u.breaks)
    trans = excess = None
    if free_time:
        T = u.breaks[-1]
        pT = covector.at(sys, T)
        trans = abs(float(np.linalg.norm(pT @ sys.B)) - 1.0)
        if tau_max is None:
            tau_max = 10.0
        excess = free_time_excess(sys, pT, tau_max)
    return Diagnostics(float(np.max(gaps)) if gaps.size else 0.0, miss, trans, excess, singular)


def free_time_excess(sys, pT, tau_max, samples=2001):
    """max over [0, tau_max] of (|pT e^{-tau A} B| - 1)_+ with local refinement."""
    taus = np.linspace(0.0, tau_max, samples)
    vals = np.linalg.norm(_fast_switching(sys, np.asarray(pT, float), taus), axis=1)
    k = int(np.argmax(vals))
    best = vals[k]
    lo, hi = taus[max(k - 1, 0)], taus[min(k + 1, samples - 1)]
    if hi > lo:
        f = lambda s: -float(np.linalg.norm(pT @ sys.expm(-s) @ sys.B))
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        best = max(best, -res.fun)
    return max(float(best) - 1.0, 0.0)
