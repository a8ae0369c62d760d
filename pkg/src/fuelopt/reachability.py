"""
Support-function queries on the attainable sets

    A_{tau,T} = { int_tau^T e^{-tA} B u(t) dt : |u| <= 1 }.

The support function in direction xi is int_tau^T |xi e^{-tA} B| dt.
Membership of a point is decided by the largest separation
<xi, x0> - h(xi) over a deterministic direction grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import qmc, norm

from .errors import InvalidArgumentError
from .lti import LtiSystem

INSIDE = "inside"
BOUNDARY = "boundary"
OUTSIDE = "outside"

DEFAULT_QUAD_STEPS = 2048


@dataclass(frozen=True)
class SupportQuery:
    sys: LtiSystem
    interval: tuple
    direction: np.ndarray
    quad_steps: int = DEFAULT_QUAD_STEPS

    def __post_init__(self):
        tau, T = (float(v) for v in self.interval)
        if not (0.0 <= tau < T) or not np.isfinite(T):
            raise InvalidArgumentError(f"need 0 <= tau < T, got [{tau}, {T}]")
        xi = np.atleast_1d(np.asarray(self.direction, dtype=float))
        if xi.shape != (self.sys.n,) or not np.any(xi):
            raise InvalidArgumentError("direction must be a nonzero n-vector")
        if int(self.quad_steps) < 2:
            raise InvalidArgumentError("quad_steps must be >= 2")
        object.__setattr__(self, "interval", (tau, T))
        object.__setattr__(self, "direction", xi)


def midpoint_kernel(sys: LtiSystem, tau: float, T: float, N: int) -> np.ndarray:
    """Values of e^{-tA}B at the N midpoints of [tau, T]; shape (N, n, m)."""
    h = (T - tau) / N
    E = sys.expm(-h)
    out = np.empty((N, sys.n, sys.m))
    # re-anchor periodically so the recurrence does not drift
    block = 256
    for start in range(0, N, block):
        cur = sys.expm(-(tau + (start + 0.5) * h)) @ sys.B
        for k in range(start, min(start + block, N)):
            out[k] = cur
            cur = E @ cur
    return out


def support_many(sys, tau, T, directions, N=DEFAULT_QUAD_STEPS, kernel=None):
    """Support values for each row of ``directions`` (composite midpoint)."""
    h = (T - tau) / N
    if kernel is None:
        kernel = midpoint_kernel(sys, tau, T, N)
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    # (dirs, N, m): xi e^{-tA} B
    S = np.einsum("dn,knm->dkm", D, kernel)
    vals = np.sqrt(np.sum(S * S, axis=2))
    # ordered sum per direction keeps results independent of batching
    return h * np.array([math.fsum(row) for row in vals])


def support(q: SupportQuery) -> float:
    tau, T = q.interval
    return float(support_many(q.sys, tau, T, q.direction[None, :], q.quad_steps)[0])


def sphere_directions(n: int, count: int) -> np.ndarray:
    """Deterministic, nearly uniform unit directions in R^n.

    Circles use equally spaced angles, the 2-sphere a Fibonacci lattice,
    and higher dimensions an unscrambled Halton sequence pushed through the
    normal quantile function. Antipodal pairs are always included.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    half = max(n, (count + 1) // 2)
    if n == 2:
        ang = np.pi * np.arange(half) / half
        D = np.column_stack([np.cos(ang), np.sin(ang)])
    elif n == 3:
        golden = np.pi * (3.0 - np.sqrt(5.0))
        i = np.arange(half)
        z = 1.0 - (i + 0.5) / half  # upper hemisphere, mirrored below
        r = np.sqrt(1.0 - z * z)
        D = np.column_stack([r * np.cos(golden * i), r * np.sin(golden * i), z])
    else:
        pts = qmc.Halton(d=n, scramble=False).random(half + 1)[1:]
        D = norm.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        D = np.vstack([np.eye(n), D])
        D /= np.linalg.norm(D, axis=1, keepdims=True)
    return np.vstack([D, -D])


@dataclass(frozen=True)
class Membership:
    status: str
    gap: float
    direction: np.ndarray

    def __str__(self):
        return self.status

    def __eq__(self, other):
        if isinstance(other, str):
            return self.status == other
        return NotImplemented

    __hash__ = None


def separation(sys, T, x0, N=DEFAULT_QUAD_STEPS, dirs=None, refine=True):
    """Largest <xi, x0> - h_T(xi) over unit xi and the maximizing direction."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = sys.n
    if dirs is None:
        dirs = 64 * n
    if dirs < 2 * n:
        raise InvalidArgumentError("dirs must be >= 2n")
    kernel = midpoint_kernel(sys, 0.0, T, N)
    D = sphere_directions(n, dirs)
    gaps = D @ x0 - support_many(sys, 0.0, T, D, N, kernel)
    best = int(np.argmax(gaps))
    xi, gap = D[best], float(gaps[best])
    if refine and n > 1:
        def neg(v):
            nv = np.linalg.norm(v)
            if nv == 0:
                return np.inf
            d = v / nv
            return -(d @ x0 - support_many(sys, 0.0, T, d[None, :], N, kernel)[0])

        res = optimize.minimize(neg, xi, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400 * n})
        if -res.fun > gap:
            gap = float(-res.fun)
            xi = res.x / np.linalg.norm(res.x)
    return gap, xi


def member(sys: LtiSystem, T: float, x0, tol=None, dirs=None, quad_steps=DEFAULT_QUAD_STEPS):
    """Classify x0 against A_T as inside, boundary or outside.

    "outside" is certified up to quadrature error; "inside" only up to the
    resolution of the direction grid (refined locally around its best node).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (sys.n,):
        raise InvalidArgumentError(f"x0 must have length {sys.n}")
    if T <= 0:
        status = INSIDE if not np.any(x0) else OUTSIDE
        return Membership(status, 0.0 if status == INSIDE else float(np.linalg.norm(x0)),
                          np.zeros(sys.n))
    if tol is None:
        tol = 1e-6 * (1.0 + float(np.linalg.norm(x0)))
    gap, xi = separation(sys, T, x0, quad_steps, dirs)
    if gap < -tol:
        status = INSIDE
    elif gap > tol:
        status = OUTSIDE
    else:
        status = BOUNDARY
    return Membership(status, gap, xi)
