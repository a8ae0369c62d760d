"""
Discretized minimum-fuel program

    minimize    sum_k dt |u_k|
    subject to  sum_k C_k u_k = -x0,   |u_k| <= 1,

where C_k = int over cell k of e^{-tA} B dt. Its dual is n-dimensional,

    D(p0) = -p0 x0 - sum_k (|p0 C_k| - dt)_+,

so every candidate covector yields a certified lower bound.

Two solvers are provided: a primal barrier method on the epigraph form
(the default) and a primal-dual hybrid gradient iteration kept as an
independent cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import optimize

from .errors import InvalidArgumentError, NumericFailure


@dataclass(frozen=True)
class ConvexResult:
    u: np.ndarray          # (N, m)
    p0: np.ndarray         # covector estimate
    primal: float
    dual: float
    iterations: int
    converged: bool
    residual: float        # |sum C_k u_k + x0|

    @property
    def gap(self):
        return self.primal - self.dual


def dual_value(cells, x0, dt, p0):
    """D(p0); a lower bound on the discrete optimum for any p0."""
    s = np.linalg.norm(np.einsum("n,knm->km", p0, cells), axis=1)
    return -float(p0 @ x0) - math.fsum(np.maximum(s - dt, 0.0))


def primal_value(u, dt):
    return dt * math.fsum(np.linalg.norm(u, axis=1))


def _whitener(cells):
    S = np.einsum("knm,kjm->nj", cells, cells)
    w, V = np.linalg.eigh(S)
    if w[0] <= 1e-300 * max(w[-1], 1e-300):
        raise NumericFailure("constraint map is rank deficient")
    return (V / np.sqrt(w)) @ V.T


def _barrier_grad(u, t):
    m = u.shape[1]
    r = np.linalg.norm(u, axis=1)
    s = (t - r) * (t + r)
    g = np.concatenate([2.0 * u, -2.0 * t[:, None]], axis=1) / s[:, None]
    g[:, m] += 1.0 / (1.0 - t)
    return g


def _barrier_terms(u, t):
    """Gradient and Hessian blocks of -log(t^2 - |u|^2) - log(1 - t)."""
    N, m = u.shape
    s = t * t - np.sum(u * u, axis=1)
    ds = np.concatenate([-2.0 * u, 2.0 * t[:, None]], axis=1)  # grad of s
    g = -ds / s[:, None]
    g[:, m] += 1.0 / (1.0 - t)
    H = np.einsum("ki,kj->kij", ds, ds) / (s * s)[:, None, None]
    d = np.full(m + 1, 2.0)
    d[m] = -2.0
    H[:, np.arange(m + 1), np.arange(m + 1)] += d[None, :] / s[:, None]
    H[:, m, m] += 1.0 / (1.0 - t) ** 2
    return g, H


def _barrier_hessian_inv(u, t):
    """Inverse Hessian blocks in closed form.

    For -log(t^2 - |u|^2) alone the inverse is z z^T - (s/2) diag(-I, 1);
    the -log(1 - t) term is a rank-one update, simplified by hand so that no
    cancellation occurs as t -> 1 or |u| -> t.
    """
    N, m = u.shape
    r = np.linalg.norm(u, axis=1)
    s = (t - r) * (t + r)
    a = (1.0 - t) ** 2
    D = 0.5 * (t * t + r * r)
    q = a / (a + D)
    Hi = np.empty((N, m + 1, m + 1))
    Hi[:, :m, :m] = np.einsum("ki,kj->kij", u, u) * ((a - 0.5 * s) / (a + D))[:, None, None]
    Hi[:, np.arange(m), np.arange(m)] += 0.5 * s[:, None]
    Hi[:, :m, m] = u * (t * q)[:, None]
    Hi[:, m, :m] = Hi[:, :m, m]
    Hi[:, m, m] = D * q
    return Hi


def feasibility_tol(cells, x0):
    """Equality residual accepted as feasible, relative to the data scale."""
    scale = float(np.sum(np.linalg.norm(cells, axis=(1, 2))))
    return 1e-10 * (1.0 + float(np.linalg.norm(x0)) + scale)


def _in_domain(u, t):
    # same rounding as _barrier_grad, so an accepted point has finite barrier terms
    r = np.linalg.norm(u, axis=1)
    return bool(np.all(t < 1.0) and np.all((t - r) * (t + r) > 0.0))


def _center(u, t, w, tau, Cw, b, budget):
    """Newton centering for the barrier problem with cost weight ``tau``.

    Infeasible-start steps with backtracking on the residual norm; from a
    feasible point the iterates stay feasible. Returns (u, t, w, iterations).
    """
    N, n, m = Cw.shape
    Ab = np.zeros((N, n, m + 1))
    Ab[:, :, :m] = Cw

    def residuals(u, t, w):
        rd = _barrier_grad(u, t)
        rd[:, m] += tau
        rd[:, :m] += np.einsum("n,knm->km", w, Cw)
        rp = np.einsum("knm,km->n", Cw, u) - b
        return rd, rp

    iters = 0
    while iters < budget:
        iters += 1
        g = _barrier_grad(u, t)
        g[:, m] += tau
        rp = np.einsum("knm,km->n", Cw, u) - b
        Hinv = _barrier_hessian_inv(u, t)
        HiAt = np.einsum("kij,knj->kin", Hinv, Ab)      # (N, m+1, n)
        S = np.einsum("kni,kij->nj", Ab, HiAt)           # (n, n)
        Hig = np.einsum("kij,kj->ki", Hinv, g)
        rhs = rp - np.einsum("kni,ki->n", Ab, Hig)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                w_new = sla.solve(S, rhs, assume_a="pos")
        except (np.linalg.LinAlgError, ValueError, sla.LinAlgWarning):
            w_new = np.linalg.lstsq(S, rhs, rcond=None)[0]
        dz = -Hig - np.einsum("kin,n->ki", HiAt, w_new)
        du, dtt = dz[:, :m], dz[:, m]
        dw = w_new - w
        rd0, rp0 = residuals(u, t, w)
        r0 = math.sqrt(float(np.sum(rd0 * rd0) + rp0 @ rp0))
        lam2 = float(-np.sum(dz * (g + np.einsum("n,kni->ki", w_new, Ab))))
        # rounding level of the residual: entries of g are of size tau
        floor = 1e-14 * (1.0 + tau) * math.sqrt(N)
        # lam2 / 2 bounds the barrier suboptimality, i.e. lam2 / (2 tau) in cost;
        # its rounding floor is near 1e-8 once tau is large
        if abs(lam2) < 1e-7 and float(np.linalg.norm(rp0)) < 1e-11 * (1 + np.linalg.norm(b)):
            break
        step = 1.0
        while step > 1e-12:
            un, tn = u + step * du, t + step * dtt
            if _in_domain(un, tn):
                rd1, rp1 = residuals(un, tn, w + step * dw)
                r1 = math.sqrt(float(np.sum(rd1 * rd1) + rp1 @ rp1))
                if r1 <= (1.0 - 0.01 * step) * r0 or r1 < floor:
                    break
            step *= 0.5
        if step <= 1e-12:
            break
        u, t, w = u + step * du, t + step * dtt, w + step * dw
        if step == 1.0:
            # whitened rows are orthonormal, so this is the exact projection
            # onto the affine constraint set; it removes rounding drift
            up = u - np.einsum("knm,n->km", Cw, np.einsum("knm,km->n", Cw, u) - b)
            if _in_domain(up, t):
                u = up
    return u, t, w, iters


def _phase_one(Cw, b, budget, stages=100):
    """Strictly feasible start by continuation in the right-hand side.

    The least-norm control for theta b is shrunk until |u| < 1, centered
    without the cost term and scaled up again; each stage raises theta as
    far as the current max |u_k| allows. Returns (u, t, theta, iterations).
    """
    N, n, m = Cw.shape
    u_ln = np.einsum("knm,n->km", Cw, b)   # sum_k Cw_k Cw_k^T = I
    M = float(np.max(np.linalg.norm(u_ln, axis=1)))
    if M < 0.5:
        u = u_ln
        return u, 0.5 * (np.linalg.norm(u, axis=1) + 1.0), 1.0, 0
    theta = 0.5 / M
    u = theta * u_ln
    t = 0.5 * (np.linalg.norm(u, axis=1) + 1.0)
    w = np.zeros(n)
    iters = 0
    for _ in range(stages):
        u, t, w, k = _center(u, t, w, 0.0, Cw, theta * b, min(8, budget - iters))
        iters += k
        r = float(np.max(np.linalg.norm(u, axis=1)))
        grow = min(1.0 / theta, 1.0 + 0.95 * (1.0 / r - 1.0))
        if grow < 1.0 + 1e-9:
            # theta has stalled below 1 with |u| pinned at the bound
            break
        u = u * grow
        theta *= grow
        rn = np.linalg.norm(u, axis=1)
        t = np.where(t > rn, t, 0.5 * (rn + 1.0))
        if theta >= 1.0 or iters >= budget:
            break
    return u, t, theta, iters


def solve_barrier(cells, x0, dt, gap_tol, max_newton=1000, tau0=1.0, growth=20.0):
    """Barrier interior-point solve of the discretized program.

    Equality constraints are whitened and the Newton systems reduce to an
    n x n Schur complement. A continuation phase finds a strictly feasible
    start, which keeps thin feasible sets (x0 near the attainable-set
    boundary) tractable. Stops once the certified gap primal - D(p0) is at
    most ``gap_tol``.
    """
    cells = np.asarray(cells, dtype=float)
    N, n, m = cells.shape
    x0 = np.asarray(x0, dtype=float)
    W = _whitener(cells)
    Cw = np.einsum("ij,kjm->kim", W, cells)  # (N, n, m)
    b = -W @ x0

    u, t, theta, iters = _phase_one(Cw, b, max_newton // 2)
    if theta < 1.0:
        # continuation stalled (x0 outside or on the boundary); the
        # infeasible-start iteration below decides
        u = np.zeros((N, m))
        t = np.full(N, 0.5)
    w = np.zeros(n)
    tau = tau0
    nu_total = 3.0 * N
    res_tol = feasibility_tol(cells, x0)
    best = None

    while True:
        u, t, w, k = _center(u, t, w, tau, Cw, b, min(60, max_newton + 1 - iters))
        iters += k
        p0 = -dt * (W.T @ w) / tau
        x0_res = float(np.linalg.norm(np.einsum("knm,km->n", cells, u) + x0))
        P = primal_value(u, dt)
        D = dual_value(cells, x0, dt, p0)
        cand = ConvexResult(u.copy(), p0, P, D, iters, False, x0_res)
        if x0_res <= res_tol:
            if best is None or cand.gap < best.gap:
                best = cand
            if cand.gap <= gap_tol:
                return ConvexResult(cand.u, p0, P, D, iters, True, x0_res)
        if iters > max_newton or nu_total * dt / tau < 1e-3 * gap_tol:
            break
        # on the central path the gap is at most nu dt / tau; do not overshoot
        # the tau that suffices, since larger values cost accuracy
        tau = min(tau * growth, max(2.0 * tau, nu_total * dt / gap_tol))
    if best is None:
        best = cand
    return best


def solve_pdhg(cells, x0, dt, gap_tol, max_iter=200000, check_every=200):
    """Primal-dual hybrid gradient iteration on the whitened program.

    Slow but simple; used as a cross-check of the barrier solver.
    """
    cells = np.asarray(cells, dtype=float)
    N, n, m = cells.shape
    x0 = np.asarray(x0, dtype=float)
    W = _whitener(cells)
    K = np.einsum("ij,kjm->kim", W, cells)
    b = -W @ x0
    # whitening makes K K^T = I, so ||K|| = 1
    sig = tau = 0.99
    u = np.zeros((N, m))
    ub = u.copy()
    y = np.zeros(n)
    best = None
    for it in range(1, max_iter + 1):
        y = y + sig * (np.einsum("knm,km->n", K, ub) - b)
        v = u - tau * np.einsum("n,knm->km", y, K)
        r = np.linalg.norm(v, axis=1)
        scale = np.where(r > 0, np.clip(r - tau * dt, 0.0, 1.0) / np.where(r > 0, r, 1), 0.0)
        un = v * scale[:, None]
        ub = 2 * un - u
        u = un
        if it % check_every == 0 or it == max_iter:
            p0 = -(W.T @ y)
            res = float(np.linalg.norm(np.einsum("knm,km->n", cells, u) + x0))
            P, D = primal_value(u, dt), dual_value(cells, x0, dt, p0)
            cand = ConvexResult(u.copy(), p0, P, D, it, False, res)
            if res <= 100 * feasibility_tol(cells, x0):
                if best is None or cand.gap < best.gap:
                    best = cand
                if cand.gap <= gap_tol:
                    return ConvexResult(u.copy(), p0, P, D, it, True, res)
    if best is None:
        best = cand
    return best


def farkas_value(cells, x0, p):
    """-p x0 - sum_k |p C_k| for unit p; positive means x0 is not reachable."""
    p = np.asarray(p, dtype=float)
    p = p / np.linalg.norm(p)
    s = np.linalg.norm(np.einsum("n,knm->km", p, cells), axis=1)
    return -float(p @ x0) - math.fsum(s)


def infeasibility_certificate(cells, x0, p_start, tol):
    """Search for a unit covector certifying that no |u| <= 1 meets the constraint.

    Starts from ``p_start`` (the diverging multiplier of a failed solve) and
    refines with Nelder-Mead. Returns ``(p, value)`` when the value exceeds
    ``tol``, else None.
    """
    cells = np.asarray(cells, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    p_start = np.asarray(p_start, dtype=float)
    if not np.all(np.isfinite(p_start)) or not np.any(p_start):
        p_start = -x0
    if not np.any(p_start):
        return None

    def neg(v):
        if not np.any(v):
            return np.inf
        return -farkas_value(cells, x0, v)

    best = p_start / np.linalg.norm(p_start)
    val = -neg(best)
    if val <= tol and x0.size > 1:
        res = optimize.minimize(neg, best, method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400 * x0.size})
        if -res.fun > val:
            best, val = res.x / np.linalg.norm(res.x), float(-res.fun)
    return (best, val) if val > tol else None


def solve_program(cells, x0, dt, gap_tol, backend="barrier"):
    if backend == "barrier":
        return solve_barrier(cells, x0, dt, gap_tol)
    if backend == "pdhg":
        return solve_pdhg(cells, x0, dt, gap_tol)
    raise InvalidArgumentError(f"unknown backend {backend!r}")
