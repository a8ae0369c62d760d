"""
Minimum-fuel solves: fixed horizon, minimum time, and infinite horizon.

A fixed-horizon solve runs the discretized convex program to a certified
duality gap, reads the covector off the equality multipliers and then
polishes it by shooting on the continuous-time extremal, with switch times
located exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .convex import feasibility_tol, infeasibility_certificate, solve_program
from .errors import InvalidArgumentError, NumericFailure, UnreachableError
from .extremal import (ABNORMAL, NORMAL, ControlSignal, Covector, Diagnostics, KernelGrid,
                       cost_l1, integrate, is_singular_arc, pmp_residuals,
                       refined_extremal)
from .lti import LtiSystem, hyperbolic_split, hyperbolic_tolerance, invariant_subspace, \
    projector_along
from .reachability import OUTSIDE, member

INFEASIBLE = "infeasible"
DEFAULT_N = 4096


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a solve.

    ``cost`` is NaN when ``mode == "infeasible"``. ``discrete_cost`` and
    ``duality_gap`` describe the discretized program; ``cost`` is the value of
    the polished continuous-time control when polishing succeeded.
    """

    cost: float
    control: ControlSignal | None
    covector: Covector | None
    mode: str
    horizon_used: float
    attained: bool | None = None
    residuals: Diagnostics | None = None
    discrete_cost: float | None = None
    duality_gap: float | None = None
    polish_skipped: bool = False
    singular_arc: bool = False
    x0: np.ndarray | None = field(default=None, repr=False)
    N: int | None = None
    notes: tuple = ()

    @property
    def feasible(self):
        return self.mode != INFEASIBLE

    def to_dict(self):
        d = {
            "cost": None if not self.feasible else self.cost,
            "mode": self.mode,
            "horizon_used": self.horizon_used,
            "attained": self.attained,
            "discrete_cost": self.discrete_cost,
            "duality_gap": self.duality_gap,
            "polish_skipped": self.polish_skipped,
            "singular_arc": self.singular_arc,
            "N": self.N,
            "x0": None if self.x0 is None else self.x0.tolist(),
            "covector": None if self.covector is None else {
                "p0": self.covector.p0.tolist(), "mode": self.covector.mode},
            "residuals": None if self.residuals is None else self.residuals.to_dict(),
            "notes": list(self.notes),
        }
        if self.control is not None:
            sw = self.control.switch_times()
            d["control"] = {
                "kind": self.control.kind,
                "switch_times": sw.tolist(),
                # constant runs, not grid cells
                "pieces": int(sw.size + 1),
            }
        return d


def _check_x0(sys, x0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (sys.n,):
        raise InvalidArgumentError(f"x0 must have length {sys.n}, got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise InvalidArgumentError("x0 has non-finite entries")
    return x0


def _check_T(T):
    T = float(T)
    if not (T > 0 and np.isfinite(T)):
        raise InvalidArgumentError(f"horizon must be positive and finite, got {T}")
    return T


def _zero_report(sys, T, x0, N, mode=NORMAL, attained=None):
    u = ControlSignal.zeros(max(T, 1e-300) if T > 0 else 1.0, sys.m, 1)
    return SolveReport(0.0, u, Covector(np.zeros(sys.n)), mode, float(T), attained,
                       Diagnostics(0.0, 0.0), 0.0, 0.0, x0=x0, N=N)


def _infeasible(T, x0, N, attained=None, note="x0 lies outside the attainable set"):
    return SolveReport(float("nan"), None, None, INFEASIBLE, float(T), attained,
                       x0=x0, N=N, notes=(note,))


def newton_shoot(F, z0, tol, max_iter=40, fd_rel=1e-7, jac=None):
    """Damped Gauss-Newton with a forward-difference Jacobian.

    Returns ``(z, |F(z)|, converged, cond)``; steps come from least squares
    so rank-deficient Jacobians (non-unique covectors) still make progress.
    """
    z = np.asarray(z0, dtype=float).copy()
    r = F(z)
    nr = float(np.linalg.norm(r))
    cond = 1.0
    for _ in range(max_iter):
        if nr <= tol:
            return z, nr, True, cond
        if jac is not None:
            J = jac(z, r)
        else:
            J = np.empty((r.size, z.size))
            for j in range(z.size):
                h = fd_rel * max(1.0, abs(z[j]))
                zp = z.copy()
                zp[j] += h
                J[:, j] = (F(zp) - r) / h
        if not np.all(np.isfinite(J)):
            break
        sv = np.linalg.svd(J, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        dz = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
        step = 1.0
        improved = False
        while step > 1e-6:
            zn = z + step * dz
            rn = F(zn)
            nrn = float(np.linalg.norm(rn))
            if np.isfinite(nrn) and nrn < (1 - 1e-4 * step) * nr:
                z, r, nr = zn, rn, nrn
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return z, nr, nr <= tol, cond


def _polish_normal(sys, kg, x0, p0, tol):
    """Shooting on p0 so that x0 + int_0^T G(t) u_{p0}(t) dt = 0."""
    F = lambda p: x0 + refined_extremal(kg, p, NORMAL)[1]
    p, res, ok, cond = newton_shoot(F, p0, 1e-5 * tol)
    return p, res <= tol, cond


def solve_finite(sys: LtiSystem, T, x0, N=DEFAULT_N, polish=True, backend="barrier",
                 gap_tol=None, check_membership=True) -> SolveReport:
    """Minimum fuel to reach the origin from x0 within horizon T.

    Parameters
    ----------
    sys : LtiSystem
    T : float
        Horizon, positive and finite.
    x0 : array_like, shape (n,)
    N : int
        Number of uniform control cells.
    polish : bool
        Refine the covector by shooting on the continuous extremal.
    backend : {"barrier", "pdhg"}
    gap_tol : float, optional
        Certified duality-gap target, default 1e-7 (1 + T).

    Returns
    -------
    SolveReport
        ``mode`` is "infeasible" when x0 is outside the attainable set.
    """
    T = _check_T(T)
    x0 = _check_x0(sys, x0)
    N = int(N)
    if N < 2:
        raise InvalidArgumentError("N must be >= 2")
    if not np.any(x0):
        return _zero_report(sys, T, x0, N)
    mem = None
    if check_membership:
        mem = member(sys, T, x0)
        if mem == OUTSIDE:
            return _infeasible(T, x0, N)
    if gap_tol is None:
        gap_tol = 1e-7 * (1.0 + T)
    kg = KernelGrid(sys, T, N)
    res = solve_program(kg.cells, x0, kg.h, gap_tol, backend)
    miss_tol = 1e-8 * (1.0 + float(np.linalg.norm(x0)))
    notes = []
    if not res.converged:
        cert = infeasibility_certificate(kg.cells, x0, res.p0,
                                         1e-6 * (1.0 + float(np.linalg.norm(x0))))
        if cert is not None:
            return _infeasible(T, x0, N, note="separating covector for the discretized "
                               f"program (margin {cert[1]:.3g})")
        # boundary points admit only |u| == 1 controls
        rep = _abnormal_fixed_T(sys, kg, x0, res, miss_tol)
        if rep is not None:
            return rep
        if not (polish and res.residual <= feasibility_tol(kg.cells, x0)):
            raise NumericFailure(f"convex solve did not converge (gap {res.gap:.3g})",
                                 best_gap=res.gap)
        notes.append(f"convex gap {res.gap:.3g} above target; optimality rests on the "
                     "PMP residuals of the polished extremal")

    discrete = ControlSignal(kg.grid, res.u, "grid")
    cov = Covector(res.p0)
    control, cost = discrete, res.primal
    skipped = not polish
    singular = is_singular_arc(sys, cov, kg.grid)
    if polish:
        if singular:
            skipped = True
            notes.append("singular arc: |p(t)B| is constant; polish skipped")
        else:
            p, ok, cond = _polish_normal(sys, kg, x0, res.p0, miss_tol)
            if ok:
                pol, _ = refined_extremal(kg, p, NORMAL)
                traj = integrate(sys, x0, "initial", pol)
                if np.linalg.norm(traj.terminal) <= miss_tol * max(1.0, _growth(sys, T)):
                    cov, control, cost = Covector(p), pol, cost_l1(pol)
                    if cond > 1e10:
                        notes.append("covector not unique (rank-deficient shooting Jacobian)")
                else:
                    skipped = True
            else:
                skipped = True
            if skipped:
                notes.append("shooting did not converge; discrete solution returned")
    if skipped and not res.converged:
        raise NumericFailure(f"convex solve did not converge (gap {res.gap:.3g}) and "
                             "shooting failed", best_gap=res.gap)
    diag = pmp_residuals(sys, x0, control, cov)
    diag = replace(diag, singular_arc=singular)
    return SolveReport(cost, control, cov, NORMAL, T, None, diag, res.primal, res.gap,
                       skipped, singular, x0, N, tuple(notes))


def _growth(sys, T):
    return float(np.linalg.norm(sys.expm(T), 2))


def _abnormal_F(kg, x0):
    def F(p):
        nrm = np.linalg.norm(p)
        if nrm == 0:
            return np.full(x0.size + 1, np.inf)
        return np.append(x0 + refined_extremal(kg, p, ABNORMAL)[1], p @ p - 1.0)
    return F


def _abnormal_fixed_T(sys, kg, x0, res, tol):
    """Time-optimal extremal reaching x0 in exactly kg.T, if one exists."""
    from .reachability import separation
    _, xi = separation(sys, kg.T, x0)
    p, r, ok, _ = newton_shoot(_abnormal_F(kg, x0), -xi, tol)
    if not ok:
        return None
    cov = Covector(p, ABNORMAL)
    u, _ = refined_extremal(kg, p, ABNORMAL)
    diag = pmp_residuals(sys, x0, u, cov)
    return SolveReport(cost_l1(u), u, cov, ABNORMAL, kg.T, None, diag, res.primal, res.gap,
                       False, False, x0, kg.N,
                       ("x0 on the attainable-set boundary; time-optimal control",))


def solve_time_optimal(sys: LtiSystem, x0, N=DEFAULT_N, T_cap=1e4, rel_tol=1e-6):
    """Minimum time T_min and the abnormal extremal reaching the origin.

    T_min is bracketed by bisection on the membership oracle and then
    refined by Newton shooting on (p0, T) with |p0| = 1.

    Returns
    -------
    (T_min, SolveReport)
    """
    x0 = _check_x0(sys, x0)
    if not np.any(x0):
        return 0.0, _zero_report(sys, 0.0, x0, N, mode=ABNORMAL)
    hi = 1.0
    while member(sys, hi, x0) == OUTSIDE:
        hi *= 2.0
        if hi > T_cap:
            raise UnreachableError(f"x0 not reachable within T = {T_cap:g}")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if member(sys, mid, x0) == OUTSIDE:
            lo = mid
        else:
            hi = mid
    from .reachability import separation
    _, xi = separation(sys, hi, x0)

    def F(z):
        p, T = z[:-1], z[-1]
        if T <= 0 or not np.any(p):
            return np.full(z.size, np.inf)
        kg = KernelGrid(sys, T, N)
        return np.append(x0 + refined_extremal(kg, p, ABNORMAL)[1], p @ p - 1.0)

    def jac(z, r):
        p, T = z[:-1], z[-1]
        kg = KernelGrid(sys, T, N)
        J = np.empty((z.size, z.size))
        for j in range(p.size):
            h = 1e-7
            pp = p.copy()
            pp[j] += h
            J[:-1, j] = (x0 + refined_extremal(kg, pp, ABNORMAL)[1] - r[:-1]) / h
        # d/dT of int_0^T G u dt is G(T) u(T)
        sT = p @ kg.nodes[-1]
        J[:-1, -1] = kg.nodes[-1] @ (sT / np.linalg.norm(sT))
        J[-1, :-1] = 2 * p
        J[-1, -1] = 0.0
        return J

    tol = 1e-9 * (1.0 + float(np.linalg.norm(x0)))
    z, r, ok, _ = newton_shoot(F, np.append(-xi, hi), tol, jac=jac)
    notes = []
    if ok and abs(z[-1] - hi) <= 1e-3 * hi:
        p, T = z[:-1], float(z[-1])
        skipped = False
    else:
        p, T = -xi, hi
        skipped = True
        notes.append("shooting on (p0, T) did not converge; bisection horizon used")
    kg = KernelGrid(sys, T, N)
    cov = Covector(p, ABNORMAL)
    u, _ = refined_extremal(kg, p, ABNORMAL)
    diag = pmp_residuals(sys, x0, u, cov)
    rep = SolveReport(cost_l1(u), u, cov, ABNORMAL, T, None, diag, None, None, skipped,
                      False, x0, N, tuple(notes))
    return T, rep


def _reduced_system(sys, basis, proj):
    """Restriction of x' = Ax + Bu to an invariant subspace with basis V."""
    Ar = basis.T @ sys.A @ basis
    Br = basis.T @ proj @ sys.B
    return LtiSystem.unchecked(Ar, Br)


def solve_infinite(sys: LtiSystem, x0, N=DEFAULT_N, T0=1.0, max_doublings=12,
                   plateau_tol=1e-7) -> SolveReport:
    """Infimum of the fuel over all horizons.

    Hyperbolic A: the problem is projected onto E+ (the stable part decays
    for free), the horizon is doubled until the cost stops changing, and the
    attained report carries the free-time residuals at the attainment
    horizon. Otherwise the sweep estimate is returned with attained=False.
    """
    x0 = _check_x0(sys, x0)
    split = hyperbolic_split(sys.A)
    if not np.any(x0):
        return _zero_report(sys, 0.0, x0, N, attained=True)
    tol = hyperbolic_tolerance(sys.A)
    if split.is_hyperbolic:
        V, P = split.basis_plus, split.projector_plus
    else:
        # drop the strictly stable part; it decays without control
        V, rest = invariant_subspace(sys.A, lambda re, im: re >= -tol)
        P = projector_along(V, rest)
    k = V.shape[1]
    if k == 0:
        return SolveReport(0.0, ControlSignal.zeros(1.0, sys.m), Covector(np.zeros(sys.n)),
                           NORMAL, 0.0, True, Diagnostics(0.0, 0.0), 0.0, 0.0, x0=x0, N=N,
                           notes=("A is stable; u = 0 is optimal",))
    red = _reduced_system(sys, V, P)
    xr = V.T @ P @ x0
    if not np.any(xr):
        return _zero_report(sys, 0.0, x0, N, attained=True)

    prev = None
    best = None
    T = T0
    reports = []
    for _ in range(max_doublings + 1):
        rep = solve_finite(red, T, xr, N)
        if rep.feasible:
            reports.append(rep)
            if best is None or rep.cost <= best.cost:
                best = rep
            if prev is not None and abs(prev.cost - rep.cost) < plateau_tol * (1 + rep.cost) \
                    and split.is_hyperbolic:
                break
            prev = rep
        T *= 2.0
    if best is None:
        return _infeasible(T / 2, x0, N, attained=False,
                           note="no probed horizon is feasible")

    lift = V.T @ P  # covector on E+ pulled back to R^n
    def lifted(rep):
        if rep.covector is None:
            return None
        return Covector(rep.covector.p0 @ lift, rep.covector.mode)

    if not split.is_hyperbolic:
        return SolveReport(best.cost, best.control, lifted(best), best.mode, best.horizon_used,
                           False, best.residuals, best.discrete_cost, best.duality_gap,
                           best.polish_skipped, best.singular_arc, x0, N,
                           best.notes + ("infimum estimate from a horizon sweep; "
                                         "no optimality certificate",))

    # attainment horizon: the control vanishes after the last bang arc
    u = best.control
    on = np.nonzero(u.magnitudes() > 1e-9)[0]
    T_star = float(u.breaks[on[-1] + 1]) if on.size else 0.0
    u_star = u.truncate(T_star) if T_star > 0 else u
    diag = best.residuals
    if best.covector is not None and T_star > 0:
        d = pmp_residuals(red, xr, u_star, best.covector, free_time=True,
                          tau_max=10.0 / split.alpha)
        diag = replace(d, singular_arc=best.singular_arc)
    return SolveReport(cost_l1(u_star), u_star, lifted(best), best.mode, T_star, True, diag,
                       best.discrete_cost, best.duality_gap, best.polish_skipped,
                       best.singular_arc, x0, N,
                       best.notes + (f"sweep plateau at T = {best.horizon_used:g}",))


@dataclass(frozen=True)
class ProbeResult:
    max_deviation: float
    deviations: tuple
    infeasible: int
    base_cost: float


def _unit(rng, shape):
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v)


def robustness_probe(sys: LtiSystem, T, x0, delta, probes=6, N=1024, seed=0) -> ProbeResult:
    """Largest cost change under perturbations of (T, x0, A, B).

    Each probe perturbs all four data at once by relative size ``delta``
    along directions drawn from a fixed seed. Perturbations that leave x0
    outside the attainable set are counted in ``infeasible`` and excluded
    from the maximum.
    """
    T = _check_T(T)
    x0 = _check_x0(sys, x0)
    if delta < 0:
        raise InvalidArgumentError("delta must be >= 0")
    base = solve_finite(sys, T, x0, N)
    if not base.feasible:
        raise InvalidArgumentError("x0 must lie inside the attainable set")
    rng = np.random.default_rng(seed)
    scale = lambda M: float(np.linalg.norm(M)) or 1.0
    devs = []
    bad = 0
    for _ in range(probes):
        dT = rng.choice([-1.0, 1.0])
        dx = _unit(rng, x0.shape)
        dA = _unit(rng, sys.A.shape)
        dB = _unit(rng, sys.B.shape)
        try:
            ps = LtiSystem(sys.A + delta * scale(sys.A) * dA, sys.B + delta * scale(sys.B) * dB)
        except InvalidArgumentError:
            bad += 1
            continue
        rep = solve_finite(ps, T * (1 + delta * dT), x0 + delta * scale(x0) * dx, N)
        if not rep.feasible:
            bad += 1
            continue
        devs.append(abs(rep.cost - base.cost))
    return ProbeResult(max(devs) if devs else 0.0, tuple(devs), bad, base.cost)
