"""
Explicit optimal syntheses for planar systems with scalar control.

Covers the free particle, the harmonic oscillator, and the three real
hyperbolic normal forms

    diag(l1, l2) with B = (1, 1),
    [[l, 1], [0, l]] with B = (b, 1),
    [[a, b], [-b, a]] with B = (0, 1).

Curves are graphs over one coordinate (or a time parameter for spirals)
and are clipped to their stated arcs in parameter space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import InvalidArgumentError
from .extremal import NORMAL, ControlSignal, Covector, Trajectory, extremal_control, integrate
from .lti import LtiSystem

FREE_PARTICLE = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
OSCILLATOR = LtiSystem([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]])


@dataclass(frozen=True)
class Curve2D:
    """A planar arc ``s -> evaluator(s)`` for s in ``param_range``."""

    label: str
    param_range: tuple
    evaluator: Callable

    def __call__(self, s):
        return self.evaluator(s)

    @property
    def endpoints(self):
        lo, hi = self.param_range
        return np.asarray(self.evaluator(lo), float), np.asarray(self.evaluator(hi), float)

    def sample(self, count=200):
        lo, hi = self.param_range
        s = np.linspace(lo, hi, count)
        pts = np.array([self.evaluator(v) for v in s], dtype=float)
        return pts


def _graph_x1(label, lo, hi, f):
    """Curve x2 = f(x1) on [lo, hi]."""
    return Curve2D(label, (float(lo), float(hi)), lambda x: (float(x), float(f(x))))


def _graph_x2(label, lo, hi, g):
    """Curve x1 = g(x2) on [lo, hi]."""
    return Curve2D(label, (float(lo), float(hi)), lambda y: (float(g(y)), float(y)))


# ----------------------------------------------------------------- free particle

@dataclass(frozen=True)
class FreeParticleValue:
    mu: float
    finite_time_attainable: bool
    boundary_ambiguous: bool = False

    def __iter__(self):
        return iter((self.mu, self.finite_time_attainable))


def free_particle_mu_inf(x0) -> FreeParticleValue:
    """Infinite-horizon cost |x2| of the free particle and whether a finite
    horizon attains it.

    The attaining region is {x1 <= -x2^2/2, x2 >= 0} U {x1 >= x2^2/2, x2 <= 0}
    with weak inequalities. On the ray {x2 = 0, x1 != 0} the weak test says
    yes while u = 0 leaves the state fixed, so those points are flagged
    ``boundary_ambiguous``.
    """
    x1, x2 = (float(v) for v in np.asarray(x0, dtype=float).reshape(2))
    mu = abs(x2)
    left = x1 <= -0.5 * x2 * x2 and x2 >= 0
    right = x1 >= 0.5 * x2 * x2 and x2 <= 0
    ambiguous = x2 == 0.0 and x1 != 0.0
    return FreeParticleValue(mu, bool(left or right), ambiguous)


# ------------------------------------------------------------ harmonic oscillator

def oscillator_cost(x0, k):
    """Cost c(k) = k alpha0 of the k-arc construction, cos(alpha0) = 1 - |x0|^2/(2k^2).

    Returns ``(c, alpha0)``.
    """
    r = float(np.linalg.norm(np.asarray(x0, dtype=float)))
    k = float(k)
    if k <= 0 or k < r:
        raise InvalidArgumentError(f"need k >= |x0| and k > 0 (k={k}, |x0|={r})")
    if r == 0.0:
        return 0.0, 0.0
    # 1 - cos(a) = 2 sin^2(a/2) gives a form free of cancellation for large k
    a0 = 2.0 * math.asin(min(1.0, r / (2.0 * k)))
    return k * a0, a0


def oscillator_switch_circles(k_max):
    """Circles centered at (k, 0) with radius |k|, k = +-1 .. +-k_max."""
    k_max = int(k_max)
    if k_max < 1:
        raise InvalidArgumentError("k_max must be >= 1")
    out = []
    for k in list(range(-k_max, 0)) + list(range(1, k_max + 1)):
        out.append(Curve2D(f"S_{k}", (0.0, 2 * math.pi),
                           lambda th, k=k: (k + abs(k) * math.cos(th), abs(k) * math.sin(th))))
    return out


OFF_FIRST = "off-first"
BANG_FIRST = "bang-first"


@dataclass(frozen=True)
class OscillatorSchedule:
    """Periodic bang-off schedule with half-period pi.

    off-first: 0 on [0, alpha0), then eps, 0, -eps, 0, ... with bangs of
    length delta starting at alpha0 + j pi.
    bang-first: eps on [0, alpha0), then 0, -eps, 0, eps, ... with bangs of
    length delta ending at alpha0 + j pi.
    """

    alpha0: float
    delta: float
    epsilon: int = 1
    variant: str = OFF_FIRST

    def __post_init__(self):
        if not (0.0 <= self.alpha0 < math.pi) or not (0.0 <= self.delta < math.pi):
            raise InvalidArgumentError("alpha0 and delta must lie in [0, pi)")
        if self.epsilon not in (-1, 1):
            raise InvalidArgumentError("epsilon must be +-1")
        tol = 1e-12
        if self.variant == OFF_FIRST:
            if self.alpha0 > math.pi - self.delta + tol:
                raise InvalidArgumentError("off-first schedule needs alpha0 <= pi - delta")
        elif self.variant == BANG_FIRST:
            if self.alpha0 > self.delta + tol:
                raise InvalidArgumentError("bang-first schedule needs alpha0 <= delta")
        else:
            raise InvalidArgumentError(f"unknown variant {self.variant!r}")

    def pieces(self, T):
        """(start, end, value) triples covering [0, T]."""
        out = []
        a0, d, e = self.alpha0, self.delta, self.epsilon
        if self.variant == OFF_FIRST:
            out.append((0.0, a0, 0))
            j = 0
            while a0 + j * math.pi < T:
                s = a0 + j * math.pi
                sign = e if j % 2 == 0 else -e
                out.append((s, s + d, sign))
                out.append((s + d, s + math.pi, 0))
                j += 1
        else:
            out.append((0.0, a0, e))
            j = 0
            while a0 + j * math.pi < T:
                s = a0 + j * math.pi
                sign = -e if j % 2 == 0 else e
                out.append((s, s + math.pi - d, 0))
                out.append((s + math.pi - d, s + math.pi, sign))
                j += 1
        clipped = []
        for a, b, v in out:
            a, b = max(a, 0.0), min(b, T)
            if b > a:
                clipped.append((a, b, v))
        return clipped

    def control(self, T) -> ControlSignal:
        p = self.pieces(float(T))
        br = np.array([p[0][0]] + [b for _, b, _ in p])
        return ControlSignal(br, np.array([[v] for _, _, v in p], float), "switching")


@dataclass(frozen=True)
class OscillatorPlan:
    """The k-arc construction from x0: schedule, horizon T(k) and cost c(k)."""

    k: int
    horizon: float
    cost: float
    schedule: OscillatorSchedule
    control: ControlSignal
    first_switch: np.ndarray


def _rotation_angle_clockwise(a, b):
    """Angle theta in [0, 2pi) with R(theta) a = b for the coasting flow."""
    ang_a = math.atan2(a[1], a[0])
    ang_b = math.atan2(b[1], b[0])
    return (ang_a - ang_b) % (2 * math.pi)


def oscillator_plan(x0, k) -> OscillatorPlan:
    """Coast to the circle of center (+-k, 0), then k bangs of length
    alpha0(k) separated by coasts of length pi - alpha0(k).

    The last bang sign is chosen to minimize the initial coast.
    """
    x0 = np.asarray(x0, dtype=float).reshape(2)
    k = int(k)
    c, a0 = oscillator_cost(x0, k)
    r = float(np.linalg.norm(x0))
    if r == 0.0:
        u = ControlSignal.zeros(1.0, 1)
        return OscillatorPlan(k, 0.0, 0.0, OscillatorSchedule(0.0, 0.0), u, x0)
    best = None
    for last in (1, -1):
        # bangs alternate; the first one has sign last * (-1)^(k-1)
        first = last * (-1) ** (k - 1)
        tail = OscillatorSchedule(0.0, a0, first, OFF_FIRST)
        Ttail = (k - 1) * math.pi + a0
        u_tail = tail.control(Ttail)
        x1 = integrate(OSCILLATOR, np.zeros(2), "terminal", u_tail).initial
        theta = _rotation_angle_clockwise(x0, x1)
        if best is None or theta < best[0]:
            best = (theta, first, x1)
    theta, first, x1 = best
    sched = OscillatorSchedule(theta, a0, first, OFF_FIRST)
    T = theta + (k - 1) * math.pi + a0
    return OscillatorPlan(k, T, c, sched, sched.control(T), x1)


# ----------------------------------------------------------- hyperbolic, case 1

def hyperbolic1_system(l1, l2):
    return LtiSystem([[float(l1), 0.0], [0.0, float(l2)]], [[1.0], [1.0]])


def _check_pos(**kw):
    for k, v in kw.items():
        if not (v > 0 and np.isfinite(v)):
            raise InvalidArgumentError(f"{k} must be positive, got {v}")


def hyperbolic1_curves(l1, l2):
    """Boundary and switching curves for diag(l1, l2), B = (1, 1).

    Returns a dict label -> Curve2D with the labels C_plus, C_minus,
    C_0_plus1, C_0_minus1, C_plus1_0 and C_minus1_0, each a graph over x1.
    """
    _check_pos(l1=l1, l2=l2)
    l1, l2 = float(l1), float(l2)
    r = l2 / l1
    e1 = 1.0 / l1
    cv = {
        "C_plus": _graph_x1("C_plus", -e1, e1,
                            lambda x: (2 * ((l1 * x + 1) / 2) ** r - 1) / l2),
        "C_minus": _graph_x1("C_minus", -e1, e1,
                             lambda x: (1 - 2 * ((1 - l1 * x) / 2) ** r) / l2),
        "C_0_plus1": _graph_x1("C_0_plus1", -e1, 0.0,
                               lambda x: ((l1 * x + 1) ** r - 1) / l2),
        "C_0_minus1": _graph_x1("C_0_minus1", 0.0, e1,
                                lambda x: (1 - (1 - l1 * x) ** r) / l2),
        "C_plus1_0": _graph_x1("C_plus1_0", 0.0, e1,
                               lambda x: (l1 * x) ** r / l2),
        "C_minus1_0": _graph_x1("C_minus1_0", -e1, 0.0,
                                lambda x: -((-l1 * x) ** r) / l2),
    }
    return cv


def hyperbolic1_region(l1, l2, x0) -> bool:
    """True when x0 lies strictly between the C_plus and C_minus arcs."""
    cv = hyperbolic1_curves(l1, l2)
    x1, x2 = (float(v) for v in np.asarray(x0, float).reshape(2))
    if not (-1 / l1 < x1 < 1 / l1):
        return False
    a, b = cv["C_plus"](x1)[1], cv["C_minus"](x1)[1]
    return min(a, b) < x2 < max(a, b)


def reverse_extremal(sys: LtiSystem, q, horizon, N=4096):
    """Normal extremal ending at the origin with terminal covector q.

    The covector at time t is q e^{(horizon - t)A}; the state is integrated
    backward from x(horizon) = 0.

    Returns ``(trajectory, control)``.
    """
    q = np.asarray(q, dtype=float)
    p0 = q @ sys.expm(float(horizon))
    grid = np.linspace(0.0, float(horizon), int(N) + 1)
    u = extremal_control(sys, Covector(p0, NORMAL), grid, refine=True)
    traj = integrate(sys, np.zeros(sys.n), "terminal", u)
    return traj, u


def _switch_states(traj: Trajectory):
    u = traj.control
    idx = np.nonzero(np.linalg.norm(np.diff(u.values, axis=0), axis=1) > 1e-12)[0] + 1
    return u.breaks[idx], traj.states[idx], u.values[idx - 1, 0], u.values[idx, 0]


def hyperbolic1_switch_locus(l1, l2, kind="+1,0", count=100, horizon=None):
    """Switch points of optimal extremals computed by reverse-time integration.

    Terminal covectors q satisfy q B = s, |q e^{tau A} B| <= 1 for tau <= 0,
    so the last arc is a bang of sign s. Integrating backward from the
    origin, the state where the control next turns on (with sign -s) is a
    forward switch "-s -> 0". ``kind`` "+1,0" uses s = -1 and "-1,0" s = +1.

    Returns an array of shape (count, 2).
    """
    _check_pos(l1=l1, l2=l2)
    if kind not in ("+1,0", "-1,0"):
        raise InvalidArgumentError("kind must be '+1,0' or '-1,0'")
    s = -1.0 if kind == "+1,0" else 1.0
    if l1 == l2:
        raise InvalidArgumentError("l1 == l2 is not controllable with B = (1, 1)")
    sys = hyperbolic1_system(l1, l2)
    slow, fast = min(l1, l2), max(l1, l2)
    if horizon is None:
        horizon = 12.0 / (fast - slow) + 2.0 / slow
    # f(sig) = q_slow e^{slow sig} + q_fast e^{fast sig} with f(0) = s. A later
    # sign change needs q_fast = -s a (a > 0), so q_slow = s (1 + a); the
    # bang persists into sig > 0 iff a <= slow / (fast - slow).
    a_max = slow / (fast - slow)
    pts = []
    for a in np.geomspace(1e-3 * a_max, a_max, count):
        q_fast, q_slow = -s * a, s * (1.0 + a)
        q = np.array([q_slow, q_fast]) if l1 < l2 else np.array([q_fast, q_slow])
        traj, _ = reverse_extremal(sys, q, horizon, 2048)
        t_sw, x_sw, before, after = _switch_states(traj)
        # forward order: -s -> 0 -> s ; pick the "-s -> 0" switch
        hit = [x for b, a_, x in zip(before, after, x_sw) if b == -s and a_ == 0.0]
        if hit:
            pts.append(hit[-1])
    return np.asarray(pts, dtype=float).reshape(-1, 2)


# ----------------------------------------------------------- hyperbolic, case 2

def hyperbolic2_system(lam, b):
    return LtiSystem([[float(lam), 1.0], [0.0, float(lam)]], [[float(b)], [1.0]])


def hyperbolic2_curves(lam, b):
    """Boundary and switching curves for [[l, 1], [0, l]], B = (b, 1).

    Graphs over x2. C_plus1_0 and C_minus1_0 are the coasting trajectories
    through the equilibria of u = -1 and u = +1 respectively.
    """
    _check_pos(lam=lam)
    l, b = float(lam), float(b)
    c = (b - 1.0 / l) / l
    e = 1.0 / l
    log = math.log
    cv = {
        "C_plus": _graph_x2(
            "C_plus", -e, e,
            lambda y: -c + (l * y + 1) * (l * b - 1 + _xlog((l * y + 1) / 2)) / l ** 2),
        "C_minus": _graph_x2(
            "C_minus", -e, e,
            lambda y: c + (l * y - 1) * (l * b - 1 + _xlog((1 - l * y) / 2)) / l ** 2),
        "C_0_plus1": _graph_x2(
            "C_0_plus1", -e, 0.0,
            lambda y: -c + (l * y + 1) * (l * b - 1 + _xlog(l * y + 1)) / l ** 2),
        "C_0_minus1": _graph_x2(
            "C_0_minus1", 0.0, e,
            lambda y: c + (l * y - 1) * (l * b - 1 + _xlog(1 - l * y)) / l ** 2),
        "C_plus1_0": _graph_x2(
            "C_plus1_0", 0.0, e,
            lambda y: 0.0 if y == 0 else y * ((b - e) + e * log(l * y))),
        "C_minus1_0": _graph_x2(
            "C_minus1_0", -e, 0.0,
            lambda y: 0.0 if y == 0 else y * ((b - e) + e * log(-l * y))),
    }
    return cv


def _xlog(v):
    # the log term is always multiplied by a factor vanishing with v
    return math.log(v) if v > 0 else 0.0


def hyperbolic2_region(lam, b, x0) -> bool:
    """True when x0 lies strictly between the C_plus and C_minus arcs."""
    cv = hyperbolic2_curves(lam, b)
    x1, x2 = (float(v) for v in np.asarray(x0, float).reshape(2))
    if not (-1 / lam < x2 < 1 / lam):
        return False
    a, c = cv["C_plus"](x2)[0], cv["C_minus"](x2)[0]
    return min(a, c) < x1 < max(a, c)


# ----------------------------------------------------------- hyperbolic, case 3

@dataclass(frozen=True)
class HyperbolicSpiralCase:
    """A = [[alpha, beta], [-beta, alpha]], B = (0, 1), in complex notation
    z = x1 + i x2, so that z' = (alpha - i beta) z + i u.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InvalidArgumentError("alpha must be positive")
        if self.beta == 0 or not np.isfinite(self.beta):
            raise InvalidArgumentError("beta must be nonzero")

    @property
    def system(self):
        a, b = float(self.alpha), float(self.beta)
        return LtiSystem([[a, b], [-b, a]], [[0.0], [1.0]])

    @property
    def z_bar(self) -> complex:
        a, b = self.alpha, self.beta
        return complex(b, -a) / (a * a + b * b)

    @property
    def z_lim(self) -> complex:
        E = math.expm1(self.alpha * math.pi / self.beta)
        return self.z_bar * (1.0 + 2.0 / E)

    @property
    def sweep_range(self):
        return (0.0, math.exp(2 * math.pi * self.alpha / self.beta))

    def default_sweep(self, count=64):
        """Log-spaced C0 values over one full turn of the covector spiral."""
        hi = self.sweep_range[1]
        lo = hi * math.exp(-2 * math.pi * self.alpha / abs(self.beta))
        return np.geomspace(lo, hi, count + 1)[1:]


def attainable_boundary3(case: HyperbolicSpiralCase):
    """The two arcs bounding the set of states steerable to the origin.

    z(t) = -(z_lim + z_bar) e^{(alpha - i beta)t} + z_bar for t between
    -pi/beta and 0 (a u = +1 trajectory from z_lim to -z_lim), and its
    mirror image through the origin.
    """
    a, b = case.alpha, case.beta
    zl, zb = case.z_lim, case.z_bar
    lam = complex(a, -b)
    lo, hi = sorted((-math.pi / b, 0.0))

    def up(t):
        z = -(zl + zb) * np.exp(lam * t) + zb
        return (z.real, z.imag)

    def down(t):
        z = (zl + zb) * np.exp(lam * t) - zb
        return (z.real, z.imag)

    return (Curve2D("boundary_plus", (lo, hi), up), Curve2D("boundary_minus", (lo, hi), down))


def _first_unit_crossing(C0, a, b):
    """Smallest s with |Im(C0 e^{(a + ib)s})| = 1."""
    half = math.pi / abs(b)
    g = lambda s: C0 * math.exp(a * s) * abs(math.sin(b * s)) - 1.0
    # start a full period below the envelope crossing
    j = math.floor((-math.log(C0) / a) / half) - 2
    for _ in range(10000):
        lo, hi = j * half, (j + 1) * half
        res = optimize.minimize_scalar(lambda s: -g(s), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-14})
        if -res.fun >= 0.0:
            return optimize.brentq(g, lo, res.x, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        j += 1
    raise InvalidArgumentError("no unit crossing found")


def hyperbolic3_portrait(case: HyperbolicSpiralCase, C0, t_max=None, N=4096):
    """Optimal trajectory ending at the origin for one covector spiral.

    The covector runs along w(s) = C0 e^{(alpha + i beta)s}; with s* the
    first parameter where |Im w| = 1, the switching function at time t
    before arrival is Im w(s* + t). The state is integrated backward from
    the origin for ``t_max`` time units.

    Returns ``(trajectory, control)`` with the trajectory ending at 0.
    """
    lo, hi = case.sweep_range
    C0 = float(C0)
    if not (lo < C0 <= hi * (1 + 1e-12)):
        raise InvalidArgumentError(f"C0 must lie in ({lo}, {hi}]")
    a, b = case.alpha, case.beta
    if t_max is None:
        t_max = max(6 * math.pi / abs(b), 3.0 / a)
    s_star = _first_unit_crossing(C0, a, b)
    w = C0 * np.exp(complex(a, b) * s_star)
    q = np.array([w.real, w.imag])
    return reverse_extremal(case.system, q, t_max, N)
