import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fuelopt.errors import InvalidArgumentError
from fuelopt.extremal import ControlSignal, integrate
from fuelopt.solver import solve_finite, solve_infinite
from fuelopt.synthesis2d import (BANG_FIRST, FREE_PARTICLE, OFF_FIRST, OSCILLATOR,
                                 HyperbolicSpiralCase, OscillatorSchedule, attainable_boundary3,
                                 free_particle_mu_inf, hyperbolic1_curves, hyperbolic1_region,
                                 hyperbolic1_switch_locus, hyperbolic1_system, hyperbolic2_curves,
                                 hyperbolic2_region, hyperbolic2_system, hyperbolic3_portrait,
                                 oscillator_cost, oscillator_plan, oscillator_switch_circles)


# ----------------------------------------------------------------- free particle

@pytest.mark.parametrize("x0, mu, ok", [((0.5, -1.0), 1.0, True), ((0.0, 1.0), 1.0, False),
                                        ((0.0, 0.0), 0.0, True), ((-2.0, 1.0), 1.0, True)])
def test_free_particle_examples(x0, mu, ok):
    v = free_particle_mu_inf(x0)
    assert v.mu == mu and v.finite_time_attainable is ok
    assert not v.boundary_ambiguous


def test_free_particle_ambiguous_ray():
    v = free_particle_mu_inf((1.0, 0.0))
    assert v.finite_time_attainable and v.boundary_ambiguous
    mu, ok = v
    assert mu == 0.0


def test_free_particle_lower_bound_random():
    rng = np.random.default_rng(3)
    for _ in range(12):
        x0 = rng.uniform(-1, 1, 2)
        T = 4.0 + 4.0 * rng.random()
        rep = solve_finite(FREE_PARTICLE, T, x0, N=512)
        if rep.feasible:
            assert rep.cost >= abs(x0[1]) - 1e-6


# ------------------------------------------------------------ harmonic oscillator

def test_oscillator_cost_examples():
    c, a0 = oscillator_cost((1.0, 0.0), 1)
    assert c == pytest.approx(math.pi / 3, abs=1e-15)
    assert oscillator_cost((0.0, 0.0), 3) == (0.0, 0.0)
    c, _ = oscillator_cost((1.0, 0.0), 10_000)
    assert abs(c - 1.0) < 1e-6
    with pytest.raises(InvalidArgumentError):
        oscillator_cost((3.0, 0.0), 2)


def test_oscillator_cost_matches_acos_form():
    for k in (1, 2, 3, 4, 7):
        c, a0 = oscillator_cost((0.6, 0.8), k)
        assert a0 == pytest.approx(math.acos(1 - 1 / (2 * k * k)), rel=1e-12)


@given(st.floats(0.05, 2.0), st.floats(0, 2 * math.pi))
def test_oscillator_cost_decreasing(r, th):
    x0 = (r * math.cos(th), r * math.sin(th))
    costs = [oscillator_cost(x0, k)[0] for k in range(math.ceil(r), math.ceil(r) + 6)]
    assert all(a > b for a, b in zip(costs, costs[1:]))
    assert costs[-1] > r


def test_switch_circles():
    cs = oscillator_switch_circles(2)
    assert [c.label for c in cs] == ["S_-2", "S_-1", "S_1", "S_2"]
    for c in cs:
        k = int(c.label[2:])
        pts = c.sample(50)
        np.testing.assert_allclose(np.hypot(pts[:, 0] - k, pts[:, 1]), abs(k), atol=1e-12)
        # every circle passes through the origin
        assert min(np.hypot(*c(0.0)), np.hypot(*c(math.pi))) < 1e-12
    with pytest.raises(InvalidArgumentError):
        oscillator_switch_circles(0)


def test_schedule_validation_and_pieces():
    with pytest.raises(InvalidArgumentError):
        OscillatorSchedule(3.0, 1.0, 1, OFF_FIRST)
    with pytest.raises(InvalidArgumentError):
        OscillatorSchedule(0.5, 0.3, 1, BANG_FIRST)
    with pytest.raises(InvalidArgumentError):
        OscillatorSchedule(0.5, 0.3, 0)
    s = OscillatorSchedule(0.2, 0.5, -1, OFF_FIRST)
    u = s.control(2 * math.pi)
    assert u.horizon == pytest.approx(2 * math.pi)
    np.testing.assert_allclose(u.sample([0.1, 0.3, 1.0, 0.2 + math.pi + 0.1]).ravel(),
                               [0, -1, 0, 1])
    b = OscillatorSchedule(0.2, 0.5, 1, BANG_FIRST).control(2 * math.pi)
    np.testing.assert_allclose(b.sample([0.1, 0.5, math.pi + 0.1]).ravel(), [1, 0, -1])


def test_schedule_arcs_are_circles():
    # off arcs are centered at 0, bangs of sign s at (s, 0)
    u = OscillatorSchedule(0.4, 0.7, 1, OFF_FIRST).control(3 * math.pi)
    x = np.array([0.9, -0.3])
    for h, v in zip(u.durations, u.values[:, 0]):
        c = np.array([v, 0.0])
        r0 = np.linalg.norm(x - c)
        for tt in np.linspace(0, h, 9)[1:]:
            y = integrate(OSCILLATOR, x, "initial", ControlSignal([0.0, tt], [[v]])).terminal
            assert abs(np.linalg.norm(y - c) - r0) <= 1e-8
        x = y


@pytest.mark.parametrize("k", [1, 2, 3])
def test_oscillator_plan_reaches_origin(k):
    x0 = (1.0, 0.0)
    plan = oscillator_plan(x0, k)
    traj = integrate(OSCILLATOR, x0, "initial", plan.control)
    assert np.linalg.norm(traj.terminal) < 1e-10
    assert (k - 1) * math.pi <= plan.horizon <= k * math.pi + 1e-12
    fuel = float(np.sum(plan.control.durations * np.abs(plan.control.values[:, 0])))
    assert fuel == pytest.approx(plan.cost, abs=1e-12)


def test_oscillator_cross_validation():
    plan = oscillator_plan((1.0, 0.0), 2)
    rep = solve_finite(OSCILLATOR, plan.horizon, (1.0, 0.0), N=2048)
    assert abs(rep.cost - plan.cost) <= 2e-3


# ----------------------------------------------------------- hyperbolic, case 1

def test_hyp1_endpoints_and_equilibria():
    l1, l2 = 1.0, 2.0
    cv = hyperbolic1_curves(l1, l2)
    assert set(cv) == {"C_plus", "C_minus", "C_0_plus1", "C_0_minus1", "C_plus1_0", "C_minus1_0"}
    np.testing.assert_allclose(cv["C_plus1_0"](1 / l1), (1 / l1, 1 / l2), atol=1e-12)
    np.testing.assert_allclose(cv["C_plus"](-1 / l1), (-1 / l1, -1 / l2), atol=1e-12)
    np.testing.assert_allclose(cv["C_minus"](1 / l1), (1 / l1, 1 / l2), atol=1e-12)
    for c in cv.values():
        a, b = c.endpoints
        np.testing.assert_allclose(c(c.param_range[0]), a, atol=1e-10)
        np.testing.assert_allclose(c(c.param_range[1]), b, atol=1e-10)
    # switch curves pass through the origin
    np.testing.assert_allclose(cv["C_0_plus1"](0.0), (0, 0), atol=1e-15)
    np.testing.assert_allclose(cv["C_plus1_0"](0.0), (0, 0), atol=1e-15)


def test_hyp1_equal_rates_is_a_line():
    cv = hyperbolic1_curves(1.5, 1.5)
    for x in np.linspace(0, 1 / 1.5, 7):
        assert cv["C_plus1_0"](x)[1] == pytest.approx(x, abs=1e-14)


def test_hyp1_region_and_cross_validation():
    assert hyperbolic1_region(1.0, 2.0, (0.0, 0.0))
    assert not hyperbolic1_region(1.0, 2.0, (0.0, 0.9))
    assert not hyperbolic1_region(1.0, 2.0, (1.5, 0.0))
    sys = hyperbolic1_system(1.0, 2.0)
    rep = solve_finite(sys, 6.0, (0.2, 0.05), N=1024)
    assert rep.feasible
    rep_out = solve_finite(sys, 6.0, (0.0, 0.6), N=256)
    assert not rep_out.feasible


def test_hyp1_locus_shape():
    pts = hyperbolic1_switch_locus(1.0, 2.0, "+1,0", count=12)
    assert pts.shape[1] == 2 and len(pts) > 0
    with pytest.raises(InvalidArgumentError):
        hyperbolic1_switch_locus(1.0, 1.0, count=5)
    with pytest.raises(InvalidArgumentError):
        hyperbolic1_switch_locus(1.0, 2.0, "0,+1")
    with pytest.raises(InvalidArgumentError):
        hyperbolic1_curves(-1.0, 2.0)


# ----------------------------------------------------------- hyperbolic, case 2

def test_hyp2_curves():
    lam, b = 1.5, 0.7
    cv = hyperbolic2_curves(lam, b)
    np.testing.assert_allclose(cv["C_0_plus1"](0.0), (0.0, 0.0), atol=1e-14)
    end = cv["C_0_plus1"](-1 / lam)
    np.testing.assert_allclose(end, (-(b - 1 / lam) / lam, -1 / lam), atol=1e-12)
    for y in (1e-8, 1e-12):
        assert abs(cv["C_plus1_0"](y)[0]) < 1e-6
        assert abs(cv["C_minus1_0"](-y)[0]) < 1e-6
    # the u = -1 equilibrium is where C_plus starts
    sys = hyperbolic2_system(lam, b)
    xeq = np.linalg.solve(sys.A, sys.B[:, 0])
    np.testing.assert_allclose(cv["C_plus"](xeq[1]), xeq, atol=1e-12)


def test_hyp2_region():
    assert hyperbolic2_region(1.5, 0.7, (0.0, 0.0))
    assert not hyperbolic2_region(1.5, 0.7, (0.0, 1.0))
    rep = solve_finite(hyperbolic2_system(1.5, 0.7), 6.0, (0.05, 0.1), N=1024)
    assert rep.feasible


# ----------------------------------------------------------- hyperbolic, case 3

def test_spiral_case_fields():
    c = HyperbolicSpiralCase(1.0, 2.0)
    assert abs(c.z_lim) > abs(c.z_bar)
    assert abs(c.z_lim) == pytest.approx(abs(c.z_bar) * (1 + 2 / (math.exp(math.pi / 2) - 1)))
    assert abs(HyperbolicSpiralCase(1e-4, 1.0).z_lim) > 1e3
    with pytest.raises(InvalidArgumentError):
        HyperbolicSpiralCase(0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        HyperbolicSpiralCase(1.0, 0.0)
    sw = HyperbolicSpiralCase(0.1, 1.0).default_sweep()
    assert len(sw) == 64 and sw[-1] == pytest.approx(math.exp(0.2 * math.pi))


def test_boundary3_symmetry():
    c = HyperbolicSpiralCase(0.1, 1.0)
    up, down = attainable_boundary3(c)
    lo, hi = up.param_range
    np.testing.assert_allclose(up(hi), -np.asarray(up(lo)), atol=1e-12)
    np.testing.assert_allclose(down(lo), -np.asarray(up(lo)), atol=1e-12)
    np.testing.assert_allclose(up(lo), (c.z_lim.real, c.z_lim.imag), atol=1e-12)


def test_portrait_round_trip():
    case = HyperbolicSpiralCase(0.1, 1.0)
    for C0 in case.default_sweep(4):
        traj, u = hyperbolic3_portrait(case, C0)
        assert np.all(np.isin(np.abs(u.values[:, 0]), (0.0, 1.0)))
        fwd = integrate(case.system, traj.initial, "initial", u)
        assert np.linalg.norm(fwd.terminal) <= 1e-6
    with pytest.raises(InvalidArgumentError):
        hyperbolic3_portrait(case, 100.0)


def test_hyp1_locus_matches_solver_switches():
    # start upstream of a locus point under u = +1; the optimal control must
    # switch off exactly there
    sys = hyperbolic1_system(1.0, 2.0)
    xs = hyperbolic1_switch_locus(1.0, 2.0, count=8)[4]
    x_start = integrate(sys, xs, "terminal", ControlSignal([0.0, 0.3], [[1.0]])).initial
    rep = solve_infinite(sys, x_start, N=2048)
    t_sw = rep.control.switch_times()[0]
    assert t_sw == pytest.approx(0.3, abs=1e-6)
    x_sw = integrate(sys, x_start, "initial", rep.control.truncate(t_sw)).terminal
    np.testing.assert_allclose(x_sw, xs, atol=1e-6)
