import math

import numpy as np
import pytest

from fuelopt.errors import InvalidArgumentError, NumericFailure
from fuelopt.extremal import ABNORMAL, NORMAL, integrate
from fuelopt.lti import LtiSystem
from fuelopt.reachability import OUTSIDE, member
from fuelopt.solver import (INFEASIBLE, newton_shoot, robustness_probe, solve_finite,
                            solve_infinite, solve_time_optimal)

DI = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
SCALAR = LtiSystem([[1.0]], [[1.0]])


def free_particle_mu(T):
    """Optimal fuel from (0, 1) for T > 1 + sqrt(2).

    Brake to rest, push back to speed -v, coast, brake at the origin.
    Fuel is 1 + 2 v with v the small root of 2 v^2 - 2 (T - 1) v + 1 = 0.
    """
    c = T - 1.0
    v = (c - math.sqrt(c * c - 2.0)) / 2.0
    return 1.0 + 2.0 * v


@pytest.mark.parametrize("T", [4.0, 8.0])
def test_free_particle_closed_form(T):
    rep = solve_finite(DI, T, [0.0, 1.0])
    assert not rep.polish_skipped
    assert rep.cost == pytest.approx(free_particle_mu(T), abs=1e-9)
    assert rep.discrete_cost >= rep.cost - 1e-9
    assert rep.residuals.terminal_miss < 1e-10
    assert rep.residuals.maximality_gap < 1e-9
    assert rep.duality_gap <= 1e-7 * (1 + T)


def test_bang_then_coast():
    rep = solve_finite(DI, 2.0, [0.5, -1.0])
    assert rep.cost == pytest.approx(1.0, abs=1e-12)
    assert rep.mode == NORMAL and rep.feasible
    np.testing.assert_allclose(rep.control.switch_times(), [1.0], atol=1e-9)
    d = rep.to_dict()
    assert d["mode"] == "normal" and d["control"]["pieces"] == 2


def test_backends_agree():
    a = solve_finite(DI, 3.0, [0.3, 0.4], N=128, polish=False)
    b = solve_finite(DI, 3.0, [0.3, 0.4], N=128, polish=False, backend="pdhg", gap_tol=1e-6)
    assert a.cost == pytest.approx(b.cost, abs=2e-6)
    assert a.polish_skipped and b.polish_skipped


def test_infeasible_reports():
    rep = solve_finite(DI, 1.0, [5.0, 5.0])
    assert rep.mode == INFEASIBLE and not rep.feasible and math.isnan(rep.cost)
    assert rep.to_dict()["cost"] is None
    # the discretized program reaches the same verdict without the membership test
    rep2 = solve_finite(DI, 1.0, [5.0, 5.0], check_membership=False)
    assert rep2.mode == INFEASIBLE
    assert "separating covector" in rep2.notes[0]


def test_boundary_point_is_time_optimal():
    T = 1 + math.sqrt(2)
    rep = solve_finite(DI, T, [0.0, -1.0])
    assert rep.mode == ABNORMAL
    assert rep.cost == pytest.approx(T, abs=1e-9)
    np.testing.assert_allclose(np.abs(rep.control.values), 1.0)


def test_near_boundary_interior_point():
    # 1e-4 inside: the convex gap stalls and the PMP polish certifies the answer
    T = 1 + math.sqrt(2) + 1e-4
    rep = solve_finite(DI, T, [0.0, -1.0])
    c = T - 1.0  # same closed form as from (0, 1) by symmetry
    v = (c - math.sqrt(c * c - 2.0)) / 2.0
    assert rep.cost == pytest.approx(1 + 2 * v, abs=1e-8)
    assert rep.residuals.terminal_miss < 1e-9


def test_zero_state():
    rep = solve_finite(DI, 2.0, [0.0, 0.0])
    assert rep.cost == 0.0 and rep.feasible


def test_validation():
    with pytest.raises(InvalidArgumentError):
        solve_finite(DI, -1.0, [1.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        solve_finite(DI, float("inf"), [1.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        solve_finite(DI, 1.0, [1.0])
    with pytest.raises(InvalidArgumentError):
        solve_finite(DI, 1.0, [1.0, float("nan")])
    with pytest.raises(InvalidArgumentError):
        solve_finite(DI, 1.0, [0.1, 0.0], N=1)


def test_cost_nonincreasing_in_horizon():
    costs = [solve_finite(DI, T, [0.0, 1.0], N=1024).cost for T in (3.0, 4.0, 6.0)]
    assert costs[0] >= costs[1] >= costs[2] >= 1.0


def test_two_input_system():
    sys = LtiSystem([[0.2, 1.0], [-1.0, 0.0]], np.eye(2))
    rep = solve_finite(sys, 2.0, [0.7, -0.4], N=1024)
    assert rep.feasible and not rep.polish_skipped
    assert abs(rep.cost - rep.discrete_cost) <= 1e-4 * (1 + rep.cost)
    traj = integrate(sys, [0.7, -0.4], "initial", rep.control)
    assert np.linalg.norm(traj.terminal) < 1e-8


def test_time_optimal_double_integrator():
    T, rep = solve_time_optimal(DI, [0.0, -1.0], N=2048)
    assert T == pytest.approx(1 + math.sqrt(2), abs=1e-9)
    assert rep.mode == ABNORMAL
    assert np.min(np.abs(rep.control.values)) == pytest.approx(1.0)
    assert rep.residuals.terminal_miss < 1e-8


def test_time_optimal_unreachable():
    from fuelopt.errors import UnreachableError
    # the unstable scalar system cannot reach the origin from |x0| >= 1
    with pytest.raises(UnreachableError):
        solve_time_optimal(SCALAR, [1.5], N=256, T_cap=50.0)


def test_infinite_horizon_scalar():
    rep = solve_infinite(SCALAR, [0.5], N=2048)
    assert rep.attained
    assert rep.cost == pytest.approx(math.log(2.0), abs=1e-9)
    assert rep.residuals.transversality < 1e-9
    assert rep.residuals.free_time_excess <= 1e-9


def test_infinite_horizon_stable_is_free():
    sys = LtiSystem([[-1.0, 0.0], [0.0, -2.0]], [[1.0], [1.0]])
    rep = solve_infinite(sys, [0.3, -0.2], N=512)
    assert rep.cost == 0.0 and rep.attained


def test_infinite_horizon_mixed_spectrum():
    # only the unstable coordinate costs fuel: mu = ln(1 / (1 - |x_u|))
    sys = LtiSystem([[1.0, 0.0], [0.0, -1.0]], [[1.0], [1.0]])
    rep = solve_infinite(sys, [0.5, 3.0], N=2048)
    assert rep.attained
    assert rep.cost == pytest.approx(math.log(2.0), abs=1e-7)


def test_infinite_horizon_double_integrator_is_estimate():
    rep = solve_infinite(DI, [0.0, 1.0], N=1024, max_doublings=5)
    assert rep.attained is False
    assert 1.0 <= rep.cost <= free_particle_mu(16.0) + 1e-6


def test_newton_shoot_linear_and_nonlinear():
    z, r, ok, cond = newton_shoot(lambda z: np.array([2 * z[0] - 1, z[1] + 3]), [0.0, 0.0], 1e-14)
    assert ok and np.allclose(z, [0.5, -3.0])
    z, r, ok, _ = newton_shoot(lambda z: np.array([z[0] ** 3 - 8]), [1.0], 1e-12)
    assert ok and z[0] == pytest.approx(2.0)
    # no root: reports failure rather than raising
    z, r, ok, _ = newton_shoot(lambda z: np.array([z[0] ** 2 + 1]), [1.0], 1e-12)
    assert not ok


def test_robustness_probe_shrinks_with_delta():
    devs = [robustness_probe(DI, 2.0, [0.5, -1.0], d, probes=4, N=512).max_deviation
            for d in (1e-2, 1e-3)]
    assert devs[1] < devs[0]
    with pytest.raises(InvalidArgumentError):
        robustness_probe(DI, 2.0, [0.5, -1.0], -1.0)
    with pytest.raises(InvalidArgumentError):
        robustness_probe(DI, 1.0, [5.0, 5.0], 1e-3)


def test_hyperbolic_controls_stable_under_refinement():
    from fuelopt.extremal import l1_distance
    for A, B, x0, T in [([[1.0, 0.0], [0.0, 2.0]], [[1.0], [1.0]], [0.2, 0.05], 3.0),
                        ([[0.5, 1.0], [-1.0, 0.5]], [[0.0], [1.0]], [0.3, -0.2], 4.0)]:
        sys = LtiSystem(A, B)
        a = solve_finite(sys, T, x0, N=1024)
        b = solve_finite(sys, T, x0, N=2048)
        assert l1_distance(a.control, b.control) <= 5e-3 * T
