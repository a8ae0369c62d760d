import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuelopt.convex import (_barrier_grad, _barrier_hessian_inv, _barrier_terms, dual_value,
                            farkas_value, feasibility_tol, infeasibility_certificate,
                            primal_value, solve_barrier, solve_pdhg, solve_program)
from fuelopt.errors import InvalidArgumentError
from fuelopt.extremal import KernelGrid
from fuelopt.lti import LtiSystem

DI = LtiSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])


@st.composite
def interior_points(draw, m):
    k = draw(st.integers(1, 6))
    rows = []
    for _ in range(k):
        t = draw(st.floats(1e-3, 1 - 1e-3))
        direction = np.array(draw(st.lists(st.floats(-1, 1), min_size=m, max_size=m)))
        frac = draw(st.floats(0.0, 0.999))
        nrm = np.linalg.norm(direction)
        u = direction / nrm * frac * t if nrm > 0 else np.zeros(m)
        rows.append((u, t))
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])


@given(st.integers(1, 3).flatmap(interior_points))
def test_closed_form_inverse_matches_dense_inverse(pt):
    u, t = pt
    g, H = _barrier_terms(u, t)
    Hi = _barrier_hessian_inv(u, t)
    for k in range(len(t)):
        ref = np.linalg.inv(H[k])
        np.testing.assert_allclose(Hi[k], ref, rtol=1e-6, atol=1e-9 * np.abs(ref).max())
        np.testing.assert_allclose(Hi[k] @ H[k], np.eye(H.shape[1]), atol=1e-6)
    np.testing.assert_allclose(_barrier_grad(u, t), g, rtol=1e-12)


def test_barrier_gradient_by_finite_differences():
    u = np.array([[0.3, -0.2]])
    t = np.array([0.6])
    f = lambda u, t: -np.log(t[0] ** 2 - u[0] @ u[0]) - np.log(1 - t[0])
    g = _barrier_grad(u, t)[0]
    eps = 1e-7
    num = []
    for j in range(2):
        du = np.zeros_like(u)
        du[0, j] = eps
        num.append((f(u + du, t) - f(u - du, t)) / (2 * eps))
    num.append((f(u, t + eps) - f(u, t - eps)) / (2 * eps))
    np.testing.assert_allclose(g, num, rtol=1e-6)


def _program(T=2.0, N=128, x0=(0.5, -1.0)):
    kg = KernelGrid(DI, T, N)
    return kg.cells, np.array(x0), kg.h


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_weak_duality(a, b):
    cells, x0, dt = _program()
    res = solve_barrier(cells, x0, dt, 1e-7)
    assert dual_value(cells, x0, dt, np.array([a, b])) <= res.primal + 1e-12


def test_barrier_certifies_gap():
    cells, x0, dt = _program(N=512)
    res = solve_barrier(cells, x0, dt, 1e-8)
    assert res.converged
    assert -1e-12 <= res.gap <= 1e-8
    assert res.residual <= feasibility_tol(cells, x0)
    assert res.primal == pytest.approx(1.0, abs=1e-8)
    assert primal_value(res.u, dt) == pytest.approx(res.primal, rel=1e-15)


def test_pdhg_agrees_with_barrier():
    cells, x0, dt = _program(T=3.0, N=64, x0=(0.3, 0.4))
    a = solve_barrier(cells, x0, dt, 1e-7)
    b = solve_pdhg(cells, x0, dt, 1e-6)
    assert a.converged and b.converged
    assert a.primal == pytest.approx(b.primal, abs=2e-6)
    # both dual values bound the same optimum
    assert b.dual <= a.primal + 1e-9 and a.dual <= b.primal + 1e-9


def test_two_input_program():
    sys = LtiSystem([[0.2, 1.0], [-1.0, 0.0]], np.eye(2))
    kg = KernelGrid(sys, 2.0, 256)
    x0 = np.array([0.7, -0.4])
    a = solve_barrier(kg.cells, x0, kg.h, 1e-7)
    b = solve_pdhg(kg.cells, x0, kg.h, 1e-6)
    assert a.converged and a.primal == pytest.approx(b.primal, abs=5e-6)


def test_thin_feasible_set_converges():
    # 1e-3 above the minimum time 1 + sqrt(2) from (0, -1)
    T = 1 + 2 ** 0.5 + 1e-3
    cells, x0, dt = _program(T=T, N=1024, x0=(0.0, -1.0))
    res = solve_barrier(cells, x0, dt, 1e-7 * (1 + T))
    assert res.converged and res.residual <= feasibility_tol(cells, x0)


def test_infeasibility_certificate():
    cells, x0, dt = _program(T=1.0, N=128, x0=(5.0, 5.0))
    cert = infeasibility_certificate(cells, x0, np.array([1.0, 0.0]), 1e-9)
    assert cert is not None
    p, val = cert
    assert val == pytest.approx(farkas_value(cells, x0, p))
    assert val > 0 and np.linalg.norm(p) == pytest.approx(1.0)
    cells, x0, dt = _program(T=2.0, N=128, x0=(0.5, -1.0))
    assert infeasibility_certificate(cells, x0, np.array([1.0, 0.0]), 1e-9) is None


def test_unknown_backend():
    cells, x0, dt = _program()
    with pytest.raises(InvalidArgumentError):
        solve_program(cells, x0, dt, 1e-6, backend="simplex")
