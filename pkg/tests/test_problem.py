import numpy as np
import pytest

from switchopt.benchmarks import build_problem
from switchopt.exceptions import InvalidSwitchOrder, MissingCostate
from switchopt.problem import (
    SwitchConfig, control_feasibility, case2_gradients,
    generalized_hamiltonian, numeric_case2_derivs, phase_control,
    phase_dynamics, phase_jacobian, validate_config,
)


@pytest.fixture
def catalyst():
    return build_problem("catalyst1", T=1.0)


@pytest.fixture
def catalyst2():
    return build_problem("catalyst2", T=1.0)


def test_validate_rejects_misordered(catalyst):
    with pytest.raises(InvalidSwitchOrder):
        validate_config(catalyst, SwitchConfig(s=np.array([0.7, 0.1])))


def test_validate_rejects_out_of_range(catalyst):
    with pytest.raises(InvalidSwitchOrder):
        validate_config(catalyst, SwitchConfig(s=np.array([0.1, 1.5])))


def test_validate_requires_costate(catalyst2):
    with pytest.raises(MissingCostate):
        validate_config(catalyst2, SwitchConfig(s=np.array([0.1, 0.7])))


def test_catalyst_full_mixing_dynamics(catalyst):
    # u=1 phase from a=1, b=0: da = -k1*a = -1, db = +k1*a = +1
    dx = phase_dynamics(catalyst, 0, 0.0, np.array([1.0, 0.0]))
    np.testing.assert_allclose(dx, [-1.0, 1.0], rtol=1e-14)


def test_catalyst_no_mixing_dynamics(catalyst):
    # u=0 phase: da = 0, db = -k3*b
    dx = phase_dynamics(catalyst, 2, 0.9, np.array([0.3, 0.4]))
    np.testing.assert_allclose(dx, [0.0, -0.4], rtol=1e-14)


def test_bressan_first_phase():
    prob = build_problem("bressan", T=10.0)
    dx = phase_dynamics(prob, 1, 4.0, np.array([2.0, 0.0, 0.0]))
    assert dx[0] == pytest.approx(0.5)   # singular phase: x1' = u = 1/2


def test_jacobson_dynamics():
    prob = build_problem("jacobson")
    dx = phase_dynamics(prob, 0, 0.0, np.array([0.0, 0.3, 0.0]))
    np.testing.assert_allclose(dx[:2], [0.3, -1.0], rtol=1e-14)
    # augmented state integrates the running cost
    assert dx[2] == pytest.approx(0.5 * 0.3 ** 2)


def test_feasibility_margin_interior(catalyst):
    # singular value 0.2271... sits 0.2271 above 0 and 0.7729 below 1
    m = control_feasibility(catalyst, 1, 0.5, np.array([0.7, 0.2]))
    assert m == pytest.approx(0.227142082708498, abs=1e-12)


def test_feasibility_margin_at_bound(catalyst):
    assert control_feasibility(catalyst, 0, 0.0, np.array([1.0, 0.0])) == 0.0


def test_phase_jacobian_matches_fd(catalyst):
    x = np.array([0.6, 0.25])
    J = phase_jacobian(catalyst, 1, 0.4, x)
    h = 1e-6
    for i in range(2):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        col = (phase_dynamics(catalyst, 1, 0.4, xp)
               - phase_dynamics(catalyst, 1, 0.4, xm)) / (2 * h)
        np.testing.assert_allclose(J[:, i], col, atol=1e-7)


def test_fd_jacobian_halving_quadratic():
    # central differences: quartering the error when the step is halved
    prob = build_problem("jacobson")
    x = np.array([0.4, -0.2, 0.1])
    exact = phase_jacobian(prob, 1, 2.0, x)   # analytic law_x path

    import dataclasses
    from switchopt.problem import ControlPhase
    ph = list(prob.phases)
    ph[1] = ControlPhase(1, "state", ph[1].law, ph[1].lower, ph[1].upper)
    stripped = dataclasses.replace(prob, phases=tuple(ph))

    errs = []
    for h in (1e-3, 5e-4):
        J = phase_jacobian(stripped, 1, 2.0, x, h_fd=h)
        errs.append(np.max(np.abs(J - exact)))
    if errs[1] > 1e-13:    # below that, roundoff dominates
        assert errs[0] / errs[1] > 3.0


def test_generalized_hamiltonian_zero_at_zero_costate(catalyst2):
    x = np.array([0.8, 0.15])
    p = np.array([1.1, 0.9])
    z = np.zeros(2)
    val = generalized_hamiltonian(catalyst2, 1, 0.3, x, p, z, z)
    assert val == 0.0
    gx, gp = case2_gradients(catalyst2, 1, 0.3, x, p, z, z)
    np.testing.assert_allclose(gx, 0.0, atol=1e-12)
    np.testing.assert_allclose(gp, 0.0, atol=1e-12)


def test_case2_analytic_matches_fd(catalyst2):
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(0.1, 0.9, size=2)
        p = rng.uniform(0.5, 1.5, size=2)
        y1 = rng.normal(size=2)
        y2 = rng.normal(size=2)
        gx, gp = case2_gradients(catalyst2, 1, 0.4, x, p, y1, y2)
        fx, fp = numeric_case2_derivs(catalyst2, 1, 0.4, x, p, (y1, y2))
        np.testing.assert_allclose(gx, fx, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(gp, fp, rtol=1e-5, atol=1e-6)


def test_case2_sympy_oracle(catalyst2):
    # symbolic gradients of H = y1.f(x,phi) - p.f_x(x,phi).y2 for the
    # p-dependent singular feedback
    sympy = pytest.importorskip("sympy")
    a, b, p1, p2 = sympy.symbols("a b p1 p2", positive=True)
    y11, y12, y21, y22 = sympy.symbols("y11 y12 y21 y22")
    k1, k2, k3 = 1, 10, 1
    gam = k2 - k3 - k1
    num = -k3 * (k1 * a * p2 + k2 * b * p1)
    den = (p1 * (k2 * b * gam - 2 * k1 * k2 * a)
           + p2 * (k1 * a * gam + 2 * k1 * k2 * b))
    u = num / den
    f1 = u * (k2 * b - k1 * a)
    f2 = u * (k1 * a - k2 * b) - (1 - u) * k3 * b
    fx = sympy.Matrix([[sympy.diff(f1, a), sympy.diff(f1, b)],
                       [sympy.diff(f2, a), sympy.diff(f2, b)]])
    # f_x here is the partial in x at frozen u, so substitute after freezing
    uu = sympy.Symbol("uu")
    f1f = uu * (k2 * b - k1 * a)
    f2f = uu * (k1 * a - k2 * b) - (1 - uu) * k3 * b
    fxf = sympy.Matrix([[sympy.diff(f1f, a), sympy.diff(f1f, b)],
                        [sympy.diff(f2f, a), sympy.diff(f2f, b)]])
    H = (y11 * f1 + y12 * f2
         - (sympy.Matrix([[p1, p2]]) @ fxf.subs(uu, u)
            @ sympy.Matrix([y21, y22]))[0, 0])
    syms = dict(zip((a, b, p1, p2, y11, y12, y21, y22),
                    (0.7, 0.2, 1.05, 0.92, 0.3, -0.4, 0.22, 0.11)))
    gx_o = [float(sympy.diff(H, v).subs(syms)) for v in (a, b)]
    gp_o = [float(sympy.diff(H, v).subs(syms)) for v in (p1, p2)]

    gx, gp = case2_gradients(
        catalyst2, 1, 0.5,
        np.array([0.7, 0.2]), np.array([1.05, 0.92]),
        np.array([0.3, -0.4]), np.array([0.22, 0.11]))
    np.testing.assert_allclose(gx, gx_o, rtol=1e-10)
    np.testing.assert_allclose(gp, gp_o, rtol=1e-10)


def test_phase_control_constant_vs_state(catalyst):
    u0 = phase_control(catalyst, 0, 0.1, np.array([0.9, 0.1]))
    assert u0[0] == 1.0
    u2 = phase_control(catalyst, 2, 0.9, np.array([0.9, 0.1]))
    assert u2[0] == 0.0


def test_eps_gap_default(catalyst):
    assert catalyst.eps_gap == pytest.approx(1e-6 * catalyst.T)
