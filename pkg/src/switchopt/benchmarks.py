"""Benchmark control problems: catalyst mixing, Jacobson, Bressan, Goddard.

Each builder returns an immutable ProblemDef with analytic dynamics
Jacobians, phase control laws, and a ReferenceSolution carrying the known
switch points (and objective / terminal time where available).  Integral
objectives are reformulated to terminal form by augmenting a state whose
dynamics is the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import ControlPhase, ProblemDef

__all__ = [
    "CatalystParams",
    "GoddardParams",
    "ReferenceSolution",
    "build_catalyst",
    "build_jacobson",
    "build_bressan",
    "build_goddard",
    "build_problem",
    "catalyst_singular_value",
    "catalyst_switch_times",
    "jacobson_root_residual",
    "PROBLEM_NAMES",
]

PROBLEM_NAMES = ("catalyst1", "catalyst2", "jacobson", "bressan", "goddard")


@dataclass(frozen=True)
class ReferenceSolution:
    """Known solution data used for reporting absolute errors."""

    s_star: np.ndarray
    T_star: Optional[float] = None
    C_star: Optional[float] = None
    u_sing: Optional[float] = None
    p0_star: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# catalyst mixing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalystParams:
    k1: float = 1.0
    k2: float = 10.0
    k3: float = 1.0
    T: float = 1.0
    case: int = 1

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) <= 0:
            raise ValueError("rate constants must be positive")


# optimal objective values for the standard rates (1, 10, 1)
_CATALYST_OBJECTIVES = {1.0: -0.048055685860877,
                        4.0: -0.191814356325161,
                        12.0: -0.477712020050041}


def catalyst_singular_value(params: CatalystParams) -> float:
    """Constant singular control a(1+a)/(b+(1+a)^2), a=sqrt(k3/k2), b=k1/k2."""
    a = math.sqrt(params.k3 / params.k2)
    b = params.k1 / params.k2
    return a * (1 + a) / (b + (1 + a) ** 2)


def catalyst_switch_times(params: CatalystParams) -> np.ndarray:
    a = math.sqrt(params.k3 / params.k2)
    b = params.k1 / params.k2
    s1 = math.log((1 + a + b) / a) / (params.k2 * (1 + b))
    s2 = params.T - math.log(1 + a) / params.k3
    return np.array([s1, s2])


def _catalyst_core(params):
    k1, k2, k3 = params.k1, params.k2, params.k3

    def f(x, u):
        a, b = x
        r = k1 * a - k2 * b
        return np.array([-u[0] * r, u[0] * r - (1 - u[0]) * k3 * b])

    def f_x(x, u):
        return np.array([[-u[0] * k1, u[0] * k2],
                         [u[0] * k1, -u[0] * k2 - (1 - u[0]) * k3]])

    def f_u(x, u):
        a, b = x
        r = k1 * a - k2 * b
        return np.array([[-r], [r + k3 * b]])

    return f, f_x, f_u


def _catalyst_singular_feedback(params):
    """Costate-feedback singular law from the vanishing second derivative of
    the switching function, plus its x- and p-gradients."""
    k1, k2, k3 = params.k1, params.k2, params.k3
    gam = k2 - k3 - k1

    def parts(x, p):
        a, b = x
        p1, p2 = p
        num = -k3 * (k1 * a * p2 + k2 * b * p1)
        den = (p1 * (k2 * b * gam - 2 * k1 * k2 * a)
               + p2 * (k1 * a * gam + 2 * k1 * k2 * b))
        return num, den

    def law(t, x, p):
        num, den = parts(x, p)
        return np.array([num / den])

    def grads(x, p):
        a, b = x
        p1, p2 = p
        num, den = parts(x, p)
        dnum_x = np.array([-k3 * k1 * p2, -k3 * k2 * p1])
        dnum_p = np.array([-k3 * k2 * b, -k3 * k1 * a])
        dden_x = np.array([-2 * k1 * k2 * p1 + k1 * gam * p2,
                           k2 * gam * p1 + 2 * k1 * k2 * p2])
        dden_p = np.array([k2 * b * gam - 2 * k1 * k2 * a,
                           k1 * a * gam + 2 * k1 * k2 * b])
        du_x = (dnum_x * den - num * dden_x) / den ** 2
        du_p = (dnum_p * den - num * dden_p) / den ** 2
        return du_x, du_p

    return law, grads


def _catalyst_case2_derivs(params, prob_phases, f, f_x, f_u, sing_grads):
    """Analytic gradients of the generalized Hamiltonian for every phase."""
    k1, k2, k3 = params.k1, params.k2, params.k3
    # derivative of the state Jacobian with respect to the scalar control
    M = np.array([[-k1, k2], [k1, -k2 + k3]])

    def derivs(j, t, x, p, y1, y2):
        ph = prob_phases[j]
        if ph.law_kind == "constant":
            u = np.atleast_1d(ph.law(t))
        else:
            u = np.atleast_1d(ph.law(t, x, p))
        fx = f_x(x, u)
        gx = y1 @ fx
        gp = -(fx @ y2)
        if ph.law_kind == "state_costate":
            dH_du = float(y1 @ f_u(x, u)[:, 0] - p @ (M @ y2))
            du_x, du_p = sing_grads(x, p)
            gx = gx + dH_du * du_x
            gp = gp + dH_du * du_p
        return gx, gp

    return derivs


def build_catalyst(params: CatalystParams = CatalystParams(),
                   constant_singular: bool = False) -> ProblemDef:
    """Catalyst mixing problem (bang-high, singular, bang-low).

    Case 1 uses the known constant singular control; Case 2 computes the
    singular control from the state-costate feedback law.  Setting
    ``constant_singular`` keeps the constant law in a Case-2 problem (the
    p-independent reduction used for consistency checks).
    """
    f, f_x, f_u = _catalyst_core(params)
    lo = lambda t: np.array([0.0])
    hi = lambda t: np.array([1.0])
    u_sing = catalyst_singular_value(params)

    case2 = params.case == 2
    if case2 and not constant_singular:
        sing_law, sing_grads = _catalyst_singular_feedback(params)
        singular = ControlPhase(1, "state_costate", sing_law, lo, hi)
    else:
        singular = ControlPhase(1, "constant",
                                lambda t, v=u_sing: np.array([v]), lo, hi)
        sing_grads = None

    phases = (
        ControlPhase(0, "constant", lambda t: np.array([1.0]), lo, hi),
        singular,
        ControlPhase(2, "constant", lambda t: np.array([0.0]), lo, hi),
    )
    case2_derivs = None
    if case2:
        case2_derivs = _catalyst_case2_derivs(params, phases, f, f_x, f_u,
                                              sing_grads)

    standard = (params.k1, params.k2, params.k3) == (1.0, 10.0, 1.0)
    reference = ReferenceSolution(
        s_star=catalyst_switch_times(params),
        C_star=_CATALYST_OBJECTIVES.get(params.T) if standard else None,
        u_sing=u_sing)

    return ProblemDef(
        name=f"catalyst{params.case}", n=2, m=1,
        x0=np.array([1.0, 0.0]), T=params.T, free_time=False,
        case=params.case, phases=phases, f=f, f_x=f_x, f_u=f_u,
        C=lambda x: x[0] + x[1] - 1.0,
        grad_C=lambda x: np.array([1.0, 1.0]),
        case2_derivs=case2_derivs, reference=reference)


# ---------------------------------------------------------------------------
# Jacobson-Gershwin-Lele
# ---------------------------------------------------------------------------

JACOBSON_S1 = 1.41376408763006415924


def jacobson_root_residual(s: float) -> float:
    """Residual of the switch-time equation; zero at the optimal s_1."""
    return 1 - s ** 2 / 2 - math.exp(2 * s - 10) * (-1 + 2 * s - s ** 2 / 2)


def build_jacobson() -> ProblemDef:
    """Double integrator with quadratic running cost on [0, 5] (bang, singular).

    The running cost is absorbed into a third state, so the objective is the
    terminal value of that state.
    """
    def f(x, u):
        return np.array([x[1], u[0], 0.5 * (x[0] ** 2 + x[1] ** 2)])

    def f_x(x, u):
        return np.array([[0.0, 1.0, 0.0],
                         [0.0, 0.0, 0.0],
                         [x[0], x[1], 0.0]])

    def f_u(x, u):
        return np.array([[0.0], [1.0], [0.0]])

    lo = lambda t: np.array([-1.0])
    hi = lambda t: np.array([1.0])
    phases = (
        ControlPhase(0, "constant", lambda t: np.array([-1.0]), lo, hi),
        ControlPhase(1, "state", lambda t, x: np.array([x[0]]), lo, hi,
                     law_x=lambda t, x: np.array([[1.0, 0.0, 0.0]])),
    )
    return ProblemDef(
        name="jacobson", n=3, m=1, x0=np.array([0.0, 1.0, 0.0]),
        T=5.0, free_time=False, case=1, phases=phases,
        f=f, f_x=f_x, f_u=f_u,
        C=lambda x: x[2], grad_C=lambda x: np.array([0.0, 0.0, 1.0]),
        reference=ReferenceSolution(s_star=np.array([JACOBSON_S1])))


# ---------------------------------------------------------------------------
# Bressan
# ---------------------------------------------------------------------------

def build_bressan(T: float = 10.0) -> ProblemDef:
    """Bressan's problem on [0, T]: bang u=-1 then singular u=1/2; s_1 = T/3."""
    if T <= 0:
        raise ValueError("T must be positive")

    def f(x, u):
        return np.array([u[0], -x[0], x[0] ** 2 - x[1]])

    def f_x(x, u):
        return np.array([[0.0, 0.0, 0.0],
                         [-1.0, 0.0, 0.0],
                         [2 * x[0], -1.0, 0.0]])

    def f_u(x, u):
        return np.array([[1.0], [0.0], [0.0]])

    lo = lambda t: np.array([-1.0])
    hi = lambda t: np.array([1.0])
    phases = (
        ControlPhase(0, "constant", lambda t: np.array([-1.0]), lo, hi),
        ControlPhase(1, "constant", lambda t: np.array([0.5]), lo, hi),
    )
    return ProblemDef(
        name="bressan", n=3, m=1, x0=np.zeros(3),
        T=T, free_time=False, case=1, phases=phases,
        f=f, f_x=f_x, f_u=f_u,
        C=lambda x: x[2], grad_C=lambda x: np.array([0.0, 0.0, 1.0]),
        reference=ReferenceSolution(s_star=np.array([T / 3.0])))


# ---------------------------------------------------------------------------
# Goddard rocket (free terminal time, penalized terminal mass)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoddardParams:
    u_max: float = 193.0
    g: float = 32.174
    sigma: float = 5.4915e-5
    c: float = 1580.9425
    h0: float = 23800.0
    beta_pen: float = -2.31774080357308e4
    rho_pen: float = 1e5

    def __post_init__(self):
        if min(self.u_max, self.g, self.sigma, self.c, self.h0) <= 0:
            raise ValueError("physical constants must be positive")


GODDARD_REFERENCE = ReferenceSolution(
    s_star=np.array([13.75532627577406, 21.98890645593362]),
    T_star=42.88910958027504)


def build_goddard(params: GoddardParams = GoddardParams(),
                  T_init: float = 42.0) -> ProblemDef:
    """Goddard rocket: full thrust, singular thrust, coast; free terminal time.

    The m >= 1 state constraint is replaced by the penalty
    beta (m(T)-1) + rho/2 (m(T)-1)^2 added to -h(T).  The drag factor uses
    exp(-h/h0) in both the dynamics and the singular thrust law, and gravity
    enters as the weight m*g (vdot = (u - drag)/m - g), which is the only
    form consistent with the m*g terms of the singular thrust law.
    """
    g, sig, c, h0 = params.g, params.sigma, params.c, params.h0

    def f(x, u):
        h, v, m = x
        drag = sig * v * v * math.exp(-h / h0)
        return np.array([v, (u[0] - drag) / m - g, -u[0] / c])

    def f_x(x, u):
        h, v, m = x
        E = math.exp(-h / h0)
        drag = sig * v * v * E
        return np.array([
            [0.0, 1.0, 0.0],
            [drag / (m * h0), -2 * sig * v * E / m, -(u[0] - drag) / m ** 2],
            [0.0, 0.0, 0.0]])

    def f_u(x, u):
        return np.array([[0.0], [1.0 / x[2]], [-1.0 / c]])

    def u_sing(t, x):
        h, v, m = x
        E = math.exp(-h / h0)
        kap = c / v
        A = 1 + 4 * kap + 2 * kap ** 2
        B = (c ** 2 / (h0 * g)) * (1 + v / c) - 1 - 2 * kap
        return np.array([sig * v * v * E + m * g + (m * g / A) * B])

    def u_sing_x(t, x):
        h, v, m = x
        E = math.exp(-h / h0)
        kap = c / v
        dkap = -c / v ** 2
        A = 1 + 4 * kap + 2 * kap ** 2
        B = (c ** 2 / (h0 * g)) * (1 + v / c) - 1 - 2 * kap
        dA = (4 + 4 * kap) * dkap
        dB = c / (h0 * g) - 2 * dkap
        du_h = -sig * v * v * E / h0
        du_v = 2 * sig * v * E + m * g * (dB * A - B * dA) / A ** 2
        du_m = g * (1 + B / A)
        return np.array([[du_h, du_v, du_m]])

    lo = lambda t: np.array([0.0])
    hi = lambda t: np.array([params.u_max])
    phases = (
        ControlPhase(0, "constant", lambda t: np.array([params.u_max]), lo, hi),
        ControlPhase(1, "state", u_sing, lo, hi, law_x=u_sing_x),
        ControlPhase(2, "constant", lambda t: np.array([0.0]), lo, hi),
    )

    beta, rho = params.beta_pen, params.rho_pen

    def C(x):
        dm = x[2] - 1.0
        return -x[0] + beta * dm + 0.5 * rho * dm * dm

    def grad_C(x):
        return np.array([-1.0, 0.0, beta + rho * (x[2] - 1.0)])

    return ProblemDef(
        name="goddard", n=3, m=1, x0=np.array([0.0, 0.0, 3.0]),
        T=T_init, free_time=True, case=1, phases=phases,
        f=f, f_x=f_x, f_u=f_u, C=C, grad_C=grad_C,
        reference=GODDARD_REFERENCE)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def build_problem(name: str, T: Optional[float] = None) -> ProblemDef:
    """Build a benchmark by CLI name: catalyst1, catalyst2, jacobson,
    bressan, goddard."""
    if name == "catalyst1":
        return build_catalyst(CatalystParams(T=T if T is not None else 1.0))
    if name == "catalyst2":
        return build_catalyst(
            CatalystParams(T=T if T is not None else 1.0, case=2))
    if name == "jacobson":
        return build_jacobson()
    if name == "bressan":
        return build_bressan(T if T is not None else 10.0)
    if name == "goddard":
        return build_goddard(T_init=T if T is not None else 42.0)
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
