"""Finite-dimensional minimization over switch points, p0, and T.

The switch points live on the chain polytope {eps <= s_1, s_j + eps <=
s_{j+1}, s_k + eps <= T}, whose Euclidean projection reduces to bounded
isotonic regression (pool-adjacent-violators then clipping).  A projected
limited-memory quasi-Newton iteration with Armijo backtracking along the
projected arc drives the switch points (plus the initial costate and, for
free-time problems, the horizon) to stationarity.  Single-switch problems
can instead use a secant iteration on the switch-point derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InfeasiblePolytope, LineSearchFailure, \
    MaxItersExceeded, SecantDivergence, SwitchOptError
from .gradients import evaluate_gradient, forward_sweep
from .odeint import IntegratorSettings
from .problem import SwitchConfig

__all__ = [
    "OptimizeSettings",
    "SolveReport",
    "project_ordered",
    "minimize",
    "secant_switch",
    "derivative_profile",
]


@dataclass(frozen=True)
class OptimizeSettings:
    """Knobs for minimize/secant_switch."""

    stat_tol: float = 1e-8
    max_iters: int = 300
    ls_shrink: float = 0.5
    ls_c1: float = 1e-4
    memory: int = 10
    eps_gap: Optional[float] = None  # default: the problem's eps_gap

    def __post_init__(self):
        if not (0 < self.ls_shrink < 1):
            raise ValueError("need 0 < ls_shrink < 1")
        if not (0 < self.ls_c1 < 0.5):
            raise ValueError("need 0 < ls_c1 < 1/2")
        if self.stat_tol <= 0 or self.memory < 1:
            raise ValueError("stat_tol > 0 and memory >= 1 required")


@dataclass
class SolveReport:
    """Outcome of one solve: final configuration plus diagnostics."""

    final_cfg: SwitchConfig
    objective: float
    iterations: int
    gradient_evals: int
    converged: bool
    stationarity: float
    worst_margin: float
    reference_errors: Optional[dict] = None
    message: str = ""

    def to_dict(self) -> dict:
        cfg = self.final_cfg
        return {
            "s": [float(v) for v in cfg.s],
            "p0": None if cfg.p0 is None else [float(v) for v in cfg.p0],
            "T": None if cfg.T is None else float(cfg.T),
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "gradient_evals": int(self.gradient_evals),
            "converged": bool(self.converged),
            "stationarity": float(self.stationarity),
            "worst_margin": float(self.worst_margin),
            "reference_errors": self.reference_errors,
            "message": self.message,
        }


# ---------------------------------------------------------------------------
# chain-polytope projection
# ---------------------------------------------------------------------------

def _pav_nondecreasing(y):
    """Isotonic (nondecreasing, unit-weight) regression via PAV."""
    vals = []
    counts = []
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            v2, c2 = vals.pop(), counts.pop()
            v1, c1 = vals.pop(), counts.pop()
            vals.append((v1 * c1 + v2 * c2) / (c1 + c2))
            counts.append(c1 + c2)
    out = np.empty(len(y))
    i = 0
    for v, c in zip(vals, counts):
        out[i:i + c] = v
        i += c
    return out


def project_ordered(v, T, eps_gap):
    """Euclidean projection onto {eps <= s_1, s_j + eps <= s_{j+1} <= T - eps}.

    Shifting coordinate j by j*eps turns the gapped chain into a bounded
    monotone cone, where the projection is isotonic regression clipped to
    the box.  Idempotent by construction.
    """
    v = np.asarray(v, dtype=float)
    k = v.size
    upper = T - (k + 1) * eps_gap
    if upper < 0:
        raise InfeasiblePolytope(
            f"horizon {T} cannot hold {k} switch points with gap {eps_gap}")
    shift = eps_gap * np.arange(1, k + 1)
    w = np.clip(_pav_nondecreasing(v - shift), 0.0, upper)
    return w + shift


# ---------------------------------------------------------------------------
# projected L-BFGS
# ---------------------------------------------------------------------------

class _Vars:
    """Packing of the decision vector and its feasibility projection.

    Fixed-time:  z = [s, p0?].  Free-time: z = [sigma, p0?, T] where sigma
    are the switch points in tau = t/T units, matching the rescaling under
    which dC/dT is derived (the physical switch points scale with T).
    """

    def __init__(self, prob, cfg0, eps_gap):
        self.prob = prob
        self.free_time = prob.free_time
        self.k = prob.k
        self.np0 = prob.n if prob.case == 2 else 0
        self.T0 = float(cfg0.T) if cfg0.T is not None else float(prob.T)
        self.eps_gap = eps_gap

    def pack(self, cfg):
        T = float(cfg.T) if cfg.T is not None else self.T0
        s = cfg.s / T if self.free_time else cfg.s
        parts = [s]
        if self.np0:
            parts.append(cfg.p0)
        if self.free_time:
            parts.append([T])
        return np.concatenate(parts)

    def unpack(self, z):
        k, np0 = self.k, self.np0
        T = float(z[-1]) if self.free_time else self.T0
        s = z[:k] * T if self.free_time else z[:k].copy()
        p0 = z[k:k + np0].copy() if np0 else None
        return SwitchConfig(s=s, p0=p0, T=T if self.free_time else None)

    def project(self, z):
        out = z.copy()
        if self.free_time:
            T = max(float(z[-1]), (self.k + 1) * self.eps_gap)
            out[-1] = T
            out[:self.k] = project_ordered(z[:self.k], 1.0, self.eps_gap / self.T0)
        else:
            out[:self.k] = project_ordered(z[:self.k], self.T0, self.eps_gap)
        return out

    def gradient(self, bundle, T):
        parts = [bundle.d_s * T if self.free_time else bundle.d_s]
        if self.np0:
            parts.append(bundle.d_p0)
        if self.free_time:
            parts.append([bundle.d_T])
        return np.concatenate(parts)


def _two_loop(g, pairs, gamma, base):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    q *= gamma * base
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize(prob, cfg0, settings=None, ode_settings=None):
    """Projected L-BFGS minimization of the objective over (s, p0, T).

    Gradients come from the forward/backward sweep; feasibility of the
    switch ordering is maintained by chain projection at every trial point.
    Converges when the projected-gradient infinity norm drops below
    stat_tol.
    """
    settings = settings or OptimizeSettings()
    ode_settings = ode_settings or IntegratorSettings()
    eps_gap = settings.eps_gap if settings.eps_gap is not None else prob.eps_gap
    var = _Vars(prob, cfg0, eps_gap)

    z = var.project(var.pack(cfg0))
    n_evals = 0

    def eval_at(zq):
        nonlocal n_evals
        n_evals += 1
        cfg = var.unpack(zq)
        return evaluate_gradient(prob, cfg, ode_settings,
                                 with_d_T=prob.free_time)

    bundle = eval_at(z)
    fz = bundle.objective
    g = var.gradient(bundle, var.unpack(z).T or var.T0)
    # diagonal pre-scaling: cap the first trial step at ~1% of the variable
    # scale per coordinate, so badly conditioned objectives (large penalty
    # weights) cannot fling the iterate out of the integrable region
    scale = np.maximum(np.abs(z), 1.0)
    base = np.minimum(1.0 / np.maximum(np.abs(g), 1.0),
                      0.01 * scale / np.maximum(np.abs(g), 1e-12))

    pairs = []
    gamma = 1.0
    converged = False
    it = 0
    message = ""
    try:
        for it in range(1, settings.max_iters + 1):
            pg = np.max(np.abs(z - var.project(z - g)))
            if pg <= settings.stat_tol:
                converged = True
                break

            d = _two_loop(-g, pairs, gamma, base)
            if d @ g >= 0:
                pairs.clear()
                d = -g * base

            alpha, accepted = 1.0, False
            for _ in range(60):
                z_new = var.project(z + alpha * d)
                step = z_new - z
                if np.max(np.abs(step)) < 1e-16:
                    break
                pred = g @ step
                try:
                    bundle_new = eval_at(z_new)
                except SwitchOptError:
                    # trial point not integrable; back off
                    alpha *= settings.ls_shrink
                    continue
                if bundle_new.objective <= fz + settings.ls_c1 * min(pred, 0.0):
                    accepted = True
                    break
                alpha *= settings.ls_shrink
            if not accepted:
                if pairs:
                    pairs.clear()
                    continue
                if pg <= 100.0 * settings.stat_tol:
                    # no decrease possible at the integration accuracy
                    # floor; the iterate is stationary to working precision
                    message = (f"line search stalled at projected "
                               f"gradient {pg:.3e}")
                    break
                raise LineSearchFailure(
                    f"{prob.name}: no decrease at iteration {it} "
                    f"(projected gradient {pg:.3e})")

            g_new = var.gradient(bundle_new, var.unpack(z_new).T or var.T0)
            sk, yk = z_new - z, g_new - g
            sy = sk @ yk
            if sy > 1e-12 * np.linalg.norm(sk) * np.linalg.norm(yk):
                pairs.append((sk, yk, 1.0 / sy))
                if len(pairs) > settings.memory:
                    pairs.pop(0)
                gamma = sy / (yk @ (yk * base))
            z, fz, g, bundle = z_new, bundle_new.objective, g_new, bundle_new
        else:
            raise MaxItersExceeded(
                f"{prob.name}: {settings.max_iters} iterations, "
                f"projected gradient {pg:.3e} > {settings.stat_tol:.3e}")
    except (MaxItersExceeded, LineSearchFailure) as exc:
        message = str(exc)
        raise

    cfg = var.unpack(z)
    pg = float(np.max(np.abs(z - var.project(z - g))))
    return SolveReport(
        final_cfg=cfg,
        objective=fz,
        iterations=it,
        gradient_evals=n_evals,
        converged=converged,
        stationarity=pg,
        worst_margin=float(np.min(bundle.feasibility_margins)),
        reference_errors=reference_errors(prob, cfg, fz),
        message=message)


def reference_errors(prob, cfg, objective) -> Optional[dict]:
    """Absolute errors against the problem's reference solution, if any."""
    ref = prob.reference
    if ref is None:
        return None
    out = {}
    for i, s_star in enumerate(ref.s_star):
        out[f"s{i + 1}"] = abs(float(cfg.s[i] - s_star))
    if ref.C_star is not None:
        out["C"] = abs(float(objective - ref.C_star))
    if ref.T_star is not None and cfg.T is not None:
        out["T"] = abs(float(cfg.T - ref.T_star))
    return out


# ---------------------------------------------------------------------------
# secant iteration for single-switch problems
# ---------------------------------------------------------------------------

def secant_switch(prob, bracket, settings=None, ode_settings=None):
    """Secant iteration on s -> dC/ds_1 for a single-switch problem.

    Terminates when |dC/ds_1| <= stat_tol or the update falls below
    1e-14 * T.  Raises SecantDivergence if an iterate leaves (0, T), the
    budget runs out, or the found stationary point has negative derivative
    slope (a local maximum of the objective, not a minimum).
    """
    if prob.k != 1:
        raise ValueError("secant_switch requires a single-switch problem")
    settings = settings or OptimizeSettings()
    ode_settings = ode_settings or IntegratorSettings()
    T = float(prob.T)

    def g(s):
        cfg = SwitchConfig(s=np.array([s]))
        return evaluate_gradient(prob, cfg, ode_settings).d_s[0]

    s_prev, s_cur = float(bracket[0]), float(bracket[1])
    g_prev, g_cur = g(s_prev), g(s_cur)
    for it in range(2, settings.max_iters + 2):
        if abs(g_cur) <= settings.stat_tol or abs(s_cur - s_prev) <= 1e-14 * T:
            slope = (g_cur - g_prev) / (s_cur - s_prev) \
                if s_cur != s_prev else 1.0
            if slope < 0:
                raise SecantDivergence(
                    f"{prob.name}: stationary point at s={s_cur:.12g} has "
                    "negative derivative slope (local maximum, not a minimum)")
            return s_cur, it
        denom = g_cur - g_prev
        if denom == 0:
            raise SecantDivergence(f"{prob.name}: flat secant at s={s_cur:.6g}")
        s_next = s_cur - g_cur * (s_cur - s_prev) / denom
        if not (prob.eps_gap <= s_next <= T - prob.eps_gap):
            raise SecantDivergence(
                f"{prob.name}: iterate {s_next:.6g} left (0, {T})")
        s_prev, g_prev = s_cur, g_cur
        s_cur = s_next
        g_cur = g(s_cur)
    raise SecantDivergence(
        f"{prob.name}: no convergence in {settings.max_iters} iterations")


def derivative_profile(prob, s_grid, settings=None, ode_settings=None):
    """Table of (s, dC/ds_1) over a grid, for single-switch problems."""
    if prob.k != 1:
        raise ValueError("derivative_profile requires a single-switch problem")
    ode_settings = ode_settings or IntegratorSettings()
    rows = np.empty((len(s_grid), 2))
    for i, s in enumerate(s_grid):
        cfg = SwitchConfig(s=np.array([float(s)]))
        rows[i] = (s, evaluate_gradient(prob, cfg, ode_settings).d_s[0])
    return rows
