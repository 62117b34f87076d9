"""Adaptive Dormand-Prince (4,5) integration of piecewise-smooth ODE systems.

The right-hand side may change discontinuously at a known, ordered list of
breakpoints.  Integration is hard-restarted at every breakpoint: no accepted
step straddles a segment boundary and the step-size controller is reset, so
fifth-order accuracy is retained on each smooth piece.  Backward integration
is implemented by time reflection, giving a single forward code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import NonFiniteState, StepLimitExceeded, StepUnderflow

__all__ = [
    "IntegratorSettings",
    "PiecewiseOde",
    "DenseTrajectory",
    "integrate_piecewise",
    "integrate_with_quadrature",
]

# Dormand-Prince 5(4) tableau (7 stages, FSAL).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: coefficients of the embedded error estimate
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_ALPHA = 0.7 / 5  # PI controller: proportional exponent
_BETA = 0.4 / 5   # PI controller: integral exponent
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances and step bounds for the adaptive integrator."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-8
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = np.inf
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class PiecewiseOde:
    """ODE whose right-hand side is selected by the active segment.

    ``segments`` is the ordered breakpoint list; segment j spans
    [segments[j], segments[j+1]] and ``rhs(j, t, x)`` is only evaluated
    with t inside that closed interval.
    """

    dim: int
    segments: Sequence[float]
    rhs: Callable[[int, float, np.ndarray], np.ndarray]

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float)
        if seg.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(seg) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "segments", seg)


@dataclass
class DenseTrajectory:
    """Forward-sweep output: uniform samples plus segment-boundary states.

    ``step_times``/``step_states``/``step_derivs`` hold the raw accepted-step
    nodes (with duplicates removed at restarts); the uniform samples are a
    Hermite re-interpolation of those nodes, intended for reports and plots.
    """

    sample_times: np.ndarray
    sample_states: np.ndarray
    breakpoint_states: list[np.ndarray]
    step_times: np.ndarray = field(repr=False, default=None)
    step_states: np.ndarray = field(repr=False, default=None)
    step_derivs: np.ndarray = field(repr=False, default=None)


def _error_norm(err, y_old, y_new, settings):
    scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _integrate_segment(f, t0, t1, y0, settings, nodes, budget):
    """Integrate dy/dt = f(t, y) over [t0, t1], appending accepted nodes.

    Returns (y_end, steps_used).  ``nodes`` receives (t, y, f(t, y)) triples
    including the segment start.
    """
    t, y = t0, np.array(y0, dtype=float)
    k1 = f(t, y)
    if not np.all(np.isfinite(k1)):
        raise NonFiniteState(f"non-finite derivative at t={t}")
    nodes.append((t, y.copy(), k1.copy()))

    h = min(settings.h_init, settings.h_max, t1 - t0)
    err_prev = 1.0
    steps = 0
    k = np.empty((7, y.size))

    while t < t1:
        if steps >= budget:
            raise StepLimitExceeded(f"exceeded {settings.max_steps} steps")
        clipped = h >= t1 - t
        h_try = t1 - t if clipped else h

        k[0] = k1
        failed = False
        for i in range(1, 7):
            yi = y + h_try * (k[:i].T @ _A[i])
            k[i] = f(t + _C[i] * h_try, yi)
            if not np.all(np.isfinite(k[i])):
                failed = True
                break
        if not failed:
            y_new = y + h_try * (_B5 @ k)
            failed = not np.all(np.isfinite(y_new))

        steps += 1
        if failed:
            h = 0.5 * h_try
            if h < settings.h_min:
                raise NonFiniteState(f"non-finite state near t={t}")
            continue

        err = _error_norm(h_try * (_E @ k), y, y_new, settings)
        if err <= 1.0:
            t = t1 if clipped else t + h_try
            y = y_new
            k1 = k[6]  # FSAL
            nodes.append((t, y.copy(), k1.copy()))
            fac = _FAC_MAX if err == 0.0 else _SAFETY * err ** (-_ALPHA) * err_prev ** _BETA
            err_prev = max(err, 1e-10)
            h = min(h_try * min(_FAC_MAX, max(_FAC_MIN, fac)), settings.h_max)
        else:
            fac = max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))
            h = h_try * min(1.0, fac)
            if h < settings.h_min:
                raise StepUnderflow(
                    f"step size {h:.3e} below h_min at t={t}; "
                    "the problem may be stiff or blowing up"
                )
    return y, steps


def _hermite_resample(nodes, sample_times):
    """Cubic Hermite interpolation of accepted-step nodes at given times."""
    times = np.array([n[0] for n in nodes])
    states = np.array([n[1] for n in nodes])
    derivs = np.array([n[2] for n in nodes])
    out = np.empty((sample_times.size, states.shape[1]))
    idx = np.searchsorted(times, sample_times, side="right") - 1
    idx = np.clip(idx, 0, times.size - 2)
    for m, (tq, i) in enumerate(zip(sample_times, idx)):
        h = times[i + 1] - times[i]
        if h <= 0:  # duplicated node at a restart
            out[m] = states[i + 1]
            continue
        s = (tq - times[i]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out[m] = (h00 * states[i] + h01 * states[i + 1]
                  + h * (h10 * derivs[i] + h11 * derivs[i + 1]))
    return times, states, derivs, out


def _reflect(ode: PiecewiseOde) -> PiecewiseOde:
    a, b = ode.segments[0], ode.segments[-1]
    mirrored = (a + b) - ode.segments[::-1]
    nseg = len(ode.segments) - 1

    def rhs(j, t, x):
        return -ode.rhs(nseg - 1 - j, (a + b) - t, x)

    return PiecewiseOde(dim=ode.dim, segments=mirrored, rhs=rhs)


def integrate_piecewise(ode, x_start, direction="forward", settings=None,
                        sample_count=0):
    """Integrate a piecewise ODE across all segments with hard restarts.

    ``direction`` is "forward" (from segments[0]) or "backward" (from
    segments[-1], realized by time reflection).  The returned trajectory is
    always expressed in original time with increasing sample_times;
    breakpoint_states[i] is the state at ode.segments[i].
    """
    settings = settings or IntegratorSettings()
    x_start = np.asarray(x_start, dtype=float)
    if x_start.size != ode.dim:
        raise ValueError(f"x_start has dimension {x_start.size}, expected {ode.dim}")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")

    work = _reflect(ode) if direction == "backward" else ode
    nodes: list[tuple] = []
    bp_states = [x_start.copy()]
    y = x_start
    budget = settings.max_steps
    used = 0
    for j in range(len(work.segments) - 1):
        y, steps = _integrate_segment(
            lambda t, x, j=j: work.rhs(j, t, x),
            work.segments[j], work.segments[j + 1], y, settings, nodes,
            budget - used)
        used += steps
        bp_states.append(y.copy())

    n_samp = max(2, sample_count) if sample_count else 2
    samp_t = np.linspace(work.segments[0], work.segments[-1], n_samp)
    times, states, derivs, samp_x = _hermite_resample(nodes, samp_t)

    if direction == "backward":
        a, b = ode.segments[0], ode.segments[-1]
        samp_t = ((a + b) - samp_t)[::-1]
        samp_x = samp_x[::-1]
        times = ((a + b) - times)[::-1]
        states = states[::-1]
        derivs = -derivs[::-1]
        bp_states = bp_states[::-1]

    return DenseTrajectory(
        sample_times=samp_t, sample_states=samp_x,
        breakpoint_states=bp_states,
        step_times=times, step_states=states, step_derivs=derivs)


def integrate_with_quadrature(ode, x_start, integrand, direction="forward",
                              settings=None, sample_count=0):
    """Integrate the ODE while accumulating a scalar quadrature state.

    Returns (trajectory, value) where value = integral of integrand(j, t, x)
    over the full interval (with respect to increasing t, regardless of the
    traversal direction).
    """
    def rhs(j, t, z):
        dx = ode.rhs(j, t, z[:-1])
        return np.append(dx, integrand(j, t, z[:-1]))

    aug = PiecewiseOde(dim=ode.dim + 1, segments=ode.segments, rhs=rhs)
    z0 = np.append(np.asarray(x_start, dtype=float), 0.0)
    traj = integrate_piecewise(aug, z0, direction, settings, sample_count)

    if direction == "backward":
        # reflection negates the quadrature rate; start value sits at t = b
        quad = traj.breakpoint_states[-1][-1] - traj.breakpoint_states[0][-1]
    else:
        quad = traj.breakpoint_states[-1][-1]

    traj.sample_states = traj.sample_states[:, :-1]
    traj.breakpoint_states = [s[:-1] for s in traj.breakpoint_states]
    traj.step_states = traj.step_states[:, :-1]
    traj.step_derivs = traj.step_derivs[:, :-1]
    return traj, float(quad)
