import warnings
from itertools import product

import numpy as np
import pytest

from switchopt.benchmarks import build_problem
from switchopt.exceptions import NoStructure
from switchopt.warmstart import (
    DiscreteControlProblem, detect_structure, solve_tv_euler, tv_prox,
)


# ---------------------------------------------------------------------------
# tv_prox
# ---------------------------------------------------------------------------

def test_prox_constant_signal_fixed():
    y = np.full(8, 1.7)
    for w in (0.0, 0.1, 10.0):
        np.testing.assert_allclose(tv_prox(y, w), y, atol=1e-14)


def test_prox_huge_weight_gives_mean():
    rng = np.random.default_rng(5)
    y = rng.normal(size=9)
    z = tv_prox(y, weight=9 * (y.max() - y.min()))
    np.testing.assert_allclose(z, np.mean(y), atol=1e-12)


def test_prox_zero_weight_identity():
    y = np.array([3.0, -1.0, 2.0])
    np.testing.assert_allclose(tv_prox(y, 0.0), y)


def _prox_oracle(y, lam):
    """Enumerate difference-sign patterns and verify dual feasibility.

    For a candidate z, with partial sums w_i = sum_{j<=i}(y_j - z_j), z is
    the prox iff |w_i| <= lam everywhere, w_i = -lam*sign(z_{i+1}-z_i) at
    jumps, and the full sum vanishes.
    """
    n = y.size
    for pat in product((-1, 0, 1), repeat=n - 1):
        blocks = [[0]]
        for i, p in enumerate(pat):
            if p == 0:
                blocks[-1].append(i + 1)
            else:
                blocks.append([i + 1])
        z = np.empty(n)
        for blk in blocks:
            s_l = pat[blk[0] - 1] if blk[0] > 0 else 0
            s_r = pat[blk[-1]] if blk[-1] < n - 1 else 0
            z[blk] = np.mean(y[blk]) + lam * (s_r - s_l) / len(blk)
        w = np.cumsum(y - z)
        if abs(w[-1]) > 1e-9 or np.any(np.abs(w[:-1]) > lam + 1e-9):
            continue
        ok = True
        for i in range(n - 1):
            dz = z[i + 1] - z[i]
            if abs(dz) > 1e-12 and abs(w[i] + lam * np.sign(dz)) > 1e-9:
                ok = False
                break
        if ok:
            return z
    raise AssertionError("oracle found no optimal pattern")


def test_prox_matches_sign_pattern_oracle():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        y = rng.normal(size=n) * rng.uniform(0.5, 3.0)
        lam = float(rng.uniform(0.01, 1.5))
        np.testing.assert_allclose(tv_prox(y, lam), _prox_oracle(y, lam),
                                   atol=1e-8)


def test_prox_nonexpansive():
    rng = np.random.default_rng(77)
    for _ in range(200):
        n = int(rng.integers(2, 30))
        a = rng.normal(size=n) * 2
        b = rng.normal(size=n) * 2
        lam = float(rng.uniform(0.0, 2.0))
        da = tv_prox(a, lam) - tv_prox(b, lam)
        assert np.linalg.norm(da) <= np.linalg.norm(a - b) + 1e-10


# ---------------------------------------------------------------------------
# TV-regularized Euler solve
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def catalyst_dcp():
    prob = build_problem("catalyst1", T=1.0)
    return solve_tv_euler(prob, N=100, rho_tv=1e-3)


def test_solve_converges(catalyst_dcp):
    assert catalyst_dcp.converged
    assert np.all(catalyst_dcp.u >= catalyst_dcp.lower - 1e-12)
    assert np.all(catalyst_dcp.u <= catalyst_dcp.upper + 1e-12)


def test_solve_improves_on_midpoint_start(catalyst_dcp):
    prob = build_problem("catalyst1", T=1.0)
    # the iteration starts at the box midpoint; it must not end worse
    h = 1.0 / 100
    x = prob.x0.copy()
    for j in range(100):
        x = x + h * prob.f(x, np.array([0.5]))
    start = prob.C(x) + 1e-3 * 0.0
    assert catalyst_dcp.objective <= start + 1e-12


def test_huge_rho_flattens_control():
    prob = build_problem("catalyst1", T=1.0)
    dcp = solve_tv_euler(prob, N=100, rho_tv=1.0)
    assert np.sum(np.abs(np.diff(dcp.u, axis=1))) < 1e-8


def test_rho_sweep_tv_monotone():
    prob = build_problem("catalyst1", T=1.0)
    tvs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for rho in (1e-5, 1e-4, 1e-3, 1e-2):
            dcp = solve_tv_euler(prob, N=100, rho_tv=rho)
            tvs.append(np.sum(np.abs(np.diff(dcp.u, axis=1))))
    assert all(a >= b - 1e-9 for a, b in zip(tvs, tvs[1:]))


def test_max_iters_warns_not_raises():
    prob = build_problem("catalyst1", T=1.0)
    with pytest.warns(UserWarning):
        dcp = solve_tv_euler(prob, N=100, rho_tv=1e-3, max_iters=2)
    assert not dcp.converged


# ---------------------------------------------------------------------------
# structure detection
# ---------------------------------------------------------------------------

def test_detect_catalyst_structure(catalyst_dcp):
    est = detect_structure(catalyst_dcp)
    assert est.switch_times.size == 2
    assert abs(est.switch_times[0] - 0.136299034594555) < 0.02
    assert abs(est.switch_times[1] - 0.725230107591655) < 0.02
    assert est.phase_kinds == ("bang-high", "singular", "bang-low")


def test_detect_p0_estimate_near_case2_optimum(catalyst_dcp):
    # converged Case-2 optimum is the oracle (p0* roughly (1.011, 0.956))
    est = detect_structure(catalyst_dcp)
    assert np.max(np.abs(est.p0_estimate - [1.0109, 0.9557])) < 0.2


def test_detect_nothing_without_regularization():
    prob = build_problem("catalyst1", T=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dcp = solve_tv_euler(prob, N=100, rho_tv=0.0)
    with pytest.raises(NoStructure):
        detect_structure(dcp)


def _synthetic_dcp(u_values, edges, N=50, lo=0.0, hi=1.0):
    prob = build_problem("catalyst1", T=1.0)
    h = 1.0 / N
    u = np.empty((1, N))
    bounds_lo = np.full((1, N), lo)
    bounds_hi = np.full((1, N), hi)
    idx = 0
    for val, end in zip(u_values, edges + [N]):
        u[0, idx:end] = val
        idx = end
    return DiscreteControlProblem(
        prob=prob, N=N, h=h, rho_tv=1e-3, u=u,
        lower=bounds_lo, upper=bounds_hi, objective=0.0, iterations=1,
        converged=True, p0_estimate=np.zeros(2))


def test_detect_exact_synthetic_jumps():
    dcp = _synthetic_dcp([1.0, 0.4, 0.0], edges=[10, 35])
    est = detect_structure(dcp)
    np.testing.assert_allclose(est.switch_times, [10 / 50, 35 / 50],
                               atol=1e-12)
    assert est.phase_kinds == ("bang-high", "singular", "bang-low")


def test_detect_merges_smeared_jump():
    # a jump smeared over two mesh edges still yields one switch
    dcp = _synthetic_dcp([1.0, 0.5, 0.0], edges=[20, 21])
    est = detect_structure(dcp)
    assert est.switch_times.size == 1
    assert abs(est.switch_times[0] - 20.5 / 50) < 1.0 / 50


def test_detect_too_many_jumps():
    vals = [1.0, 0.0] * 5
    dcp = _synthetic_dcp(vals, edges=list(range(5, 50, 5)))
    with pytest.raises(NoStructure):
        detect_structure(dcp, k_max=4)


def test_structure_estimate_validation():
    from switchopt.warmstart import StructureEstimate
    with pytest.raises(ValueError):
        StructureEstimate(switch_times=np.array([0.5, 0.4]),
                          phase_kinds=("bang-high", "singular", "bang-low"),
                          p0_estimate=np.zeros(2), u_profile=np.zeros((1, 4)))
