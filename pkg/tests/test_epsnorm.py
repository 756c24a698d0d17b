import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epsctl.epsnorm import (
    GUARD,
    alpha_sweep,
    eps_alpha_norm,
    eps_norm,
    golden_section,
    minimize_over_alpha,
)
from epsctl.errors import (
    AllInfeasible,
    AlphaOutOfRange,
    BadInterval,
    InputError,
    UnstableSystem,
)
from epsctl.sysmodel import LtiSystem

from conftest import admissible_alpha, random_stable_system


def scalar_closed_form(alpha, a=0.5):
    return math.sqrt(1.0 / ((1.0 - alpha) * (1.0 - a * a / alpha)))


def grid_oracle(f, lo, hi, points=100_000):
    xs = np.linspace(lo, hi, points)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    return xs[i], vals[i]


def test_eps_alpha_norm_examples(scalar_lti):
    assert eps_alpha_norm(scalar_lti, 0.5) == pytest.approx(2.0, rel=1e-14)
    S = LtiSystem(np.zeros((2, 2)), np.eye(2), np.eye(2))
    assert eps_alpha_norm(S, 0.5) == pytest.approx(2.0, rel=1e-14)


def test_eps_alpha_norm_closed_form(scalar_lti):
    for alpha in (0.26, 0.4, 0.5, 0.8, 0.99):
        assert eps_alpha_norm(scalar_lti, alpha) == pytest.approx(scalar_closed_form(alpha), rel=1e-12)


def test_eps_alpha_norm_paths_agree(rng):
    S = random_stable_system(rng, n=4, m=2, p=2)
    alpha = admissible_alpha(rng, S)
    p_path = eps_alpha_norm(S, alpha, cross_check=False)
    S_wide = LtiSystem(S.A, S.B, np.vstack([S.C] * 5))
    q_only = eps_alpha_norm(S_wide, alpha)  # m=2, p=10: Q-path only
    assert q_only == pytest.approx(math.sqrt(5) * p_path, rel=1e-9)


def test_eps_alpha_norm_errors(scalar_lti):
    with pytest.raises(AlphaOutOfRange):
        eps_alpha_norm(scalar_lti, 0.2)
    with pytest.raises(UnstableSystem):
        eps_alpha_norm(LtiSystem([[1.0]], [[1.0]], [[1.0]]), 0.5)
    with pytest.raises(InputError):
        eps_alpha_norm(LtiSystem([[0.5]], [[1.0]], [[1.0]], [[1.0]]), 0.5)


def test_eps_norm_scalar_interior(scalar_lti):
    res = eps_norm(scalar_lti)
    x, v = grid_oracle(scalar_closed_form, 0.25 + GUARD, 1 - GUARD)
    assert res.value == pytest.approx(2.0, abs=1e-6)
    assert res.alpha_star == pytest.approx(0.5, abs=1e-4)
    assert res.value <= v + 1e-9
    assert abs(res.alpha_star - x) < 1e-4
    assert not res.boundary_minimum


def test_eps_norm_boundary_infimum():
    res = eps_norm(LtiSystem([[0.0]], [[1.0]], [[1.0]]))
    assert res.value <= 1.01
    assert res.alpha_star == pytest.approx(GUARD)
    assert res.boundary_minimum


def test_eps_norm_zero_matrix_two_states():
    res = eps_norm(LtiSystem(np.zeros((2, 2)), np.eye(2), np.eye(2)))
    assert res.value <= math.sqrt(2) * 1.005
    assert res.boundary_minimum


def test_eps_norm_rejects_unstable():
    with pytest.raises(UnstableSystem):
        eps_norm(LtiSystem([[1.01]], [[1.0]], [[1.0]]))


def test_sweep_quadratic():
    curve = alpha_sweep(lambda a: (a - 0.3) ** 2, 0.01, 0.99, 99)
    assert len(curve) == 99 and curve.all_feasible
    assert curve.alphas[curve.argmin()] == pytest.approx(0.3, abs=1e-12)
    assert np.all(np.diff(curve.alphas) > 0)


def test_sweep_scalar_curve(scalar_lti):
    curve = alpha_sweep(lambda a: eps_alpha_norm(scalar_lti, a), 0.26, 0.99, 74)
    assert curve.all_feasible
    assert abs(curve.alphas[curve.argmin()] - 0.5) < 0.01
    v = curve.values
    i = curve.argmin()
    assert np.all(np.diff(v[: i + 1]) < 0) and np.all(np.diff(v[i:]) > 0)


def test_sweep_records_infeasible_points(scalar_lti):
    curve = alpha_sweep(lambda a: eps_alpha_norm(scalar_lti, a), 0.01, 0.99, 50)
    feasible = [p.feasible for p in curve.points]
    assert not all(feasible) and any(feasible)
    assert all(p.feasible == (p.alpha > 0.25) for p in curve.points)
    assert np.isnan(curve.values[0])


def test_sweep_parallel_matches_serial(scalar_lti):
    f = lambda a: eps_alpha_norm(scalar_lti, a)  # noqa: E731
    serial = alpha_sweep(f, 0.3, 0.9, 40, workers=1)
    threaded = alpha_sweep(f, 0.3, 0.9, 40, workers=4)
    assert serial.points == threaded.points


def test_sweep_bad_interval():
    for lo, hi, pts in ((0.0, 0.5, 10), (0.6, 0.5, 10), (0.1, 1.0, 10), (0.1, 0.5, 1)):
        with pytest.raises(BadInterval):
            alpha_sweep(lambda a: a, lo, hi, pts)


def test_all_infeasible():
    with pytest.raises(AllInfeasible):
        minimize_over_alpha(lambda a: None, 0.1, 0.9, grid_points=10)


def test_golden_section_quadratic():
    x, fx = golden_section(lambda t: (t - 0.37) ** 2, 0.0, 1.0, tol=1e-9)
    assert x == pytest.approx(0.37, abs=1e-8)
    assert fx < 1e-16


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_eps_norm_below_curve(seed):
    S = random_stable_system(np.random.default_rng(seed), rho_max=0.9)
    res = eps_norm(S, grid_points=41)
    feasible = [p.value for p in res.curve.points if p.feasible]
    assert feasible and res.value <= min(feasible) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duality_random(seed):
    rng = np.random.default_rng(seed)
    S = random_stable_system(rng)
    alpha = admissible_alpha(rng, S)
    # cross_check=True raises DualityCheckFailed on disagreement
    eps_alpha_norm(S, alpha, cross_check=True)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_similarity_invariance(seed):
    rng = np.random.default_rng(seed)
    S = random_stable_system(rng)
    alpha = admissible_alpha(rng, S)
    while True:
        T = rng.standard_normal((S.n, S.n)) + 2 * np.eye(S.n)
        if np.linalg.cond(T) <= 1e3:
            break
    Ti = np.linalg.inv(T)
    St = LtiSystem(T @ S.A @ Ti, T @ S.B, S.C @ Ti)
    assert eps_alpha_norm(St, alpha) == pytest.approx(eps_alpha_norm(S, alpha), rel=1e-8)


def test_thread_count_from_environment(monkeypatch):
    from epsctl._parallel import worker_count

    monkeypatch.setenv("EPSCTL_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("EPSCTL_THREADS", "junk")
    assert worker_count() == 1
