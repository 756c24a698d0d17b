import numpy as np
import pytest

from epsctl.sysfile import load_bundled
from epsctl.sysmodel import (
    FilterPlant,
    LtiSystem,
    OutputFeedbackPlant,
    StateFeedbackPlant,
    spectral_radius,
)


def scaled(rng, n, rho):
    A = rng.standard_normal((n, n))
    r = spectral_radius(A)
    return A * (rho / r) if r > 0 else A


def random_stable_system(rng, n=None, m=None, p=None, rho_max=0.95):
    n = n or int(rng.integers(1, 7))
    m = m or int(rng.integers(1, 4))
    p = p or int(rng.integers(1, 4))
    A = scaled(rng, n, rng.uniform(0.05, rho_max))
    return LtiSystem(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)))


def admissible_alpha(rng, S, margin=0.01):
    rho2 = spectral_radius(S.A) ** 2
    return float(rng.uniform(rho2 + margin, 0.99))


def random_state_feedback_plant(rng, n=None, m=None, p0=None, mw=None, rho=None):
    """Random plant with C = [C0; 0] and D = [0; D0], so C'D = 0."""
    n = n or int(rng.integers(1, 6))
    m = m or int(rng.integers(1, 3))
    p0 = p0 or int(rng.integers(1, 3))
    mw = mw or int(rng.integers(1, 3))
    A = scaled(rng, n, rng.uniform(0.3, 1.2) if rho is None else rho)
    C = np.vstack([rng.standard_normal((p0, n)), np.zeros((m, n))])
    D = np.vstack([np.zeros((p0, m)), rng.standard_normal((m, m)) + 2 * np.eye(m)])
    return StateFeedbackPlant(A, rng.standard_normal((n, m)), rng.standard_normal((n, mw)), C, D)


def random_filter_plant(rng, n=None, mw=None, p=None, pz=None):
    """Random plant with B = [B0, 0] and D = [0, D0], so BD' = 0."""
    n = n or int(rng.integers(1, 6))
    p = p or int(rng.integers(1, 3))
    m0 = mw or int(rng.integers(1, 3))
    pz = pz or int(rng.integers(1, 3))
    A = scaled(rng, n, rng.uniform(0.3, 1.2))
    B = np.hstack([rng.standard_normal((n, m0)), np.zeros((n, p))])
    D = np.hstack([np.zeros((p, m0)), rng.standard_normal((p, p)) + 2 * np.eye(p)])
    return FilterPlant(A, B, rng.standard_normal((p, n)), D, rng.standard_normal((pz, n)))


def random_output_feedback_plant(rng, n=None):
    n = n or int(rng.integers(1, 5))
    sf = random_state_feedback_plant(rng, n=n)
    fp = random_filter_plant(rng, n=n)
    return OutputFeedbackPlant(sf.A, fp.B, sf.B, fp.C, fp.D, sf.C, sf.D)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def siv():
    return load_bundled("paper_siv.json").system


@pytest.fixture
def scalar_lti():
    return LtiSystem([[0.5]], [[1.0]], [[1.0]])


@pytest.fixture
def scalar_sf_plant():
    return StateFeedbackPlant([[0.5]], [[1.0]], [[1.0]], [[1.0]], [[0.0]])


@pytest.fixture
def double_integrator():
    """State-feedback plant whose eps-norm optimum is interior in alpha."""
    return StateFeedbackPlant(
        [[1.0, 1.0], [0.0, 1.0]], [[0.0], [1.0]], [[1.0], [0.0]],
        [[1.0, 0.0], [0.0, 0.0]], [[0.0], [1.0]],
    )


def fixed_point_riccati(a, b, c, d, alpha, iters=100_000):
    """Scalar control Riccati recursion iterated to its fixed point."""
    r = alpha / (1 - alpha) * d * d
    q = c * c / (1 - alpha)
    for _ in range(iters):
        q_new = (a * a * q - (a * b * q) ** 2 / (b * b * q + r)) / alpha + c * c / (1 - alpha)
        if abs(q_new - q) < 1e-15 * q_new:
            return q_new
        q = q_new
    return q


def perturbation_probe(norm_of, G, rng, count=100, rel=1e-3):
    """Smallest norm_of(G + dG) - norm_of(G) over random dG with
    |dG|_F = rel (1 + |G|_F)."""
    base = norm_of(G)
    size = rel * (1 + np.linalg.norm(G))
    worst = np.inf
    for _ in range(count):
        dG = rng.standard_normal(G.shape)
        dG *= size / np.linalg.norm(dG)
        worst = min(worst, norm_of(G + dG) - base)
    return worst


def compose_series(S1, A, B, C, D, K):
    """Block realization of S1 feeding (A + BK, B, C + DK, D)."""
    n1, n = S1.n, A.shape[0]
    As = np.block([[S1.A, np.zeros((n1, n))], [B @ S1.C, A + B @ K]])
    Bs = np.vstack([S1.B, np.zeros((n, S1.m))])
    Cs = np.hstack([D @ S1.C, C + D @ K])
    return LtiSystem(As, Bs, Cs)


@pytest.fixture(scope="session")
def siv_closed_loop(siv):
    """Optimal output-feedback closed loop of the bundled plant and its alpha."""
    from epsctl.synthesis import optimize_synthesis

    res = optimize_synthesis(siv)
    return res.closed_loop, res.alpha


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
