"""eps-optimal gain synthesis for state feedback, observers and output feedback.

For a fixed alpha each design reduces to one (or two) alpha-scaled Riccati
equations; the eps-norm optimum is then found by a one-dimensional search
over alpha. Every synthesized gain is checked by recomputing the
closed-loop eps(alpha)-norm from its realization.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .epsnorm import GUARD, eps_alpha_norm, minimize_over_alpha
from .errors import (
    DimensionMismatch,
    InputError,
    SeparationCheckFailed,
    SingularInnerMatrix,
)
from .solvers import (
    COND_LIMIT,
    observable_gramian,
    solve_dare_control,
    solve_dare_filter,
    solve_stein,
)
from .sysmodel import (
    FilterPlant,
    LtiSystem,
    OutputFeedbackNormParts,
    OutputFeedbackPlant,
    StateFeedbackPlant,
    SynthesisResult,
    as_matrix,
    cl_observer,
    cl_output_feedback,
    cl_state_feedback,
    require_valid,
)

RECOMPUTE_RTOL = 1e-8

STATE_FEEDBACK = "state-feedback"
OBSERVER = "observer"
OUTPUT_FEEDBACK = "output-feedback"
KINDS = (STATE_FEEDBACK, OBSERVER, OUTPUT_FEEDBACK)


def _weight(alpha):
    return alpha / (1.0 - alpha)


def gain_K(Q, A, B, D, alpha):
    """K = -(B'QB + a/(1-a) D'D)^-1 B'QA."""
    Q, A, B, D = (as_matrix(x, k) for x, k in ((Q, "Q"), (A, "A"), (B, "B"), (D, "D")))
    inner = B.T @ Q @ B + _weight(alpha) * D.T @ D
    cond = np.linalg.cond(inner)
    if not cond < COND_LIMIT:
        raise SingularInnerMatrix(f"B'QB + a/(1-a) D'D is singular (cond {cond:.3e})")
    return -np.linalg.solve(inner, B.T @ Q @ A)


def gain_L(P, A, C, D, alpha):
    """L = -APC' (CPC' + a/(1-a) DD')^-1, the transpose-dual of :func:`gain_K`."""
    return gain_K(P, np.asarray(A).T, np.asarray(C).T, np.asarray(D).T, alpha).T


def _agree(a, b, rtol=RECOMPUTE_RTOL):
    return abs(a - b) <= rtol * max(abs(a), abs(b)) + 1e-14


def _state_feedback(plant, alpha):
    sol = solve_dare_control(plant.A, plant.B, plant.C, plant.D, alpha)
    Q = sol.X
    K = gain_K(Q, plant.A, plant.B, plant.D, alpha)
    norm = math.sqrt(max(float(np.trace(plant.Bw.T @ Q @ plant.Bw)), 0.0))
    cl = cl_state_feedback(plant, K)
    check = eps_alpha_norm(cl, alpha)
    if not _agree(norm, check):
        raise SeparationCheckFailed(
            f"closed-loop norm {check!r} differs from Riccati value {norm!r}"
        )
    return SynthesisResult(STATE_FEEDBACK, float(alpha), norm, cl, K=K, Q=Q, recomputed_norm=check)


def _observer(plant, alpha):
    sol = solve_dare_filter(plant.A, plant.B, plant.C, plant.D, alpha)
    P = sol.X
    L = gain_L(P, plant.A, plant.C, plant.D, alpha)
    norm = math.sqrt(max(float(np.trace(plant.Cz @ P @ plant.Cz.T)), 0.0))
    cl = cl_observer(plant, L)
    check = eps_alpha_norm(cl, alpha)
    if not _agree(norm, check):
        raise SeparationCheckFailed(
            f"error-system norm {check!r} differs from Riccati value {norm!r}"
        )
    return SynthesisResult(OBSERVER, float(alpha), norm, cl, L=L, P=P, recomputed_norm=check)


def _output_feedback(plant, alpha):
    P = solve_dare_filter(plant.A, plant.B1, plant.C1, plant.D1, alpha).X
    Q = solve_dare_control(plant.A, plant.B2, plant.C2, plant.D2, alpha).X
    K = gain_K(Q, plant.A, plant.B2, plant.D2, alpha)
    L = gain_L(P, plant.A, plant.C1, plant.D1, alpha)
    B2, D2 = plant.B2, plant.D2
    # R'R, never factored: both traces are cyclic
    M = (1.0 - alpha) / alpha * B2.T @ Q @ B2 + D2.T @ D2
    parts = OutputFeedbackNormParts(
        term_q=float(np.trace(plant.B1.T @ Q @ plant.B1)),
        term_kp=float(np.trace(K @ P @ K.T @ M)),
    )
    norm = parts.total
    cl = cl_output_feedback(plant, K, L)
    Qcl = observable_gramian(cl.A, cl.C, alpha)
    check = math.sqrt(max(float(np.trace(cl.B.T @ Qcl @ cl.B)), 0.0))
    if not _agree(norm, check):
        raise SeparationCheckFailed(
            f"2n-state closed-loop norm {check!r} differs from separated value {norm!r}"
        )
    return SynthesisResult(
        OUTPUT_FEEDBACK, float(alpha), norm, cl,
        K=K, L=L, P=P, Q=Q, norm_parts=parts, recomputed_norm=check,
    )


_DISPATCH = {
    StateFeedbackPlant: (STATE_FEEDBACK, _state_feedback),
    FilterPlant: (OBSERVER, _observer),
    OutputFeedbackPlant: (OUTPUT_FEEDBACK, _output_feedback),
}


def _resolve(plant, kind=None):
    try:
        plant_kind, fn = _DISPATCH[type(plant)]
    except KeyError:
        raise InputError(f"no synthesis for {type(plant).__name__}") from None
    if kind is not None and kind != plant_kind:
        raise InputError(f"synthesis kind {kind!r} does not match a {type(plant).__name__}")
    return plant_kind, fn


def synth_state_feedback(plant: StateFeedbackPlant, alpha: float) -> SynthesisResult:
    """Optimal state feedback u = Kx at a fixed alpha.

    The achieved norm is sqrt(tr(Bw' Q Bw)) with Q the stabilizing solution
    of the control Riccati equation.
    """
    if not isinstance(plant, StateFeedbackPlant):
        raise InputError("synth_state_feedback needs a StateFeedbackPlant")
    require_valid(plant)
    return _state_feedback(plant, alpha)


def synth_observer(plant: FilterPlant, alpha: float) -> SynthesisResult:
    """Optimal observer gain L at a fixed alpha; norm sqrt(tr(Cz P Cz'))."""
    if not isinstance(plant, FilterPlant):
        raise InputError("synth_observer needs a FilterPlant")
    require_valid(plant)
    return _observer(plant, alpha)


def synth_output_feedback(plant: OutputFeedbackPlant, alpha: float) -> SynthesisResult:
    """Observer-based output feedback with both gains at a shared alpha.

    ``result.norm_parts`` holds the two trace terms whose sum is the squared
    closed-loop eps(alpha)-norm. The sum is checked against a direct
    evaluation on the 2n-state closed loop; a mismatch beyond 1e-8 relative
    raises :class:`SeparationCheckFailed`.
    """
    if not isinstance(plant, OutputFeedbackPlant):
        raise InputError("synth_output_feedback needs an OutputFeedbackPlant")
    require_valid(plant)
    return _output_feedback(plant, alpha)


def synthesize(plant, alpha, kind=None):
    """Dispatch to the synthesis matching the plant type."""
    _, fn = _resolve(plant, kind)
    require_valid(plant)
    return fn(plant, alpha)


def synthesis_objective(plant, kind=None):
    """alpha -> achieved eps(alpha)-norm, for sweeps. Validates the plant once."""
    _, fn = _resolve(plant, kind)
    require_valid(plant)
    return lambda alpha: fn(plant, alpha).eps_alpha_norm


def optimize_synthesis(plant, kind=None, grid_points=199, refine_tol=1e-6, workers=None):
    """Synthesize at the alpha minimizing the achieved eps(alpha)-norm.

    Scans ``grid_points`` alphas over (1e-4, 1 - 1e-4), refines the best one
    by golden-section search to ``refine_tol`` and returns the design at the
    optimum with the search record attached as ``result.search``.
    """
    _, fn = _resolve(plant, kind)
    objective = synthesis_objective(plant, kind)
    search = minimize_over_alpha(objective, GUARD, 1.0 - GUARD, grid_points, refine_tol, workers)
    result = fn(plant, search.alpha_star)
    return replace(result, search=search)


def reduced_series_norm(S1: LtiSystem, K, Q_alpha, B, D, alpha) -> float:
    """eps(alpha)-norm of S1 followed by the optimally fed-back plant.

    With S2 = (A + BK, B, C + DK, D) and K the optimal gain for Q_alpha, the
    cascade S2 S1 has the same norm as S1 with its output map replaced by
    R C1, where R'R = (1-a)/a B'QB + D'D. Evaluated through traces only.
    """
    K = as_matrix(K, "K")
    Q_alpha = as_matrix(Q_alpha, "Q_alpha")
    B = as_matrix(B, "B")
    D = as_matrix(D, "D")
    n = Q_alpha.shape[0]
    if B.shape[0] != n or K.shape != (B.shape[1], n) or D.shape[1] != B.shape[1]:
        raise DimensionMismatch("K, Q_alpha, B, D have incompatible shapes")
    if S1.p != B.shape[1]:
        raise DimensionMismatch(f"S1 output dimension {S1.p} must equal the plant input dimension {B.shape[1]}")
    M = (1.0 - alpha) / alpha * B.T @ Q_alpha @ B + D.T @ D
    W = S1.C.T @ M @ S1.C / (1.0 - alpha)
    Qbar = solve_stein(S1.A.T / math.sqrt(alpha), 0.5 * (W + W.T))
    return math.sqrt(max(float(np.trace(S1.B.T @ Qbar @ S1.B)), 0.0))
