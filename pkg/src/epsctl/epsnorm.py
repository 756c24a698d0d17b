"""eps(alpha)-norm evaluation and its minimization over alpha."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._parallel import ordered_map
from .errors import (
    AllInfeasible,
    BadInterval,
    DualityCheckFailed,
    EpsCtlError,
    InputError,
    UnstableSystem,
)
from .solvers import check_alpha, solve_stein
from .sysmodel import LtiSystem, spectral_radius

GUARD = 1e-4
DUALITY_RTOL = 1e-8
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CurvePoint:
    alpha: float
    value: Optional[float]  # None marks an infeasible evaluation

    @property
    def feasible(self):
        return self.value is not None


@dataclass(frozen=True)
class AlphaCurve:
    points: tuple

    @property
    def alphas(self):
        return np.array([p.alpha for p in self.points])

    @property
    def values(self):
        """Values as an array, NaN where infeasible."""
        return np.array([np.nan if p.value is None else p.value for p in self.points])

    @property
    def all_feasible(self):
        return all(p.feasible for p in self.points)

    def argmin(self):
        vals = self.values
        if np.all(np.isnan(vals)):
            raise AllInfeasible("no feasible point on the curve")
        return int(np.nanargmin(vals))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class EpsNormResult:
    value: float
    alpha_star: float
    curve: Optional[AlphaCurve] = None
    boundary_minimum: bool = False


def eps_alpha_norm(S: LtiSystem, alpha: float, cross_check: Optional[bool] = None) -> float:
    """sqrt(tr(C P_a C')) for a stable, strictly proper system.

    When the input and output dimensions are within a factor of four of each
    other both trace formulas are evaluated and must agree; otherwise only
    the one with the smaller weight matrix is used.
    """
    if not S.strictly_proper:
        raise InputError("the eps(alpha)-norm is defined for strictly proper systems (D = 0)")
    rho = spectral_radius(S.A)
    if rho >= 1.0:
        raise UnstableSystem(f"spectral radius {rho!r} >= 1")
    alpha = check_alpha(S.A, alpha)
    m, p = S.m, S.p
    if cross_check is None:
        cross_check = max(m, p) <= 4 * min(m, p)
    sa = math.sqrt(alpha)
    t_p = t_q = None
    if cross_check or m <= p:
        P = solve_stein(S.A / sa, S.B @ S.B.T / (1.0 - alpha))
        t_p = float(np.trace(S.C @ P @ S.C.T))
    if cross_check or m > p:
        Q = solve_stein(S.A.T / sa, S.C.T @ S.C / (1.0 - alpha))
        t_q = float(np.trace(S.B.T @ Q @ S.B))
    if t_p is not None and t_q is not None:
        if abs(t_p - t_q) > DUALITY_RTOL * (1.0 + abs(t_p)):
            raise DualityCheckFailed(
                f"tr(CPC')={t_p!r} and tr(B'QB)={t_q!r} disagree at alpha={alpha!r}"
            )
    t = t_p if t_p is not None else t_q
    return math.sqrt(max(t, 0.0))


def _safe(objective):
    def wrapped(alpha):
        try:
            with np.errstate(all="ignore"):
                v = objective(alpha)
        except (EpsCtlError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError):
            return None
        if v is None:
            return None
        v = float(v)
        return v if math.isfinite(v) else None

    return wrapped


def alpha_sweep(
    objective: Callable[[float], float],
    lo: float,
    hi: float,
    points: int,
    workers: Optional[int] = None,
) -> AlphaCurve:
    """Evaluate ``objective`` on ``points`` evenly spaced alphas in [lo, hi].

    Evaluations that raise or return a non-finite value are recorded as
    infeasible; the sweep itself never aborts because of them.
    """
    if not (0.0 < lo < hi < 1.0):
        raise BadInterval(f"need 0 < lo < hi < 1, got lo={lo!r}, hi={hi!r}")
    if int(points) != points or points < 2:
        raise BadInterval(f"need at least 2 points, got {points!r}")
    alphas = np.linspace(lo, hi, int(points))
    f = _safe(objective)
    values = ordered_map(f, alphas.tolist(), workers)
    return AlphaCurve(tuple(CurvePoint(float(a), v) for a, v in zip(alphas, values)))


def golden_section(f, a, b, tol=1e-6, max_iter=200):
    """Golden-section search for a minimum of ``f`` on [a, b].

    ``f`` may return None (treated as +inf). Returns ``(x, fx)`` for the best
    point evaluated, stopping once the bracket is narrower than ``tol``.
    """

    def g(x):
        v = f(x)
        return math.inf if v is None else v

    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = g(x1), g(x2)
    best = min((f1, x1), (f2, x2))
    for _ in range(max_iter):
        if b - a < tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = g(x1)
            best = min(best, (f1, x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = g(x2)
            best = min(best, (f2, x2))
    return best[1], best[0]


def minimize_over_alpha(objective, lo, hi, grid_points=199, refine_tol=1e-6, workers=None):
    """Grid scan then golden-section refinement around the best grid point.

    Returns an :class:`EpsNormResult`. The grid endpoints are candidates, so
    a minimum approached at an open end of the interval is reported at the
    guard-band edge with ``boundary_minimum`` set.
    """
    curve = alpha_sweep(objective, lo, hi, grid_points, workers)
    i = curve.argmin()
    alphas = curve.alphas
    grid_alpha, grid_val = alphas[i], curve.points[i].value
    left = alphas[i - 1] if i > 0 else lo
    right = alphas[i + 1] if i + 1 < len(alphas) else hi
    x, fx = golden_section(_safe(objective), left, right, refine_tol)
    if fx < grid_val:
        alpha_star, value = x, fx
    else:
        alpha_star, value = grid_alpha, grid_val
    boundary = alpha_star in (alphas[0], alphas[-1])
    return EpsNormResult(float(value), float(alpha_star), curve, bool(boundary))


def eps_norm(S: LtiSystem, grid_points: int = 199, refine_tol: float = 1e-6, workers=None):
    """Minimum of the eps(alpha)-norm over (rho(A)^2 + 1e-4, 1 - 1e-4)."""
    rho = spectral_radius(S.A)
    if rho >= 1.0:
        raise UnstableSystem(f"spectral radius {rho!r} >= 1")
    lo, hi = rho * rho + GUARD, 1.0 - GUARD
    if not lo < hi:
        raise UnstableSystem(f"spectral radius {rho!r} leaves no room for alpha")
    return minimize_over_alpha(
        lambda a: eps_alpha_norm(S, a), lo, hi, grid_points, refine_tol, workers
    )
