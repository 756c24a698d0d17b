"""Kernels for the alpha-scaled Stein and Riccati equations.

Both families are reduced to standard forms by absorbing alpha into the
state matrix:

* ``(1/a) A P A' - P + BB'/(1-a) = 0`` is the Stein equation
  ``F X F' - X + W = 0`` with ``F = A/sqrt(a)``, ``W = BB'/(1-a)``.
* the control Riccati equation in ``Q`` is the standard DARE
  ``X = Ab' X Ab - Ab' X B (Rb + B'XB)^-1 B' X Ab + Qw`` with
  ``Ab = A/sqrt(a)``, ``Qw = C'C/(1-a)``, ``Rb = a/(1-a) D'D``.

The Stein solver is a squaring (doubling) iteration. The Riccati solver is
structure-preserving doubling; when the input weight ``Rb`` is singular or
ill-conditioned it runs doubling on a ridge-regularized weight and finishes
with Newton (Hewer) steps on the exact equation, and as a last resort falls
back to the Riccati difference recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphaOutOfRange,
    DimensionMismatch,
    NonSymmetricW,
    NoStabilizingSolution,
    SingularInnerMatrix,
    SingularLimit,
    UnstableF,
)
from .sysmodel import CertKind, EllipsoidCert, as_matrix, spectral_radius

STEIN_MAX_DOUBLINGS = 200
STEIN_STOP = 1e-14
STEIN_RESIDUAL = 1e-10
RICCATI_STOP = 1e-13
RICCATI_RESIDUAL = 1e-9
RICCATI_MAX_ITER = 10_000
COND_LIMIT = 1e12
RIDGE = 1e-10
ALPHA_GUARD = 1e-10
DARE_ALPHA_GUARD = 1e-6


def _sym(X):
    return 0.5 * (X + X.T)


def _fro(X):
    return float(np.linalg.norm(X))


# --------------------------------------------------------------------------
# Stein


def stein_residual(F, X, W):
    return _fro(F @ X @ F.T - X + W)


def _stein_doubling(F, W):
    X = np.array(W, dtype=float)
    Fk = np.array(F, dtype=float)
    for _ in range(STEIN_MAX_DOUBLINGS):
        dX = Fk @ X @ Fk.T
        X = _sym(X + dX)
        if _fro(dX) < STEIN_STOP * (1.0 + _fro(X)):
            break
        Fk = Fk @ Fk
    return X


def solve_stein(F, W):
    """Solve ``F X F' - X + W = 0`` for symmetric ``W`` and stable ``F``.

    The solution is the series ``sum_i F^i W F'^i``, accumulated by repeated
    squaring. A residual-correction pass runs if the first sweep misses the
    ``1e-10 (1 + |X|_F)`` residual target.
    """
    F = as_matrix(F, "F")
    W = as_matrix(W, "W")
    if F.shape[0] != F.shape[1] or W.shape != F.shape:
        raise DimensionMismatch(f"F {F.shape} and W {W.shape} must be equal square shapes")
    if _fro(W - W.T) > 1e-12 * max(1.0, _fro(W)):
        raise NonSymmetricW("W is not symmetric")
    rho = spectral_radius(F)
    if rho >= 1.0 - 1e-12:
        raise UnstableF(f"spectral radius of F is {rho!r}, need < 1")
    W = _sym(W)
    X = _stein_doubling(F, W)
    for _ in range(3):
        R = F @ X @ F.T - X + W
        if _fro(R) <= 0.1 * STEIN_RESIDUAL * (1.0 + _fro(X)):
            break
        X = _sym(X + _stein_doubling(F, _sym(R)))
    return X


def admissible_alpha_interval(A):
    """Open interval (rho(A)^2, 1) of admissible alpha values."""
    rho = spectral_radius(A)
    return rho * rho, 1.0


def check_alpha(A, alpha):
    lo, hi = admissible_alpha_interval(A)
    alpha = float(alpha)
    if not lo < alpha < hi:
        raise AlphaOutOfRange(alpha, lo, hi)
    if alpha <= lo + ALPHA_GUARD or alpha >= hi - ALPHA_GUARD:
        raise SingularLimit(alpha, lo, hi)
    return alpha


def reachable_gramian(A, B, alpha):
    """P_alpha without the positive-definiteness requirement of a certificate."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape}")
    alpha = check_alpha(A, alpha)
    return solve_stein(A / np.sqrt(alpha), B @ B.T / (1.0 - alpha))


def observable_gramian(A, C, alpha):
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    if C.shape[1] != A.shape[0]:
        raise DimensionMismatch(f"C must have {A.shape[0]} columns, got {C.shape}")
    alpha = check_alpha(A, alpha)
    return solve_stein(A.T / np.sqrt(alpha), C.T @ C / (1.0 - alpha))


def solve_p_alpha(A, B, alpha):
    """Reachable-set certificate: {x | x' P^-1 x <= 1} contains every state
    reachable from the origin with |w_k| <= 1."""
    return EllipsoidCert(reachable_gramian(A, B, alpha), alpha, CertKind.REACHABLE)


def solve_q_alpha(A, C, alpha):
    """Observable-set certificate: every x0 with x0' Q x0 <= 1 yields a free
    output with l1 norm at most one."""
    return EllipsoidCert(observable_gramian(A, C, alpha), alpha, CertKind.OBSERVABLE)


# --------------------------------------------------------------------------
# Riccati


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    X: np.ndarray
    residual: float
    iterations: int
    method: str = "doubling"


def control_riccati_residual(Q, A, B, C, D, alpha):
    """Frobenius norm of the unscaled control Riccati expression at ``Q``."""
    inner = B.T @ Q @ B + alpha / (1.0 - alpha) * D.T @ D
    BQA = B.T @ Q @ A
    expr = (
        A.T @ Q @ B @ np.linalg.solve(inner, BQA) / alpha
        - A.T @ Q @ A / alpha
        + Q
        - C.T @ C / (1.0 - alpha)
    )
    return _fro(expr)


def _dare_step(X, Ab, B, Qw, Rb, pinv=False):
    inner = Rb + B.T @ X @ B
    BXA = B.T @ X @ Ab
    G = np.linalg.pinv(inner) @ BXA if pinv else np.linalg.solve(inner, BXA)
    return _sym(Ab.T @ X @ Ab - BXA.T @ G + Qw)


def _scaled_gain(X, Ab, B, Rb):
    return -np.linalg.solve(Rb + B.T @ X @ B, B.T @ X @ Ab)


def _sda(Ab, B, Qw, Rb, check_cond=True):
    """Structure-preserving doubling; returns (X, iterations) or None."""
    if check_cond and np.linalg.cond(Rb) > COND_LIMIT:
        return None
    n = Ab.shape[0]
    Ak = Ab.copy()
    Gk = _sym(B @ np.linalg.solve(Rb, B.T))
    Hk = Qw.copy()
    eye = np.eye(n)
    for it in range(1, RICCATI_MAX_ITER + 1):
        W = eye + Gk @ Hk
        if np.linalg.cond(W) > COND_LIMIT:
            return None
        WA = np.linalg.solve(W, Ak)
        WG = np.linalg.solve(W, Gk)
        H_new = _sym(Hk + Ak.T @ Hk @ WA)
        Gk = _sym(Gk + Ak @ WG @ Ak.T)
        Ak = Ak @ WA
        if not np.all(np.isfinite(H_new)):
            return None
        done = _fro(H_new - Hk) < RICCATI_STOP * (1.0 + _fro(H_new))
        Hk = H_new
        if done:
            return Hk, it
    return None


def _newton(X, Ab, B, Qw, Rb, max_steps=60):
    """Hewer iterations from a stabilizing iterate; each step is a Stein solve."""
    steps = 0
    for steps in range(1, max_steps + 1):
        K = _scaled_gain(X, Ab, B, Rb)
        F = Ab + B @ K
        if spectral_radius(F) >= 1.0 - 1e-12:
            raise NoStabilizingSolution("Newton iterate lost closed-loop stability")
        X_new = solve_stein(F.T, _sym(Qw + K.T @ Rb @ K))
        delta = _fro(X_new - X)
        X = X_new
        if delta < RICCATI_STOP * (1.0 + _fro(X)):
            break
    return X, steps


def _value_iteration(Ab, B, Qw, Rb):
    """Riccati difference recursion until the implied gain stabilizes."""
    X = Qw.copy()
    for it in range(1, RICCATI_MAX_ITER + 1):
        X_new = _dare_step(X, Ab, B, Qw, Rb, pinv=True)
        if not np.all(np.isfinite(X_new)):
            break
        X = X_new
        inner = Rb + B.T @ X @ B
        if np.linalg.cond(inner) < COND_LIMIT:
            K = _scaled_gain(X, Ab, B, Rb)
            if spectral_radius(Ab + B @ K) < 1.0 - 1e-9:
                return X, it
    raise NoStabilizingSolution("Riccati recursion never produced a stabilizing gain")


def _solve_scaled(Ab, B, Qw, Rb):
    sda = _sda(Ab, B, Qw, Rb)
    if sda is not None:
        return sda[0], sda[1], "doubling"
    # singular weight: doubling on a ridge-regularized weight supplies a
    # stabilizing start for Newton on the exact equation
    scale = max(_fro(Rb), _fro(B.T @ Qw @ B), 1.0)
    ridge = RIDGE * scale * np.eye(Rb.shape[0])
    sda = _sda(Ab, B, Qw, Rb + ridge, check_cond=False)
    if sda is not None:
        try:
            X, steps = _newton(sda[0], Ab, B, Qw, Rb)
            return X, sda[1] + steps, "doubling+newton"
        except (NoStabilizingSolution, np.linalg.LinAlgError):
            pass
    X, iterations = _value_iteration(Ab, B, Qw, Rb)
    X, steps = _newton(X, Ab, B, Qw, Rb)
    return X, iterations + steps, "recursion+newton"


def solve_dare_control(A, B, C, D, alpha):
    """Stabilizing solution ``Q`` of the alpha-scaled control Riccati equation

    ``(1/a) A'QB (B'QB + a/(1-a) D'D)^-1 B'QA - (1/a) A'QA + Q - C'C/(1-a) = 0``.

    Returns a :class:`RiccatiSolution`. Raises :class:`NoStabilizingSolution`
    when no positive definite stabilizing solution is found and
    :class:`SingularInnerMatrix` when the gain's inner matrix is singular at
    the solution.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        raise DimensionMismatch(f"incompatible shapes A{A.shape} B{B.shape} C{C.shape}")
    if D.shape != (C.shape[0], B.shape[1]):
        raise DimensionMismatch(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
    alpha = float(alpha)
    if not DARE_ALPHA_GUARD < alpha < 1.0 - DARE_ALPHA_GUARD:
        raise AlphaOutOfRange(alpha, DARE_ALPHA_GUARD, 1.0 - DARE_ALPHA_GUARD)

    Ab = A / np.sqrt(alpha)
    Qw = _sym(C.T @ C) / (1.0 - alpha)
    Rb = _sym(D.T @ D) * (alpha / (1.0 - alpha))

    with np.errstate(all="ignore"):
        X, iterations, method = _solve_scaled(Ab, B, Qw, Rb)

    inner = Rb + B.T @ X @ B
    if np.linalg.cond(inner) > COND_LIMIT:
        raise SingularInnerMatrix(
            f"B'QB + a/(1-a) D'D is singular at the solution (cond {np.linalg.cond(inner):.3e})"
        )
    residual = control_riccati_residual(X, A, B, C, D, alpha)
    if residual > 0.1 * RICCATI_RESIDUAL * (1.0 + _fro(X)):
        # polish; doubling can leave a few ulps of drift on stiff problems
        X, steps = _newton(X, Ab, B, Qw, Rb, max_steps=3)
        iterations += steps
        residual = control_riccati_residual(X, A, B, C, D, alpha)

    lam = np.linalg.eigvalsh(X)
    if not lam[0] > 1e-12 * max(lam[-1], 0.0):
        raise NoStabilizingSolution(f"solution is not positive definite (min eig {lam[0]:.3e})")
    rho = spectral_radius(Ab + B @ _scaled_gain(X, Ab, B, Rb))
    if rho >= 1.0:
        raise NoStabilizingSolution(f"solution is not stabilizing (scaled closed-loop rho {rho:.6f})")
    if residual > RICCATI_RESIDUAL * (1.0 + _fro(X)):
        raise NoStabilizingSolution(f"residual {residual:.3e} above tolerance")
    X.setflags(write=False)
    return RiccatiSolution(X, residual, iterations, method)


def solve_dare_filter(A, B, C, D, alpha):
    """Stabilizing ``P`` of the filtering Riccati equation.

    ``(1/a) APC' (CPC' + a/(1-a) DD')^-1 CPA' - (1/a) APA' + P - BB'/(1-a) = 0``,
    solved as the control equation of the transposed data.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    sol = solve_dare_control(A.T, C.T, B.T, D.T, alpha)
    X = np.array(sol.X.T)
    X.setflags(write=False)
    return RiccatiSolution(X, sol.residual, sol.iterations, sol.method)
