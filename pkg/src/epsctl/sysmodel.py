"""System data types, structural checks and closed-loop realizations.

Matrices are carried as read-only 2-D ``float64`` numpy arrays. The plant
classes mirror the three synthesis settings:

* :class:`StateFeedbackPlant`   x+ = Ax + Bu + Bw w,  z = Cx + Du
* :class:`FilterPlant`          x+ = Ax + Bw,  y = Cx + Dw,  error output Cz e
* :class:`OutputFeedbackPlant`  x+ = Ax + B1 w + B2 u,  y = C1 x + D1 w,
  z = C2 x + D2 u
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EigenFailure,
    InputError,
    NonSquare,
    NotPositiveDefinite,
    StructuralAssumptionViolated,
)

RANK_SAFETY = 64.0
ORTHO_TOL = 1e-12
# computed eigenvalues of marginal modes wobble around |lambda| = 1
UNIT_CIRCLE_SLACK = 1e-10


def as_matrix(value, name="matrix"):
    """Validate and freeze ``value`` as a finite 2-D float64 array."""
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: not a real matrix ({exc})") from None
    if arr.ndim > 2:
        raise InputError(f"{name}: expected a 2-D matrix, got {arr.ndim} dims")
    arr = np.atleast_2d(arr)
    if arr.size == 0:
        raise InputError(f"{name}: empty matrix")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: contains NaN or Inf")
    arr.setflags(write=False)
    return arr


def _square(M, name):
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"{name} must be square, got {M.shape}")


def _rows(M, n, name):
    if M.shape[0] != n:
        raise DimensionMismatch(f"{name} must have {n} rows, got {M.shape}")


def _cols(M, n, name):
    if M.shape[1] != n:
        raise DimensionMismatch(f"{name} must have {n} columns, got {M.shape}")


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """x[k+1] = A x[k] + B u[k],  y[k] = C x[k] + D u[k]."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: Optional[np.ndarray] = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        _square(A, "A")
        n = A.shape[0]
        _rows(B, n, "B")
        _cols(C, n, "C")
        if self.D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
            D.setflags(write=False)
        else:
            D = as_matrix(self.D, "D")
            if D.shape != (C.shape[0], B.shape[1]):
                raise DimensionMismatch(
                    f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}"
                )
        for k, v in dict(A=A, B=B, C=C, D=D).items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def strictly_proper(self):
        return not np.any(self.D)


@dataclass(frozen=True, eq=False)
class StateFeedbackPlant:
    A: np.ndarray
    B: np.ndarray
    Bw: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A, B, Bw, C, D = (as_matrix(getattr(self, k), k) for k in ("A", "B", "Bw", "C", "D"))
        _square(A, "A")
        n = A.shape[0]
        _rows(B, n, "B")
        _rows(Bw, n, "Bw")
        _cols(C, n, "C")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        for k, v in dict(A=A, B=B, Bw=Bw, C=C, D=D).items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class FilterPlant:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Cz: np.ndarray

    def __post_init__(self):
        A, B, C, D, Cz = (as_matrix(getattr(self, k), k) for k in ("A", "B", "C", "D", "Cz"))
        _square(A, "A")
        n = A.shape[0]
        _rows(B, n, "B")
        _cols(C, n, "C")
        _cols(Cz, n, "Cz")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        for k, v in dict(A=A, B=B, C=C, D=D, Cz=Cz).items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class OutputFeedbackPlant:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D1: np.ndarray
    C2: np.ndarray
    D2: np.ndarray

    def __post_init__(self):
        names = ("A", "B1", "B2", "C1", "D1", "C2", "D2")
        A, B1, B2, C1, D1, C2, D2 = (as_matrix(getattr(self, k), k) for k in names)
        _square(A, "A")
        n = A.shape[0]
        _rows(B1, n, "B1")
        _rows(B2, n, "B2")
        _cols(C1, n, "C1")
        _cols(C2, n, "C2")
        if D1.shape != (C1.shape[0], B1.shape[1]):
            raise DimensionMismatch(f"D1 must be {(C1.shape[0], B1.shape[1])}, got {D1.shape}")
        if D2.shape != (C2.shape[0], B2.shape[1]):
            raise DimensionMismatch(f"D2 must be {(C2.shape[0], B2.shape[1])}, got {D2.shape}")
        for k, v in zip(names, (A, B1, B2, C1, D1, C2, D2)):
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A.shape[0]


Plant = Union[StateFeedbackPlant, FilterPlant, OutputFeedbackPlant]


class CertKind(enum.Enum):
    REACHABLE = "reachable"  # {x | x' P^-1 x <= 1}
    OBSERVABLE = "observable"  # {x | x' Q x <= 1}


@dataclass(frozen=True, eq=False)
class EllipsoidCert:
    shape: np.ndarray
    alpha: float
    kind: CertKind

    def __post_init__(self):
        S = as_matrix(self.shape, "shape")
        _square(S, "shape")
        scale = max(1.0, np.linalg.norm(S))
        if np.linalg.norm(S - S.T) > 1e-12 * scale:
            raise InputError("ellipsoid shape matrix is not symmetric")
        S = 0.5 * (S + S.T)
        S.setflags(write=False)
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        lam_min = np.linalg.eigvalsh(S)[0]
        if not lam_min > 0.0:
            raise NotPositiveDefinite(
                f"ellipsoid shape matrix is not positive definite (min eig {lam_min:.3e})"
            )
        object.__setattr__(self, "shape", S)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "kind", CertKind(self.kind))

    @property
    def n(self):
        return self.shape.shape[0]


@dataclass(frozen=True)
class OutputFeedbackNormParts:
    term_q: float
    term_kp: float

    @property
    def total(self):
        return float(np.sqrt(self.term_q + self.term_kp))


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    kind: str
    alpha: float
    eps_alpha_norm: float
    closed_loop: LtiSystem
    K: Optional[np.ndarray] = None
    L: Optional[np.ndarray] = None
    P: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    norm_parts: Optional[OutputFeedbackNormParts] = None
    recomputed_norm: Optional[float] = field(default=None, repr=False)
    search: Optional[object] = field(default=None, repr=False)


def spectral_radius(M):
    """Largest eigenvalue modulus of a square matrix."""
    M = as_matrix(M, "M")
    _square(M, "M")
    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    return float(np.max(np.abs(lam)))


# --------------------------------------------------------------------------
# structural checks


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    tolerance: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def rank_tolerance(M):
    s = np.linalg.svd(M, compute_uv=False)
    smax = s[0] if s.size else 0.0
    return smax * max(M.shape) * np.finfo(float).eps * RANK_SAFETY


def _rank_margin(M, n):
    """(n-th singular value, rank tolerance) for a matrix with >= n columns."""
    s = np.linalg.svd(M, compute_uv=False)
    tol = (s[0] if s.size else 0.0) * max(M.shape) * np.finfo(float).eps * RANK_SAFETY
    sn = s[n - 1] if s.size >= n else 0.0
    return float(sn), float(tol)


def controllability_check(A, B, name="controllable(A,B)"):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    sn, tol = _rank_margin(np.hstack(blocks), n)
    return Check(name, bool(sn > tol), sn, tol)


def observability_check(C, A, name="observable(C,A)"):
    c = controllability_check(A.T, C.T, name)
    return c


def stabilizability_check(A, B, name="stabilizable(A,B)"):
    """PBH rank test at every eigenvalue on or outside the unit circle.

    The reported residual is the smallest n-th singular value of
    [lambda I - A, B] over those eigenvalues (inf when there are none).
    """
    n = A.shape[0]
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    worst, worst_tol = np.inf, 0.0
    passed = True
    for mu in lam[np.abs(lam) >= 1.0 - UNIT_CIRCLE_SLACK]:
        pbh = np.hstack([mu * np.eye(n) - A, B])
        sn, tol = _rank_margin(pbh, n)
        if sn <= tol:
            passed = False
        if sn < worst:
            worst, worst_tol = sn, tol
    return Check(name, passed, float(worst), float(worst_tol))


def detectability_check(C, A, name="detectable(C,A)"):
    return stabilizability_check(A.T, C.T, name)


def orthogonality_check(X, Y, name):
    """X @ Y must vanish to 1e-12 * (|X| |Y| + 1)."""
    r = float(np.linalg.norm(X @ Y))
    tol = ORTHO_TOL * (np.linalg.norm(X, 2) * np.linalg.norm(Y, 2) + 1.0)
    return Check(name, bool(r <= tol), r, float(tol))


def validate_structure(plant):
    """Check the standing assumptions of a plant.

    Failures are reported, never raised; only malformed input raises.
    Returns a :class:`ValidationReport`.
    """
    if isinstance(plant, StateFeedbackPlant):
        checks = (
            orthogonality_check(plant.C.T, plant.D, "C'D=0"),
            stabilizability_check(plant.A, plant.B),
            observability_check(plant.C, plant.A),
        )
    elif isinstance(plant, FilterPlant):
        checks = (
            orthogonality_check(plant.B, plant.D.T, "BD'=0"),
            detectability_check(plant.C, plant.A),
            controllability_check(plant.A, plant.B),
        )
    elif isinstance(plant, OutputFeedbackPlant):
        checks = (
            orthogonality_check(plant.B1, plant.D1.T, "B1D1'=0"),
            orthogonality_check(plant.C2.T, plant.D2, "C2'D2=0"),
            stabilizability_check(plant.A, plant.B2, "stabilizable(A,B2)"),
            observability_check(plant.C2, plant.A, "observable(C2,A)"),
            detectability_check(plant.C1, plant.A, "detectable(C1,A)"),
            controllability_check(plant.A, plant.B1, "controllable(A,B1)"),
        )
    elif isinstance(plant, LtiSystem):
        rho = spectral_radius(plant.A)
        checks = (
            Check("stable(A)", bool(rho < 1.0), rho, 1.0),
            controllability_check(plant.A, plant.B),
            observability_check(plant.C, plant.A),
        )
    else:
        raise InputError(f"cannot validate object of type {type(plant).__name__}")
    return ValidationReport(checks)


def require_valid(plant):
    report = validate_structure(plant)
    if not report.ok:
        raise StructuralAssumptionViolated(report)
    return report


# --------------------------------------------------------------------------
# closed-loop realizations


def cl_state_feedback(plant, K):
    """Closed loop (A + BK, Bw, C + DK) under u = Kx."""
    K = as_matrix(K, "K")
    if K.shape != (plant.B.shape[1], plant.n):
        raise DimensionMismatch(f"K must be {(plant.B.shape[1], plant.n)}, got {K.shape}")
    return LtiSystem(plant.A + plant.B @ K, plant.Bw, plant.C + plant.D @ K)


def cl_observer(plant, L):
    """Estimation-error system (A + LC, B + LD, Cz), e = x - xhat."""
    L = as_matrix(L, "L")
    if L.shape != (plant.n, plant.C.shape[0]):
        raise DimensionMismatch(f"L must be {(plant.n, plant.C.shape[0])}, got {L.shape}")
    return LtiSystem(plant.A + L @ plant.C, plant.B + L @ plant.D, plant.Cz)


def cl_output_feedback(plant, K, L):
    """Observer-based output feedback closed loop in (x, e) coordinates.

    ::

        A_cl = [[A + B2 K, -B2 K], [0, A + L C1]]
        B_cl = [[B1], [B1 + L D1]]
        C_cl = [C2 + D2 K, -D2 K]
    """
    K = as_matrix(K, "K")
    L = as_matrix(L, "L")
    n = plant.n
    if K.shape != (plant.B2.shape[1], n):
        raise DimensionMismatch(f"K must be {(plant.B2.shape[1], n)}, got {K.shape}")
    if L.shape != (n, plant.C1.shape[0]):
        raise DimensionMismatch(f"L must be {(n, plant.C1.shape[0])}, got {L.shape}")
    A, B1, B2, C1, D1, C2, D2 = (
        plant.A, plant.B1, plant.B2, plant.C1, plant.D1, plant.C2, plant.D2,
    )
    Acl = np.block([[A + B2 @ K, -B2 @ K], [np.zeros((n, n)), A + L @ C1]])
    Bcl = np.vstack([B1, B1 + L @ D1])
    Ccl = np.hstack([C2 + D2 @ K, -D2 @ K])
    return LtiSystem(Acl, Bcl, Ccl)
