"""Disturbance generation, simulation and empirical checks of the ellipsoid bounds.

Disturbances satisfy |w_k| <= 1 in the Euclidean norm at every step. All
randomness comes from numpy's PCG64 bit generator seeded with the caller's
64-bit seed, so a given (kind, seed, steps, dim) always yields the same
sequence on every platform numpy supports.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import (
    BadPlane,
    BadSpec,
    DimensionMismatch,
    InputError,
    SimulationOverflow,
    UnstableSystem,
)
from .solvers import solve_stein
from .sysmodel import CertKind, EllipsoidCert, LtiSystem, spectral_radius

RNG_NAME = "numpy.random.PCG64"
OVERFLOW_LIMIT = 1e15
CONTAINMENT_TOL = 1e-6
L1_MAX_STEPS = 10_000_000


class DisturbanceKind(str, enum.Enum):
    EXTREME_SWITCHING = "extreme-switching"  # random unit vectors
    UNIFORM_BALL = "uniform-ball"
    CONSTANT = "constant"  # e_1 at every step
    WORST_CASE_GREEDY = "worst-case-greedy"


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: DisturbanceKind
    steps: int
    dim: int
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        except ValueError:
            raise BadSpec(f"unknown disturbance kind {self.kind!r}") from None
        for name in ("steps", "dim"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise BadSpec(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise BadSpec(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray  # (steps + 1, n)
    outputs: np.ndarray  # (steps, p)
    disturbances: np.ndarray  # (steps, m)

    @property
    def steps(self):
        return self.disturbances.shape[0]


@dataclass(frozen=True)
class ContainmentStats:
    max_quadratic: float
    violations: int
    samples: int


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def _unit_rows(z):
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def gen_disturbance(spec: DisturbanceSpec, system: Optional[LtiSystem] = None,
                    cert: Optional[EllipsoidCert] = None, x0=None) -> np.ndarray:
    """Return a ``(steps, dim)`` array of disturbance samples.

    The worst-case greedy kind depends on the state it drives, so it needs
    the ``system`` and a reachable ``cert``; at each step it plays the unit
    vector along B' P^-1 A x_k (the top eigenvector of B' P^-1 B when that
    vanishes).
    """
    kind, steps, dim = spec.kind, spec.steps, spec.dim
    if kind is DisturbanceKind.CONSTANT:
        w = np.zeros((steps, dim))
        w[:, 0] = 1.0
        return w
    if kind is DisturbanceKind.EXTREME_SWITCHING:
        rng = make_rng(spec.seed)
        return _unit_rows(rng.standard_normal((steps, dim)))
    if kind is DisturbanceKind.UNIFORM_BALL:
        rng = make_rng(spec.seed)
        direction = _unit_rows(rng.standard_normal((steps, dim)))
        radius = rng.random(steps) ** (1.0 / dim)
        return direction * radius[:, None]
    # greedy
    if system is None or cert is None:
        raise BadSpec("worst-case greedy disturbance needs a system and a reachable certificate")
    if cert.kind is not CertKind.REACHABLE:
        raise BadSpec("worst-case greedy disturbance needs a reachable certificate")
    if system.m != dim or cert.n != system.n:
        raise BadSpec("disturbance dimension or certificate size does not match the system")
    A, B = system.A, system.B
    G = cho_solve(cho_factor(cert.shape), B).T  # B' P^-1
    GA = G @ A
    lam, vec = np.linalg.eigh(G @ B)
    fallback = vec[:, -1]
    fallback = fallback * np.sign(fallback[np.argmax(np.abs(fallback) > 1e-12)])
    x = np.zeros(system.n) if x0 is None else np.asarray(x0, dtype=float)
    w = np.empty((steps, dim))
    for k in range(steps):
        v = GA @ x
        nv = np.linalg.norm(v)
        wk = v / nv if nv > 1e-300 else fallback
        w[k] = wk
        x = A @ x + B @ wk
    return w


def _propagate(A, B, W, x0):
    """States for a batch: W is (runs, steps, m), x0 is (runs, n)."""
    runs, steps, _ = W.shape
    X = np.empty((runs, steps + 1, A.shape[0]))
    X[:, 0] = x0
    At, Bt = A.T, B.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            X[:, k + 1] = X[:, k] @ At + W[:, k] @ Bt
    if not np.all(np.abs(X) <= OVERFLOW_LIMIT):
        raise SimulationOverflow(f"state exceeded {OVERFLOW_LIMIT:g}; the system is unstable")
    return X


def simulate(S: LtiSystem, w, x0=None) -> Trajectory:
    """Run x[k+1] = A x[k] + B w[k], y[k] = C x[k] + D w[k]."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 1 and S.m == 1:
        w = w[:, None]
    if w.ndim != 2 or w.shape[1] != S.m:
        raise DimensionMismatch(f"disturbance must be (steps, {S.m}), got {w.shape}")
    x0 = np.zeros(S.n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (S.n,):
        raise DimensionMismatch(f"x0 must have {S.n} entries, got {x0.shape}")
    X = _propagate(S.A, S.B, w[None], x0[None])[0]
    Y = X[:-1] @ S.C.T + w @ S.D.T
    return Trajectory(X, Y, w)


def simulate_runs(S: LtiSystem, W, x0=None) -> np.ndarray:
    """Vectorized :func:`simulate` over runs; returns states (runs, steps+1, n)."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 3 or W.shape[2] != S.m:
        raise DimensionMismatch(f"disturbances must be (runs, steps, {S.m}), got {W.shape}")
    X0 = np.zeros((W.shape[0], S.n)) if x0 is None else np.broadcast_to(x0, (W.shape[0], S.n))
    return _propagate(S.A, S.B, W, X0)


def quadratic_form(cert: EllipsoidCert, X) -> np.ndarray:
    """x' S^-1 x (reachable) or x' S x (observable) for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != cert.n:
        raise DimensionMismatch(f"states have {X.shape[-1]} components, certificate has {cert.n}")
    flat = X.reshape(-1, cert.n)
    if cert.kind is CertKind.REACHABLE:
        L = np.linalg.cholesky(cert.shape)
        Y = solve_triangular(L, flat.T, lower=True)
        q = np.sum(Y * Y, axis=0)
    else:
        q = np.einsum("ij,jk,ik->i", flat, cert.shape, flat)
    return q.reshape(X.shape[:-1])


def containment_stats(traj, cert: EllipsoidCert) -> ContainmentStats:
    """Largest x' P^-1 x along a trajectory and the count above 1 + 1e-6.

    ``traj`` may be a :class:`Trajectory` or a raw states array of any
    leading shape.
    """
    if cert.kind is not CertKind.REACHABLE:
        raise InputError("containment is checked against a reachable certificate")
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    q = quadratic_form(cert, states)
    return ContainmentStats(
        max_quadratic=float(np.max(q)),
        violations=int(np.count_nonzero(q > 1.0 + CONTAINMENT_TOL)),
        samples=int(q.size),
    )


def output_l1_norms(S: LtiSystem, X0, tail_tol=1e-12) -> np.ndarray:
    """Certified upper bounds on ||y||_1 of the free response, one per row of X0.

    With Pl solving A' Pl A - Pl + I = 0, V(x) = x' Pl x contracts by
    gamma^2 = 1 - 1/lambda_max(Pl) per step and Pl >= I, so the remaining
    output sum from x_k is at most |C|_2 sqrt(V(x_k)) / (1 - gamma). The
    partial sum plus that tail bound is returned once the bound is below
    ``tail_tol``; the result exceeds the true norm by at most ``tail_tol``.
    """
    if not S.strictly_proper:
        raise InputError("output l1 norm needs D = 0")
    rho = spectral_radius(S.A)
    if rho >= 1.0:
        raise UnstableSystem(f"spectral radius {rho!r} >= 1")
    X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    if X.shape[1] != S.n:
        raise DimensionMismatch(f"x0 must have {S.n} entries")
    A, C = S.A, S.C
    Pl = solve_stein(A.T, np.eye(S.n))
    gamma = math.sqrt(max(0.0, 1.0 - 1.0 / np.linalg.eigvalsh(Pl)[-1]))
    scale = np.linalg.norm(C, 2) / (1.0 - gamma)
    total = np.zeros(X.shape[0])
    result = np.full(X.shape[0], np.nan)
    active = np.arange(X.shape[0])
    At, Ct = A.T, C.T
    for _ in range(L1_MAX_STEPS):
        tail = scale * np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, Pl, X), 0.0))
        done = tail < tail_tol
        if np.any(done):
            result[active[done]] = total[done] + tail[done]
            keep = ~done
            active, X, total = active[keep], X[keep], total[keep]
            if active.size == 0:
                break
        total += np.linalg.norm(X @ Ct, axis=1)
        X = X @ At
    return result


def output_l1_norm(S: LtiSystem, x0, tail_tol=1e-12) -> float:
    """sum_k |C A^k x0|, certified to within ``tail_tol`` from above."""
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    return float(output_l1_norms(S, x0, tail_tol)[0])


def ellipsoid_boundary_points(cert: EllipsoidCert, plane=(0, 1), count=200) -> np.ndarray:
    """``count`` points on the boundary of the ellipsoid's projection onto a
    coordinate plane, as a ``(count, 2)`` array."""
    n = cert.n
    try:
        i, j = (int(v) for v in plane)
    except (TypeError, ValueError):
        raise BadPlane(f"plane must be a pair of axis indices, got {plane!r}") from None
    if n < 2 or i == j or not (0 <= i < n and 0 <= j < n):
        raise BadPlane(f"invalid plane {plane!r} for a {n}-dimensional ellipsoid")
    if int(count) != count or count < 1:
        raise BadPlane(f"count must be a positive integer, got {count!r}")
    if cert.kind is CertKind.REACHABLE:
        sigma = cert.shape
    else:
        sigma = cho_solve(cho_factor(cert.shape), np.eye(n))
    sub = sigma[np.ix_([i, j], [i, j])]
    L = np.linalg.cholesky(0.5 * (sub + sub.T))
    theta = np.linspace(0.0, 2.0 * np.pi, int(count), endpoint=False)
    return (L @ np.vstack([np.cos(theta), np.sin(theta)])).T
