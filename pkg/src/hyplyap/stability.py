"""Discrete ISS-Lyapunov function, decay rates, envelopes and condition checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import InvalidParameterError, NoCertificateError, UnsupportedShapeError
from .model import FeedbackMatrix, GridSpec, StateField, SystemCoefficients

PSD_RTOL = 1e-10


def _tolerance(A: np.ndarray) -> float:
    scale = float(np.max(np.sum(np.abs(A), axis=-1), initial=0.0))
    return PSD_RTOL * max(1.0, scale)


# --------------------------------------------------------------------------
# eigenvalue kernel

def _jacobi_eigenvalues(A: np.ndarray, rtol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    a = A.copy()
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        upper = np.triu(a, 1)
        off = math.sqrt(2.0 * float(np.sum(upper * upper)))
        if off <= rtol * scale * 1e-3:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    return np.diag(a).copy()


def min_eig_symmetric(A) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Closed form for 1x1 and 2x2, cyclic Jacobi rotations otherwise.  The
    input is symmetrized first.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {A.shape}")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n == 0:
        return math.inf
    if n == 1:
        return float(A[0, 0])
    if n == 2:
        return float(_sym2_min(A[0, 0], A[0, 1], A[1, 1]))
    return float(_jacobi_eigenvalues(A).min())


def _sym2_min(a, b, c):
    return 0.5 * ((a + c) - np.sqrt((a - c) ** 2 + 4.0 * b * b))


# --------------------------------------------------------------------------
# Lyapunov function and envelope

def lyapunov_value(state, weights: np.ndarray, dx: float) -> float:
    """``L = dx * sum_j W_j^T P_j W_j`` over interior cells.

    ``weights`` may be the extended ``(J + 2, k)`` array or the interior
    ``(J, k)`` one.
    """
    w = state.w if isinstance(state, StateField) else np.asarray(state, dtype=float)
    P = _interior(weights, w.shape[0])
    return float(dx * np.sum(P * w * w))


def _interior(weights: np.ndarray, J: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape[0] == J + 2:
        return weights[1:-1]
    if weights.shape[0] == J:
        return weights
    raise InvalidParameterError(f"weights with {weights.shape[0]} rows do not fit J={J}")


def weight_bounds(weights: np.ndarray) -> Tuple[float, float]:
    """Smallest and largest diagonal weight over the interior cells."""
    P = np.asarray(weights, dtype=float)[1:-1]
    return float(P.min()), float(P.max())


def decay_rate_exponential(mu: float, alpha: float, xi: float, dt: float, dx: float) -> float:
    """Closed-form decay-rate lower bound ``mu alpha (1 + xi dt) exp(-mu dx) - xi``.

    Valid for exponential weights and constant speeds; ``alpha`` is the
    smallest speed magnitude.  A non-positive value means no certificate.
    """
    for name, v in (("mu", mu), ("alpha", alpha), ("xi", xi), ("dt", dt), ("dx", dx)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive, got {v!r}")
    return mu * alpha * (1.0 + xi * dt) * math.exp(-mu * dx) - xi


def decay_rate_difference(mu: float, alpha: float, xi: float, dt: float, dx: float) -> float:
    """Difference-quotient form ``alpha (1 + xi dt) (1 - exp(-mu dx)) / dx - xi``."""
    return alpha * (1.0 + xi * dt) * (-math.expm1(-mu * dx)) / dx - xi


def gronwall_envelope(L0: float, eta: float, beta: float, xi: float, dt: float, S) -> np.ndarray:
    """Envelope ``L_up^{n+1} = exp(-eta t^{n+1}) L0 + (beta/eta)(1/xi + dt) S^n``.

    ``S`` is the running disturbance supremum indexed by level; the result has
    the same length with ``L_up^0 = L0``.
    """
    if not eta > 0:
        raise NoCertificateError(f"decay rate must be positive, got eta={eta!r}")
    if not eta * dt < 1:
        raise NoCertificateError(f"eta*dt must be below 1, got {eta * dt!r}")
    S = np.asarray(S, dtype=float)
    n = np.arange(S.size)
    out = np.exp(-eta * n * dt) * L0
    out[1:] += beta / eta * (1.0 / xi + dt) * S[:-1]
    return out


def discrete_gronwall_closed_form(c: float, a: float, z: float, dt: float, n_steps: int) -> np.ndarray:
    """``(c - z/a)(1 - a dt)^n + z/a`` for ``n = 0..n_steps``."""
    q = (1.0 - a * dt) ** np.arange(n_steps + 1)
    return (c - z / a) * q + z / a


# --------------------------------------------------------------------------
# condition checks

@dataclass
class CheckResult:
    """Margin of one matrix condition, with per-cell detail where relevant."""

    name: str
    margin: float
    verdict: bool
    definite: bool
    detail: Optional[np.ndarray] = field(default=None, repr=False)
    matrix: Optional[np.ndarray] = field(default=None, repr=False)


def theta_diagonal(coeffs: SystemCoefficients, weights: np.ndarray, xi: float, grid: GridSpec) -> np.ndarray:
    """Diagonal entries of the matrices ``Theta_j``; shape ``(J, k)``."""
    m = coeffs.m
    dx, dt = grid.dx, grid.dt
    c = 1.0 + xi * dt
    P = np.asarray(weights, dtype=float)
    Pp, Pm = P[:, :m], P[:, m:]
    lp, lm = coeffs.lambda_plus, coeffs.lambda_minus
    # extended index e = j + 1; interior slice [1:-1] is j, [:-2] is j-1, [2:] is j+1
    plus = (lp[:-2] * (Pp[2:] - Pp[1:-1]) / dx
            + (lp[1:-1] - lp[:-2]) / dx * Pp[2:])
    minus = (-lm[2:] * (Pm[1:-1] - Pm[:-2]) / dx
             - (lm[2:] - lm[1:-1]) / dx * Pm[:-2])
    theta = -c * np.hstack([plus, minus]) - xi * P[1:-1]
    return theta


def check_theta(coeffs: SystemCoefficients, weights: np.ndarray, xi: float, grid: GridSpec) -> CheckResult:
    """Positive definiteness of ``Theta_j`` relative to ``P_j``.

    The margin is ``min_j lambda_min(P_j^{-1/2} Theta_j P_j^{-1/2})``, the
    largest ``eta`` with ``W^T Theta_j W >= eta W^T P_j W`` for all ``j``.
    """
    theta = theta_diagonal(coeffs, weights, xi, grid)
    ratio = theta / np.asarray(weights)[1:-1]
    per_j = ratio.min(axis=1)
    margin = float(per_j.min())
    tol = PSD_RTOL * max(1.0, float(np.max(np.abs(ratio))))
    return CheckResult("theta", margin, margin > tol, True, detail=per_j, matrix=theta)


def source_matrices(coeffs: SystemCoefficients, weights: np.ndarray, dt: float) -> np.ndarray:
    """``M_j = P_j Pi_j + Pi_j^T P_j - dt Pi_j^T P_j Pi_j``; shape ``(J, k, k)``."""
    P = np.asarray(weights, dtype=float)[1:-1]
    Pi = coeffs.pi
    PPi = P[:, :, None] * Pi
    return PPi + np.swapaxes(PPi, 1, 2) - dt * np.einsum("jba,jbc->jac", Pi, PPi)


def check_source_matrix(coeffs: SystemCoefficients, weights: np.ndarray, dt: float) -> CheckResult:
    """Positive semi-definiteness of ``M_j`` for every cell."""
    M = source_matrices(coeffs, weights, dt)
    if coeffs.k == 2:
        per_j = _sym2_min(M[:, 0, 0], 0.5 * (M[:, 0, 1] + M[:, 1, 0]), M[:, 1, 1])
    else:
        per_j = np.array([min_eig_symmetric(Mj) for Mj in M])
    margin = float(per_j.min())
    return CheckResult("source", margin, margin >= -_tolerance(M), False, detail=per_j)


def sigma_pm(M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Both eigenvalues of symmetric 2x2 matrices stacked along axis 0."""
    a, b, c = M[..., 0, 0], M[..., 0, 1], M[..., 1, 1]
    tr = a + c
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * (a * c - b * b), 0.0))
    return 0.5 * (tr + disc), 0.5 * (tr - disc)


def boundary_matrix(coeffs: SystemCoefficients, weights: np.ndarray, K: FeedbackMatrix) -> np.ndarray:
    """``B_c = diag{L+_{J-1} P+_J, L-_0 P-_{-1}} - K^T diag{L+_{-1} P+_0, L-_J P-_{J-1}} K``."""
    m = coeffs.m
    K.validate(coeffs.k, m)
    P = np.asarray(weights, dtype=float)
    lp, lm = coeffs.lambda_plus, coeffs.lambda_minus
    # extended rows: 0 -> j=-1, 1 -> j=0, -2 -> j=J-1, -1 -> j=J
    outgoing = np.concatenate([lp[-2] * P[-1, :m], lm[1] * P[0, m:]])
    incoming = np.concatenate([lp[0] * P[1, :m], lm[-1] * P[-2, m:]])
    Kf = K.full
    return np.diag(outgoing) - Kf.T @ np.diag(incoming) @ Kf


def check_boundary_matrix(coeffs: SystemCoefficients, weights: np.ndarray, K: FeedbackMatrix) -> CheckResult:
    B = boundary_matrix(coeffs, weights, K)
    margin = min_eig_symmetric(B)
    return CheckResult("boundary", margin, margin >= -_tolerance(B), False, matrix=B)


def feedback_bounds(coeffs: SystemCoefficients, weights: np.ndarray) -> Tuple[float, float]:
    """Largest admissible ``|k12|`` and ``|k21|`` for a 2x2 system."""
    if coeffs.k != 2 or coeffs.m != 1:
        raise UnsupportedShapeError(f"feedback bounds need k=2, m=1, got k={coeffs.k}, m={coeffs.m}")
    P = np.asarray(weights, dtype=float)
    lp, lm = coeffs.lambda_plus[:, 0], coeffs.lambda_minus[:, 0]
    k12 = math.sqrt(lm[1] * P[0, 1] / (lp[0] * P[1, 0]))
    k21 = math.sqrt(lp[-2] * P[-1, 0] / (lm[-1] * P[-2, 1]))
    return k12, k21


# --------------------------------------------------------------------------
# continuous conditions

@dataclass
class ContinuousReport:
    interior_margin: float
    interior_eta: float
    boundary_margin: float
    interior_ok: bool
    boundary_ok: bool
    x: np.ndarray = field(repr=False)
    per_x: np.ndarray = field(repr=False)


def check_continuous(speeds: Callable[[float], np.ndarray], source: Callable[[float], np.ndarray],
                     weight: Callable[[float], np.ndarray], K: FeedbackMatrix, m: int, l: float,
                     xi: float, samples: int = 200) -> ContinuousReport:
    """Sample both continuous conditions on a uniform grid of ``[0, l]``.

    ``speeds(x)`` returns the signed diagonal of ``Lambda(x)``, ``source(x)``
    the matrix ``Pi(x)`` and ``weight(x)`` the diagonal of ``P(x)``.  The
    derivatives use central differences with step ``l / (10 samples)``.
    """
    if samples < 2:
        raise InvalidParameterError("samples must be at least 2")
    h = l / (10 * samples)
    xs = np.linspace(0.0, l, samples)
    per_x = np.empty(samples)
    eta_x = np.empty(samples)
    scale = 0.0
    for i, x in enumerate(xs):
        lam = np.asarray(speeds(x), dtype=float)
        p = np.asarray(weight(x), dtype=float)
        Pi = np.atleast_2d(np.asarray(source(x), dtype=float))
        dp = (np.asarray(weight(x + h)) - np.asarray(weight(x - h))) / (2 * h)
        dlam = (np.asarray(speeds(x + h)) - np.asarray(speeds(x - h))) / (2 * h)
        P = np.diag(p)
        Q = np.diag(-lam * dp - dlam * p) + Pi.T @ P + P @ Pi - xi * P
        per_x[i] = min_eig_symmetric(Q)
        s = 1.0 / np.sqrt(p)
        eta_x[i] = min_eig_symmetric(s[:, None] * Q * s[None, :])
        scale = max(scale, float(np.max(np.sum(np.abs(Q), axis=1))))
    lam0, laml = np.abs(np.asarray(speeds(0.0))), np.abs(np.asarray(speeds(l)))
    p0, pl = np.asarray(weight(0.0), dtype=float), np.asarray(weight(l), dtype=float)
    outgoing = np.concatenate([laml[:m] * pl[:m], lam0[m:] * p0[m:]])
    incoming = np.concatenate([lam0[:m] * p0[:m], laml[m:] * pl[m:]])
    Kf = K.full
    B = np.diag(outgoing) - Kf.T @ np.diag(incoming) @ Kf
    b_margin = min_eig_symmetric(B)
    margin = float(per_x.min())
    return ContinuousReport(
        interior_margin=margin, interior_eta=float(eta_x.min()), boundary_margin=b_margin,
        interior_ok=margin > PSD_RTOL * max(1.0, scale), boundary_ok=b_margin >= -_tolerance(B),
        x=xs, per_x=per_x)


# --------------------------------------------------------------------------
# combined report and ISS check

@dataclass
class ConditionReport:
    theta: CheckResult
    source: CheckResult
    boundary: CheckResult
    zeta: float
    beta: float
    eta_cert: float
    eta_closed: Optional[float] = None
    feedback: Optional[Tuple[float, float]] = None
    continuous: Optional[ContinuousReport] = None

    @property
    def theta_margin(self) -> float:
        return self.theta.margin

    @property
    def source_margin(self) -> float:
        return self.source.margin

    @property
    def boundary_margin(self) -> float:
        return self.boundary.margin

    @property
    def C(self) -> float:
        return self.beta / self.zeta

    @property
    def verdicts(self) -> dict:
        out = {"theta": self.theta.verdict, "source": self.source.verdict,
               "boundary": self.boundary.verdict}
        if self.continuous is not None:
            out["continuous_interior"] = self.continuous.interior_ok
            out["continuous_boundary"] = self.continuous.boundary_ok
        return out

    @property
    def all_ok(self) -> bool:
        return all(self.verdicts.values())


def check_conditions(coeffs: SystemCoefficients, grid: GridSpec, K: FeedbackMatrix, weights: np.ndarray,
                     xi: float, mu: Optional[float] = None,
                     continuous: Optional[ContinuousReport] = None) -> ConditionReport:
    """Evaluate every discrete condition and collect rates and bounds."""
    theta = check_theta(coeffs, weights, xi, grid)
    source = check_source_matrix(coeffs, weights, grid.dt)
    boundary = check_boundary_matrix(coeffs, weights, K)
    zeta, beta = weight_bounds(weights)
    eta_closed = None
    if mu is not None:
        eta_closed = decay_rate_exponential(mu, coeffs.speed_min, xi, grid.dt, grid.dx)
    fb = feedback_bounds(coeffs, weights) if (coeffs.k == 2 and coeffs.m == 1) else None
    return ConditionReport(theta=theta, source=source, boundary=boundary, zeta=zeta, beta=beta,
                           eta_cert=theta.margin, eta_closed=eta_closed, feedback=fb,
                           continuous=continuous)


def iss_bound_check(series, w0_norm2: float, norm2, rtol: float = 1e-12) -> bool:
    """Check the discrete ISS estimate with ``C = beta / zeta`` at every level.

    ``dx sum|W^{n+1}|^2 <= C e^{-eta t^{n+1}} dx sum|W^0|^2
    + (C/eta)(1/xi + dt) S^n``.
    """
    eta = series.eta
    if not eta > 0:
        raise NoCertificateError(f"decay rate must be positive, got eta={eta!r}")
    norm2 = np.asarray(norm2, dtype=float)
    C = series.beta / series.zeta
    t = np.asarray(series.t)[1:]
    bound = (C * np.exp(-eta * t) * w0_norm2
             + C / eta * (1.0 / series.xi + series.dt) * np.asarray(series.S)[:-1])
    lhs = norm2[1:]
    slack = rtol * np.maximum(np.abs(bound), np.abs(lhs)) + 1e-300
    return bool(np.all(lhs <= bound + slack))
