"""Upwind/explicit-Euler operator-splitting solver with ghost-cell feedback."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import InvalidParameterError, NumericalBlowupError
from .model import FeedbackMatrix, GridSpec, StateField, SystemCoefficients

BLOWUP_THRESHOLD = 1e12
BOUNDARY_TIMINGS = ("post", "pre")


def _check_finite(w: np.ndarray, step: int) -> None:
    # the threshold comparison is False for NaN, so test finiteness via the max
    peak = np.max(np.abs(w), initial=0.0)
    if not peak <= BLOWUP_THRESHOLD:
        raise NumericalBlowupError(step, f"numerical blowup at step n={step} (max |W| = {peak:.3g})")


def _ghosts(w: np.ndarray, m: int, K: FeedbackMatrix):
    """Ghost values ``[W+_{-1}; W-_J] = K [W+_{J-1}; W-_0]`` from cell values."""
    trace_plus = w[-1, :m]
    trace_minus = w[0, m:]
    return K.k_minus @ trace_minus, K.k_plus @ trace_plus


def apply_boundary(state: StateField, K: FeedbackMatrix) -> StateField:
    """Return ``state`` with its ghosts set from the feedback law.

    At ``n = 0`` this imposes the discrete compatibility condition.
    """
    if state.J < 2:
        raise InvalidParameterError("at least two interior cells are required")
    K.validate(state.k, state.m)
    left, right = _ghosts(state.w, state.m, K)
    return StateField(state.w, left, right, m=state.m)


def _transport(w, gl, gr, m, lp, lm, ratio, dt, psi):
    out = np.empty_like(w)
    wp = w[:, :m]
    wm = w[:, m:]
    # positive speeds: backward difference with speed Lambda+_{j-1}
    dp = np.empty_like(wp)
    dp[0] = wp[0] - gl
    np.subtract(wp[1:], wp[:-1], out=dp[1:])
    out[:, :m] = wp - ratio * lp[:-2] * dp
    # negative speeds: forward difference with speed -Lambda-_{j+1}
    dm = np.empty_like(wm)
    dm[-1] = gr - wm[-1]
    np.subtract(wm[1:], wm[:-1], out=dm[:-1])
    out[:, m:] = wm + ratio * lm[2:] * dm
    if psi is not None:
        out += dt * psi
    return out


def transport_step(state: StateField, coeffs: SystemCoefficients, grid: GridSpec, n: int) -> StateField:
    """Upwind transport plus forcing: the intermediate state of step ``n``.

    Ghosts must already hold the boundary values for this step.
    """
    psi = coeffs.forcing(n * grid.dt)
    w = _transport(state.w, state.ghost_left, state.ghost_right, coeffs.m,
                   coeffs.lambda_plus, coeffs.lambda_minus, grid.dt / grid.dx, grid.dt, psi)
    _check_finite(w, n)
    return StateField(w, state.ghost_left, state.ghost_right, m=state.m)


def _source(w, pi, dt):
    return w - dt * np.einsum("jab,jb->ja", pi, w)


def source_step(intermediate: StateField, coeffs: SystemCoefficients, grid: GridSpec,
                n: Optional[int] = None) -> StateField:
    """Explicit Euler step for ``W_t + Pi W = 0`` applied per cell."""
    w = _source(intermediate.w, coeffs.pi, grid.dt)
    _check_finite(w, -1 if n is None else n)
    return StateField(w, intermediate.ghost_left, intermediate.ghost_right, m=intermediate.m)


@dataclass
class LyapunovSeries:
    """Per-level Lyapunov values, envelope and running disturbance supremum.

    ``L_up`` is all-NaN when no positive decay rate is available.
    """

    t: np.ndarray
    L: np.ndarray
    L_up: np.ndarray
    S: np.ndarray
    zeta: float
    beta: float
    eta: float
    xi: float
    dt: float

    @property
    def C(self) -> float:
        return self.beta / self.zeta

    @property
    def certified(self) -> bool:
        return self.eta > 0 and bool(np.all(np.isfinite(self.L_up)))

    @property
    def offset(self) -> float:
        """Disturbance contribution to the final envelope value."""
        return self.beta / self.eta * (1.0 / self.xi + self.dt) * float(self.S[-2] if len(self.S) > 1 else 0.0)


@dataclass
class SimulationResult:
    final: StateField
    series: LyapunovSeries
    norm2: np.ndarray
    trajectory: Optional[List[np.ndarray]] = None

    @property
    def l2_state(self) -> np.ndarray:
        return np.sqrt(self.norm2)


def simulate(coeffs: SystemCoefficients, grid: GridSpec, K: FeedbackMatrix, W0: StateField,
             weights: np.ndarray, xi: float, *, eta: Optional[float] = None,
             boundary_timing: str = "post", keep_trajectory: bool = False) -> SimulationResult:
    """Run ``N`` steps of boundary update, transport and source.

    Parameters
    ----------
    weights : ndarray
        Realized extended weights, shape ``(J + 2, k)``.
    xi : float
        Splitting parameter of the ISS estimate.
    eta : float, optional
        Decay rate used for the envelope.  Defaults to the certified rate from
        :func:`hyplyap.stability.check_theta`.
    boundary_timing : {"post", "pre"}
        ``"post"`` refreshes the ghosts of step ``n`` from ``W^n`` (the
        post-source state).  ``"pre"`` uses the intermediate state of the
        previous step, before its source update.
    """
    from . import stability

    if xi <= 0:
        raise InvalidParameterError(f"xi must be positive, got {xi!r}")
    if boundary_timing not in BOUNDARY_TIMINGS:
        raise InvalidParameterError(f"boundary_timing must be one of {BOUNDARY_TIMINGS}")
    J, k, m = grid.J, coeffs.k, coeffs.m
    if W0.w.shape != (J, k) or coeffs.J != J or W0.m != m:
        raise InvalidParameterError("initial state, coefficients and grid disagree in shape")
    K.validate(k, m)
    if weights.shape != (J + 2, k):
        raise InvalidParameterError(f"weights must have shape {(J + 2, k)}")
    if grid.dt * coeffs.speed_max / grid.dx > 1 + 1e-12:
        raise InvalidParameterError("CFL condition violated for these coefficients")

    dx, dt, N = grid.dx, grid.dt, grid.N
    ratio = dt / dx
    P = weights[1:-1]
    zeta, beta = stability.weight_bounds(weights)
    if eta is None:
        eta = stability.check_theta(coeffs, weights, xi, grid).margin

    pi = coeffs.pi
    has_source = bool(np.any(pi))
    lp, lm = coeffs.lambda_plus, coeffs.lambda_minus
    forcing = coeffs.forcing

    L = np.empty(N + 1)
    S = np.empty(N + 1)
    norm2 = np.empty(N + 1)
    trajectory = [] if keep_trajectory else None

    w = np.array(W0.w, dtype=float)
    gl, gr = _ghosts(w, m, K)
    trace_src = w
    s_max = 0.0
    for n in range(N):
        if boundary_timing == "post" or n == 0:
            gl, gr = _ghosts(w, m, K)
        else:
            gl, gr = _ghosts(trace_src, m, K)
        w2 = w * w
        L[n] = dx * float(np.sum(P * w2))
        norm2[n] = dx * float(w2.sum())
        if keep_trajectory:
            trajectory.append(w.copy())
        psi = forcing(n * dt)
        s_max = max(s_max, dx * float(np.sum(psi * psi)))
        S[n] = s_max
        w_tilde = _transport(w, gl, gr, m, lp, lm, ratio, dt, psi)
        trace_src = w_tilde
        w = _source(w_tilde, pi, dt) if has_source else w_tilde
        _check_finite(w, n)
    w2 = w * w
    L[N] = dx * float(np.sum(P * w2))
    norm2[N] = dx * float(w2.sum())
    psi = forcing(N * dt)
    S[N] = max(s_max, dx * float(np.sum(psi * psi)))
    if keep_trajectory:
        trajectory.append(w.copy())

    t = np.arange(N + 1) * dt
    if eta > 0 and eta * dt < 1:
        L_up = stability.gronwall_envelope(L[0], eta, beta, xi, dt, S)
    else:
        L_up = np.full(N + 1, np.nan)
    series = LyapunovSeries(t=t, L=L, L_up=L_up, S=S, zeta=zeta, beta=beta, eta=float(eta),
                            xi=float(xi), dt=dt)
    final_left, final_right = _ghosts(w, m, K)
    final = StateField(w, final_left, final_right, m=m)
    return SimulationResult(final=final, series=series, norm2=norm2, trajectory=trajectory)
