"""Linearised Saint-Venant channel model in Riemann coordinates.

By default the momentum source is ``cf u^2 / h - g sb``, which makes
``(h, u) = (2, 3)`` with ``sb ~ 0.0459`` a constant steady state.  Setting ``friction_with_g=True`` switches to
``g (cf u^2 / h - sb)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SingularGainError, SteadyStateError, InvalidParameterError
from .model import (ExponentialWeights, FeedbackMatrix, GridSpec, StateField, SystemCoefficients,
                    build_grid, realize_weights, separable_forcing, zero_forcing)

G = 9.81


@dataclass(frozen=True)
class SaintVenantModel:
    """Physical parameters of a rectangular, unit-width channel."""

    g: float = G
    cf: float = 0.1
    sb: float = 0.0459
    friction_with_g: bool = False
    rain_star: Optional[Callable[[float], float]] = None

    @property
    def friction_scale(self) -> float:
        return self.g * self.cf if self.friction_with_g else self.cf

    def friction(self, h, u):
        """Momentum source ``F(h, u)`` excluding the rain term."""
        if self.friction_with_g:
            return self.g * (self.cf * u * u / h - self.sb)
        return self.cf * u * u / h - self.g * self.sb

    def r_star(self, x) -> float:
        return 0.0 if self.rain_star is None else float(self.rain_star(x))


def balanced_slope(h: float, u: float, cf: float = 0.1, g: float = G, friction_with_g: bool = False) -> float:
    """Bottom slope making ``(h, u)`` a constant steady state without rain."""
    if friction_with_g:
        return cf * u * u / h
    return cf * u * u / (g * h)


def steady_rhs(model: SaintVenantModel, x: float, h: float, u: float):
    """Right-hand side ``(h*', u*')`` of the steady-state ODEs."""
    g = model.g
    denom = u * u - g * h
    F = model.friction(h, u)
    R = model.r_star(x)
    dh = (h * F + 2.0 * u * R) / denom
    du = -(u * F + (g + u * u / h) * R) / denom
    return dh, du


def momentum_residual(model: SaintVenantModel, h: float, u: float, x: float = 0.0) -> float:
    """Steady momentum balance ``u u' + g h' + F + u R*/h`` for a constant profile."""
    return float(model.friction(h, u) + u * model.r_star(x) / h)


@dataclass(frozen=True)
class SteadyState:
    """Steady depth and velocity with derivatives on cells and ghosts (``J + 2`` rows)."""

    x: np.ndarray
    h: np.ndarray
    u: np.ndarray
    dh: np.ndarray
    du: np.ndarray


def _rk4(model, x, y, step):
    def f(xx, yy):
        return np.array(steady_rhs(model, xx, yy[0], yy[1]))
    k1 = f(x, y)
    k2 = f(x + step / 2, y + step / 2 * k1)
    k3 = f(x + step / 2, y + step / 2 * k2)
    k4 = f(x + step, y + step * k3)
    return y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _subcritical(model, x, y):
    h, u = y
    if not (h > 0 and model.g * h - u * u > 0 and np.all(np.isfinite(y))):
        raise SteadyStateError(x)


def steady_state_solve(model: SaintVenantModel, h0: float, u0: float, grid: GridSpec,
                       substeps: int = 4) -> SteadyState:
    """Integrate the steady-state ODEs from ``x = 0`` with classical RK4.

    The step is ``dx / substeps``; values are sampled at the cell centres and
    at both ghost centres.  Raises :class:`SteadyStateError` when the profile
    leaves the subcritical regime.
    """
    if substeps < 2 or substeps % 2:
        raise InvalidParameterError("substeps must be an even integer >= 2")
    y0 = np.array([h0, u0], dtype=float)
    _subcritical(model, 0.0, y0)
    step = grid.dx / substeps
    half = substeps // 2
    x_ext = grid.x_ext
    samples = np.empty((grid.J + 2, 2))

    y, x = y0.copy(), 0.0
    for _ in range(half):
        y = _rk4(model, x, y, -step)
        x -= step
        _subcritical(model, x, y)
    samples[0] = y

    y, x = y0.copy(), 0.0
    for _ in range(half):
        y = _rk4(model, x, y, step)
        x += step
        _subcritical(model, x, y)
    samples[1] = y
    for e in range(2, grid.J + 2):
        for _ in range(substeps):
            y = _rk4(model, x, y, step)
            x += step
            _subcritical(model, x, y)
        samples[e] = y

    h, u = samples[:, 0].copy(), samples[:, 1].copy()
    d = np.array([steady_rhs(model, xx, hh, uu) for xx, hh, uu in zip(x_ext, h, u)])
    return SteadyState(x=x_ext, h=h, u=u, dh=d[:, 0], du=d[:, 1])


def constant_steady_state(h: float, u: float, grid: GridSpec) -> SteadyState:
    n = grid.J + 2
    return SteadyState(x=grid.x_ext, h=np.full(n, float(h)), u=np.full(n, float(u)),
                       dh=np.zeros(n), du=np.zeros(n))


def characteristic_speeds(h, u, g: float = G):
    c = np.sqrt(g * np.asarray(h))
    return u + c, u - c


def source_coefficients(model: SaintVenantModel, h, u, dh, du, r_star=0.0):
    """Source coefficients ``(gamma11, gamma12, gamma21, gamma22)`` in Riemann coordinates."""
    g = model.g
    c = np.sqrt(g * h)
    lam1, lam2 = u + c, u - c
    fr = model.friction_scale * u * u / (2.0 * h)
    rain = r_star / (2.0 * h * c)
    g11 = du + (lam1 + 2 * c) * dh / (4 * h) + fr * (2 / u - 1 / c) - rain * lam2
    g12 = -(lam1 - 2 * c) * dh / (4 * h) + fr * (2 / u + 1 / c) + rain * lam1
    g21 = -(lam2 + 2 * c) * dh / (4 * h) + fr * (2 / u - 1 / c) - rain * lam2
    g22 = du + (lam2 - 2 * c) * dh / (4 * h) + fr * (2 / u + 1 / c) + rain * lam1
    return g11, g12, g21, g22


def physical_source_matrix(model: SaintVenantModel, h, u, dh, du, r_star=0.0) -> np.ndarray:
    """Source matrix of the linearised system in ``(depth, velocity)`` perturbations."""
    k = model.friction_scale
    return np.array([[du, dh],
                     [-k * u * u / h ** 2 - u * r_star / h ** 2, du + 2 * k * u / h + r_star / h]])


def riemann_matrix(h, g: float = G) -> np.ndarray:
    s = math.sqrt(g / h)
    return np.array([[s, 1.0], [-s, 1.0]])


def riemann_forward(v1, v2, h_star, g: float = G):
    """Riemann invariants ``w1 = v2 + v1 sqrt(g/h*)``, ``w2 = v2 - v1 sqrt(g/h*)``."""
    s = np.sqrt(g / np.asarray(h_star, dtype=float))
    return v2 + v1 * s, v2 - v1 * s


def riemann_backward(w1, w2, h_star, g: float = G):
    """Inverse of :func:`riemann_forward`."""
    r = np.sqrt(np.asarray(h_star, dtype=float) / g)
    return 0.5 * r * (w1 - w2), 0.5 * (w1 + w2)


def physical_feedback_to_k(kappa0: float, kappal: float, h_star_0: float, h_star_l: float,
                           g: float = G):
    """Map the physical gains of ``u = kappa h`` at both ends to ``(k12, k21)``."""
    def one(kappa, h):
        a = kappa * math.sqrt(h / g)
        if abs(a - 1.0) <= 1e-12:
            raise SingularGainError(f"kappa*sqrt(h*/g) = {a!r} makes the feedback gain singular")
        return (a + 1.0) / (a - 1.0)
    return one(kappa0, h_star_0), one(kappal, h_star_l)


def rainfall(amp: float = 0.25, t_stop: float = 5.0) -> Callable[[float], float]:
    """Homogeneous rainfall ``amp sin^2(pi t)`` for ``t < t_stop``, zero afterwards."""
    def R(t: float) -> float:
        return amp * math.sin(math.pi * t) ** 2 if t < t_stop else 0.0
    return R


def linearize(steady: SteadyState, model: SaintVenantModel, grid: GridSpec,
              rain: Optional[Callable[[float], float]] = None) -> SystemCoefficients:
    """Decoupled 2x2 coefficients around ``steady``.

    ``rain(t)`` is a spatially homogeneous intensity; the disturbance is
    driven by ``delta = R - R*``.  With ``rain=None`` the rain equals ``R*``
    and the disturbance vanishes.
    """
    lam1, lam2 = characteristic_speeds(steady.h, steady.u, model.g)
    if np.any(lam1 <= 0) or np.any(lam2 >= 0):
        raise SteadyStateError(float(steady.x[0]), "steady state is not subcritical")
    inner = slice(1, -1)
    h, u = steady.h[inner], steady.u[inner]
    r_star = np.array([model.r_star(x) for x in grid.x])
    g11, g12, g21, g22 = source_coefficients(model, h, u, steady.dh[inner], steady.du[inner], r_star)
    pi = np.stack([np.column_stack([g11, g12]), np.column_stack([g21, g22])], axis=1)
    J = grid.J
    if rain is None:
        forcing = zero_forcing(J, 2)
    else:
        if np.any(r_star != 0):
            raise InvalidParameterError("non-zero steady rain needs an explicit disturbance model")
        pattern = np.column_stack([-lam2[inner] / h, -lam1[inner] / h])
        forcing = separable_forcing(pattern, rain)
    return SystemCoefficients(k=2, m=1, lambda_plus=lam1[:, None].copy(),
                              lambda_minus=(-lam2)[:, None].copy(), pi=pi, forcing=forcing)


@dataclass
class SVExperiment:
    grid: GridSpec
    model: SaintVenantModel
    steady: SteadyState
    coeffs: SystemCoefficients
    K: FeedbackMatrix
    W0: StateField
    weights_spec: ExponentialWeights
    weights: np.ndarray
    mu: float
    xi: float
    alpha: float
    bounds: tuple


def sv_experiment(J: int = 1600, cfl: float = 0.75, T: float = 10.0, mu: float = 0.1,
                  xi: float = 0.125, k12: float = 0.75, k21: float = 0.75, *,
                  model: Optional[SaintVenantModel] = None, h_star: float = 2.0, u_star: float = 3.0,
                  rain_amp: float = 0.25, t_stop: float = 5.0, h_init: float = 2.5,
                  v_amp: float = 4.0, p1: Optional[float] = None, p2: Optional[float] = None,
                  l: float = 1.0) -> SVExperiment:
    """Assemble the rain-disturbed channel run around ``(h*, u*) = (2, 3)``.

    Default model uses the slope that makes ``(h*, u*)`` an exact constant
    steady state.  Default weights are ``p1 = gamma21`` and ``p2 = gamma12``
    at ``x = 0``.  Gains outside the admissible bounds only warn.
    """
    if model is None:
        model = SaintVenantModel(sb=balanced_slope(h_star, u_star, 0.1, G))
    c = math.sqrt(model.g * h_star)
    grid = build_grid(l, J, T, cfl, u_star + c)
    steady = steady_state_solve(model, h_star, u_star, grid)
    grid = build_grid(l, J, T, cfl, float(np.max(steady.u + np.sqrt(model.g * steady.h))))
    rain = rainfall(rain_amp, t_stop) if rain_amp > 0 else None
    coeffs = linearize(steady, model, grid, rain)
    if p1 is None:
        p1 = float(coeffs.pi[0, 1, 0])
    if p2 is None:
        p2 = float(coeffs.pi[0, 0, 1])
    spec = ExponentialWeights([p1], [p2], mu)
    P = realize_weights(spec, grid, 2, 1)
    K = FeedbackMatrix.from_gains(k12, k21)
    from .stability import feedback_bounds
    bounds = feedback_bounds(coeffs, P)
    if abs(k12) > bounds[0] or abs(k21) > bounds[1]:
        warnings.warn(f"feedback gains ({k12}, {k21}) exceed the admissible bounds "
                      f"({bounds[0]:.4f}, {bounds[1]:.4f}); boundary condition not certified",
                      stacklevel=2)
    x = grid.x
    hs, us = steady.h[1:-1], steady.u[1:-1]
    v1 = h_init - hs
    v2 = v_amp * np.sin(np.pi * x) - us
    w1, w2 = riemann_forward(v1, v2, hs, model.g)
    from .solver import apply_boundary
    W0 = apply_boundary(StateField(np.column_stack([w1, w2]), m=1), K)
    return SVExperiment(grid=grid, model=model, steady=steady, coeffs=coeffs, K=K, W0=W0,
                        weights_spec=spec, weights=P, mu=mu, xi=xi, alpha=coeffs.speed_min,
                        bounds=bounds)
