"""Grids, system coefficients, feedback matrices and Lyapunov weights.

Arrays that carry ghost cells ("extended" arrays) have ``J + 2`` rows; row
``j + 1`` holds index ``j`` so row 0 is the left ghost ``j = -1`` and the
last row is the right ghost ``j = J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidParameterError, InvalidWeightError


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid with a CFL-constrained fixed time step."""

    l: float
    J: int
    T: float
    cfl: float
    lambda_max: float
    dx: float
    dt: float
    N: int

    @property
    def x(self) -> np.ndarray:
        """Cell centres ``x_j = (j + 1/2) dx`` for ``j = 0..J-1``."""
        return (np.arange(self.J) + 0.5) * self.dx

    @property
    def x_ext(self) -> np.ndarray:
        """Cell and ghost centres for ``j = -1..J``."""
        return (np.arange(-1, self.J + 1) + 0.5) * self.dx

    @property
    def t(self) -> np.ndarray:
        """Time levels ``t^n = n dt`` for ``n = 0..N``."""
        return np.arange(self.N + 1) * self.dt

    @property
    def courant(self) -> float:
        return self.dt * self.lambda_max / self.dx


def build_grid(l: float, J: int, T: float, cfl: float, lambda_max: float) -> GridSpec:
    """Build a uniform grid with ``dt = cfl * dx / lambda_max``.

    The step count is ``ceil(T / dt)``, so the last level may overshoot ``T``
    by less than one step.
    """
    for name, value in (("l", l), ("T", T), ("cfl", cfl), ("lambda_max", lambda_max)):
        if not (value > 0 and math.isfinite(value)):
            raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
    if int(J) != J or J < 2:
        raise InvalidParameterError(f"J must be an integer >= 2, got {J!r}")
    if cfl > 1:
        raise InvalidParameterError(f"cfl must not exceed 1, got {cfl!r}")
    J = int(J)
    dx = l / J
    dt = cfl * dx / lambda_max
    # guard against T/dt landing a hair above an integer
    N = max(1, math.ceil(T / dt - 1e-9))
    return GridSpec(l=l, J=J, T=T, cfl=cfl, lambda_max=lambda_max, dx=dx, dt=dt, N=N)


Forcing = Callable[[float], np.ndarray]


def zero_forcing(J: int, k: int) -> Forcing:
    zeros = np.zeros((J, k))
    zeros.setflags(write=False)

    def forcing(t: float) -> np.ndarray:
        return zeros

    forcing.is_zero = True  # type: ignore[attr-defined]
    return forcing


@dataclass(frozen=True)
class SystemCoefficients:
    """Sampled coefficients of ``W_t + Lambda W_x + Pi W = Psi``.

    ``lambda_plus`` and ``lambda_minus`` are extended arrays of positive
    magnitudes, so ``Lambda = diag{lambda_plus, -lambda_minus}``.  ``pi`` is
    sampled at the ``J`` cell centres.  ``forcing(t)`` returns the ``(J, k)``
    disturbance at the cell centres.
    """

    k: int
    m: int
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    pi: np.ndarray
    forcing: Forcing

    def __post_init__(self):
        J = self.pi.shape[0]
        if self.pi.shape != (J, self.k, self.k):
            raise InvalidParameterError(f"pi must have shape (J, k, k), got {self.pi.shape}")
        if self.lambda_plus.shape != (J + 2, self.m):
            raise InvalidParameterError(
                f"lambda_plus must have shape {(J + 2, self.m)}, got {self.lambda_plus.shape}")
        if self.lambda_minus.shape != (J + 2, self.k - self.m):
            raise InvalidParameterError(
                f"lambda_minus must have shape {(J + 2, self.k - self.m)}, got {self.lambda_minus.shape}")
        if np.any(self.lambda_plus <= 0) or np.any(self.lambda_minus <= 0):
            raise InvalidParameterError("characteristic speed magnitudes must be strictly positive")

    @property
    def J(self) -> int:
        return self.pi.shape[0]

    @property
    def speed_max(self) -> float:
        return float(max(self.lambda_plus.max(initial=0.0), self.lambda_minus.max(initial=0.0)))

    @property
    def speed_min(self) -> float:
        """Smallest speed magnitude over the interior cells."""
        inner = np.concatenate([self.lambda_plus[1:-1].ravel(), self.lambda_minus[1:-1].ravel()])
        return float(inner.min())

    def psi(self, j: int, n: int, grid: GridSpec) -> np.ndarray:
        """Disturbance vector at cell ``j`` and time level ``n``."""
        return self.forcing(n * grid.dt)[j]


@dataclass(frozen=True)
class FeedbackMatrix:
    """Boundary feedback ``K = [[0, K-], [K+, 0]]``.

    Maps the outgoing traces ``[W+_{J-1}; W-_0]`` to the incoming ghost
    values ``[W+_{-1}; W-_J]``.
    """

    k_minus: np.ndarray
    k_plus: np.ndarray

    @classmethod
    def from_gains(cls, k12: float, k21: float) -> "FeedbackMatrix":
        return cls(k_minus=np.array([[float(k12)]]), k_plus=np.array([[float(k21)]]))

    @property
    def m(self) -> int:
        return self.k_minus.shape[0]

    @property
    def k(self) -> int:
        return self.k_minus.shape[0] + self.k_minus.shape[1]

    @property
    def full(self) -> np.ndarray:
        m, k = self.m, self.k
        K = np.zeros((k, k))
        K[:m, m:] = self.k_minus
        K[m:, :m] = self.k_plus
        return K

    def validate(self, k: int, m: int) -> None:
        if self.k_minus.shape != (m, k - m) or self.k_plus.shape != (k - m, m):
            raise InvalidParameterError(
                f"feedback blocks {self.k_minus.shape}/{self.k_plus.shape} do not fit k={k}, m={m}")


@dataclass(frozen=True)
class ExplicitWeights:
    """Per-index diagonal weights; ``p`` has shape ``(J + 2, k)`` (j = -1..J)."""

    p: np.ndarray


@dataclass(frozen=True)
class ExponentialWeights:
    """``P(x) = diag{p_plus * exp(-mu x), p_minus * exp(mu x)}``."""

    p_plus: Sequence[float]
    p_minus: Sequence[float]
    mu: float


WeightSpec = Union[ExplicitWeights, ExponentialWeights]


def realize_weights(spec: WeightSpec, grid: GridSpec, k: int, m: int) -> np.ndarray:
    """Evaluate diagonal weights on cells and ghosts; returns ``(J + 2, k)``."""
    if isinstance(spec, ExplicitWeights):
        P = np.asarray(spec.p, dtype=float)
        if P.shape != (grid.J + 2, k):
            raise InvalidWeightError(f"explicit weights need shape {(grid.J + 2, k)}, got {P.shape}")
    elif isinstance(spec, ExponentialWeights):
        pp = np.asarray(spec.p_plus, dtype=float).reshape(-1)
        pm = np.asarray(spec.p_minus, dtype=float).reshape(-1)
        if pp.size != m or pm.size != k - m:
            raise InvalidWeightError(f"exponential weights need {m} + {k - m} constants")
        if not spec.mu > 0:
            raise InvalidWeightError(f"mu must be positive, got {spec.mu!r}")
        x = grid.x_ext[:, None]
        P = np.hstack([pp[None, :] * np.exp(-spec.mu * x), pm[None, :] * np.exp(spec.mu * x)])
    else:
        raise InvalidWeightError(f"unknown weight spec {type(spec).__name__}")
    if not np.all(np.isfinite(P)) or np.any(P <= 0):
        raise InvalidWeightError("every realized weight entry must be positive and finite")
    P = P.copy()
    P.setflags(write=False)
    return P


@dataclass(frozen=True)
class StateField:
    """Cell values ``w`` (shape ``(J, k)``) plus the incoming ghost values."""

    w: np.ndarray
    ghost_left: np.ndarray = field(default=None)
    ghost_right: np.ndarray = field(default=None)
    m: int = 0

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        k = w.shape[1]
        if self.ghost_left is None:
            object.__setattr__(self, "ghost_left", np.zeros(self.m))
        if self.ghost_right is None:
            object.__setattr__(self, "ghost_right", np.zeros(k - self.m))

    @property
    def J(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.w.shape[1]

    @property
    def plus(self) -> np.ndarray:
        return self.w[:, :self.m]

    @property
    def minus(self) -> np.ndarray:
        return self.w[:, self.m:]

    def norm2(self, dx: float) -> float:
        """Discrete squared L2 norm ``dx * sum_j |W_j|^2``."""
        return float(dx * np.sum(self.w * self.w))


def _disturbance_window(amp: float, t_stop: float) -> Callable[[float], float]:
    def envelope(t: float) -> float:
        return amp * math.sin(math.pi * t) ** 2 if t < t_stop else 0.0
    return envelope


def separable_forcing(pattern: np.ndarray, envelope: Callable[[float], float]) -> Forcing:
    """Forcing ``Psi(x_j, t) = envelope(t) * pattern[j]``."""
    pattern = np.array(pattern, dtype=float)
    pattern.setflags(write=False)
    cache = {}

    def forcing(t: float) -> np.ndarray:
        a = envelope(t)
        if a == 0.0:
            out = cache.get("zero")
            if out is None:
                out = cache["zero"] = np.zeros_like(pattern)
            return out
        return a * pattern

    return forcing


def linear_example(J: int = 1600, cfl: float = 0.75, T: float = 10.0, k12: float = 0.5,
                   k21: float = 0.5, amp: float = 0.01, *, l: float = 1.0,
                   gamma: Optional[np.ndarray] = None, f: float = -0.5, g: float = 0.5,
                   t_stop: float = 5.0):
    """The constant-speed 2x2 test problem with ``lambda = +-1``.

    Returns ``(grid, coeffs, K, W0)``.  The disturbance is
    ``(amp sin^2(pi t), -amp sin^2(pi t))`` for ``t < t_stop`` and zero after.
    ``gamma`` is an optional constant 2x2 source matrix (zero by default).
    The initial ghosts satisfy the compatibility condition.
    """
    if amp < 0:
        raise InvalidParameterError(f"amp must be non-negative, got {amp!r}")
    grid = build_grid(l, J, T, cfl, 1.0)
    Jn = grid.J
    pi = np.zeros((Jn, 2, 2))
    if gamma is not None:
        pi[:] = np.asarray(gamma, dtype=float)
    if amp == 0:
        forcing = zero_forcing(Jn, 2)
    else:
        pattern = np.tile([1.0, -1.0], (Jn, 1))
        forcing = separable_forcing(pattern, _disturbance_window(amp, t_stop))
    coeffs = SystemCoefficients(k=2, m=1, lambda_plus=np.ones((Jn + 2, 1)),
                                lambda_minus=np.ones((Jn + 2, 1)), pi=pi, forcing=forcing)
    K = FeedbackMatrix.from_gains(k12, k21)
    w0 = np.column_stack([np.full(Jn, f, dtype=float), np.full(Jn, g, dtype=float)])
    from .solver import apply_boundary
    W0 = apply_boundary(StateField(w0, m=1), K)
    return grid, coeffs, K, W0
