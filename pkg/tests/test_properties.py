"""Randomised invariants (hypothesis, 1000 examples each)."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from hyplyap import (ExplicitWeights, FeedbackMatrix, StateField, SystemCoefficients, build_grid,
                     check_conditions, lyapunov_value, min_eig_symmetric, realize_weights,
                     simulate, transport_step, weight_bounds)
from hyplyap import saint_venant as sv
from hyplyap.model import zero_forcing
from hyplyap.stability import discrete_gronwall_closed_form

MANY = settings(max_examples=1000, deadline=None,
                suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@MANY
@given(seeds, st.integers(1, 6))
def test_quadratic_identity(seed, k):
    rng = np.random.default_rng(seed)
    y, z = rng.normal(size=k) * 10, rng.normal(size=k) * 10
    A = rng.normal(size=(k, k))
    A = A + A.T
    lhs = -2 * y @ A @ (y - z)
    rhs = -y @ A @ y + z @ A @ z - (y - z) @ A @ (y - z)
    scale = np.abs(A).max() * (np.abs(y).max() + np.abs(z).max()) ** 2 * k * k
    assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300)


@MANY
@given(seeds, st.integers(1, 6), st.floats(1e-3, 1e3))
def test_young_inequality(seed, k, xi):
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(k, rng.integers(1, k + 1)))
    B = R @ R.T
    y, z = rng.normal(size=k), rng.normal(size=k)
    cross = 2 * y @ B @ z
    bound = xi * y @ B @ y + z @ B @ z / xi
    slack = 1e-12 * (abs(xi * y @ B @ y) + abs(z @ B @ z / xi) + abs(cross))
    assert cross <= bound + slack
    assert -cross <= bound + slack


@MANY
@given(finite, finite, st.floats(1e-3, 1e2))
def test_riemann_round_trip(v1, v2, h):
    w1, w2 = sv.riemann_forward(v1, v2, h)
    b1, b2 = sv.riemann_backward(w1, w2, h)
    scale = max(abs(v1), abs(v2), 1e-300)
    assert abs(b1 - v1) <= 1e-12 * scale * (1 + math.sqrt(9.81 / h))
    assert abs(b2 - v2) <= 1e-12 * scale * (1 + math.sqrt(9.81 / h))


@MANY
@given(st.floats(1e-2, 1e2), st.floats(-20, 20))
def test_diagonalisation_identity(h, u):
    H = sv.riemann_matrix(h)
    Hinv = 0.5 * np.array([[math.sqrt(h / 9.81), -math.sqrt(h / 9.81)], [1.0, 1.0]])
    D = H @ np.array([[u, h], [9.81, u]]) @ Hinv
    l1, l2 = sv.characteristic_speeds(h, u)
    scale = abs(u) + math.sqrt(9.81 * h)
    np.testing.assert_allclose(D, np.diag([l1, l2]), rtol=0, atol=1e-12 * scale * 4)


@MANY
@given(st.floats(0.01, 5), st.floats(0, 5), st.floats(0, 10), st.floats(1e-4, 0.1), st.integers(1, 60))
def test_gronwall_closed_form(a, z, c, dt, n):
    assume(a * dt < 1)
    y = c
    for _ in range(n):
        y = (1 - a * dt) * y + z * dt
    closed = discrete_gronwall_closed_form(c, a, z, dt, n)[-1]
    assert abs(y - closed) <= 1e-12 * max(abs(y), abs(c), z / a, 1e-300) * n


@MANY
@given(seeds, st.integers(2, 30), st.integers(1, 4))
def test_sandwich(seed, J, k):
    rng = np.random.default_rng(seed)
    P = rng.uniform(0.01, 10.0, size=(J + 2, k))
    W = StateField(rng.normal(size=(J, k)) * rng.uniform(0.1, 10), m=0)
    dx = rng.uniform(1e-3, 1.0)
    zeta, beta = weight_bounds(P)
    L = lyapunov_value(W, P, dx)
    n2 = W.norm2(dx)
    assert zeta * n2 <= L * (1 + 1e-12)
    assert L <= beta * n2 * (1 + 1e-12)


@MANY
@given(seeds, st.integers(2, 40), st.integers(1, 3), st.integers(0, 3), st.sampled_from([0.5, 1.0, 2.0, 3.7]))
def test_exact_shift(seed, J, m, nm, a):
    k = m + nm
    rng = np.random.default_rng(seed)
    g = build_grid(rng.uniform(0.1, 5.0), J, 1.0, 1.0, a)
    coeffs = SystemCoefficients(k=k, m=m, lambda_plus=np.full((J + 2, m), a),
                                lambda_minus=np.full((J + 2, nm), a), pi=np.zeros((J, k, k)),
                                forcing=zero_forcing(J, k))
    w = rng.normal(size=(J, k))
    gl, gr = rng.normal(size=m), rng.normal(size=nm)
    out = transport_step(StateField(w, gl, gr, m=m), coeffs, g, 0).w
    tol = 1e-14 * np.abs(np.concatenate([w.ravel(), gl, gr])).max()
    np.testing.assert_allclose(out[1:, :m], w[:-1, :m], rtol=0, atol=tol)
    np.testing.assert_allclose(out[0, :m], gl, rtol=0, atol=tol)
    np.testing.assert_allclose(out[:-1, m:], w[1:, m:], rtol=0, atol=tol)
    if nm:
        np.testing.assert_allclose(out[-1, m:], gr, rtol=0, atol=tol)


@MANY
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_min_eig_2x2(a, b, c):
    got = min_eig_symmetric(np.array([[a, b], [b, c]]))
    closed = ((a + c) - math.sqrt((a - c) ** 2 + 4 * b * b)) / 2
    scale = max(abs(a), abs(b), abs(c), 1e-300)
    assert abs(got - closed) <= 1e-12 * scale


def _random_certified_system(rng):
    """A random system built to (mostly) satisfy every discrete condition."""
    J = int(rng.integers(3, 17))
    k = int(rng.integers(2, 5))
    m = int(rng.integers(1, k))
    l = rng.uniform(0.5, 2.0)
    base = rng.uniform(0.5, 2.0, size=k)
    phase = rng.uniform(0, 2 * np.pi, size=k)
    x_ext = (np.arange(-1, J + 1) + 0.5) * l / J
    speeds = base[None, :] * (1 + 0.05 * np.sin(x_ext[:, None] / l + phase[None, :]))
    mu = rng.uniform(1.0, 4.0)
    xi = rng.uniform(0.01, 0.5)
    p0 = rng.uniform(0.2, 2.0, size=k)
    sign = np.where(np.arange(k) < m, -1.0, 1.0)
    P = p0[None, :] * np.exp(sign[None, :] * mu * x_ext[:, None])
    grid = build_grid(l, J, 1.0, rng.uniform(0.3, 1.0), float(speeds.max()))
    grid = build_grid(l, J, 40 * grid.dt, grid.cfl, grid.lambda_max)
    R = rng.normal(size=(k, k))
    S = R @ R.T
    c = rng.uniform(0.0, 0.5) / max(1.0, np.abs(S).max())
    pi = np.stack([c * (S / P[j + 1][:, None]) for j in range(J)])
    # feedback scaled inside the boundary region
    out = np.concatenate([speeds[-2, :m] * P[-1, :m], speeds[1, m:] * P[0, m:]])
    inc = np.concatenate([speeds[0, :m] * P[1, :m], speeds[-1, m:] * P[-2, m:]])
    Km = rng.normal(size=(m, k - m))
    Kp = rng.normal(size=(k - m, m))
    full = np.zeros((k, k))
    full[:m, m:] = Km
    full[m:, :m] = Kp
    gain = np.linalg.norm(np.sqrt(inc)[:, None] * full / np.sqrt(out)[None, :], 2)
    scale = rng.uniform(0.0, 0.95) / gain
    K = FeedbackMatrix(Km * scale, Kp * scale)
    pattern = rng.normal(size=(J, k)) * rng.uniform(0, 0.5)
    omega = rng.uniform(0, 20)
    coeffs = SystemCoefficients(k=k, m=m, lambda_plus=speeds[:, :m].copy(),
                                lambda_minus=speeds[:, m:].copy(), pi=pi,
                                forcing=lambda t: math.cos(omega * t) * pattern)
    W0 = StateField(rng.normal(size=(J, k)), m=m)
    return grid, coeffs, K, W0, realize_weights(ExplicitWeights(P), grid, k, m), xi


@MANY
@given(seeds, st.sampled_from(["post", "pre"]))
def test_per_step_lyapunov_inequality(seed, timing):
    rng = np.random.default_rng(seed)
    grid, coeffs, K, W0, P, xi = _random_certified_system(rng)
    rep = check_conditions(coeffs, grid, K, P, xi)
    assume(rep.theta.verdict and rep.source.margin >= 0 and rep.boundary.margin >= 0)
    assume(rep.eta_cert * grid.dt < 1)
    res = simulate(coeffs, grid, K, W0, P, xi, boundary_timing=timing)
    s = res.series
    rhs = ((1 - s.eta * s.dt) * s.L[:-1] + s.dt * s.beta * (1 / s.xi + s.dt) * s.S[:-1]
           + 1e-12 * s.L[:-1])
    assert np.all(s.L[1:] <= rhs)
    assert np.all(s.L <= s.L_up * (1 + 1e-12))
