import numpy as np
import pytest

from hyplyap import (ExplicitWeights, ExponentialWeights, FeedbackMatrix, InvalidParameterError,
                     NumericalBlowupError, StateField, SystemCoefficients, apply_boundary,
                     build_grid, linear_example, realize_weights, simulate, source_step,
                     transport_step)
from hyplyap.model import zero_forcing


def _const_coeffs(J, lp=1.0, lm=1.0, pi=None, forcing=None, k=2, m=1):
    return SystemCoefficients(
        k=k, m=m, lambda_plus=np.full((J + 2, m), lp), lambda_minus=np.full((J + 2, k - m), lm),
        pi=np.zeros((J, k, k)) if pi is None else pi,
        forcing=zero_forcing(J, k) if forcing is None else forcing)


def test_boundary_zero_gain():
    s = apply_boundary(StateField(np.random.default_rng(0).normal(size=(5, 2)), m=1),
                       FeedbackMatrix.from_gains(0.0, 0.0))
    assert s.ghost_left[0] == 0.0 and s.ghost_right[0] == 0.0


def test_boundary_example():
    w = np.zeros((4, 2))
    w[-1, 0] = -0.5
    w[0, 1] = 0.5
    s = apply_boundary(StateField(w, m=1), FeedbackMatrix.from_gains(0.5, 0.5))
    assert s.ghost_left[0] == 0.25
    assert s.ghost_right[0] == -0.25
    np.testing.assert_array_equal(s.w, w)


def test_boundary_reflection():
    w = np.random.default_rng(1).normal(size=(6, 2))
    s = apply_boundary(StateField(w, m=1), FeedbackMatrix.from_gains(1.0, 1.0))
    assert s.ghost_left[0] == w[0, 1]
    assert s.ghost_right[0] == w[-1, 0]


def test_boundary_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        apply_boundary(StateField(np.zeros((4, 3)), m=1), FeedbackMatrix.from_gains(0.5, 0.5))
    with pytest.raises(InvalidParameterError):
        apply_boundary(StateField(np.zeros((1, 2)), m=1), FeedbackMatrix.from_gains(0.5, 0.5))


def test_transport_constant_state():
    J = 8
    g = build_grid(1.0, J, 1.0, 0.8, 1.0)
    w = np.full((J, 2), 0.3)
    s = StateField(w, np.array([0.3]), np.array([0.3]), m=1)
    out = transport_step(s, _const_coeffs(J), g, 0)
    np.testing.assert_allclose(out.w, w, rtol=0, atol=1e-15)


def test_transport_pure_forcing():
    J, c = 6, 0.7
    g = build_grid(1.0, J, 1.0, 0.5, 1.0)
    pattern = np.tile([c, -c], (J, 1))
    coeffs = _const_coeffs(J, forcing=lambda t: pattern)
    out = transport_step(StateField(np.zeros((J, 2)), m=1), coeffs, g, 0)
    np.testing.assert_allclose(out.w, np.tile([g.dt * c, -g.dt * c], (J, 1)), rtol=1e-15)


def test_exact_shift_cfl_one():
    J = 16
    g = build_grid(1.0, J, 1.0, 1.0, 1.0)
    rng = np.random.default_rng(3)
    w = rng.normal(size=(J, 2))
    s = StateField(w, np.array([1.5]), np.array([-2.5]), m=1)
    out = transport_step(s, _const_coeffs(J), g, 0).w
    np.testing.assert_allclose(out[1:, 0], w[:-1, 0], rtol=1e-14, atol=0)
    np.testing.assert_allclose(out[:-1, 1], w[1:, 1], rtol=1e-14, atol=0)
    assert out[0, 0] == 1.5 and out[-1, 1] == -2.5


def test_source_identity_and_scalar():
    J = 3
    g = build_grid(1.0, J, 1.0, 0.5, 1.0)
    s = StateField(np.ones((J, 1)), m=1)
    coeffs = SystemCoefficients(k=1, m=1, lambda_plus=np.ones((J + 2, 1)),
                                lambda_minus=np.ones((J + 2, 0)), pi=np.full((J, 1, 1), 0.4),
                                forcing=zero_forcing(J, 1))
    np.testing.assert_allclose(source_step(s, coeffs, g).w, 1 - g.dt * 0.4, rtol=1e-15)
    zero = _const_coeffs(J, k=1, m=1)
    np.testing.assert_array_equal(source_step(s, zero, g).w, s.w)


def test_source_row_sums():
    J = 4
    pi = np.tile(np.array([[0.0992, 0.2008], [0.0992, 0.2008]]), (J, 1, 1))
    dt = 0.75 / 1600
    grid = build_grid(J / 1600, J, 1.0, 0.75, 1.0)  # dx = 1/1600 so dt = 0.75/1600
    assert grid.dt == pytest.approx(dt, rel=1e-15)
    out = source_step(StateField(np.ones((J, 2)), m=1), _const_coeffs(J, pi=pi), grid).w
    np.testing.assert_allclose(out, 1 - dt * 0.3, rtol=1e-15)


def test_blowup_detected():
    J = 4
    g = build_grid(1.0, J, 1.0, 0.5, 1.0)
    s = StateField(np.full((J, 2), 1e13), m=1)
    with pytest.raises(NumericalBlowupError) as info:
        transport_step(s, _const_coeffs(J), g, 7)
    assert info.value.step == 7
    s = StateField(np.full((J, 2), np.nan), m=1)
    with pytest.raises(NumericalBlowupError):
        transport_step(s, _const_coeffs(J), g, 0)


def test_simulate_zero_state():
    grid, coeffs, K, _ = linear_example(J=20, T=1.0, amp=0.0)
    W0 = apply_boundary(StateField(np.zeros((20, 2)), m=1), K)
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    res = simulate(coeffs, grid, K, W0, P, 0.125)
    assert np.all(res.series.L == 0.0)
    assert np.all(res.final.w == 0.0)


def test_mass_bookkeeping():
    J = 30
    g = build_grid(1.0, J, 0.5, 0.6, 1.0)
    coeffs = SystemCoefficients(k=1, m=1, lambda_plus=np.ones((J + 2, 1)),
                                lambda_minus=np.ones((J + 2, 0)), pi=np.zeros((J, 1, 1)),
                                forcing=zero_forcing(J, 1))
    K = FeedbackMatrix(np.zeros((1, 0)), np.zeros((0, 1)))
    w = np.abs(np.random.default_rng(4).normal(size=(J, 1)))
    s = apply_boundary(StateField(w, m=1), K)
    for n in range(10):
        out = transport_step(s, coeffs, g, n)
        mass_before = g.dx * s.w.sum()
        mass_after = g.dx * out.w.sum()
        outflow = g.dt * s.w[-1, 0]
        assert mass_after == pytest.approx(mass_before - outflow, rel=1e-13, abs=1e-15)
        s = apply_boundary(out, K)


def test_outflow_vanishes_at_cfl_one():
    grid, coeffs, K, W0 = linear_example(J=10, cfl=1.0, T=1.0, k12=0.0, k21=0.0, amp=0.0)
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    res = simulate(coeffs, grid, K, W0, P, 0.125)
    assert np.all(res.final.w == 0.0)
    assert res.series.L[10] == 0.0


def test_determinism():
    grid, coeffs, K, W0 = linear_example(J=40, T=2.0)
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    a = simulate(coeffs, grid, K, W0, P, 0.125, keep_trajectory=True)
    b = simulate(coeffs, grid, K, W0, P, 0.125, keep_trajectory=True)
    assert a.series.L.tobytes() == b.series.L.tobytes()
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.trajectory, b.trajectory))
    assert len(a.trajectory) == grid.N + 1


def test_simulate_matches_step_functions():
    grid, coeffs, K, W0 = linear_example(J=12, T=0.3, gamma=[[0.2, 0.1], [0.05, 0.3]])
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    res = simulate(coeffs, grid, K, W0, P, 0.125, keep_trajectory=True)
    s = W0
    for n in range(grid.N):
        s = apply_boundary(s, K)
        s = source_step(transport_step(s, coeffs, grid, n), coeffs, grid, n)
        np.testing.assert_array_equal(s.w, res.trajectory[n + 1])


def test_boundary_timing_pre_differs_only_with_source():
    grid, coeffs, K, W0 = linear_example(J=12, T=0.3)
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    a = simulate(coeffs, grid, K, W0, P, 0.125, boundary_timing="post")
    b = simulate(coeffs, grid, K, W0, P, 0.125, boundary_timing="pre")
    np.testing.assert_array_equal(a.series.L, b.series.L)
    grid, coeffs, K, W0 = linear_example(J=12, T=0.3, gamma=[[0.5, 0.0], [0.0, 0.5]])
    a = simulate(coeffs, grid, K, W0, P, 0.125, boundary_timing="post")
    b = simulate(coeffs, grid, K, W0, P, 0.125, boundary_timing="pre")
    assert not np.array_equal(a.series.L, b.series.L)
    with pytest.raises(InvalidParameterError):
        simulate(coeffs, grid, K, W0, P, 0.125, boundary_timing="middle")


def test_simulate_rejects_bad_inputs():
    grid, coeffs, K, W0 = linear_example(J=12, T=0.3)
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    with pytest.raises(InvalidParameterError):
        simulate(coeffs, grid, K, W0, P, 0.0)
    with pytest.raises(InvalidParameterError):
        simulate(coeffs, grid, K, W0, P[1:], 0.125)


def test_envelope_nan_without_certificate():
    grid, coeffs, K, W0 = linear_example(J=12, T=0.3)
    P = realize_weights(ExplicitWeights(np.ones((14, 2))), grid, 2, 1)
    res = simulate(coeffs, grid, K, W0, P, 0.125)
    assert res.series.eta < 0
    assert np.all(np.isnan(res.series.L_up))
    assert not res.series.certified


def test_zero_disturbance_per_step_decay():
    grid, coeffs, K, W0 = linear_example(J=1600, amp=0.0)
    P = realize_weights(ExponentialWeights([1.0], [1.0], 0.575), grid, 2, 1)
    res = simulate(coeffs, grid, K, W0, P, 0.125)
    L, eta = res.series.L, res.series.eta
    assert eta > 0
    assert np.all(L[1:] <= (1 - eta * grid.dt) * L[:-1] * (1 + 1e-12))
