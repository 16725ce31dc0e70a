import math

import numpy as np
import pytest
import scipy.linalg as sla

from flexarm.dynamics import SingleLinkPlant, default_modal
from flexarm.errors import DesignError, ModelError
from flexarm.fastctl import (
    LqrWeights,
    care_residual,
    cost,
    design_fast,
    fast_control,
    solve_care,
    solve_lyapunov,
)


def test_scalar_care_closed_form():
    g = solve_care([[-1.0]], [[1.0]], LqrWeights.diagonal([1.0], [1.0]))
    assert g.P[0, 0] == pytest.approx(math.sqrt(2) - 1, abs=1e-12)


def test_scalar_care_unstable_plant():
    # a=1, b=1, q=1, r=1: p^2 - 2p - 1 = 0, p = 1 + sqrt(2)
    g = solve_care([[1.0]], [[1.0]], LqrWeights.diagonal([1.0], [1.0]))
    assert g.P[0, 0] == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    assert g.K[0, 0] == pytest.approx(-(1 + math.sqrt(2)), abs=1e-12)


def test_lyapunov_against_scipy():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 5)) - 4 * np.eye(5)
    C = rng.normal(size=(5, 5))
    C = C @ C.T
    X = solve_lyapunov(A, C)
    ref = sla.solve_continuous_lyapunov(A.T, -C)
    assert np.max(np.abs(X - ref)) < 1e-10 * max(1.0, np.max(np.abs(ref)))


def _random_instance(rng, n, m):
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    Qh = rng.normal(size=(n, n))
    return A, B, Qh @ Qh.T + 0.1 * np.eye(n), np.eye(m) * rng.uniform(0.5, 3)


def test_random_instances_against_scipy():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 40:
        n, m = int(rng.integers(2, 7)), int(rng.integers(1, 3))
        A, B, Q, R = _random_instance(rng, n, m)
        ref = sla.solve_continuous_are(A, B, Q, R)
        # badly conditioned instances are outside what either solver resolves at 1e-8
        if np.max(np.abs(ref)) > 1e3:
            continue
        g = solve_care(A, B, LqrWeights(Q, R))
        assert np.max(np.abs(g.P - ref)) < 1e-8 * (1 + np.max(np.abs(ref)))
        assert np.max(np.linalg.eigvals(g.closed_loop(A, B)).real) < 0
        checked += 1


def test_reference_design_matches_scipy():
    plant = SingleLinkPlant(default_modal())
    W = LqrWeights.diagonal((150, 500, 1, 0), 2)
    dec, g = design_fast(plant, W)
    ref = sla.solve_continuous_are(dec.fast.A_F, dec.fast.B_F, W.Q, W.R)
    assert np.max(np.abs(g.P - ref)) < 1e-8 * np.max(np.abs(ref))
    assert g.residual == pytest.approx(
        np.max(np.abs(care_residual(dec.fast.A_F, dec.fast.B_F, W.Q, W.R, g.P))))


def test_unstabilizable_pair_rejected():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(DesignError, match="stabilizable"):
        solve_care(A, B, LqrWeights.diagonal([1, 1], [1]))


def test_undetectable_weight_rejected():
    A = np.diag([1.0, -1.0])
    B = np.eye(2)
    with pytest.raises(DesignError, match="detect"):
        solve_care(A, B, LqrWeights.diagonal([0, 1], [1, 1]))


def test_weight_validation():
    with pytest.raises(ModelError):
        LqrWeights.diagonal([1, -1], [1])
    with pytest.raises(ModelError):
        LqrWeights.diagonal([1, 1], [0])


def test_fast_control_convention():
    g = solve_care([[-1.0]], [[1.0]], LqrWeights.diagonal([1.0], [1.0]))
    assert fast_control(g, np.array([2.0])) == pytest.approx([-2 * (math.sqrt(2) - 1)])


def test_cost_quadrature():
    W = LqrWeights.diagonal([2.0, 0.0], [1.0])
    t = np.linspace(0, 1, 1001)
    phi = np.c_[t, np.zeros_like(t)]
    tau = np.ones_like(t)
    # integral of 2 t^2 + 1 over [0, 1]
    assert cost(phi, tau, W, t=t) == pytest.approx(2 / 3 + 1, rel=1e-6)
    assert cost(phi, tau, W, dt=1e-3) == pytest.approx(cost(phi, tau, W, t=t), rel=1e-12)
    with pytest.raises(ModelError):
        cost(phi, tau, W)


def test_optimal_cost_equals_quadratic_form():
    # simulate the closed loop from phi0 and compare integrated cost with phi0' P phi0
    plant = SingleLinkPlant(default_modal())
    W = LqrWeights.diagonal((150, 500, 1, 0), 2)
    dec, g = design_fast(plant, W)
    Acl = g.closed_loop(dec.fast.A_F, dec.fast.B_F)
    x0 = np.array([0.1, -0.05, 0.02, 0.0])
    t = np.linspace(0, 120, 24001)
    E = sla.expm(Acl * (t[1] - t[0]))
    xs = np.empty((t.size, 4))
    xs[0] = x0
    for k in range(1, t.size):
        xs[k] = E @ xs[k - 1]
    u = xs @ g.K.T
    assert cost(xs, u, W, t=t) == pytest.approx(x0 @ g.P @ x0, rel=1e-4)
