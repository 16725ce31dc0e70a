import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexarm.dynamics import (
    REFERENCE_ARM,
    ArmParams,
    FullState,
    ModalModel,
    SingleLinkPlant,
    TwoLinkFixture,
    accel,
    beam_modes,
    build_single_link,
    default_modal,
    eval_partitioned,
    is_spd,
    mode_shape,
)
from flexarm.errors import ModelError, SingularMatrixError


def modal(delta=0.01, omega=(21.80, 128.80), I_r=None):
    base = default_modal(delta=delta)
    return ModalModel(omega=omega, delta=delta, phi_prime0=base.phi_prime0,
                      I_r=base.I_r if I_r is None else I_r)


# --- parameters --------------------------------------------------------------


def test_table_values_and_hub_inertia():
    # rho L^3 / 3 + I_h evaluated by hand
    assert REFERENCE_ARM.hub_inertia == pytest.approx(0.002 + 0.1333 * 0.45**3 / 3, rel=1e-15)
    assert REFERENCE_ARM.hub_inertia == pytest.approx(0.00605, abs=1e-5)


def test_hub_inertia_matches_quadrature():
    x, w = np.polynomial.legendre.leggauss(20)
    L = REFERENCE_ARM.link_length
    xs = 0.5 * L * (x + 1)
    integral = 0.5 * L * np.sum(w * REFERENCE_ARM.linear_density * xs**2)
    assert REFERENCE_ARM.hub_inertia == pytest.approx(REFERENCE_ARM.motor_inertia + integral, rel=1e-13)


def test_arm_params_invariants():
    with pytest.raises(ModelError):
        ArmParams(link_length=-1.0)
    with pytest.raises(ModelError, match="link_mass"):
        ArmParams(link_mass=0.07)


def test_modal_invariants():
    with pytest.raises(ModelError):
        ModalModel(omega=(128.8, 21.8), delta=0.0, phi_prime0=(1, 1), I_r=1)
    with pytest.raises(ModelError):
        ModalModel(omega=(21.8, 128.8), delta=1.0, phi_prime0=(1, 1), I_r=1)
    with pytest.raises(ModelError, match="phi_prime0"):
        ModalModel(omega=(21.8, 128.8), delta=0.0, phi_prime0=(1, 1, 1), I_r=1)


# --- single-link plant -------------------------------------------------------------


def test_stiffness_block_is_omega_squared():
    p = SingleLinkPlant(modal())
    pd = eval_partitioned(p, FullState.zeros(1, 2))
    assert np.diag(pd.K_ff) == pytest.approx([475.24, 16589.44], abs=1e-9)
    assert np.array_equal(pd.M, np.eye(3))


def test_undamped_has_zero_damping_entries():
    A = SingleLinkPlant(modal(delta=0.0)).state_matrix()
    assert np.all(A[3:, 3:] == 0)


def test_state_space_matches_printed_form():
    md = modal()
    p = SingleLinkPlant(md)
    A = p.state_matrix()
    w = np.array(md.omega)
    expected = np.zeros((6, 6))
    expected[:3, 3:] = np.eye(3)
    expected[4, 1], expected[5, 2] = -w[0] ** 2, -w[1] ** 2
    expected[4, 4], expected[5, 5] = -2 * md.delta * w[0], -2 * md.delta * w[1]
    assert np.array_equal(A, expected)
    b = p.input_vector()
    assert b == pytest.approx([0, 0, 0, 1 / md.I_r, *md.phi_prime0], rel=1e-14)


def test_partition_reassembles_to_state_space():
    p = SingleLinkPlant(modal())
    pd = eval_partitioned(p, FullState.zeros(1, 2))
    Minv = np.linalg.inv(pd.M)
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    A[3:, :3] = -Minv @ pd.K
    A[3:, 3:] = -Minv @ pd.V
    assert np.max(np.abs(A - p.state_matrix())) <= 1e-12
    b = np.concatenate([np.zeros(3), (Minv @ pd.B)[:, 0]]) / p.input_scale
    assert np.max(np.abs(b - p.input_vector())) <= 1e-12


def test_blocks_state_independent():
    p = SingleLinkPlant(modal())
    a = eval_partitioned(p, FullState.zeros(1, 2))
    rng = np.random.default_rng(3)
    b = eval_partitioned(p, FullState(rng.normal(size=1), rng.normal(size=2), [0.0], rng.normal(size=2)))
    for name in ("M_rr", "M_ff", "V_ff", "K_ff", "B_r", "B_f"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_accel_examples():
    p = SingleLinkPlant(modal(delta=0.0, I_r=0.00605))
    assert np.array_equal(accel(p, FullState.zeros(1, 2), 0.0), np.zeros(3))
    assert accel(p, FullState.zeros(1, 2), 0.00605)[0] == pytest.approx(1.0, rel=1e-14)
    s = FullState([0.0], [1.0, 0.0], [0.0], [0.0, 0.0])
    assert accel(p, s, 0.0)[1] == pytest.approx(-475.24, rel=1e-14)


def test_accel_dimension_mismatch():
    with pytest.raises(ModelError):
        accel(SingleLinkPlant(modal()), FullState.zeros(1, 3), 0.0)


def test_accel_singular_mass_reported():
    class Broken(SingleLinkPlant):
        def accel(self, q, dq, u):
            return super(SingleLinkPlant, self).accel(q, dq, u)

        def partitioned(self, q, dq):
            pd = super().partitioned(q, dq)
            from dataclasses import replace
            return replace(pd, M_ff=np.zeros((2, 2)))

    with pytest.raises(SingularMatrixError):
        accel(Broken(modal()), FullState.zeros(1, 2), 0.0)


def test_friction_only_on_hub():
    p = build_single_link(viscous=0.004, coulomb=0.002)
    x = np.array([0, 0, 0, 2.0, 0, 0])
    dx = p.derivative(x, 0.0)
    assert dx[3] == pytest.approx(-(0.004 * 2 + 0.002) / p.input_scale, rel=1e-14)
    assert np.all(dx[4:] == 0)


def test_stiffened_scales_frequencies():
    p = SingleLinkPlant(modal()).stiffened(4.0)
    assert p.modal.omega == pytest.approx((43.6, 257.6), rel=1e-15)


# --- nonlinear fixture -------------------------------------------------------------


def test_fixture_mass_at_zero_configuration():
    fx = TwoLinkFixture()
    a1, a2, a3 = fx.a
    d1, d2, d3, d4 = fx.d
    expected = np.array([
        [a1 + 2 * a3, a2 + a3, d1 + d2, d3],
        [a2 + a3, a2, d1, d4],
        [d1 + d2, d1, 1, 0],
        [d3, d4, 0, 1],
    ])
    assert np.array_equal(eval_partitioned(fx, FullState.zeros(2, 2)).M, expected)


def test_fixture_mass_derivative_matches_finite_difference():
    fx = TwoLinkFixture()
    q = np.array([0.3, -0.7, 0.01, 0.02])
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (fx.mass(q + e) - fx.mass(q - e)) / (2 * h)
        assert np.max(np.abs(fd - fx.mass_derivatives(q)[i])) < 1e-8


def test_fixture_coriolis_matches_lagrangian_vector():
    # V = dM/dt dq - 1/2 d(dq' M dq)/dq, by finite differences of the kinetic energy
    fx = TwoLinkFixture()
    rng = np.random.default_rng(5)
    q, dq = rng.normal(size=4), rng.normal(size=4)
    Mdot = fx.mass_rate(q, dq)
    grad = np.zeros(4)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        grad[i] = (dq @ fx.mass(q + e) @ dq - dq @ fx.mass(q - e) @ dq) / (2 * h)
    expected = Mdot @ dq - 0.5 * grad
    assert np.max(np.abs(fx.coriolis(q, dq) @ dq - expected)) < 1e-8


def test_fixture_gravity_is_potential_gradient():
    fx = TwoLinkFixture(gravity=(0.5, 0.2), flex_gravity=(0.1, 0.05))

    def U(q):
        return (0.5 * math.sin(q[0]) + 0.2 * math.sin(q[0] + q[1])
                + (0.1 * q[2] + 0.05 * q[3]) * math.cos(q[0] + q[1]))

    q = np.array([0.4, -1.1, 0.03, -0.02])
    h = 1e-6
    grad = np.array([(U(q + h * e) - U(q - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.max(np.abs(fx.gravity_vector(q) - grad)) < 1e-9


def test_fixture_regressor_matches_rigid_terms():
    fx = TwoLinkFixture(gravity=(0.5, 0.2))
    rng = np.random.default_rng(7)
    for _ in range(50):
        q, dq, v, a = (rng.normal(size=2) for _ in range(4))
        M, V, F, G = fx.rigid_terms(q, dq)
        Y = fx.regressor(q, dq, v, a)
        assert np.max(np.abs(Y @ fx.true_parameters() - (M @ a + V @ v + F + G))) < 1e-12


def test_rigid_terms_match_general_partition():
    fx = TwoLinkFixture(gravity=(0.5, 0.2))
    rng = np.random.default_rng(8)
    for _ in range(20):
        q, dq = rng.normal(size=2), rng.normal(size=2)
        M, V, F, G = fx.rigid_terms(q, dq)
        pd = fx.partitioned(np.r_[q, 0, 0], np.r_[dq, 0, 0])
        for X, Y in ((M, pd.M_rr), (V, pd.V_rr), (F, pd.F_r), (G, pd.G_r)):
            assert np.max(np.abs(X - Y)) < 1e-14


def test_single_link_regressor():
    p = build_single_link(viscous=0.004)
    Y = p.regressor([0.1], [0.3], [0.2], [1.5])
    assert Y @ p.true_parameters() == pytest.approx([1.5 + 0.004 * 0.3 / p.input_scale])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_fixture_skew_property(vals):
    fx = TwoLinkFixture()
    q, dq = np.array(vals[:4]), np.array(vals[4:])
    N = fx.mass_rate(q, dq) - 2 * fx.coriolis(q, dq)
    assert np.linalg.norm(N + N.T) <= 1e-9 * np.linalg.norm(N) + 1e-12


# --- beam modes ---------------------------------------------------------------------


def test_beam_first_root():
    assert beam_modes(REFERENCE_ARM, 1).beta_l[0] == pytest.approx(1.8751, abs=1e-3)


def test_beam_roots_satisfy_characteristic_equation():
    bm = beam_modes(REFERENCE_ARM, 4)
    for x in bm.beta_l:
        assert abs(math.cos(x) * math.cosh(x) + 1) < 1e-10 * math.cosh(x)
    # classical tabulated roots
    assert bm.beta_l == pytest.approx([1.875104, 4.694091, 7.854757, 10.995541], abs=1e-6)


def test_beam_omega_table_values():
    bm = beam_modes(REFERENCE_ARM, 2)
    c = math.sqrt(REFERENCE_ARM.flexural_rigidity / REFERENCE_ARM.linear_density)
    assert bm.omega == pytest.approx((bm.beta_l / REFERENCE_ARM.link_length) ** 2 * c, rel=1e-15)
    assert bm.omega[0] == pytest.approx(19.1, abs=0.05)
    assert np.all(np.diff(bm.omega) > 0)


def test_beam_rigidity_scaling():
    from dataclasses import replace

    a = beam_modes(REFERENCE_ARM, 3).omega
    b = beam_modes(replace(REFERENCE_ARM, flexural_rigidity=4 * REFERENCE_ARM.flexural_rigidity), 3).omega
    assert np.max(np.abs(b / a - 2)) < 1e-9


def test_phi_prime_matches_quadrature():
    # input coefficient from first moments of the mass-normalized shapes
    bm = beam_modes(REFERENCE_ARM, 2)
    L, rho = REFERENCE_ARM.link_length, REFERENCE_ARM.linear_density
    x, w = np.polynomial.legendre.leggauss(60)
    xs = 0.5 * L * (x + 1)
    mom = []
    for bl in bm.beta_l:
        phi = mode_shape(REFERENCE_ARM, bl)
        norm = 0.5 * L * np.sum(w * rho * phi(xs) ** 2)
        assert norm == pytest.approx(1.0, rel=1e-9)
        mom.append(0.5 * L * np.sum(w * rho * xs * phi(xs)))
    mom = np.array(mom)
    expected = -mom / (REFERENCE_ARM.hub_inertia - mom @ mom)
    assert bm.phi_prime0 == pytest.approx(expected, rel=1e-9)


def test_phi_prime_is_flexible_row_of_inverse_mass():
    # hub + clamped modes mass matrix [[I_r, m'], [m, I]]; its inverse maps hub torque to modal acceleration
    bm = beam_modes(REFERENCE_ARM, 2)
    L, rho = REFERENCE_ARM.link_length, REFERENCE_ARM.linear_density
    x, w = np.polynomial.legendre.leggauss(60)
    xs = 0.5 * L * (x + 1)
    mom = np.array([0.5 * L * np.sum(w * rho * xs * mode_shape(REFERENCE_ARM, bl)(xs)) for bl in bm.beta_l])
    M = np.block([[np.array([[REFERENCE_ARM.hub_inertia]]), mom[None, :]], [mom[:, None], np.eye(2)]])
    H = np.linalg.inv(M)
    assert bm.phi_prime0 == pytest.approx(H[1:, 0], rel=1e-9)


def test_beam_modes_rejects_zero():
    with pytest.raises(ModelError):
        beam_modes(REFERENCE_ARM, 0)


def test_is_spd():
    assert is_spd(np.eye(3))
    assert not is_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not is_spd(np.array([[1.0, 0.1], [0.0, 1.0]]))
