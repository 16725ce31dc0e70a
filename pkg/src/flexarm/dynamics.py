"""Plant models for flexible-link arms.

Every model exposes the rigid/flexible partitioned Lagrangian form

    [M_rr M_rf] [q_r'']   [V_rr V_rf] [q_r']   [0   0  ] [q_r]   [F_r]   [G_r]   [B_r]
    [M_fr M_ff] [q_f''] + [V_fr V_ff] [q_f'] + [0 K_ff] [q_f] + [ 0 ] + [G_f] = [B_f] u

through :meth:`PlantModel.partitioned`, which is what the perturbation and
control layers consume.  Two concrete models live here:

* :class:`SingleLinkPlant` -- the horizontal single-link, two-mode arm.  Its
  input ``u`` is torque divided by the total hub inertia ``I_r`` (so that the
  mass matrix is the identity and ``B_r = 1``); ``input_scale`` converts back
  to N*m.
* :class:`TwoLinkFixture` -- a configuration-dependent two-link arm with two
  coupled flexible coordinates, used to exercise the nonlinear code paths
  (skew symmetry, regressor adaptation, gravity/friction terms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import BeamModeError, ModelError, SingularMatrixError

__all__ = [
    "ArmParams",
    "ModalModel",
    "FullState",
    "PartitionedDynamics",
    "PlantModel",
    "SingleLinkPlant",
    "RigidEquivalent",
    "TwoLinkFixture",
    "BeamModes",
    "REFERENCE_ARM",
    "MEASURED_OMEGA",
    "build_single_link",
    "default_modal",
    "eval_partitioned",
    "accel",
    "beam_modes",
    "is_spd",
]


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArmParams:
    """Physical constants of the link and hub (SI units)."""

    motor_inertia: float = 0.002  # I_h, kg m^2
    link_length: float = 0.45  # L, m
    link_height: float = 0.02  # h, m
    link_thickness: float = 0.0008  # d, m
    link_mass: float = 0.06  # M_b, kg
    linear_density: float = 0.1333  # rho, kg/m
    flexural_rigidity: float = 0.1621  # EI, N m^2

    def __post_init__(self):
        for name in (
            "motor_inertia",
            "link_length",
            "link_height",
            "link_thickness",
            "link_mass",
            "linear_density",
            "flexural_rigidity",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ModelError(f"{name} must be finite and > 0, got {value!r}")
        mismatch = abs(self.linear_density * self.link_length - self.link_mass) / self.link_mass
        if mismatch > 0.01:
            raise ModelError(
                f"linear_density * link_length differs from link_mass by {mismatch:.2%} (> 1%)"
            )

    @property
    def hub_inertia(self) -> float:
        """Rigid-link approximation of the total inertia about the hub, I_h + rho L^3 / 3."""
        return self.motor_inertia + self.linear_density * self.link_length**3 / 3.0


REFERENCE_ARM = ArmParams()
MEASURED_OMEGA = (21.80, 128.80)


@dataclass(frozen=True)
class ModalModel:
    """Modal data of the flexible link.

    ``phi_prime0`` holds the torque-to-modal-acceleration coefficients that
    multiply the hub torque in the flexible rows of the state equation.
    """

    omega: tuple
    delta: float
    phi_prime0: tuple
    I_r: float

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        phi = np.asarray(self.phi_prime0, dtype=float)
        object.__setattr__(self, "omega", tuple(float(w) for w in omega))
        object.__setattr__(self, "phi_prime0", tuple(float(p) for p in phi))
        if omega.ndim != 1 or omega.size == 0:
            raise ModelError("omega must be a non-empty vector")
        if phi.shape != omega.shape:
            raise ModelError(
                f"phi_prime0 has {phi.size} entries but there are {omega.size} modes"
            )
        if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
            raise ModelError("omega must be positive and strictly increasing")
        if not (0.0 <= self.delta < 1.0):
            raise ModelError(f"delta must lie in [0, 1), got {self.delta!r}")
        if not (self.I_r > 0):
            raise ModelError(f"I_r must be > 0, got {self.I_r!r}")
        if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(phi))):
            raise ModelError("modal data must be finite")

    @property
    def n_modes(self) -> int:
        return len(self.omega)


def default_modal(params: ArmParams = REFERENCE_ARM, omega=MEASURED_OMEGA, delta: float = 0.01) -> ModalModel:
    """Measured frequencies, analytic input coefficients, rigid-link hub inertia."""
    modes = beam_modes(params, len(omega))
    return ModalModel(
        omega=tuple(omega),
        delta=delta,
        phi_prime0=tuple(modes.phi_prime0),
        I_r=params.hub_inertia,
    )


# ---------------------------------------------------------------------------
# state and partitioned blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FullState:
    q_r: np.ndarray
    q_f: np.ndarray
    dq_r: np.ndarray
    dq_f: np.ndarray

    def __post_init__(self):
        for name in ("q_r", "q_f", "dq_r", "dq_f"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if arr.ndim != 1:
                raise ModelError(f"{name} must be a vector")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if self.q_r.shape != self.dq_r.shape or self.q_f.shape != self.dq_f.shape:
            raise ModelError("position and velocity dimensions differ")

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.q_r, self.q_f])

    @property
    def dq(self) -> np.ndarray:
        return np.concatenate([self.dq_r, self.dq_f])

    def vector(self) -> np.ndarray:
        """First-order state ``[q_r, q_f, dq_r, dq_f]``."""
        return np.concatenate([self.q_r, self.q_f, self.dq_r, self.dq_f])

    @classmethod
    def from_vector(cls, x, n: int) -> "FullState":
        x = np.asarray(x, dtype=float)
        dim = x.size // 2
        return cls(x[:n], x[n:dim], x[dim : dim + n], x[dim + n :])

    @classmethod
    def zeros(cls, n: int, m: int) -> "FullState":
        return cls(np.zeros(n), np.zeros(m), np.zeros(n), np.zeros(m))


@dataclass(frozen=True)
class PartitionedDynamics:
    """Blocks of the partitioned model evaluated at one state.

    ``F_r`` is the evaluated friction vector; the Coriolis/centrifugal blocks
    are the matrix factor ``V_m`` in ``V(q, dq) = V_m(q, dq) dq``.
    """

    M_rr: np.ndarray
    M_rf: np.ndarray
    M_fr: np.ndarray
    M_ff: np.ndarray
    V_rr: np.ndarray
    V_rf: np.ndarray
    V_fr: np.ndarray
    V_ff: np.ndarray
    K_ff: np.ndarray
    F_r: np.ndarray
    G_r: np.ndarray
    G_f: np.ndarray
    B_r: np.ndarray
    B_f: np.ndarray

    @property
    def n(self) -> int:
        return self.M_rr.shape[0]

    @property
    def m(self) -> int:
        return self.M_ff.shape[0]

    @property
    def M(self) -> np.ndarray:
        return np.block([[self.M_rr, self.M_rf], [self.M_fr, self.M_ff]])

    @property
    def V(self) -> np.ndarray:
        return np.block([[self.V_rr, self.V_rf], [self.V_fr, self.V_ff]])

    @property
    def K(self) -> np.ndarray:
        n, m = self.n, self.m
        K = np.zeros((n + m, n + m))
        K[n:, n:] = self.K_ff
        return K

    @property
    def B(self) -> np.ndarray:
        return np.vstack([self.B_r, self.B_f])

    @property
    def F(self) -> np.ndarray:
        return np.concatenate([self.F_r, np.zeros(self.m)])

    @property
    def G(self) -> np.ndarray:
        return np.concatenate([self.G_r, self.G_f])

    @classmethod
    def from_full(cls, n, M, V, K, F_r, G, B) -> "PartitionedDynamics":
        r, f = slice(0, n), slice(n, None)
        return cls(
            M_rr=M[r, r], M_rf=M[r, f], M_fr=M[f, r], M_ff=M[f, f],
            V_rr=V[r, r], V_rf=V[r, f], V_fr=V[f, r], V_ff=V[f, f],
            K_ff=K[f, f], F_r=np.asarray(F_r, dtype=float),
            G_r=G[r], G_f=G[f], B_r=B[r], B_f=B[f],
        )


def is_spd(A, tol: float = 0.0) -> bool:
    """Symmetric (to rounding) with smallest eigenvalue above ``tol``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return True
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > 1e-12 * scale:
        return False
    return float(np.linalg.eigvalsh(A)[0]) > tol


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


class PlantModel:
    """Base class: a mechanical model in partitioned Lagrangian form.

    Subclasses provide ``n``, ``m``, ``input_scale`` and :meth:`partitioned`.
    The generic :meth:`accel` / :meth:`derivative` solve ``M q'' = rhs``.
    """

    n: int
    m: int
    input_scale: float = 1.0

    @property
    def dim(self) -> int:
        return self.n + self.m

    def partitioned(self, q, dq) -> PartitionedDynamics:  # pragma: no cover - abstract
        raise NotImplementedError

    def accel(self, q, dq, u) -> np.ndarray:
        pd = self.partitioned(q, dq)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        rhs = pd.B @ u - pd.V @ dq - pd.K @ q - pd.F - pd.G
        try:
            c, low = _cho_factor(pd.M)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"mass matrix not invertible: {exc}") from None
        return _cho_solve(c, rhs)

    def derivative(self, x, u) -> np.ndarray:
        d = self.dim
        q, dq = x[:d], x[d:]
        return np.concatenate([dq, self.accel(q, dq, u)])

    def check_state(self, state: FullState) -> None:
        if state.q_r.size != self.n or state.q_f.size != self.m:
            raise ModelError(
                f"state has (n, m) = ({state.q_r.size}, {state.q_f.size}), model expects ({self.n}, {self.m})"
            )

    # slow-controller plumbing -------------------------------------------------

    def regressor(self, q_r, dq_r, v, a) -> np.ndarray:  # pragma: no cover - abstract
        """Y with ``Y @ A = M_rr a + V_rr v + F_r + G_r`` (rigid part)."""
        raise NotImplementedError

    def true_parameters(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def slow_model(self) -> "RigidEquivalent":
        return RigidEquivalent(self)


def _cho_factor(A):
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from None
    return L, True


def _cho_solve(L, b):
    y = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, y)


class RigidEquivalent(PlantModel):
    """Rigid part of a model with the flexible coordinates frozen at zero.

    This is the slow subsystem ``M_rr q_r'' = B_r u - V_rr q_r' - F_r - G_r``
    obtained in the infinite-stiffness limit.
    """

    m = 0

    def __init__(self, full: PlantModel):
        self.full = full
        self.configuration_independent = getattr(full, "configuration_independent", False)
        self.n = full.n
        self.input_scale = full.input_scale

    def partitioned(self, q, dq) -> PartitionedDynamics:
        n, mf = self.n, self.full.m
        rigid = getattr(self.full, "rigid_terms", None)
        if rigid is not None:
            M, V, F, G = rigid(q[:n], dq[:n])
            e = np.zeros((0, 0))
            return PartitionedDynamics(
                M_rr=M, M_rf=np.zeros((n, 0)), M_fr=np.zeros((0, n)), M_ff=e,
                V_rr=V, V_rf=np.zeros((n, 0)), V_fr=np.zeros((0, n)), V_ff=e,
                K_ff=e, F_r=F, G_r=G, G_f=np.zeros(0),
                B_r=np.eye(n), B_f=np.zeros((0, n)),
            )
        qq = np.concatenate([q[:n], np.zeros(mf)])
        dqq = np.concatenate([dq[:n], np.zeros(mf)])
        p = self.full.partitioned(qq, dqq)
        e = np.zeros((0, 0))
        return PartitionedDynamics(
            M_rr=p.M_rr, M_rf=np.zeros((n, 0)), M_fr=np.zeros((0, n)), M_ff=e,
            V_rr=p.V_rr, V_rf=np.zeros((n, 0)), V_fr=np.zeros((0, n)), V_ff=e,
            K_ff=e, F_r=p.F_r, G_r=p.G_r, G_f=np.zeros(0),
            B_r=p.B_r, B_f=np.zeros((0, p.B_r.shape[1])),
        )

    def regressor(self, q_r, dq_r, v, a):
        return self.full.regressor(q_r, dq_r, v, a)

    def true_parameters(self):
        return self.full.true_parameters()

    def derivative(self, x, u):
        fast = getattr(self.full, "_rigid_derivative", None)
        if fast is not None:
            return fast(x, u)
        return super().derivative(x, u)


class SingleLinkPlant(PlantModel):
    """Horizontal single-link arm with ``n_modes`` flexible modes.

    State ``x = [q_r, q_f, dq_r, dq_f]`` follows

        q_r''  = tau / I_r - friction / I_r
        q_fi'' = -w_i^2 q_fi - 2 delta w_i q_fi' + phi'_i(0) tau

    The partitioned form uses the normalized input ``u = tau / I_r``:
    ``M = I``, ``K_ff = diag(w^2)``, ``V_ff = diag(2 delta w)``, ``B_r = 1`` and
    ``B_f = I_r * phi'(0)``.  Friction (viscous, Coulomb; physical units) acts on
    the hub only.
    """

    n = 1
    configuration_independent = True

    def __init__(self, modal: ModalModel, viscous: float = 0.0, coulomb: float = 0.0):
        if viscous < 0 or coulomb < 0:
            raise ModelError("friction coefficients must be >= 0")
        self.modal = modal
        self.viscous = float(viscous)
        self.coulomb = float(coulomb)
        self.m = modal.n_modes
        self.input_scale = modal.I_r
        w = np.asarray(modal.omega)
        self._omega = w
        self._K_ff = np.diag(w**2)
        self._V_ff = np.diag(2.0 * modal.delta * w)
        self._B = np.concatenate([[1.0], modal.I_r * np.asarray(modal.phi_prime0)])[:, None]
        d = self.dim
        A = np.zeros((2 * d, 2 * d))
        A[:d, d:] = np.eye(d)
        A[d + 1 :, 1:d] = -self._K_ff
        A[d + 1 :, d + 1 :] = -self._V_ff
        self._A = A
        self._b = np.concatenate([np.zeros(d), self._B[:, 0]])

    # printed first-order form -------------------------------------------------

    def state_matrix(self) -> np.ndarray:
        """Linear dynamics matrix of ``x = [q_r, q_f, dq_r, dq_f]`` (friction excluded)."""
        return self._A.copy()

    def input_vector(self) -> np.ndarray:
        """Input column for physical torque: ``[0.., 1/I_r, phi'_1(0), ..]``."""
        return self._b / self.input_scale

    # partitioned form ---------------------------------------------------------

    def friction(self, dq_r) -> np.ndarray:
        """Hub friction in input units (N*m divided by I_r)."""
        dq_r = np.atleast_1d(dq_r)
        return (self.viscous * dq_r + self.coulomb * np.sign(dq_r)) / self.input_scale

    def partitioned(self, q, dq) -> PartitionedDynamics:
        n, m = self.n, self.m
        return PartitionedDynamics(
            M_rr=np.eye(n), M_rf=np.zeros((n, m)), M_fr=np.zeros((m, n)), M_ff=np.eye(m),
            V_rr=np.zeros((n, n)), V_rf=np.zeros((n, m)), V_fr=np.zeros((m, n)),
            V_ff=self._V_ff.copy(), K_ff=self._K_ff.copy(),
            F_r=self.friction(dq[:n]), G_r=np.zeros(n), G_f=np.zeros(m),
            B_r=self._B[:n].copy(), B_f=self._B[n:].copy(),
        )

    def accel(self, q, dq, u):
        x = np.concatenate([q, dq])
        return self.derivative(x, u)[self.dim :]

    def derivative(self, x, u):
        dx = self._A @ x + self._b * float(np.asarray(u).reshape(-1)[0])
        if self.viscous or self.coulomb:
            dx[self.dim] -= self.friction(x[self.dim])[0]
        return dx

    def _rigid_derivative(self, x, u):
        a = float(np.asarray(u).reshape(-1)[0]) - self.friction(x[1])[0]
        return np.array([x[1], a])

    # slow-controller plumbing ---------------------------------------------------

    def regressor(self, q_r, dq_r, v, a):
        """Y = [a, dq_r] for parameters [M_rr, viscous / I_r]."""
        return np.array([[float(np.asarray(a).reshape(-1)[0]), float(np.asarray(dq_r).reshape(-1)[0])]])

    def true_parameters(self):
        return np.array([1.0, self.viscous / self.input_scale])

    # families -------------------------------------------------------------------

    def with_friction(self, viscous: float, coulomb: float) -> "SingleLinkPlant":
        return SingleLinkPlant(self.modal, viscous, coulomb)

    def stiffened(self, factor: float) -> "SingleLinkPlant":
        """Same plant with K_ff scaled by ``factor`` (frequencies by sqrt(factor))."""
        if factor <= 0:
            raise ModelError("stiffness factor must be > 0")
        w = tuple(math.sqrt(factor) * wi for wi in self.modal.omega)
        return SingleLinkPlant(replace(self.modal, omega=w), self.viscous, self.coulomb)

    def modal_energy(self, x) -> float:
        """Kinetic plus elastic energy in model units."""
        d = self.dim
        q_f, dq = x[1:d], x[d:]
        return 0.5 * float(dq @ dq + q_f @ self._K_ff @ q_f)


def build_single_link(params: ArmParams = REFERENCE_ARM, modal: ModalModel | None = None,
                      viscous: float = 0.0, coulomb: float = 0.0) -> SingleLinkPlant:
    """Single-link plant from the reference arm parameters and modal data (defaults per :func:`default_modal`)."""
    if modal is None:
        modal = default_modal(params)
    return SingleLinkPlant(modal, viscous, coulomb)


def eval_partitioned(model: PlantModel, state: FullState) -> PartitionedDynamics:
    model.check_state(state)
    return model.partitioned(state.q, state.dq)


def accel(model: PlantModel, state: FullState, tau) -> np.ndarray:
    """Generalized acceleration ``M^-1 (B u - V_m dq - K q - F - G)``.

    ``tau`` is physical torque in N*m; it is converted to model input units
    with ``model.input_scale``.  Raises :class:`SingularMatrixError` when M
    is not positive definite.
    """
    model.check_state(state)
    u = np.atleast_1d(np.asarray(tau, dtype=float)) / model.input_scale
    return model.accel(state.q, state.dq, u)


# ---------------------------------------------------------------------------
# nonlinear fixture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoLinkFixture(PlantModel):
    """Two-link planar arm with two flexible coordinates attached to link 2.

    Inertia depends on the elbow angle::

        M_rr = [[a1 + 2 a3 c2, a2 + a3 c2], [a2 + a3 c2, a2]]
        M_rf = [[d1 + d2 c2, d3 c2], [d1, d4]],   M_ff = I

    ``V_m`` is built from Christoffel symbols so ``dM/dt - 2 V_m`` is skew.
    Gravity comes from the potential
    ``p1 sin q1 + p2 sin(q1 + q2) + (g1 qf1 + g2 qf2) cos(q1 + q2)``.
    """

    a: tuple = (1.6667, 0.3333, 0.5)
    d: tuple = (0.08, 0.03, 0.05, 0.04)
    stiffness: tuple = (400.0, 3000.0)
    viscous: tuple = (0.1, 0.1)
    coulomb: tuple = (0.05, 0.05)
    gravity: tuple = (0.0, 0.0)  # p1, p2
    flex_gravity: tuple = (0.0, 0.0)  # g1, g2
    n: int = field(default=2, init=False)
    m: int = field(default=2, init=False)
    input_scale: float = field(default=1.0, init=False)

    def mass(self, q) -> np.ndarray:
        a1, a2, a3 = self.a
        d1, d2, d3, d4 = self.d
        c2 = math.cos(q[1])
        return np.array([
            [a1 + 2 * a3 * c2, a2 + a3 * c2, d1 + d2 * c2, d3 * c2],
            [a2 + a3 * c2, a2, d1, d4],
            [d1 + d2 * c2, d1, 1.0, 0.0],
            [d3 * c2, d4, 0.0, 1.0],
        ])

    def mass_derivatives(self, q) -> np.ndarray:
        """``dM[i] = dM/dq_i``; only the elbow angle enters."""
        a3 = self.a[2]
        _, d2, d3, _ = self.d
        s2 = math.sin(q[1])
        dM = np.zeros((4, 4, 4))
        dM[1] = -s2 * np.array([
            [2 * a3, a3, d2, d3],
            [a3, 0, 0, 0],
            [d2, 0, 0, 0],
            [d3, 0, 0, 0],
        ])
        return dM

    def coriolis(self, q, dq) -> np.ndarray:
        dM = self.mass_derivatives(q)
        # C[k, j] = 1/2 sum_i (dM_kj/dq_i + dM_ki/dq_j - dM_ij/dq_k) dq_i
        C = 0.5 * (
            np.einsum("ikj,i->kj", dM, dq)
            + np.einsum("jki,i->kj", dM, dq)
            - np.einsum("kij,i->kj", dM, dq)
        )
        return C

    def mass_rate(self, q, dq) -> np.ndarray:
        return np.einsum("ikj,i->kj", self.mass_derivatives(q), dq)

    def gravity_vector(self, q) -> np.ndarray:
        p1, p2 = self.gravity
        g1, g2 = self.flex_gravity
        q1, q2 = q[0], q[1]
        c1, c12, s12 = math.cos(q1), math.cos(q1 + q2), math.sin(q1 + q2)
        fl = g1 * q[2] + g2 * q[3]
        return np.array([
            p1 * c1 + p2 * c12 - fl * s12,
            p2 * c12 - fl * s12,
            g1 * c12,
            g2 * c12,
        ])

    def partitioned(self, q, dq) -> PartitionedDynamics:
        q = np.asarray(q, dtype=float)
        dq = np.asarray(dq, dtype=float)
        K = np.zeros((4, 4))
        K[2:, 2:] = np.diag(self.stiffness)
        F_r = np.asarray(self.viscous) * dq[:2] + np.asarray(self.coulomb) * np.sign(dq[:2])
        B = np.vstack([np.eye(2), np.zeros((2, 2))])
        return PartitionedDynamics.from_full(
            2, self.mass(q), self.coriolis(q, dq), K, F_r, self.gravity_vector(q), B
        )

    def regressor(self, q_r, dq_r, v, a):
        """Y for A = [a1, a2, a3, b1, b2, c1, c2, p1, p2] (rigid part, flex frozen at 0)."""
        q1, q2 = q_r
        dq1, dq2 = dq_r
        v1, v2 = v
        a1_, a2_ = a
        c2, s2 = math.cos(q2), math.sin(q2)
        c1, c12 = math.cos(q1), math.cos(q1 + q2)
        return np.array([
            [a1_, a2_, c2 * (2 * a1_ + a2_) - s2 * (dq2 * v1 + (dq1 + dq2) * v2),
             dq1, 0.0, np.sign(dq1), 0.0, c1, c12],
            [0.0, a1_ + a2_, c2 * a1_ + s2 * dq1 * v1,
             0.0, dq2, 0.0, np.sign(dq2), 0.0, c12],
        ])

    def true_parameters(self):
        return np.array([*self.a, *self.viscous, *self.coulomb, *self.gravity])

    def rigid_terms(self, q_r, dq_r):
        """Closed-form ``(M_rr, V_rr, F_r, G_r)`` with the flexible part at rest."""
        a1, a2, a3 = self.a
        q1, q2 = q_r[0], q_r[1]
        dq1, dq2 = dq_r[0], dq_r[1]
        c2, s2 = math.cos(q2), math.sin(q2)
        c12 = math.cos(q1 + q2)
        M = np.array([[a1 + 2 * a3 * c2, a2 + a3 * c2], [a2 + a3 * c2, a2]])
        h = -a3 * s2
        V = np.array([[h * dq2, h * (dq1 + dq2)], [-h * dq1, 0.0]])
        F = np.array([
            self.viscous[0] * dq1 + self.coulomb[0] * np.sign(dq1),
            self.viscous[1] * dq2 + self.coulomb[1] * np.sign(dq2),
        ])
        p1, p2 = self.gravity
        G = np.array([p1 * math.cos(q1) + p2 * c12, p2 * c12])
        return M, V, F, G

    def _rigid_derivative(self, x, u):
        dq = x[2:]
        M, V, F, G = self.rigid_terms(x[:2], dq)
        rhs = np.asarray(u, dtype=float) - V @ dq - F - G
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        acc = np.array([M[1, 1] * rhs[0] - M[0, 1] * rhs[1], M[0, 0] * rhs[1] - M[1, 0] * rhs[0]]) / det
        return np.array([dq[0], dq[1], acc[0], acc[1]])


# ---------------------------------------------------------------------------
# Euler-Bernoulli modal analysis
# ---------------------------------------------------------------------------


class BeamModes(NamedTuple):
    beta_l: np.ndarray
    omega: np.ndarray
    phi_prime0: np.ndarray


def _char(x: float) -> float:
    # cos(x) cosh(x) + 1 divided by cosh(x); same roots, no overflow
    return math.cos(x) + 1.0 / math.cosh(x) if x < 700 else math.cos(x)


def _bisect(lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    flo = _char(lo)
    if flo * _char(hi) > 0:
        raise BeamModeError(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = _char(mid)
        if fm == 0.0 or hi - lo <= 4 * np.finfo(float).eps * mid:
            break
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(_char(root)) >= tol:
        raise BeamModeError(f"root near {root:.12g} did not reach |f| < {tol:g}")
    return root


def beam_modes(params: ArmParams = REFERENCE_ARM, n: int = 2) -> BeamModes:
    """Clamped-free Euler-Bernoulli modes of the link.

    Roots of ``cos(bL) cosh(bL) = -1`` are bracketed on ``[(k-1) pi, k pi]`` and
    refined by bisection.  Frequencies are ``w_k = b_k^2 sqrt(EI / rho)``.

    ``phi_prime0`` is the hub-torque input coefficient of each mode,
    ``-m_k / (I_r - sum_j m_j^2)`` with ``m_k = int_0^L rho x phi_k dx`` for the
    mass-normalized clamped shapes.  This is the flexible-acceleration-per-torque
    entry of the inverted hub/link mass matrix, which is the quantity the
    decoupled state equation carries in its flexible input rows.
    """
    if n < 1:
        raise ModelError("need at least one mode")
    L, rho, EI = params.link_length, params.linear_density, params.flexural_rigidity
    beta_l = np.array([_bisect((k - 1) * math.pi, k * math.pi) for k in range(1, n + 1)])
    beta = beta_l / L
    omega = beta**2 * math.sqrt(EI / rho)
    # int_0^L x phi dx = phi''(0) / beta^4 for clamped-free shapes, phi''(0) = 2 C beta^2
    C = 1.0 / math.sqrt(rho * L)
    coupling = rho * 2.0 * C / beta**2
    denom = params.hub_inertia - float(coupling @ coupling)
    if denom <= 0:
        raise ModelError("hub inertia too small for the requested number of modes")
    return BeamModes(beta_l=beta_l, omega=omega, phi_prime0=-coupling / denom)


def mode_shape(params: ArmParams, beta_l: float):
    """Mass-normalized clamped-free shape ``phi(x)`` as a callable."""
    L, rho = params.link_length, params.linear_density
    b = beta_l / L
    sigma = (math.cosh(beta_l) + math.cos(beta_l)) / (math.sinh(beta_l) + math.sin(beta_l))
    C = 1.0 / math.sqrt(rho * L)

    def phi(x):
        x = np.asarray(x, dtype=float)
        bx = b * x
        return C * (np.cosh(bx) - np.cos(bx) - sigma * (np.sinh(bx) - np.sin(bx)))

    return phi
