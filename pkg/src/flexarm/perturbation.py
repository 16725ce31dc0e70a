"""Two-time-scale decomposition of a partitioned flexible-arm model.

Flexible coordinates are rescaled as ``psi = q_f / eps**2`` with
``eps = k_m ** -0.5``.  Freezing the slow variables gives a quasi-static
deflection ``psi_bar`` (the slow manifold) and a linear fast subsystem in
the stretched time ``T = t / eps`` for ``phi = [psi - psi_bar, eps * dpsi/dt]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import PartitionedDynamics, is_spd
from .errors import ModelError, SingularMatrixError

__all__ = [
    "ScaleFactor",
    "InverseBlocks",
    "ReducedMatrices",
    "FastModel",
    "FastState",
    "scale_factor",
    "invert_blocks",
    "reduced_matrices",
    "slow_manifold",
    "slow_dynamics",
    "fast_model",
    "fast_state",
    "decompose",
]


@dataclass(frozen=True)
class ScaleFactor:
    k_m: float
    epsilon: float
    K_tilde: np.ndarray


@dataclass(frozen=True)
class InverseBlocks:
    H_rr: np.ndarray
    H_rf: np.ndarray
    H_fr: np.ndarray
    H_ff: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return np.block([[self.H_rr, self.H_rf], [self.H_fr, self.H_ff]])


@dataclass(frozen=True)
class ReducedMatrices:
    B1_r: np.ndarray
    B1_f: np.ndarray
    V1_rr: np.ndarray
    V1_rf: np.ndarray
    V1_fr: np.ndarray
    V1_ff: np.ndarray


@dataclass(frozen=True)
class FastModel:
    A_F: np.ndarray
    B_F: np.ndarray
    epsilon: float

    @property
    def m(self) -> int:
        return self.A_F.shape[0] // 2


@dataclass(frozen=True)
class FastState:
    phi1: np.ndarray
    phi2: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.phi1, self.phi2])


def scale_factor(K_ff) -> ScaleFactor:
    """Smallest stiffness ``k_m``, ``eps = 1/sqrt(k_m)`` and ``K_ff / k_m``.

    For a diagonal ``K_ff`` the smallest diagonal entry is used directly,
    otherwise the smallest eigenvalue.
    """
    K = np.atleast_2d(np.asarray(K_ff, dtype=float))
    if K.shape[0] != K.shape[1] or K.size == 0:
        raise ModelError("K_ff must be a non-empty square matrix")
    if np.count_nonzero(K - np.diag(np.diag(K))) == 0:
        k_m = float(np.min(np.diag(K)))
    else:
        if np.max(np.abs(K - K.T)) > 1e-12 * np.max(np.abs(K)):
            raise ModelError("K_ff must be symmetric")
        k_m = float(np.linalg.eigvalsh(K)[0])
    if not k_m > 0:
        raise ModelError(f"smallest stiffness must be > 0, got {k_m!r}")
    return ScaleFactor(k_m=k_m, epsilon=k_m**-0.5, K_tilde=K / k_m)


def invert_blocks(pd: PartitionedDynamics) -> InverseBlocks:
    """Blocks of ``H = M^-1`` partitioned conformally with (rigid, flexible)."""
    M = pd.M
    if not is_spd(M):
        raise SingularMatrixError("mass matrix is singular or not positive definite")
    L = np.linalg.cholesky(M)
    Linv = np.linalg.solve(L, np.eye(M.shape[0]))
    H = Linv.T @ Linv
    H = 0.5 * (H + H.T)
    n = pd.n
    return InverseBlocks(H[:n, :n], H[:n, n:], H[n:, :n], H[n:, n:])


def reduced_matrices(pd: PartitionedDynamics, H: InverseBlocks) -> ReducedMatrices:
    """H-weighted input and velocity blocks (rows of ``H B`` and ``H V``)."""
    return ReducedMatrices(
        B1_r=H.H_rr @ pd.B_r + H.H_rf @ pd.B_f,
        B1_f=H.H_fr @ pd.B_r + H.H_ff @ pd.B_f,
        V1_rr=H.H_rr @ pd.V_rr + H.H_rf @ pd.V_fr,
        V1_rf=H.H_rr @ pd.V_rf + H.H_rf @ pd.V_ff,
        V1_fr=H.H_fr @ pd.V_rr + H.H_ff @ pd.V_fr,
        V1_ff=H.H_fr @ pd.V_rf + H.H_ff @ pd.V_ff,
    )


def slow_manifold(pd: PartitionedDynamics, H: InverseBlocks, rm: ReducedMatrices,
                  K_tilde, tau_slow, dq_r) -> np.ndarray:
    """Quasi-static scaled deflection ``psi_bar`` for frozen slow variables.

    ``psi_bar = K~^-1 H_ff^-1 (B1_f tau - V1_fr dq_r - H_fr F_r - H_fr G_r - H_ff G_f)``
    """
    tau = np.atleast_1d(np.asarray(tau_slow, dtype=float))
    dq_r = np.atleast_1d(np.asarray(dq_r, dtype=float))
    rhs = (
        rm.B1_f @ tau
        - rm.V1_fr @ dq_r
        - H.H_fr @ pd.F_r
        - H.H_fr @ pd.G_r
        - H.H_ff @ pd.G_f
    )
    try:
        y = np.linalg.solve(H.H_ff, rhs)
        return np.linalg.solve(np.asarray(K_tilde, dtype=float), y)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"slow manifold: {exc}") from None


def slow_dynamics(pd: PartitionedDynamics, tau_slow, dq_r) -> np.ndarray:
    """Rigid acceleration on the slow manifold.

    Substituting the manifold into the rigid rows collapses the H-weighted
    terms to the Schur complement ``H_rr - H_rf H_ff^-1 H_fr = M_rr^-1``, giving
    ``M_rr^-1 (B_r tau - V_rr dq_r - F_r - G_r)``; the flexible gravity cancels.
    """
    tau = np.atleast_1d(np.asarray(tau_slow, dtype=float))
    dq_r = np.atleast_1d(np.asarray(dq_r, dtype=float))
    rhs = pd.B_r @ tau - pd.V_rr @ dq_r - pd.F_r - pd.G_r
    if not is_spd(pd.M_rr):
        raise SingularMatrixError("M_rr is singular or not positive definite")
    return np.linalg.solve(pd.M_rr, rhs)


def fast_model(pd: PartitionedDynamics, H: InverseBlocks, rm: ReducedMatrices,
               K_tilde, epsilon: float) -> FastModel:
    """Linear fast subsystem ``d phi / dT = A_F phi + B_F tau_fast``.

    The first-order damping term ``-V1_ff * eps`` is kept so that modal damping
    shows up in the fast eigenvalues.
    """
    m = pd.m
    A_F = np.zeros((2 * m, 2 * m))
    A_F[:m, m:] = np.eye(m)
    A_F[m:, :m] = -H.H_ff @ np.asarray(K_tilde, dtype=float)
    A_F[m:, m:] = -rm.V1_ff * epsilon
    B_F = np.vstack([np.zeros((m, rm.B1_f.shape[1])), rm.B1_f])
    return FastModel(A_F=A_F, B_F=B_F, epsilon=float(epsilon))


def fast_state(psi, dpsi, psi_bar, epsilon: float) -> FastState:
    """``phi1 = psi - psi_bar``, ``phi2 = eps * dpsi/dt`` (manifold rate taken as zero)."""
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    dpsi = np.atleast_1d(np.asarray(dpsi, dtype=float))
    psi_bar = np.atleast_1d(np.asarray(psi_bar, dtype=float))
    if not (psi.shape == dpsi.shape == psi_bar.shape):
        raise ModelError("fast-state inputs must have matching dimensions")
    return FastState(phi1=psi - psi_bar, phi2=epsilon * dpsi)


@dataclass(frozen=True)
class Decomposition:
    """Everything the composite controller needs at one slow configuration."""

    scale: ScaleFactor
    H: InverseBlocks
    reduced: ReducedMatrices
    fast: FastModel
    slow_blocks: PartitionedDynamics

    @property
    def epsilon(self) -> float:
        return self.scale.epsilon

    def manifold(self, tau_slow, dq_r) -> np.ndarray:
        return slow_manifold(self.slow_blocks, self.H, self.reduced, self.scale.K_tilde, tau_slow, dq_r)

    def phi(self, q_f, dq_f, tau_slow, dq_r) -> FastState:
        eps = self.scale.epsilon
        return fast_state(q_f / eps**2, dq_f / eps**2, self.manifold(tau_slow, dq_r), eps)


def decompose(model, q_r=None, dq_r=None) -> Decomposition:
    """Decompose ``model`` at a slow configuration with the flexible part at rest."""
    n, m = model.n, model.m
    q_r = np.zeros(n) if q_r is None else np.atleast_1d(np.asarray(q_r, dtype=float))
    dq_r = np.zeros(n) if dq_r is None else np.atleast_1d(np.asarray(dq_r, dtype=float))
    pd = model.partitioned(np.concatenate([q_r, np.zeros(m)]), np.concatenate([dq_r, np.zeros(m)]))
    sf = scale_factor(pd.K_ff)
    H = invert_blocks(pd)
    rm = reduced_matrices(pd, H)
    fm = fast_model(pd, H, rm, sf.K_tilde, sf.epsilon)
    return Decomposition(scale=sf, H=H, reduced=rm, fast=fm, slow_blocks=pd)
