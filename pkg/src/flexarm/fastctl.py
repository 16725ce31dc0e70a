"""LQR damping of the fast subsystem.

The continuous algebraic Riccati equation

    A' P + P A - P B R^-1 B' P + Q = 0

is solved by Newton-Kleinman iteration.  Each Newton step is a Lyapunov
equation, solved directly through its Kronecker form (fast models are tiny).
The starting gain is zero when ``A`` is already Hurwitz, otherwise it comes
from Bass's shifted-Lyapunov construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DesignError, ModelError

__all__ = [
    "LqrWeights",
    "LqrGains",
    "solve_lyapunov",
    "solve_care",
    "care_residual",
    "fast_control",
    "cost",
    "design_fast",
]


def _sym(X):
    return 0.5 * (X + X.T)


@dataclass(frozen=True)
class LqrWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, X in (("Q", Q), ("R", R)):
            if X.shape[0] != X.shape[1]:
                raise ModelError(f"{name} must be square")
            if np.max(np.abs(X - X.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(X))):
                raise ModelError(f"{name} must be symmetric")
        if Q.size and np.linalg.eigvalsh(Q)[0] < -1e-12 * max(1.0, np.max(np.abs(Q))):
            raise ModelError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise ModelError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def diagonal(cls, q, r) -> "LqrWeights":
        return cls(np.diag(np.asarray(q, dtype=float)), np.diag(np.atleast_1d(np.asarray(r, dtype=float))))


@dataclass(frozen=True)
class LqrGains:
    """Gains in the ``tau_fast = K_pf phi1 + K_df phi2`` convention.

    ``K_pf`` and ``K_df`` already carry the minus sign of ``u = -R^-1 B' P x``.
    """

    K_pf: np.ndarray
    K_df: np.ndarray
    P: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    @property
    def K(self) -> np.ndarray:
        """Feedback row block ``[K_pf K_df]``."""
        return np.hstack([self.K_pf, self.K_df])

    def closed_loop(self, A, B) -> np.ndarray:
        return np.asarray(A) + np.asarray(B) @ self.K


def solve_lyapunov(A, C) -> np.ndarray:
    """X with ``A' X + X A + C = 0``, by dense Kronecker linearization."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    I = np.eye(n)
    # row-major vec: vec(A' X) = (A' kron I) vec X, vec(X A) = (I kron A') vec X
    L = np.kron(A.T, I) + np.kron(I, A.T)
    try:
        x = np.linalg.solve(L, -np.asarray(C, dtype=float).reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise DesignError(f"Lyapunov operator is singular: {exc}") from None
    return _sym(x.reshape(n, n))


def care_residual(A, B, Q, R, P) -> np.ndarray:
    BRB = B @ np.linalg.solve(R, B.T)
    return A.T @ P + P @ A - P @ BRB @ P + Q


def _pbh_ok(A, M, side, tol=1e-9):
    """PBH rank test on the closed right half plane.

    side="B": rank [A - sI, M] = n (stabilizability); side="Q": rank [A - sI; M] = n.
    """
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2), np.linalg.norm(M, 2) if M.size else 0.0)
    for s in np.linalg.eigvals(A):
        if s.real < -1e-10 * scale:
            continue
        blk = np.hstack([A - s * np.eye(n), M]) if side == "B" else np.vstack([A - s * np.eye(n), M])
        sv = np.linalg.svd(blk, compute_uv=False)
        if sv[n - 1] <= tol * scale:
            return False
    return True


def _initial_gain(A, B, R):
    n = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) < 0:
        return np.zeros((B.shape[1], n))
    # Bass: with shift b making -(A + bI) Hurwitz, Z from
    # (A + bI) Z + Z (A + bI)' = 2 B B' is positive definite and
    # K = B' Z^-1 stabilizes A - B K.
    b = 1.0 + max(np.max(np.abs(np.linalg.eigvals(A).real)), 0.0)
    As = A + b * np.eye(n)
    Z = solve_lyapunov(-As.T, 2.0 * B @ B.T)
    try:
        K0 = np.linalg.solve(Z, B).T
    except np.linalg.LinAlgError:
        K0 = None
    if K0 is not None and np.all(np.isfinite(K0)) and np.max(np.linalg.eigvals(A - B @ K0).real) < 0:
        return K0
    # stabilizable but not controllable: fall back to the Hamiltonian stable subspace
    return np.linalg.solve(R, B.T @ _hamiltonian_care(A, B, np.eye(n), R))


def _hamiltonian_care(A, B, Q, R):
    n = A.shape[0]
    Ham = np.block([[A, -B @ np.linalg.solve(R, B.T)], [-Q, -A.T]])
    w, V = np.linalg.eig(Ham)
    Vs = V[:, w.real < 0]
    if Vs.shape[1] != n:
        raise DesignError("Hamiltonian has eigenvalues on the imaginary axis")
    return _sym(np.real(np.linalg.solve(Vs[:n].T, Vs[n:].T).T))


def solve_care(A_F, B_F, W: LqrWeights, max_iter: int = 100, check: bool = True) -> LqrGains:
    """Stabilizing CARE solution and LQR gains.

    Raises :class:`DesignError` if the pair is not stabilizable, ``Q`` is not
    detectable, the iteration does not converge, or the residual/Hurwitz
    checks fail.
    """
    A = np.atleast_2d(np.asarray(A_F, dtype=float))
    B = np.asarray(B_F, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    Q, R = W.Q, W.R
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n) or R.shape[0] != B.shape[1]:
        raise ModelError("incompatible dimensions in CARE data")
    if not _pbh_ok(A, B, "B"):
        raise DesignError("(A_F, B_F) is not stabilizable")
    if not _pbh_ok(A, Q, "Q"):
        raise DesignError("Q does not detect every unstable mode of A_F")

    K = _initial_gain(A, B, R)
    P = np.zeros((n, n))
    prev = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        Ak = A - B @ K
        P_new = solve_lyapunov(Ak, Q + K.T @ R @ K)
        K = np.linalg.solve(R, B.T @ P_new)
        step = np.max(np.abs(P_new - P))
        P = P_new
        if step <= 1e-13 * max(1.0, np.max(np.abs(P))):
            break
        # quadratic convergence has ended once steps stop shrinking: rounding floor
        if it > 3 and step >= prev and step <= 1e-6 * max(1.0, np.max(np.abs(P))):
            break
        prev = step
    else:
        raise DesignError(f"Newton-Kleinman did not converge in {max_iter} iterations")

    res = float(np.max(np.abs(care_residual(A, B, Q, R, P))))
    gains = LqrGains(K_pf=-K[:, : n // 2], K_df=-K[:, n // 2 :], P=P, residual=res, iterations=it)
    if check:
        if res >= 1e-8 * (1.0 + float(np.max(np.abs(Q)))):
            raise DesignError(f"CARE residual {res:.3e} exceeds tolerance")
        if np.max(np.linalg.eigvals(A - B @ K).real) >= 0:
            raise DesignError("closed loop is not Hurwitz")
    return gains


def fast_control(gains: LqrGains, phi) -> np.ndarray:
    """``tau_fast = K_pf phi1 + K_df phi2``; accepts a FastState or a stacked vector."""
    vec = phi.vector() if hasattr(phi, "vector") else np.asarray(phi, dtype=float)
    return gains.K @ vec


def cost(phi, tau_fast, W: LqrWeights, dt: float | None = None, t=None) -> float:
    """Trapezoidal quadrature of ``phi' Q phi + tau' R tau`` over a sampled trace.

    ``phi`` is (N, 2m), ``tau_fast`` is (N, n) or (N,).  Give either a uniform
    step ``dt`` or sample times ``t``.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    tau = np.asarray(tau_fast, dtype=float).reshape(phi.shape[0], -1)
    if phi.shape[0] < 2:
        return 0.0
    g = np.einsum("ki,ij,kj->k", phi, W.Q, phi) + np.einsum("ki,ij,kj->k", tau, W.R, tau)
    if t is None:
        if dt is None:
            raise ModelError("cost needs dt or t")
        return float(np.trapezoid(g, dx=dt))
    return float(np.trapezoid(g, x=np.asarray(t, dtype=float)))


def design_fast(model, W: LqrWeights, q_r=None):
    """Decompose ``model`` at ``q_r`` and design the fast LQR there.

    Returns ``(decomposition, gains)``.  For configuration-independent plants
    one call serves the whole run.
    """
    from .perturbation import decompose

    dec = decompose(model, q_r)
    return dec, solve_care(dec.fast.A_F, dec.fast.B_F, W)
