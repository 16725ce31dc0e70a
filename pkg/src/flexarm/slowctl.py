"""Adaptive boundary-layer sliding-mode controller for the slow subsystem.

With ``E = q_r - q_d`` and ``S = dE + lambda E`` the control is

    tau_slow = Y(q_r, dq_r, dEf, ddEf) A_hat - diag(rho_hat) sat(S / beta)

where ``dEf = dq_d - lambda E`` and ``ddEf = ddq_d - lambda dE``.  Estimates
are driven by the distance to the boundary layer ``S0 = S - beta sat(S/beta)``,
so nothing adapts while every ``|S_i| <= beta_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

__all__ = [
    "SlidingConfig",
    "SlidingState",
    "SurfaceSample",
    "sat",
    "surfaces",
    "control",
    "adapt",
    "lyapunov",
]


def _vec(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ModelError(f"{name} must be a scalar or vector")
    return arr


@dataclass(frozen=True, eq=False)
class SlidingConfig:
    """Surface slope, layer width, adaptation gain and diagnostic margin.

    ``lam``, ``beta`` and ``eta`` may be scalars (broadcast over joints).
    ``gamma`` may be a scalar, a vector (diagonal) or a full SPD matrix.
    ``rho_max`` is an optional clamp on the switching gain; ``None`` disables it.
    """

    lam: object = 10.0
    beta: object = 1.3
    gamma: object = 1.0
    eta: object = 0.01
    rho_max: float | None = None

    def __post_init__(self):
        lam = _vec(self.lam, "lambda")
        beta = _vec(self.beta, "beta")
        eta = _vec(self.eta, "eta")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ModelError("lambda must be > 0")
        if np.any(beta <= 0) or not np.all(np.isfinite(beta)):
            raise ModelError("beta must be > 0")
        if np.any(eta < 0):
            raise ModelError("eta must be >= 0")
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim == 2:
            if g.shape[0] != g.shape[1] or np.max(np.abs(g - g.T)) > 1e-12 * np.max(np.abs(g)):
                raise ModelError("gamma must be symmetric")
            if np.linalg.eigvalsh(g)[0] <= 0:
                raise ModelError("gamma must be positive definite")
        elif np.any(g <= 0):
            raise ModelError("gamma must be positive definite")
        if self.rho_max is not None and self.rho_max < 0:
            raise ModelError("rho_max must be >= 0")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", g)

    def gamma_matrix(self, p: int) -> np.ndarray:
        cache = self.__dict__.setdefault("_gamma_cache", {})
        if p not in cache:
            G = self._build_gamma(p)
            cache[p] = (G, np.linalg.inv(G))
        return cache[p][0]

    def gamma_inverse(self, p: int) -> np.ndarray:
        self.gamma_matrix(p)
        return self.__dict__["_gamma_cache"][p][1]

    def _build_gamma(self, p: int) -> np.ndarray:
        g = self.gamma
        if g.ndim == 2:
            if g.shape != (p, p):
                raise ModelError(f"gamma is {g.shape}, regressor has {p} columns")
            return g
        if g.size not in (1, p):
            raise ModelError(f"gamma has {g.size} entries, regressor has {p} columns")
        return np.diag(np.broadcast_to(g, (p,)).astype(float))


@dataclass(frozen=True)
class SlidingState:
    A_hat: np.ndarray
    rho_hat: np.ndarray

    @classmethod
    def initial(cls, n_params: int, n_joints: int, A0=None) -> "SlidingState":
        A = np.zeros(n_params) if A0 is None else np.array(A0, dtype=float)
        if A.shape != (n_params,):
            raise ModelError(f"initial estimate must have {n_params} entries")
        return cls(A_hat=A, rho_hat=np.zeros(n_joints))


@dataclass(frozen=True)
class SurfaceSample:
    E: np.ndarray
    Edot: np.ndarray
    S: np.ndarray
    S0: np.ndarray
    Ef_dot: np.ndarray
    Ef_ddot: np.ndarray
    sat: np.ndarray = field(repr=False)


def sat(s, beta):
    """Boundary-layer saturation: ``s / beta`` clipped to [-1, 1]."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0):
        raise ModelError("beta must be > 0")
    out = np.clip(np.asarray(s, dtype=float) / beta, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def surfaces(q_r, dq_r, q_d, dq_d, ddq_d, cfg: SlidingConfig) -> SurfaceSample:
    q_r, dq_r = _vec(q_r, "q_r"), _vec(dq_r, "dq_r")
    q_d, dq_d, ddq_d = _vec(q_d, "q_d"), _vec(dq_d, "dq_d"), _vec(ddq_d, "ddq_d")
    lam = cfg.lam
    E = q_r - q_d
    Edot = dq_r - dq_d
    S = Edot + lam * E
    s = np.clip(S / cfg.beta, -1.0, 1.0)
    S0 = S - cfg.beta * s
    # exact zero inside the layer, so adaptation is truly frozen there
    S0 = np.where(np.abs(S) <= cfg.beta, 0.0, S0)
    return SurfaceSample(
        E=E, Edot=Edot, S=S, S0=S0,
        Ef_dot=dq_d - lam * E, Ef_ddot=ddq_d - lam * Edot, sat=s,
    )


def control(Y, state: SlidingState, sample: SurfaceSample, cfg: SlidingConfig) -> np.ndarray:
    """``Y A_hat - diag(rho_hat) sat(S / beta)`` in model input units."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != state.A_hat.size:
        raise ModelError(f"regressor has {Y.shape[1]} columns, estimate has {state.A_hat.size}")
    return Y @ state.A_hat - state.rho_hat * sample.sat


def adapt(state: SlidingState, Y, sample: SurfaceSample, cfg: SlidingConfig, dt: float) -> SlidingState:
    """One explicit-Euler step of the estimate and switching-gain laws."""
    if not dt > 0:
        raise ModelError("dt must be > 0")
    S0 = sample.S0
    if not np.any(S0):
        return state
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    G = cfg.gamma_matrix(state.A_hat.size)
    A_hat = state.A_hat - (G @ (Y.T @ S0)) * dt
    rho_hat = state.rho_hat + np.abs(S0) * dt
    if cfg.rho_max is not None:
        rho_hat = np.minimum(rho_hat, np.maximum(cfg.rho_max, state.rho_hat))
    return SlidingState(A_hat=A_hat, rho_hat=rho_hat)


def lyapunov(sample: SurfaceSample, state: SlidingState, M_rr, true_A, true_rho,
             cfg: SlidingConfig) -> float:
    """``0.5 (S0' M_rr S0 + A~' Gamma^-1 A~ + rho~' rho~)``."""
    S0 = sample.S0
    M_rr = np.atleast_2d(np.asarray(M_rr, dtype=float))
    A_err = state.A_hat - np.asarray(true_A, dtype=float)
    r_err = state.rho_hat - np.broadcast_to(np.asarray(true_rho, dtype=float), state.rho_hat.shape)
    Gi = cfg.gamma_inverse(A_err.size)
    return 0.5 * float(S0 @ M_rr @ S0 + A_err @ Gi @ A_err + r_err @ r_err)
