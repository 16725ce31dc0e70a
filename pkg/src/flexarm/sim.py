"""Closed-loop simulation harness.

The plant is integrated with fixed-step RK4 at ``dt_plant`` while the
controller runs at ``dt_ctrl`` and holds its torque in between.  Each control
sample is recorded in a :class:`TraceLog`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import fastctl, slowctl
from .errors import DivergenceError, IntegrationError, ModelError

__all__ = [
    "SimConfig",
    "Reference",
    "TraceLog",
    "Metrics",
    "rk4_step",
    "composite_torque",
    "trace_columns",
    "run",
    "metrics",
    "steady_mask",
    "epsilon_sweep",
    "fit_slope",
    "write_csv",
    "read_csv",
]

CONTROLLERS = ("composite", "slow-only")


@dataclass(frozen=True)
class SimConfig:
    """Rates, horizon, stressors and seed of one run.

    Friction is in physical units (N*m*s, N*m) and applies to the plant only;
    ``disturbance`` is a constant torque (N*m) added to the applied input.
    ``noise_std`` is ``(angle rad, deflection modal units)``.
    """

    dt_plant: float = 1e-4
    dt_ctrl: float = 1e-3
    horizon: float = 16.0
    noise_std: tuple = (0.0, 0.0)
    viscous: float = 0.004
    coulomb: float = 0.002
    disturbance: float = 0.0
    seed: int = 0
    q_bound: float = 50.0

    def __post_init__(self):
        if not (self.dt_plant > 0 and self.dt_ctrl >= self.dt_plant):
            raise ModelError("need dt_ctrl >= dt_plant > 0")
        ratio = self.dt_ctrl / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ModelError("dt_ctrl must be an integer multiple of dt_plant")
        if not self.horizon > 0:
            raise ModelError("horizon must be > 0")
        noise = tuple(float(v) for v in np.atleast_1d(self.noise_std))
        if len(noise) == 1:
            noise = (noise[0], noise[0])
        if len(noise) != 2 or min(noise) < 0:
            raise ModelError("noise_std must be two non-negative values")
        object.__setattr__(self, "noise_std", noise)
        if self.viscous < 0 or self.coulomb < 0:
            raise ModelError("friction coefficients must be >= 0")
        if not self.q_bound > 0:
            raise ModelError("q_bound must be > 0")
        if not (0 <= int(self.seed) < 2**64):
            raise ModelError("seed must be an unsigned 64-bit integer")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_ctrl / self.dt_plant))

    @property
    def n_samples(self) -> int:
        return int(round(self.horizon / self.dt_ctrl))


@dataclass(frozen=True)
class Reference:
    """Desired rigid trajectory with closed-form velocity and acceleration.

    ``smoothed-square`` alternates 0 -> +A -> -A -> +A ... every half period,
    moving between levels along a quintic minimum-jerk blend that lasts
    ``smoothing`` seconds.  ``step-train`` uses the same levels with
    first-order lag of time constant ``smoothing`` (pure steps at 0).
    ``sine`` is ``A sin(2 pi t / period)``.
    """

    kind: str = "smoothed-square"
    amplitude: float = 0.5
    period: float = 4.0
    smoothing: float = 1.0

    def __post_init__(self):
        if self.kind not in ("step-train", "smoothed-square", "sine"):
            raise ModelError(f"unknown reference kind {self.kind!r}")
        if not self.period > 0:
            raise ModelError("period must be > 0")
        if self.smoothing < 0:
            raise ModelError("smoothing must be >= 0")
        if self.kind == "smoothed-square" and self.smoothing > self.period / 2:
            raise ModelError("smoothing must not exceed half the period")

    def _level(self, j: int) -> float:
        if j < 0:
            return 0.0
        return self.amplitude if j % 2 == 0 else -self.amplitude

    def __call__(self, t: float):
        """``(q_d, dq_d, ddq_d)`` at time ``t``."""
        A = self.amplitude
        if self.kind == "sine":
            w = 2.0 * math.pi / self.period
            return A * math.sin(w * t), A * w * math.cos(w * t), -A * w * w * math.sin(w * t)
        half = self.period / 2.0
        k = int(math.floor(t / half))
        tau = t - k * half
        a, b = self._level(k - 1), self._level(k)
        d = b - a
        Ts = self.smoothing
        if self.kind == "step-train":
            if Ts == 0:
                return b, 0.0, 0.0
            # the lag restarts from the previous level at each switch
            e = math.exp(-tau / Ts)
            return b - d * e, d * e / Ts, -d * e / Ts**2
        if Ts == 0 or tau >= Ts:
            return b, 0.0, 0.0
        s = tau / Ts
        return (
            a + d * s**3 * (10 - 15 * s + 6 * s * s),
            d * 30 * s * s * (1 - s) ** 2 / Ts,
            d * 60 * s * (1 - 3 * s + 2 * s * s) / Ts**2,
        )


def trace_columns(n: int, m: int, p: int) -> tuple:
    """Column names for a run with n joints, m flexible coordinates, p parameters."""

    def joint(base):
        return [base] if n == 1 else [f"{base}_{i + 1}" for i in range(n)]

    cols = ["t"]
    for base in ("q_r", "q_d", "e"):
        cols += joint(base)
    cols += [f"qf{i + 1}" for i in range(m)]
    cols += [f"dqf{i + 1}" for i in range(m)]
    for base in ("tau_slow", "tau_fast", "tau", "s", "s0", "rho_hat"):
        cols += joint(base)
    cols += [f"a_hat_{i}" for i in range(p)]
    cols.append("v_lyap")
    return tuple(cols)


@dataclass
class TraceLog:
    """Uniformly sampled record of one run; one row per controller sample.

    Torque columns are in N*m.  ``extras`` holds in-memory signals that are
    not part of the CSV (``dq_d``, ``phi``, ``dq_r``).
    """

    columns: tuple
    data: np.ndarray
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.data = np.asarray(self.data, dtype=float).reshape(-1, len(self.columns))
        self._index = {c: i for i, c in enumerate(self.columns)}

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self._index[name]]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def group(self, base: str) -> np.ndarray:
        """All columns of a per-joint or per-mode signal as an (N, k) array."""
        if base in self._index:
            return self.data[:, [self._index[base]]]
        names = [c for c in self.columns if c.startswith(base) and c[len(base):].lstrip("_").isdigit()]
        return self.data[:, [self._index[c] for c in names]]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    @property
    def q_f(self) -> np.ndarray:
        return self.group("qf")

    def equals(self, other: "TraceLog") -> bool:
        return self.columns == other.columns and np.array_equal(self.data, other.data, equal_nan=True)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def rk4_step(f, x, dt: float, t: float | None = None):
    """Classical fourth-order Runge-Kutta step of ``dx/dt = f(x)``."""
    if not dt > 0:
        raise ModelError("dt must be > 0")
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_new)):
        raise IntegrationError("non-finite state in RK4 step", t)
    return x_new


def composite_torque(tau_slow, tau_fast):
    return np.asarray(tau_slow, dtype=float) + np.asarray(tau_fast, dtype=float)


# ---------------------------------------------------------------------------
# closed loop
# ---------------------------------------------------------------------------


def run(plant, reference: Reference, sliding: slowctl.SlidingConfig, cfg: SimConfig,
        controller: str = "composite", weights: fastctl.LqrWeights | None = None,
        x0=None, true_rho=None, A0=None) -> TraceLog:
    """Simulate ``plant`` under the slow (and optionally fast) controller.

    ``plant`` supplies the ground-truth dynamics, the regressor and the
    partition used by the fast design.  The Lyapunov diagnostic uses the
    plant's true parameters and ``true_rho`` (default: ``sliding.eta``).
    """
    if controller not in CONTROLLERS:
        raise ModelError(f"controller must be one of {CONTROLLERS}, got {controller!r}")
    n, m = plant.n, plant.m
    composite = controller == "composite"
    if composite and (m == 0 or weights is None):
        raise ModelError("composite control needs flexible coordinates and LQR weights")

    x = np.zeros(2 * (n + m)) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (2 * (n + m),):
        raise ModelError(f"initial state must have {2 * (n + m)} entries")

    true_A = plant.true_parameters()
    p = true_A.size
    rho_ref = np.broadcast_to(sliding.eta if true_rho is None else np.asarray(true_rho, float), (n,))
    state = slowctl.SlidingState.initial(p, n, A0)
    fixed_config = getattr(plant, "configuration_independent", False)
    scheduled = composite and not fixed_config
    M_rr = None
    dec = gains = None
    if composite:
        dec, gains = fastctl.design_fast(plant, weights)

    scale = plant.input_scale
    dist_u = np.full(n, cfg.disturbance / scale)
    rng = np.random.default_rng(int(cfg.seed))
    sd_q, sd_f = cfg.noise_std
    N, nsub, dtc, dtp = cfg.n_samples, cfg.substeps, cfg.dt_ctrl, cfg.dt_plant
    d = n + m

    cols = trace_columns(n, m, p)
    rows = np.empty((N, len(cols)))
    phi_log = np.zeros((N, 2 * m)) if composite else None
    tau_f_log = np.zeros((N, n))
    dq_d_log = np.empty((N, n))
    dq_r_log = np.empty((N, n))
    zeros_n = np.zeros(n)

    for k in range(N):
        t = k * dtc
        q_r, q_f = x[:n].copy(), x[n:d].copy()
        dq_r, dq_f = x[d : d + n], x[d + n :]
        if sd_q > 0:
            q_r += rng.normal(0.0, sd_q, n)
        if sd_f > 0 and m:
            q_f += rng.normal(0.0, sd_f, m)

        qd, dqd, ddqd = (np.full(n, v) for v in reference(t))
        sample = slowctl.surfaces(q_r, dq_r, qd, dqd, ddqd, sliding)
        Y = plant.regressor(q_r, dq_r, sample.Ef_dot, sample.Ef_ddot)
        tau_s = slowctl.control(Y, state, sample, sliding)

        if M_rr is None or not fixed_config:
            M_rr = plant.partitioned(np.concatenate([q_r, np.zeros(m)]), np.zeros(d)).M_rr
        v = slowctl.lyapunov(sample, state, M_rr, true_A, rho_ref, sliding)

        if composite:
            if scheduled:
                dec, gains = fastctl.design_fast(plant, weights, q_r)
            phi = dec.phi(q_f, dq_f, tau_s, dq_r)
            tau_f = fastctl.fast_control(gains, phi)
            phi_log[k] = phi.vector()
            tau_f_log[k] = tau_f
        else:
            tau_f = zeros_n
        u = composite_torque(tau_s, tau_f)

        rows[k] = np.concatenate([
            [t], x[:n], qd, sample.E, x[n:d], x[d + n :],
            tau_s * scale, tau_f * scale, u * scale,
            sample.S, sample.S0, state.rho_hat, state.A_hat, [v],
        ])
        dq_d_log[k] = dqd
        dq_r_log[k] = dq_r

        state = slowctl.adapt(state, Y, sample, sliding, dtc)

        u_applied = u + dist_u

        def f(z, u_applied=u_applied):
            return plant.derivative(z, u_applied)

        for j in range(nsub):
            x = rk4_step(f, x, dtp, t + j * dtp)
        if np.max(np.abs(x[:n])) > cfg.q_bound:
            raise DivergenceError(f"|q_r| exceeded {cfg.q_bound:g} rad", t + dtc)

    extras = {"dq_d": dq_d_log, "dq_r": dq_r_log}
    if composite:
        extras["phi"] = phi_log
        extras["tau_fast_u"] = tau_f_log
        extras["epsilon"] = dec.epsilon
    return TraceLog(cols, rows, extras)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    """Summary of one trace.  ``None`` marks a metric that could not be formed."""

    rms_error: float
    max_error: float
    steady_max_error: float | None
    steady_deflection_rms: float | None
    transient_deflection_peak: float | None
    control_effort: float
    cost: float | None
    n_steady_samples: int

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def steady_mask(t, dq_d, min_hold: float = 0.5, trim: float = 0.2) -> np.ndarray:
    """Samples inside hold intervals of the reference, trimmed at both ends.

    A hold interval is a run where every joint's ``dq_d`` is exactly zero for
    longer than ``min_hold`` seconds.
    """
    t = np.asarray(t, dtype=float)
    hold = np.all(np.atleast_2d(np.asarray(dq_d, dtype=float).T).T == 0.0, axis=1)
    mask = np.zeros(t.size, dtype=bool)
    i = 0
    while i < t.size:
        if not hold[i]:
            i += 1
            continue
        j = i
        while j + 1 < t.size and hold[j + 1]:
            j += 1
        if t[j] - t[i] > min_hold:
            mask[i : j + 1] = (t[i : j + 1] >= t[i] + trim) & (t[i : j + 1] <= t[j] - trim)
        i = j + 1
    return mask


def _dq_d(trace: TraceLog) -> np.ndarray:
    if "dq_d" in trace.extras:
        return trace.extras["dq_d"]
    # CSV traces: a hold shows as an unchanged q_d between samples
    qd = trace.group("q_d")
    diff = np.vstack([np.diff(qd, axis=0), np.zeros((1, qd.shape[1]))])
    return np.where(diff == 0.0, 0.0, 1.0)


def metrics(trace: TraceLog, weights: fastctl.LqrWeights | None = None) -> Metrics:
    if len(trace) == 0:
        raise ModelError("empty trace")
    t = trace.t
    E = trace.group("e")
    tau = trace.group("tau")
    mask = steady_mask(t, _dq_d(trace))
    qf = trace.q_f
    defl = np.linalg.norm(qf, axis=1) if qf.shape[1] else None
    dt = t[1] - t[0] if t.size > 1 else 0.0

    steady_err = float(np.max(np.abs(E[mask]))) if mask.any() else None
    steady_rms = (
        float(np.sqrt(np.mean(defl[mask] ** 2))) if (defl is not None and mask.any()) else None
    )
    trans = ~mask
    peak = float(np.max(defl[trans])) if (defl is not None and trans.any()) else None
    effort = float(np.trapezoid(np.sum(tau**2, axis=1), dx=dt)) if t.size > 1 else 0.0
    J = None
    if weights is not None and "phi" in trace.extras:
        # the fast design lives in model input units and fast time T = t / eps
        J = fastctl.cost(trace.extras["phi"], trace.extras["tau_fast_u"], weights,
                         dt=dt / trace.extras["epsilon"])
    return Metrics(
        rms_error=float(np.sqrt(np.mean(E**2))),
        max_error=float(np.max(np.abs(E))),
        steady_max_error=steady_err,
        steady_deflection_rms=steady_rms,
        transient_deflection_peak=peak,
        control_effort=effort,
        cost=J,
        n_steady_samples=int(mask.sum()),
    )


# ---------------------------------------------------------------------------
# epsilon sweep
# ---------------------------------------------------------------------------


def epsilon_sweep(plant, factors, reference: Reference, sliding: slowctl.SlidingConfig,
                  weights: fastctl.LqrWeights, cfg: SimConfig):
    """Gap between the full composite loop and the slow subsystem loop.

    For each stiffness factor the full plant (K_ff scaled) runs under the
    composite controller and its rigid-equivalent model runs under the same
    slow controller; the sup-norm of ``q_r - q_r_bar`` is returned with the
    corresponding ``eps``.  Rows are ``(factor, eps, gap)``.
    """
    rows = []
    for fac in factors:
        if fac < 1:
            raise ModelError("stiffness factors must be >= 1")
        full_plant = plant.stiffened(fac)
        full = run(full_plant, reference, sliding, cfg, "composite", weights)
        slow = run(full_plant.slow_model(), reference, sliding, cfg, "slow-only")
        gap = float(np.max(np.abs(full.group("q_r") - slow.group("q_r"))))
        rows.append((float(fac), float(full.extras["epsilon"]), gap))
    return rows


def fit_slope(eps, gaps) -> float:
    """Least-squares slope of ``log(gap)`` against ``log(eps)``."""
    eps = np.asarray(eps, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if eps.size < 2 or np.any(eps <= 0) or np.any(gaps <= 0):
        raise ModelError("slope needs at least two positive points")
    return float(np.polyfit(np.log(eps), np.log(gaps), 1)[0])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_csv(trace: TraceLog, path) -> None:
    """Write with ``repr`` floats so that reading back is exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace.columns)
        for row in trace.data:
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> TraceLog:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise ModelError(f"{path}: empty file") from None
        rows = [[float(v) for v in row] for row in r if row]
    if any(len(row) != len(header) for row in rows):
        raise ModelError(f"{path}: ragged rows")
    return TraceLog(tuple(header), np.array(rows, dtype=float).reshape(-1, len(header)))
