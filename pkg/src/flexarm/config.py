"""Sectioned key-value configuration with defaults for the reference rig.

Sections: ``[arm] [modal] [sliding] [lqr] [sim] [reference]``.  A
``[manifest]`` section is accepted and ignored, so a run manifest can be fed
back in as a configuration.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import REFERENCE_ARM, ArmParams, ModalModel, beam_modes, MEASURED_OMEGA
from .errors import BeamModeError, ConfigError, ModelError
from .fastctl import LqrWeights
from .sim import Reference, SimConfig
from .slowctl import SlidingConfig

__all__ = ["Config", "parse_config", "load_config", "snapshot"]


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _floats(text):
    parts = [p for p in (s.strip() for s in text.replace(";", ",").split(",")) if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(_float(p) for p in parts)


def _int(text):
    v = int(text, 0)
    if v < 0 or v >= 2**64:
        raise ValueError("must be an unsigned 64-bit integer")
    return v


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else _float(text)


def _pos(v):
    vals = v if isinstance(v, tuple) else (v,)
    if any(x <= 0 for x in vals):
        raise ValueError("must be > 0")


def _nonneg(v):
    vals = v if isinstance(v, tuple) else (v,)
    if any(x < 0 for x in vals):
        raise ValueError("must be >= 0")


def _unit(v):
    if not 0 <= v < 1:
        raise ValueError("must lie in [0, 1)")


def _kind(text):
    text = text.strip()
    if text not in ("step-train", "smoothed-square", "sine"):
        raise ValueError("must be step-train, smoothed-square or sine")
    return text


# key -> (parser, validator)
SCHEMA = {
    "arm": {
        "motor_inertia": (_float, _pos),
        "link_length": (_float, _pos),
        "link_height": (_float, _pos),
        "link_thickness": (_float, _pos),
        "link_mass": (_float, _pos),
        "linear_density": (_float, _pos),
        "flexural_rigidity": (_float, _pos),
    },
    "modal": {
        "omega": (_floats, _pos),
        "delta": (_float, _unit),
        "phi_prime0": (_floats, None),
        "i_r": (_float, _pos),
    },
    "sliding": {
        "lambda": (_floats, _pos),
        "beta": (_floats, _pos),
        "gamma": (_floats, _pos),
        "eta": (_floats, _nonneg),
        "rho_max": (_opt_float, lambda v: v is None or _nonneg(v)),
    },
    "lqr": {
        "q": (_floats, _nonneg),
        "r": (_floats, _pos),
    },
    "sim": {
        "dt_plant": (_float, _pos),
        "dt_ctrl": (_float, _pos),
        "horizon": (_float, _pos),
        "noise_angle": (_float, _nonneg),
        "noise_strain": (_float, _nonneg),
        "viscous": (_float, _nonneg),
        "coulomb": (_float, _nonneg),
        "disturbance": (_float, None),
        "seed": (_int, None),
        "q_bound": (_float, _pos),
        "sweep_horizon": (_float, _pos),
    },
    "reference": {
        "kind": (_kind, None),
        "amplitude": (_float, None),
        "period": (_float, _pos),
        "smoothing": (_float, _nonneg),
    },
}
IGNORED = ("manifest",)


@dataclass(frozen=True, eq=False)
class Config:
    arm: ArmParams
    modal: ModalModel
    sliding: SlidingConfig
    weights: LqrWeights
    sim: SimConfig
    reference: Reference
    sweep_horizon: float = 4.0

    def with_seed(self, seed: int) -> "Config":
        return replace(self, sim=replace(self.sim, seed=int(seed)))


def _scalar_or_tuple(v):
    return v[0] if len(v) == 1 else v


def parse_config(text: str = "", source: str = "<config>") -> Config:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    raw = {}
    for section in cp.sections():
        if section in IGNORED:
            continue
        if section not in SCHEMA:
            raise ConfigError("unknown section", key=section)
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", key=f"{section}.{key}")
            parser, check = SCHEMA[section][key]
            try:
                v = parser(value)
                if check is not None:
                    check(v)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{exc} (got {value!r})", key=f"{section}.{key}") from None
            raw[(section, key)] = v

    def get(section, key, default):
        return raw.get((section, key), default)

    def build(section, fn, key=None):
        try:
            return fn()
        except (ModelError, ValueError) as exc:
            raise ConfigError(str(exc), key=key or section) from None

    arm = build("arm", lambda: ArmParams(**{k: get("arm", k, getattr(REFERENCE_ARM, k)) for k in SCHEMA["arm"]}))

    omega = get("modal", "omega", MEASURED_OMEGA)
    phi = raw.get(("modal", "phi_prime0"))
    if phi is None:
        try:
            phi = tuple(beam_modes(arm, len(omega)).phi_prime0)
        except (BeamModeError, ModelError) as exc:
            raise ConfigError(str(exc), key="modal.phi_prime0") from None
    modal = build("modal", lambda: ModalModel(
        omega=omega,
        delta=get("modal", "delta", 0.01),
        phi_prime0=phi,
        I_r=get("modal", "i_r", arm.hub_inertia),
    ))

    sliding = build("sliding", lambda: SlidingConfig(
        lam=_scalar_or_tuple(get("sliding", "lambda", (10.0,))),
        beta=_scalar_or_tuple(get("sliding", "beta", (1.3,))),
        gamma=_scalar_or_tuple(get("sliding", "gamma", (1.0,))),
        eta=_scalar_or_tuple(get("sliding", "eta", (0.01,))),
        rho_max=get("sliding", "rho_max", None),
    ))

    m = modal.n_modes
    q = get("lqr", "q", (150.0, 500.0, 1.0, 0.0))
    if len(q) != 2 * m:
        raise ConfigError(f"needs {2 * m} diagonal entries for {m} modes", key="lqr.q")
    r = get("lqr", "r", (2.0,))
    weights = build("lqr", lambda: LqrWeights.diagonal(q, r))

    sim = build("sim", lambda: SimConfig(
        dt_plant=get("sim", "dt_plant", 1e-4),
        dt_ctrl=get("sim", "dt_ctrl", 1e-3),
        horizon=get("sim", "horizon", 16.0),
        noise_std=(get("sim", "noise_angle", 0.0), get("sim", "noise_strain", 0.0)),
        viscous=get("sim", "viscous", 0.004),
        coulomb=get("sim", "coulomb", 0.002),
        disturbance=get("sim", "disturbance", 0.0),
        seed=get("sim", "seed", 0),
        q_bound=get("sim", "q_bound", 50.0),
    ))
    reference = build("reference", lambda: Reference(
        kind=get("reference", "kind", "smoothed-square"),
        amplitude=get("reference", "amplitude", 0.5),
        period=get("reference", "period", 4.0),
        smoothing=get("reference", "smoothing", 1.0),
    ))
    return Config(arm, modal, sliding, weights, sim, reference, get("sim", "sweep_horizon", 4.0))


def load_config(path) -> Config:
    if path is None:
        return parse_config("")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def _fmt(v) -> str:
    if isinstance(v, (tuple, list, np.ndarray)):
        return ", ".join(_fmt(x) for x in np.ravel(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def snapshot(cfg: Config) -> dict:
    """Fully resolved configuration as ``{section: {key: text}}``; floats use repr."""
    a, md, sl, s, rf = cfg.arm, cfg.modal, cfg.sliding, cfg.sim, cfg.reference
    return {
        "arm": {k: _fmt(getattr(a, k)) for k in SCHEMA["arm"]},
        "modal": {
            "omega": _fmt(md.omega),
            "delta": _fmt(md.delta),
            "phi_prime0": _fmt(md.phi_prime0),
            "i_r": _fmt(md.I_r),
        },
        "sliding": {
            "lambda": _fmt(sl.lam),
            "beta": _fmt(sl.beta),
            "gamma": _fmt(sl.gamma),
            "eta": _fmt(sl.eta),
            "rho_max": "none" if sl.rho_max is None else _fmt(sl.rho_max),
        },
        "lqr": {"q": _fmt(np.diag(cfg.weights.Q)), "r": _fmt(np.diag(cfg.weights.R))},
        "sim": {
            "dt_plant": _fmt(s.dt_plant),
            "dt_ctrl": _fmt(s.dt_ctrl),
            "horizon": _fmt(s.horizon),
            "noise_angle": _fmt(s.noise_std[0]),
            "noise_strain": _fmt(s.noise_std[1]),
            "viscous": _fmt(s.viscous),
            "coulomb": _fmt(s.coulomb),
            "disturbance": _fmt(s.disturbance),
            "seed": str(int(s.seed)),
            "q_bound": _fmt(s.q_bound),
            "sweep_horizon": _fmt(cfg.sweep_horizon),
        },
        "reference": {
            "kind": rf.kind,
            "amplitude": _fmt(rf.amplitude),
            "period": _fmt(rf.period),
            "smoothing": _fmt(rf.smoothing),
        },
    }
