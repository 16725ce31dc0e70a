"""Flexible-link arm toolkit: plant models, two-time-scale decomposition,
adaptive sliding-mode slow control, LQR fast control and a simulation harness."""

__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    ArmParams,
    FullState,
    ModalModel,
    PartitionedDynamics,
    SingleLinkPlant,
    TwoLinkFixture,
    accel,
    beam_modes,
    build_single_link,
    default_modal,
    eval_partitioned,
)
from .errors import (  # noqa: E402
    BeamModeError,
    ConfigError,
    DesignError,
    DivergenceError,
    IntegrationError,
    ModelError,
    SingularMatrixError,
)

__all__ = [
    "ArmParams",
    "FullState",
    "ModalModel",
    "PartitionedDynamics",
    "SingleLinkPlant",
    "TwoLinkFixture",
    "accel",
    "beam_modes",
    "build_single_link",
    "default_modal",
    "eval_partitioned",
    "BeamModeError",
    "ConfigError",
    "DesignError",
    "DivergenceError",
    "IntegrationError",
    "ModelError",
    "SingularMatrixError",
]
