from .config import PRESETS, ScenarioConfig, load_config, parse_config
from .constants import PhysicalConstants, load_constants
from .error import ConfigError, DomainError, QSwitchError
from .hilbert import Factor, SparseOperator, StateVector
from .report import OutputFormat, RunReport
from .spacetime import CentralBody
from .switch_model import AmplitudeModel, SwitchOutcome, run_switch
from .timing import PathProfile, ProtocolSchedule, solve_matching
from .trigger import GridSpec, TriggerParams

__all__ = [
    "PRESETS",
    "AmplitudeModel",
    "CentralBody",
    "ConfigError",
    "DomainError",
    "Factor",
    "GridSpec",
    "OutputFormat",
    "PathProfile",
    "PhysicalConstants",
    "ProtocolSchedule",
    "QSwitchError",
    "RunReport",
    "ScenarioConfig",
    "SparseOperator",
    "StateVector",
    "SwitchOutcome",
    "TriggerParams",
    "load_config",
    "load_constants",
    "parse_config",
    "run_switch",
    "solve_matching",
]


__version__ = "0.1.0"
