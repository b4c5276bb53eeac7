"""Physics-informed networks for 1-D frequency-domain duct acoustics."""
from .errors import (BesselRangeError, ConfigurationError, DomainError, DuctPinnError,
                     IncompatibleVersionError, NumericalFailure, ParamFileError,
                     ResonanceError, SingularityError)
from .media import MediumProperties, air_ntp, validity_check, visco_thermal
from .network import Architecture, NetworkParams, init_params, load_params, save_params
from .physics import AreaProfile, DuctProblem
from .trainer import (TrainingConfig, sample_collocation, train_lagrange, train_pressure,
                      train_velocity_transfer)
from .trial import BoundaryConditions, DuctGeometry, TrialField

__version__ = "0.1.0"

__all__ = [
    "Architecture", "AreaProfile", "BesselRangeError", "BoundaryConditions",
    "ConfigurationError", "DomainError", "DuctGeometry", "DuctPinnError", "DuctProblem",
    "IncompatibleVersionError", "MediumProperties", "NetworkParams", "NumericalFailure",
    "ParamFileError", "ResonanceError", "SingularityError", "TrainingConfig", "TrialField",
    "air_ntp", "init_params", "load_params", "sample_collocation", "save_params",
    "train_lagrange", "train_pressure", "train_velocity_transfer", "validity_check",
    "visco_thermal", "__version__",
]
