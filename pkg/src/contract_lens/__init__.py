"""Contract-based analysis and simulation of congestion control algorithms."""
from .contract import AggKind, Contract, Family, StatKind, TabulatedContract, contract_from_record
from .errors import (ConfigError, ContractError, ContractLensError, DomainError, EmptyWindow,
                     FitDiverged, InfeasibleCapacity, MissingCapacity, NoFit, ParamError,
                     RangeError, UnsupportedAgg)

__version__ = "0.1.0"

__all__ = ["AggKind", "Contract", "Family", "StatKind", "TabulatedContract",
           "contract_from_record", "__version__",
           "ConfigError", "ContractError", "ContractLensError", "DomainError", "EmptyWindow",
           "FitDiverged", "InfeasibleCapacity", "MissingCapacity", "NoFit", "ParamError",
           "RangeError", "UnsupportedAgg"]
