"""Exception hierarchy shared by every subpackage."""


class ContractLensError(Exception):
    """Base class for all errors raised by contract_lens."""


class DomainError(ContractLensError, ValueError):
    """A statistic value falls outside the contract domain."""


class RangeError(ContractLensError, ValueError):
    """A rate falls outside the contract range."""


class ContractError(ContractLensError, ValueError):
    """Contract parameters are inconsistent (not decreasing, not positive...)."""


class UnsupportedAgg(ContractLensError):
    """The requested operation is undefined for this aggregation kind."""


class InfeasibleCapacity(ContractLensError, ValueError):
    """No parking-lot fixed point exists for the requested capacity."""


class ParamError(ContractLensError, ValueError):
    """Invalid parameter passed to a bound or corner-contract constructor."""


class ConfigError(ContractLensError, ValueError):
    """Scenario or analysis configuration is malformed or inconsistent."""


class EmptyWindow(ContractLensError, ValueError):
    """A measurement window contains no samples."""


class MissingCapacity(ContractLensError, ValueError):
    """ECN target inversion needs a link-capacity hint."""


class FitDiverged(ContractLensError):
    """Every start of a curve fit failed the residual or monotonicity checks."""


class NoFit(ContractLensError):
    """No (form, statistic) combination produced a usable fit."""
