"""Exception hierarchy for the lattice-gas toolkit.

Every error carries the exit code the command-line front end reports for it,
so `main.main()` can translate any failure with a single except clause.
"""


class QlgError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(QlgError):
    """Invalid experiment configuration or command-line usage."""

    exit_code = 2

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ParameterError(QlgError, ValueError):
    """An argument lies outside the domain an operation accepts."""

    exit_code = 2


class NumericalContractError(QlgError):
    """A conservation, range or well-posedness contract was violated."""

    exit_code = 3


class RangeViolationError(NumericalContractError):
    """An occupation probability left [0, 1]."""


class ConservationError(NumericalContractError):
    """Mass or particle number drifted beyond tolerance."""


class SingularityError(NumericalContractError):
    """A relaxation eigenvalue or EFT coefficient became singular."""


class DomainError(NumericalContractError):
    """An analytic expression was evaluated outside its domain."""


class CflViolationError(QlgError):
    """A requested PDE time step exceeds the explicit stability bound."""

    exit_code = 4

    def __init__(self, message, admissible_dt=None):
        self.admissible_dt = admissible_dt
        if admissible_dt is not None:
            message = f"{message} (admissible step <= {admissible_dt:.6g})"
        super().__init__(message)
