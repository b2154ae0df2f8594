"""Exception hierarchy for celkit.

Every error carries enough context (grid index, offending value) for the CLI
to print a useful message and choose an exit code.
"""


class CelkitError(Exception):
    """Base class for all library errors."""

    #: exit code used by the command line front end
    exit_code = 3


class ValidationError(CelkitError):
    exit_code = 2


class NotHermitian(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class InvalidGrid(ValidationError):
    pass


class AliasingError(ValidationError):
    """Successive path samples are too far apart (``||U[i+1] - U[i]|| >= 2``)."""


class EndpointMismatch(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class InvalidParams(ValidationError):
    pass


class InvalidDefect(InvalidParams):
    pass


class InsufficientMultiplicity(InvalidParams):
    pass


class NonIntegerSum(ValidationError):
    pass


class DuplicateEntries(ValidationError):
    pass


class PreconditionFailed(ValidationError):
    pass


class ConvergenceFailure(CelkitError):
    pass


class BranchCutHit(CelkitError):
    """An eigenphase sits on (or too close to) the branch cut at -1."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LogUndefined(BranchCutHit):
    pass


class AliasedPhase(CelkitError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class StartNotInSpectrum(ValidationError):
    pass


class PerturbationFailed(CelkitError):
    pass


class NotDetOne(ValidationError):
    pass


class BoundViolated(CelkitError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GapViolated(CelkitError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class RankNotOne(CelkitError):
    pass


class BandLost(CelkitError):
    def __init__(self, message, stage=None, partial=None):
        super().__init__(message)
        self.stage = stage
        self.partial = partial


class NoConsistentL(CelkitError):
    pass


class RegimeUnresolved(CelkitError):
    exit_code = 4
