"""Exception hierarchy shared by all liftlab modules."""


class LiftlabError(Exception):
    """Base class for all domain errors raised by liftlab."""


class NonPositiveLength(LiftlabError):
    pass


class TooFewNodes(LiftlabError):
    pass


class DimensionMismatch(LiftlabError):
    pass


class InvalidParameter(LiftlabError):
    pass


class InvalidParams(InvalidParameter):
    pass


class InvalidDimension(LiftlabError):
    pass


class InvalidLaw(LiftlabError):
    pass


class EigenFailure(LiftlabError):
    pass


class OverflowGuard(LiftlabError):
    pass


class NotSelfAdjoint(LiftlabError):
    pass


class NotMeanZero(LiftlabError):
    pass


class ZeroFunction(LiftlabError):
    pass


class ZeroRHS(LiftlabError):
    pass


class EmptyProbeSet(LiftlabError):
    pass


class StateMapMismatch(LiftlabError):
    pass


class MissingBound(LiftlabError):
    pass


class CBelowOne(LiftlabError):
    pass


class SolveFailure(LiftlabError):
    pass


class InvalidInitialState(LiftlabError):
    pass


class EmptyTrajectory(LiftlabError):
    pass


class BoundViolation(LiftlabError):
    pass


class ZeroGradient(LiftlabError):
    pass


class SeriesTooShort(LiftlabError):
    pass


class NoiseFloor(LiftlabError):
    pass


class ConfigError(LiftlabError):
    """Invalid run configuration (usage error, exit code 2 in the CLI)."""


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass
