"""Exception types raised across the package.

Every class name doubles as the one-line diagnostic tag printed by the CLI.
"""


class ForcepsError(Exception):
    """Base class for all package errors."""

    exit_code = 3


# geometry
class DepthNonPositive(ForcepsError, ValueError):
    pass


class NonPositiveDepth(DepthNonPositive):
    pass


class InsufficientCorrespondences(ForcepsError, ValueError):
    pass


class DegenerateConfiguration(ForcepsError, ValueError):
    pass


class SingularIntrinsics(ForcepsError, ValueError):
    pass


# tracking
class WrongDetectionCount(ForcepsError, ValueError):
    pass


class TooFewMarkers(ForcepsError, ValueError):
    pass


# force sensing
class RankDeficientDisplacements(ForcepsError, ValueError):
    pass


class GeometryInfeasible(ForcepsError, ValueError):
    pass


class SingularStiffness(ForcepsError, ValueError):
    pass


# simulation
class PhaseTimeout(ForcepsError, RuntimeError):
    exit_code = 4

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


# metrics
class EmptySet(ForcepsError, ValueError):
    pass


class LengthMismatch(ForcepsError, ValueError):
    pass


class NonPositiveMFA(ForcepsError, ValueError):
    pass


class ConfigError(ForcepsError, ValueError):
    exit_code = 2
