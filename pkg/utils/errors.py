"""Exception hierarchy shared by services, CLI and routes"""


class LieLangevinError(Exception):
    """Base class for all errors raised by this package"""


class DescriptorMismatchError(LieLangevinError, ValueError):
    """Operands belong to different algebras/groups"""


class UnsupportedFamilyError(LieLangevinError, ValueError):
    """Operation is not defined for the requested algebra family"""


class GroupProjectionError(LieLangevinError, ValueError):
    """Matrix is too far from the group to be reprojected"""


class NonFiniteStateError(LieLangevinError, ValueError):
    """A state or increment contains NaN or infinite entries"""


class OracleError(LieLangevinError):
    """Gibbs oracle cannot sample (unbounded potential, misconfigured bound)"""


class DiagnosticError(LieLangevinError):
    """A diagnostic cannot be computed from the supplied data"""


class ConfigError(LieLangevinError, ValueError):
    """Run configuration is malformed or violates an invariant"""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class OutputError(LieLangevinError, OSError):
    """Artifacts could not be written"""
