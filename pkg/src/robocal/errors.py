"""Exception hierarchy shared across the package.

Data/format problems and geometric degeneracies get distinct classes so the
CLI can map them onto exit codes without string matching.
"""


class RobocalError(Exception):
    """Base class for all package-specific errors."""


class DataError(RobocalError):
    """Problems with input files or datasets (CLI exit code 2)."""


class ParseError(DataError):
    pass


class ConsistencyError(DataError):
    pass


class VersionError(DataError):
    pass


class IoError(DataError):
    pass


class ConfigError(DataError):
    pass


# --- geometric degeneracies -------------------------------------------------

class NonPositiveDepth(RobocalError):
    pass


class DegenerateBaseline(RobocalError):
    pass


class BehindCamera(RobocalError):
    pass


class InsufficientPoints(RobocalError):
    pass


class DegenerateGeometry(RobocalError):
    pass


class LengthMismatch(RobocalError):
    pass


class DegenerateConfiguration(RobocalError):
    pass


# --- solver -----------------------------------------------------------------

class SolverError(RobocalError):
    """Problems raised by the calibration engine (CLI exit code 3)."""


class CameraNotVisible(SolverError):
    pass


class PairNotVisible(SolverError):
    pass


class ObservabilityError(SolverError):
    pass


class NoHeightMeasurement(SolverError):
    pass


class NonFiniteCost(SolverError):
    pass


class DegenerateAxes(SolverError):
    pass


class EmptyInput(RobocalError):
    pass
