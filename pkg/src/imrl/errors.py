"""Exception types shared across the package."""


class ImrlError(Exception):
    """Base class for all package-specific errors."""


class InvalidArchitecture(ImrlError):
    pass


class ShapeError(ImrlError):
    pass


class LabelError(ImrlError):
    pass


class ConfigError(ImrlError):
    pass


class EmptyMask(ImrlError):
    pass


class NoFeasiblePoint(ImrlError):
    pass


class ActionError(ImrlError):
    pass


class MetricsError(ImrlError):
    pass


class IoError(ImrlError):
    pass
