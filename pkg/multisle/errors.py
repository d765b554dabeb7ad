# errors.py - exception hierarchy shared by the library and the CLI

from typing import Optional, Sequence


class MultiSLEError(Exception):
    """Base class for every error raised on purpose by multisle"""

    exit_code = 1

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, "details": self.details}


class ConfigError(MultiSLEError):
    """Bad flags, bad config file, bad suite name"""

    exit_code = 2


class KappaRangeError(ConfigError, ValueError):
    def __init__(self, kappa: float):
        super().__init__(f"kappa must lie in the open interval (0, 8), got {kappa}", {"kappa": kappa})


class DomainError(ConfigError, ValueError):
    """Argument outside the domain of a special function or estimator"""


class PatternError(ConfigError, ValueError):
    """Malformed link pattern: coincident points or out-of-range indices"""

    def __init__(self, message: str, indices: Sequence[int] = ()):
        super().__init__(message, {"indices": list(indices)})
        self.indices = tuple(indices)


class SpacingError(ConfigError, ValueError):
    """Finite-difference stencil would collide with another marked point"""


class GeometryError(MultiSLEError):
    """Polygon handed to the zipper is not a usable Jordan domain"""


class ChartFailure(MultiSLEError):
    """A component chart could not be built; estimators count these as rejections"""


class NontrivialityError(MultiSLEError):
    """All weights vanished; the link pattern is not realizable"""


class VerificationFailed(MultiSLEError):
    exit_code = 1
