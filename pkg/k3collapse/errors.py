class CollapseError(Exception):
    """
    Base class for every failure raised by the package.
    `diagnostics` holds the numbers needed to understand the failure (residuals,
    distances, offending coefficients) and is what ends up in failures.json.
    """

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self), "diagnostics": self.diagnostics}


# ---------------------------------------------------------------------------
# Fibration input
# ---------------------------------------------------------------------------

class DegenerateFibrationError(CollapseError):
    """Discriminant is the zero polynomial."""


class DegreeOverflowError(CollapseError):
    """A coefficient sits above the degree allowed by the chart at infinity."""


class NonMinimalFiberError(CollapseError):
    """ord a >= 4 and ord b >= 6 at some point."""


class RootFindingError(CollapseError):
    pass


class RootClusterError(RootFindingError):
    """Distinct discriminant roots closer than the separation tolerance."""


# ---------------------------------------------------------------------------
# Periods and continuation
# ---------------------------------------------------------------------------

class DiscriminantProximityError(CollapseError):
    pass


class AGMConvergenceError(CollapseError):
    pass


class ContinuationError(CollapseError):
    """Step control underflowed while transporting a period basis."""


class MonodromyError(CollapseError):
    pass


class QuasiUnipotenceError(CollapseError):
    pass


# ---------------------------------------------------------------------------
# Geometry checks
# ---------------------------------------------------------------------------

class DomainError(CollapseError):
    """Input outside the region where a computation is defined (Im Z not positive definite, fit radii too deep)."""


class AffineCompatibilityError(CollapseError):
    pass


class MeshError(CollapseError):
    pass


class ConfigError(CollapseError):
    pass
