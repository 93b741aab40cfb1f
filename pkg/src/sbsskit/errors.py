"""Exception hierarchy shared across the package.

Every error carries a machine-readable ``code`` (stable, snake_case) and an
optional ``field`` pointer so the HTTP service and the CLI can map failures
to structured responses without string matching.
"""

from __future__ import annotations


class SbssError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "error"

    def __init__(self, message: str, *, code: str | None = None, field: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.field = field

    @property
    def message(self) -> str:
        return str(self)


class DataError(SbssError):
    """Invalid input data, file schema, or request parameters."""

    code = "invalid_data"


class GeometryError(SbssError):
    """A geometric operation cannot proceed (split, merge, Voronoi)."""

    code = "geometry_error"


class EstimationError(SbssError):
    """Numeric estimation failure (whitening, covariances, unmixing)."""

    code = "estimation_error"
