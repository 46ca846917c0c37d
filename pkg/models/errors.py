"""
Exception hierarchy shared by every occukit package.
"""

from typing import Optional


class OccukitError(Exception):
    """Base class for all occukit failures."""


class GridError(OccukitError, ValueError):
    """Invalid grid geometry or grid/grid mismatch."""


class ShapeError(OccukitError, ValueError):
    """A tensor does not have the shape a block expects."""


class ConfigError(OccukitError, ValueError):
    """Run configuration failed validation."""


class LossSupportError(OccukitError, ValueError):
    """A loss was asked to reduce over an empty set of voxels."""


class MetricError(OccukitError, ValueError):
    """A metric is undefined for the given grids."""


class FormatError(OccukitError):
    """A file on disk is missing, truncated or has the wrong header."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{message}: {path}" if path else message)
