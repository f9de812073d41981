"""Exception types shared across the package."""


class ExplorerError(Exception):
    """Base class for all package-specific errors."""


class HorizonError(ExplorerError):
    """A pixel ray does not intersect the ground plane."""


class OutOfBounds(ExplorerError):
    """A world point lies outside the occupancy grid."""


class DegeneratePolygon(ExplorerError):
    """A polygon has fewer than three vertices or zero area."""


class InvalidPose(ExplorerError):
    """A pose is on an occupied cell, outside the grid, or on a bad floor."""


class SchemaError(ExplorerError):
    """A document is structurally malformed (missing keys, wrong types)."""


class ValidationError(ExplorerError):
    """A well-formed document violates a semantic invariant."""


class GenerationError(ExplorerError):
    """Scene generation parameters cannot be satisfied."""


class Unreachable(ExplorerError):
    """No navigable path exists between two points."""


class NotAdjacent(ExplorerError):
    """The agent is too far from a memory node to arrive at it."""


class UnknownNode(ExplorerError):
    """A node id is not present in the memory graph."""
