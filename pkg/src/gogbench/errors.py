"""Shared exception types.

Every decision procedure in this package either returns a verdict with a
re-checkable witness or raises one of these.  A resource error always means
"undecided within the configured budget", never a verdict.
"""

from __future__ import annotations


class GogbenchError(Exception):
    """Base class for all package errors."""


class NotAGroup(GogbenchError):
    """A multiplication table fails the group axioms."""


class ResourceLimit(GogbenchError):
    """A search exceeded its configured budget; the question is undecided."""


class CapExceeded(ResourceLimit):
    """A hard safety cap was hit (orbit size, |V0|, ...)."""


class NotAPath(GogbenchError):
    """A word's letters do not trace a path in the underlying graph."""


class Mismatch(GogbenchError):
    """Objects that should be composable are not."""


class NotReduced(GogbenchError):
    """An operation requires a reduced graph of groups."""


class InvalidSlide(GogbenchError):
    """A slide move's data does not satisfy the slide condition."""


class NotElementary(GogbenchError):
    """A virtually-cyclic-only operation received a non-elementary subgroup."""


class NotZGroup(GogbenchError):
    """A Z-group-only operation received something else."""


class PeripheralInEdgeGroup(GogbenchError):
    """A peripheral subgroup is conjugate into an edge group."""


class Unsupported(GogbenchError):
    """Input is valid but outside the implemented fragment."""


class OracleRequired(GogbenchError):
    """The operation needs a geodesic oracle that was not supplied."""


class NonDecreasingStep(GogbenchError):
    """A shortening step failed to decrease Q; signals misconfiguration."""


class ElementaryImage(GogbenchError):
    """Images generate an elementary subgroup where a free one is required."""


class ParseError(GogbenchError):
    """Workbench file syntax or semantic error."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}: {message}" if column is None else f"line {line}, column {column}: {message}"
        super().__init__(message)
