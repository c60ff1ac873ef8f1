"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class BslError(Exception):
    """Base class for every error raised by bsl."""


class ArgumentError(BslError, ValueError):
    """A precondition or validation failure on caller-supplied input."""


class NumericalError(BslError, RuntimeError):
    """A numerical failure in an otherwise valid computation."""


class SingularityError(NumericalError):
    """A subdictionary is rank deficient within the rank tolerance."""


class SolverError(NumericalError):
    """A scalar solver could not meet its target inside the search range."""


class ConsistencyError(NumericalError):
    """An internal invariant that should hold mathematically was violated."""


def format_blocks(blocks) -> str:
    """Render 0-based block indices as the 1-based set used in messages."""
    return "{" + ", ".join(str(int(i) + 1) for i in blocks) + "}"
