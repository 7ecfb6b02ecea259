"""Exception hierarchy for FairGuide.

Every error carries the process exit code the CLI uses for it.
"""

from typing import Optional


class FairGuideError(Exception):
    """Base exception for all FairGuide failures."""
    exit_code = 1


class ConfigError(FairGuideError):
    """Invalid or unreadable configuration."""
    exit_code = 1


class GraphValidationError(FairGuideError):
    """A graph or dataset violates a structural invariant."""
    exit_code = 2


class GraphParseError(GraphValidationError):
    """Malformed line in an input file."""

    def __init__(self, path: str, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class NodeIndexError(GraphValidationError):
    """Node id outside 0..N-1."""

    def __init__(self, node: int, num_nodes: int, line_number: Optional[int] = None):
        self.node = node
        self.num_nodes = num_nodes
        self.line_number = line_number
        where = f" (line {line_number})" if line_number is not None else ""
        super().__init__(f"Node {node} out of range for {num_nodes} nodes{where}")


class DomainError(GraphValidationError):
    """A value lies outside its admissible domain."""


class GraphConstraintError(GraphValidationError):
    """An edit would break the addition-only constraint or the budget."""


class UndefinedMetricError(FairGuideError):
    """A metric is undefined for the given inputs (e.g. an empty group)."""
    exit_code = 2


class NumericalError(FairGuideError):
    """Non-finite values appeared during a numerical computation."""
    exit_code = 3
