"""
Exceptions raised by the aggregation library.

Most errors subclass ValueError or RuntimeError as well, so callers that only
know the builtin hierarchy keep working.
"""
from typing import Optional


class CobraError(Exception):
    """Base class for every library error."""


class ConfigError(CobraError):
    """Invalid benchmark/tuning configuration or a missing referenced file."""


class InvalidSplitError(CobraError, ValueError):
    """The requested D_k / D_l split leaves one half empty."""


class ShapeError(CobraError, ValueError):
    """Array dimensions do not line up."""


class EmptyEnsembleError(CobraError, ValueError):
    """An operation needs at least one machine."""


class MachineOutputError(CobraError, RuntimeError):
    """A machine produced a non-finite prediction."""

    def __init__(self, machine_name: str, message: Optional[str] = None):
        self.machine_name = machine_name
        super().__init__(message or f"Machine '{machine_name}' returned a non-finite prediction")


class InvalidWeightsError(CobraError, ValueError):
    """Machine weights are negative or do not sum to one."""


class LabelError(CobraError, ValueError):
    """Labels are outside the admissible set."""


class NoConsensusError(CobraError, RuntimeError):
    """No retained point satisfies the proximity condition for a query."""

    def __init__(self, query_index: Optional[int] = None, message: Optional[str] = None):
        self.query_index = query_index
        where = f" for query {query_index}" if query_index is not None else ""
        super().__init__(message or f"No retained point reached consensus{where}")


class GenerationError(CobraError, ValueError):
    """A synthetic dataset cannot be generated from the given spec."""


class CsvParseError(CobraError, ValueError):
    """A CSV cell is not a finite number."""

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Cannot parse cell at row {row}, column '{column}': {value!r}")


class SchemaError(CobraError, ValueError):
    """A CSV file lacks a required column."""


class DimensionalityError(CobraError, ValueError):
    """The operation requires a different input dimension."""
