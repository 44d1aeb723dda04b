"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: input problems exit 2, resource or
solver problems exit 3.
"""

from __future__ import annotations


class BellkitError(Exception):
    """Base class for every error raised by bellkit."""

    exit_code = 2


class UsageError(BellkitError, ValueError):
    """An operation was called with arguments outside its contract."""


class StructureError(BellkitError, ValueError):
    """Array dimensions do not match the declared scenario."""


class InvariantError(BellkitError, ValueError):
    """A probabilistic invariant failed; carries the validation report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = list(report or [])


class ResourceError(BellkitError):
    exit_code = 3


class SolverError(BellkitError):
    """The LP solver could not reach a verified verdict."""

    exit_code = 3
