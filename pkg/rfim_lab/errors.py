"""
errors.py - Exception hierarchy for the RFIM laboratory.

Every error raised by the library derives from RFIMError, so callers can
catch the whole family at once. Argument-domain problems also derive from
ValueError and solver bracket failures from RuntimeError, so code written
against the builtin exceptions keeps working.
"""

from typing import List, Optional


class RFIMError(Exception):
    """Base class for all laboratory errors."""


class DomainError(RFIMError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class PreconditionError(DomainError):
    """A stated hypothesis of an operation does not hold for the input."""


class UnsupportedModelError(RFIMError):
    """The model variant is not handled by the requested engine."""


class BudgetError(RFIMError):
    """An exact engine was asked for more than its enumeration budget."""


class BracketError(RFIMError, RuntimeError):
    """A bisection bracket did not enclose the sought transition."""


class ConfigError(RFIMError, ValueError):
    """
    An experiment configuration failed validation.

    Attributes:
        errors: Every validation problem found, in check order.
    """

    def __init__(self, message: str, errors: Optional[List[str]] = None):
        self.errors = list(errors or [])
        if self.errors:
            message = message + ":\n  - " + "\n  - ".join(self.errors)
        super().__init__(message)
