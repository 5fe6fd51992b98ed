"""Exception types shared across the toolkit."""

from __future__ import annotations


class MortclustError(Exception):
    """Base class for all toolkit errors."""


class DomainError(MortclustError, ValueError):
    """An argument or input value lies outside the operation's domain."""


class PanelLookupError(MortclustError, KeyError):
    """A (country, year) pair is not present in the panel."""


class TransformDomainError(DomainError):
    """A value cannot be transformed (log of zero, logit at a boundary)."""


class DataFormatError(MortclustError):
    """A life-table file does not match the expected layout."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class MissingDataError(MortclustError):
    """A required cell inside the selection is missing ('.')."""


class PanelAssemblyError(MortclustError):
    """The selected (country, year) combinations cannot form a complete panel."""


class DegenerateFitError(MortclustError):
    """The centered log-rate matrix is numerically zero; no age/period split exists."""


class DegenerateDriftError(MortclustError):
    """The period effect has zero drift and cannot be rescaled to unit drift."""


class ReducedKError(DomainError):
    """Fewer distinct data points than requested clusters."""


class PipelineError(MortclustError):
    """A pipeline stage failed for a specific country or input."""


class UndefinedScoreError(MortclustError):
    """A validity index is undefined for this input (zero variance)."""


class ConfigError(MortclustError):
    """A run configuration file or flag set is invalid."""
