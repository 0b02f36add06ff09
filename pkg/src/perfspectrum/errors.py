"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: usage problems are handled by the CLI
itself, data/validation problems exit 2, solver non-convergence exits 3.
"""

from __future__ import annotations


class SpectrumError(Exception):
    """Base class for all toolkit errors."""


class DomainError(SpectrumError, ValueError):
    """A metric was evaluated outside its mathematical domain."""


class ParseError(SpectrumError, ValueError):
    """A record stream could not be parsed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class MergeError(SpectrumError, ValueError):
    """Per-worker records disagree on fields that must match."""


class MeshError(SpectrumError, ValueError):
    """A mesh or discretization request is invalid."""


class CacheConfigError(SpectrumError, ValueError):
    """A cache geometry violates the simulator's constraints."""


class TraceError(SpectrumError, ValueError):
    """An access trace is malformed (e.g. reaches past its array)."""


class ReportError(SpectrumError, ValueError):
    """A report or panel cannot be built from the given records."""


class ConvergenceError(SpectrumError, RuntimeError):
    """The iterative solver did not reach the requested tolerance."""

    def __init__(self, message: str, iterations: int, relative_residual: float):
        self.iterations = iterations
        self.relative_residual = relative_residual
        super().__init__(message)
