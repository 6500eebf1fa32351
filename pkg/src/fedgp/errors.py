"""Exception hierarchy shared by every fedgp module.

The CLI maps these onto process exit codes: config/argument problems exit 2,
data-ingestion problems exit 3, numerical failures exit 4.
"""

from __future__ import annotations


class FedGPError(Exception):
    """Base class for all fedgp errors."""


class ArgumentError(FedGPError, ValueError):
    """A function was called with invalid values, shapes, or dimensions."""


class ConfigError(FedGPError, ValueError):
    """An experiment or federation configuration is invalid or unreadable."""


class IngestionError(FedGPError, ValueError):
    """A data file failed validation.

    Carries enough context to point at the offending location.
    """

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, column: str | None = None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        prefix = ": ".join([", ".join(loc)]) + ": " if loc else ""
        super().__init__(prefix + message)
        self.path = path
        self.line = line
        self.column = column


class NumericalError(FedGPError, RuntimeError):
    """A numerical routine failed beyond its recovery ladder.

    ``attempted_jitter`` records the largest jitter tried when a factorization
    is the thing that failed.
    """

    def __init__(self, message: str, *, attempted_jitter: float | None = None):
        super().__init__(message)
        self.attempted_jitter = attempted_jitter


class OptimizationError(NumericalError):
    """An optimizer could not make progress (persistent line-search failure)."""


class FederationError(NumericalError):
    """A federated round failed; identifies the client and keeps partial state.

    ``state`` holds the ConsensusState accumulated up to the failing round so
    callers can persist partial history.
    """

    def __init__(self, message: str, *, client_id: int | None = None,
                 round_index: int | None = None, state=None):
        super().__init__(message)
        self.client_id = client_id
        self.round_index = round_index
        self.state = state
