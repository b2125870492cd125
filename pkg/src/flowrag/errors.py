"""Exception hierarchy shared across the pipeline.

Each top-level error class maps to one CLI exit code (see cli.main).
"""

from __future__ import annotations


class FlowragError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(FlowragError):
    """Invalid or inconsistent configuration; names the offending field."""


class DataError(FlowragError):
    """Malformed input data or insufficient records for a requested split."""


class BudgetError(FlowragError):
    """A rendered prompt cannot fit its token budget."""


class EndpointError(FlowragError):
    """Completion endpoint failure. Carries the request id when available."""

    def __init__(self, message: str, request_id: str | None = None):
        super().__init__(message)
        self.request_id = request_id


class EndpointTimeout(EndpointError):
    pass


class EndpointStatusError(EndpointError):
    def __init__(self, message: str, status: int, request_id: str | None = None):
        super().__init__(message, request_id)
        self.status = status


class MalformedResponse(EndpointError):
    pass


class RetryExhausted(EndpointError):
    pass
