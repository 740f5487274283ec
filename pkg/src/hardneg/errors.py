"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 1, DataFormatError -> 2,
TransportError -> 3.
"""


class PipelineError(Exception):
    """Base class for toolkit errors."""


class ConfigError(PipelineError):
    """Invalid or incomplete configuration."""


class DataFormatError(PipelineError):
    """Malformed input data; carries file and line when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(prefix + message)


class TransportError(PipelineError):
    """HTTP transport failure after retries; names the endpoint."""

    def __init__(self, message: str, endpoint: str | None = None):
        self.endpoint = endpoint
        super().__init__(f"{message} (endpoint: {endpoint})" if endpoint else message)


class GenerationParseError(PipelineError):
    """Structured-output parse failure; names the first violated marker."""

    def __init__(self, message: str, marker: str | None = None):
        self.marker = marker
        super().__init__(message)


class GenerationError(PipelineError):
    """Generation gave up after exhausting retries; keeps the last raw response."""

    def __init__(self, message: str, last_response: str | None = None, attempts: int = 0):
        self.last_response = last_response
        self.attempts = attempts
        super().__init__(message)
