"""Custom exceptions for the dual adapter tracker."""

from typing import Any, Dict, Optional


class TrackerError(Exception):
    """Base exception for all tracker errors."""

    def __init__(
        self,
        message: str,
        error_type: str = "tracker_error",
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.error_type = error_type
        self.details = details or {}
        super().__init__(self.message)


class ArgumentError(TrackerError, ValueError):
    """Raised when an operation receives arguments outside its contract."""

    def __init__(
        self,
        message: str,
        argument: Optional[str] = None,
        expected: Optional[Any] = None,
        received: Optional[Any] = None,
    ):
        details: Dict[str, Any] = {}
        if argument:
            details["argument"] = argument
        if expected is not None:
            details["expected"] = str(expected)
        if received is not None:
            details["received"] = str(received)
        super().__init__(message, error_type="argument_error", details=details)
        self.argument = argument


class StateError(TrackerError, RuntimeError):
    """Raised when a stateful object is used outside its lifecycle."""

    def __init__(self, message: str, state: Optional[str] = None):
        details = {}
        if state:
            details["state"] = state
        super().__init__(message, error_type="state_error", details=details)


class ConfigurationError(TrackerError):
    """Raised when a run configuration is invalid."""

    def __init__(self, message: str, config_key: Optional[str] = None):
        details = {}
        if config_key:
            details["config_key"] = config_key
        super().__init__(message, error_type="configuration_error", details=details)
        self.config_key = config_key


class BoxFileError(TrackerError):
    """Raised when a box file is malformed or does not pair with another."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        details: Dict[str, Any] = {}
        if path:
            details["path"] = path
        if line is not None:
            details["line"] = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message, error_type="box_file_error", details=details)
        self.line = line


class SnapshotFormatError(TrackerError):
    """Raised when a memory snapshot cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        details = {}
        if line is not None:
            details["line"] = line
        super().__init__(message, error_type="snapshot_format_error", details=details)
        self.line = line


class ParameterFileError(TrackerError):
    """Raised when a parameter file is missing keys or has wrong shapes."""

    def __init__(self, message: str, key: Optional[str] = None):
        details = {}
        if key:
            details["key"] = key
        super().__init__(message, error_type="parameter_file_error", details=details)
        self.key = key


class NonDifferentiableError(TrackerError, ValueError):
    """Raised when a gradient is requested at a kink of the L1 term."""

    def __init__(self, component: str, difference: float):
        super().__init__(
            f"Loss is not differentiable in '{component}' (|difference| = {abs(difference):.3g})",
            error_type="non_differentiable",
            details={"component": component, "difference": difference},
        )
        self.component = component


# Exceptions that the CLI reports with exit status 1 (validation failure).
VALIDATION_ERRORS = (ConfigurationError, BoxFileError, SnapshotFormatError, ParameterFileError)
