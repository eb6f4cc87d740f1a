"""
Error hierarchy shared by every pipeline module.

Each error carries the process exit code the management commands use
when the error escapes a stage.
"""


class PipelineError(Exception):
    """Base class for all pipeline failures"""
    exit_code = 2


class ConfigError(PipelineError):
    """Raised when a run configuration or command invocation is invalid"""
    exit_code = 1


class DataError(PipelineError, ValueError):
    """Raised when input data violates a precondition"""
    exit_code = 2


class NumericalError(PipelineError, ArithmeticError):
    """Raised when an optimizer or numerical routine fails"""
    exit_code = 3
