"""
Centralized error handling utilities
"""

import json
import sys
import traceback
from typing import Any, Dict, Optional

from pydantic import ValidationError as PydanticValidationError

from invargc.config import settings
from invargc.utils.constants import ExitCode
from invargc.utils.logger import logger


class InvarGCError(Exception):
    """Base library exception"""

    def __init__(
        self,
        message: str,
        exit_code: int = ExitCode.SELF_TEST_FAILED,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.exit_code = int(exit_code)
        self.error_code = error_code or "INTERNAL_ERROR"
        self.details = details or {}
        super().__init__(self.message)


class ConfigValidationError(InvarGCError):
    """Invalid configuration, hyperparameter or flag"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=ExitCode.VALIDATION,
            error_code="VALIDATION_ERROR",
            details=details or {}
        )


class ShapeMismatchError(InvarGCError):
    """Arrays or artifacts with incompatible dimensions"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=ExitCode.VALIDATION,
            error_code="SHAPE_MISMATCH",
            details=details or {}
        )


class DataFormatError(InvarGCError):
    """Malformed dataset file, reported with its position"""

    def __init__(
        self,
        message: str,
        file: str,
        row: Optional[int] = None,
        column: Optional[int] = None,
        byte_offset: Optional[int] = None
    ):
        details: Dict[str, Any] = {"file": file, "row": row, "column": column}
        if byte_offset is not None:
            details["byte_offset"] = byte_offset
        super().__init__(
            message=f"{file}: {message}",
            exit_code=ExitCode.IO,
            error_code="DATA_FORMAT_ERROR",
            details=details
        )


class DataIOError(InvarGCError):
    """Filesystem failure while reading or writing artifacts"""

    def __init__(self, message: str, path: str):
        super().__init__(
            message=message,
            exit_code=ExitCode.IO,
            error_code="IO_ERROR",
            details={"path": path}
        )


class GenerationError(InvarGCError):
    """Synthetic benchmark cannot be generated for the given configuration"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=ExitCode.VALIDATION,
            error_code="GENERATION_ERROR",
            details=details or {}
        )


class DivergenceError(InvarGCError):
    """Non-finite objective during optimization"""

    def __init__(self, message: str, iteration: int):
        super().__init__(
            message=message,
            exit_code=ExitCode.DIVERGENCE,
            error_code="DIVERGENCE",
            details={"iteration": iteration}
        )


class ConvergenceError(InvarGCError):
    """Line search could not find a decreasing step"""

    def __init__(self, message: str, iteration: int):
        super().__init__(
            message=message,
            exit_code=ExitCode.DIVERGENCE,
            error_code="LINE_SEARCH_FAILED",
            details={"iteration": iteration}
        )


class UndefinedMetricError(InvarGCError):
    """Metric is undefined for the given labels"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=ExitCode.VALIDATION,
            error_code="UNDEFINED_METRIC",
            details=details or {}
        )


class SelfTestFailure(InvarGCError):
    """One or more numerical self-test suites failed"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=ExitCode.SELF_TEST_FAILED,
            error_code="SELF_TEST_FAILED",
            details=details or {}
        )


class BenchmarkFailure(InvarGCError):
    """Every benchmark cell failed"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=ExitCode.BENCHMARK_FAILED,
            error_code="BENCHMARK_FAILED",
            details=details or {}
        )


def validation_error_from_pydantic(exc: PydanticValidationError, source: str) -> ConfigValidationError:
    """Convert a pydantic validation error into a ConfigValidationError naming the fields"""
    errors = [
        {
            "field": ".".join(str(loc) for loc in error.get("loc", [])),
            "message": error.get("msg"),
            "type": error.get("type")
        }
        for error in exc.errors()
    ]
    fields = ", ".join(e["field"] or "<root>" for e in errors)
    return ConfigValidationError(
        f"Invalid {source}: {fields}: {errors[0]['message'] if errors else exc}",
        details={"validation_errors": errors}
    )


def create_error_payload(
    message: str,
    error_code: str,
    details: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """
    Create standardized error payload

    Args:
        message: Error message
        error_code: Application error code
        details: Additional error details

    Returns:
        Dictionary ready for JSON rendering
    """
    return {
        "success": False,
        "error": {
            "code": error_code,
            "message": message,
            "details": details or {}
        }
    }


def handle_cli_exception(exc: BaseException) -> int:
    """Log an exception, print its payload to standard error and return the exit code"""
    if isinstance(exc, PydanticValidationError):
        exc = validation_error_from_pydantic(exc, "input")

    if isinstance(exc, InvarGCError):
        logger.warning(
            f"Command failed: {exc.message}",
            extra={"error_code": exc.error_code}
        )
        payload = create_error_payload(exc.message, exc.error_code, exc.details)
        exit_code = exc.exit_code
    else:
        logger.error("Unhandled exception", exc_info=exc)
        details = {"traceback": traceback.format_exc()} if settings.DEBUG else {}
        payload = create_error_payload(str(exc), "INTERNAL_ERROR", details)
        exit_code = int(ExitCode.SELF_TEST_FAILED)

    print(json.dumps(payload, default=str), file=sys.stderr)
    return exit_code
