"""
Utility functions for solver restarts and report formatting.
"""
from typing import Callable, Any, Sequence, Tuple, Type

import numpy as np
from tenacity import (
    Retrying,
    stop_after_attempt,
    retry_if_exception_type,
)
import structlog

from logger import log_retry_attempt

logger = structlog.get_logger()


def with_restart(
    operation: Callable[[int], Any],
    operation_name: str = "operation",
    max_attempts: int = 2,
    exceptions: Tuple[Type[Exception], ...] = (Exception,),
) -> Any:
    """
    Run an operation, restarting it on the given exceptions.

    Args:
        operation: Callable receiving the 1-based attempt number
        operation_name: Name for logging purposes
        max_attempts: Maximum number of attempts, the first included
        exceptions: Exception types that trigger a restart

    Returns:
        Result of the first successful attempt

    Raises:
        The last exception if all attempts fail
    """
    def _before_sleep(retry_state):
        log_retry_attempt(
            operation_name,
            retry_state.attempt_number,
            max_attempts,
            retry_state.outcome.exception(),
        )

    for attempt in Retrying(
        stop=stop_after_attempt(max_attempts),
        retry=retry_if_exception_type(exceptions),
        before_sleep=_before_sleep,
        reraise=True,
    ):
        with attempt:
            return operation(attempt.retry_state.attempt_number)


def loglog_slope(h: Sequence[float], errors: Sequence[float]) -> float:
    """
    Least squares slope of log(error) against log(h).

    Non-positive errors are dropped; NaN is returned when fewer than two
    usable pairs remain.
    """
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    usable = (h > 0) & (errors > 0) & np.isfinite(errors)
    if usable.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(h[usable]), np.log(errors[usable]), 1)
    return float(slope)


def format_seconds(seconds: float) -> str:
    """
    Format a duration into human readable form.
    """
    if seconds < 1.0:
        return f"{seconds * 1000.0:.0f} ms"
    if seconds < 120.0:
        return f"{seconds:.1f} s"
    return f"{seconds / 60.0:.1f} min"


def format_count(count: int) -> str:
    """
    Format a point count with thousands separators.
    """
    return f"{count:,}"
