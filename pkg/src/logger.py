"""
Structured logging for the surface GFDM toolkit.

Library modules call `structlog.get_logger()` and log snake_case events with
key/value context; `setup_logging` wires them to a Rich console handler and,
when a run directory is given, to a timestamped log file beside the results.
"""
import logging
from pathlib import Path
from datetime import datetime
from typing import Any, Optional

import numpy as np
import structlog
from rich.console import Console
from rich.logging import RichHandler

from config import config

console = Console()

RUN_LOG_HANDLER = "gfdm-run-log"


def _plain_numbers(_, __, event_dict: dict) -> dict:
    """numpy scalars and small arrays become builtins so the JSON renderer accepts them."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray) and value.size <= 16:
            event_dict[key] = value.tolist()
        elif isinstance(value, np.ndarray):
            event_dict[key] = f"<array shape={value.shape}>"
    return event_dict


def _level() -> int:
    return getattr(logging, config.log_level.upper(), logging.INFO)


def setup_logging(log_dir: Optional[Path] = None):
    """Configure structlog and the root handlers; returns a bound logger."""
    renderer = structlog.processors.JSONRenderer() if config.log_format == "json" \
        else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            _plain_numbers,
            renderer,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    root = logging.getLogger()
    root.setLevel(_level())

    if log_dir is not None:
        for handler in [h for h in root.handlers if h.get_name() == RUN_LOG_HANDLER]:
            root.removeHandler(handler)
            handler.close()
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        stamp = datetime.now().strftime('%Y%m%d_%H%M%S')
        file_handler = logging.FileHandler(log_dir / f"gfdm_{stamp}.log", encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter('%(message)s'))
        file_handler.set_name(RUN_LOG_HANDLER)
        root.addHandler(file_handler)

    if not any(isinstance(handler, RichHandler) for handler in root.handlers):
        console_handler = RichHandler(console=console, show_time=False, show_path=False, rich_tracebacks=True)
        console_handler.setLevel(_level())
        root.addHandler(console_handler)

    return structlog.get_logger()


def log_operation_start(operation: str, **context: Any):
    """Cloud sampling, stencil builds and benchmark levels announce themselves here."""
    structlog.get_logger().info("operation_started", operation=operation, **context)


def log_operation_success(operation: str, duration: Optional[float] = None, **context: Any):
    if duration is not None:
        context["seconds"] = round(duration, 3)
    structlog.get_logger().info("operation_completed", operation=operation, **context)


def log_operation_error(operation: str, error: Exception, **context: Any):
    fields = dict(context, operation=operation, error=str(error), error_type=type(error).__name__)
    structlog.get_logger().error("operation_failed", **fields)


def log_retry_attempt(operation: str, attempt: int, max_attempts: int, error: Optional[Exception] = None):
    """One line per solver restart."""
    structlog.get_logger().warning("solver_restart", operation=operation, attempt=attempt,
                                   max_attempts=max_attempts, error=str(error) if error else None)
