import logging
import math
import sys

import structlog
from structlog.types import EventDict, Processor, WrappedLogger

from .config import settings


def nonfinite_as_text(logger: WrappedLogger, method_name: str, event_dict: EventDict) -> EventDict:
    """Render inf and NaN metrics as strings; bare Infinity is not valid JSON."""
    for key, value in event_dict.items():
        if isinstance(value, float) and not math.isfinite(value):
            event_dict[key] = str(value)
    return event_dict


def configure_logging(level: str | None = None) -> None:
    """
    Configure structlog for the toolkit.
    - JSON lines outside development, console output in development
    - Every entry carries timestamp, log_level, logger name and service

    Logs go to stderr so that commands writing CSV to stdout stay clean.
    """
    is_development = settings.app_env == "development"

    shared_processors: list[Processor] = [
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso"),
        nonfinite_as_text,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    structlog.configure(
        processors=shared_processors + [
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    formatter = structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.dev.ConsoleRenderer() if is_development else structlog.processors.JSONRenderer(),
        ],
        foreign_pre_chain=shared_processors,
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(handler)
    root_logger.setLevel((level or settings.log_level).upper())


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """
    Logger bound to service="exoshape".

    Usage:
        logger = get_logger(__name__)
        logger.info("shaping.design_complete", alpha=8.0, k2_hat=7.0)
    """
    return structlog.get_logger(name).bind(service="exoshape")
