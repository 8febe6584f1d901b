import logging
import sys
from typing import Optional

import numpy as np
import structlog
from config import settings, BASE_DIR


def _plain_numbers(logger, method_name, event_dict):
    """numpy scalars and arrays as plain Python values for the renderers."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist()
    return event_dict


def setup_logging(level: Optional[str] = None) -> None:
    level = getattr(logging, (level or settings.logging.level).upper())

    # stdout carries only the paths of written files
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)
    logging.root.setLevel(level)

    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        _plain_numbers,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if settings.logging.log_format == "json":
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=False))

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    if settings.logging.log_to_file:
        log_dir = BASE_DIR / settings.logging.log_dir
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / settings.logging.log_file
        if not any(
            getattr(handler, "baseFilename", None) == str(log_file)
            for handler in logging.root.handlers
        ):
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(level)
            logging.root.addHandler(file_handler)


def bind_command(command: str, **context) -> None:
    """Tag every following event with the running subcommand."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, **context)


def get_logger(name: str):
    return structlog.get_logger(name)
