"""Logging service shared by every module of the toolkit."""

import logging
import sys

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_ROOT_LOGGER = "thermocline_twin"
_handler: logging.StreamHandler | None = None  # type: ignore[type-arg]


def configure_logging(level: str = "INFO", fmt: str = DEFAULT_FORMAT) -> None:
    """Install a single stderr handler on the package root logger.

    Calling it again updates the level and rebinds the handler to the current
    ``sys.stderr``, so repeated CLI invocations in the same process do not
    stack handlers.
    """
    global _handler
    root = logging.getLogger(_ROOT_LOGGER)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    if _handler is None:
        _handler = logging.StreamHandler(sys.stderr)
        _handler.setFormatter(logging.Formatter(fmt))
        root.addHandler(_handler)
        root.propagate = False
    else:
        _handler.setStream(sys.stderr)


def get_logger(name: str) -> logging.Logger:
    """Get a logger for the given module name."""
    return logging.getLogger(name)
