"""Logging configuration: structlog with file + console output.

Creates a per-process directory under FLEXBEAM_LOG_DIR and
supports per-run log files within it.

Directory layout:
    logs/flexbeam_2026-02-06_14-30-00/
        run.log                     # all events for this process
        runs/
            problem2-1a2b3c.log     # events for one pipeline run
"""

from __future__ import annotations

import logging
from datetime import datetime
from pathlib import Path

import structlog

from flexbeam.config import FLEXBEAM_LOG_DIR

_LOG_DIR: Path | None = None
_run_handlers: dict[str, logging.Handler] = {}


def _json_formatter() -> structlog.stdlib.ProcessorFormatter:
    return structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.processors.JSONRenderer(),
        ],
    )


def setup_logging(log_root: str | Path | None = None, verbose: bool = False) -> Path:
    """Configure structlog with console + file output.

    Creates <log_root>/flexbeam_<timestamp>/ for this process.
    Call once at startup. Returns the log directory path.
    """
    global _LOG_DIR

    timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    root_dir = Path(log_root) if log_root is not None else Path(FLEXBEAM_LOG_DIR)
    _LOG_DIR = root_dir / f"flexbeam_{timestamp}"
    _LOG_DIR.mkdir(parents=True, exist_ok=True)
    (_LOG_DIR / "runs").mkdir(exist_ok=True)

    # --- Formatters ---

    console_formatter = structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.dev.ConsoleRenderer(),
        ],
    )

    # --- Root stdlib logger ---

    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    root.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(console_formatter)
    root.addHandler(console_handler)

    file_handler = logging.FileHandler(_LOG_DIR / "run.log")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(_json_formatter())
    root.addHandler(file_handler)

    # matplotlib is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    # --- structlog → stdlib bridge ---

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )

    structlog.get_logger().info(
        "logging_configured",
        log_dir=str(_LOG_DIR),
    )
    return _LOG_DIR


def get_run_logger(run_id: str) -> structlog.stdlib.BoundLogger:
    """Get a logger that writes to both run.log and runs/<id>.log.

    Without setup_logging() the logger is returned unbound to any
    file, so library callers and tests can use it freely.
    """
    if run_id not in _run_handlers and _LOG_DIR is not None:
        handler = logging.FileHandler(_LOG_DIR / "runs" / f"{run_id}.log")
        handler.setLevel(logging.DEBUG)
        handler.setFormatter(_json_formatter())

        stdlib_logger = logging.getLogger(f"flexbeam.run.{run_id}")
        stdlib_logger.addHandler(handler)
        stdlib_logger.setLevel(logging.DEBUG)

        _run_handlers[run_id] = handler

    return structlog.get_logger(f"flexbeam.run.{run_id}").bind(run=run_id)


def cleanup_run_logger(run_id: str) -> None:
    """Close and remove the file handler for a finished run."""
    handler = _run_handlers.pop(run_id, None)
    if handler:
        handler.close()
        stdlib_logger = logging.getLogger(f"flexbeam.run.{run_id}")
        stdlib_logger.removeHandler(handler)
