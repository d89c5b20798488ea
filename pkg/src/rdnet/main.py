#!/usr/bin/env python3
"""Main entry point for rdnet."""

import logging
import sys
from datetime import datetime

from .utils import parse_bool


class PrettyFormatter(logging.Formatter):
    """Compact 'HH:MM:SS [LEVEL] message' lines, coloured on a terminal."""

    COLORS = {
        logging.DEBUG: '\033[36m',
        logging.INFO: '\033[32m',
        logging.WARNING: '\033[33m',
        logging.ERROR: '\033[31m',
        logging.CRITICAL: '\033[35m',
    }
    TAGS = {logging.WARNING: 'WARN', logging.CRITICAL: 'CRIT'}
    DIM = '\033[2m'
    RESET = '\033[0m'

    def __init__(self, stream=None):
        super().__init__()
        stream = stream if stream is not None else sys.stderr
        self.use_colors = bool(getattr(stream, "isatty", None) and stream.isatty())

    def format(self, record):
        stamp = datetime.fromtimestamp(record.created).strftime('%H:%M:%S')
        tag = self.TAGS.get(record.levelno, record.levelname)
        message = record.getMessage()
        if not self.use_colors:
            line = f"{stamp} [{tag:5}] {message}"
        elif record.levelno == logging.INFO:
            # info lines carry no tag on a terminal
            line = f"{self.DIM}{stamp}{self.RESET} {message}"
        else:
            color = self.COLORS.get(record.levelno, '')
            line = f"{self.DIM}{stamp}{self.RESET} {color}[{tag}]{self.RESET} {message}"
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        return line


def setup_logging(debug: bool = False) -> None:
    """Route every log record to stderr; stdout is reserved for JSON and CSV."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(PrettyFormatter(sys.stderr))
    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if debug else logging.INFO)


def main():
    """Console script entry point."""
    from .cli import run_command

    setup_logging(debug=parse_bool("RDNET_DEBUG", False))
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
