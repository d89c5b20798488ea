#!/usr/bin/env python3
"""rdnet - reaction network analysis and reaction-diffusion simulation."""

__version__ = "0.3.0"
__license__ = "MIT"

from .config import Config, SolverConfig
from .expressions import eval_expression, parse_expression
from .netparse import parse_network

__all__ = [
    "Config",
    "SolverConfig",
    "parse_network",
    "parse_expression",
    "eval_expression",
    "__version__",
]
