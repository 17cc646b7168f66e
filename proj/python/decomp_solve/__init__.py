"""Python bindings for the decomp-solve engine."""

import json

from ._core import (
    EXIT_INPUT,
    EXIT_INTERNAL,
    EXIT_NOT_EXISTS,
    EXIT_OK,
    EXIT_UNDETERMINED,
    EXIT_VERIFY_FAILED,
    Error,
    InputError,
    contraction_split,
    energy_distance_test,
    stationary_covariance,
)
from ._core import run as _run

__all__ = [
    "run",
    "analyze",
    "solve",
    "verify",
    "simulate",
    "contraction_split",
    "energy_distance_test",
    "stationary_covariance",
    "Error",
    "InputError",
    "EXIT_OK",
    "EXIT_INPUT",
    "EXIT_INTERNAL",
    "EXIT_NOT_EXISTS",
    "EXIT_UNDETERMINED",
    "EXIT_VERIFY_FAILED",
]


def run(command, config):
    """Run a command. `config` is a dict or JSON text; returns the report dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    _, report = _run(command, text)
    return json.loads(report)


def analyze(config):
    return run("analyze", config)


def solve(config):
    return run("solve", config)


def verify(config):
    return run("verify", config)


def simulate(config):
    return run("simulate", config)
