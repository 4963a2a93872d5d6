"""Python front end for the gdp simulator core."""

import json

from . import _core
from ._core import (
    GdpError,
    World,
    aggregate_rule,
    builtin_scenarios,
    default_quorum,
    deterrence_margin,
    sha256_hex,
)

__all__ = [
    "GdpError",
    "World",
    "aggregate_rule",
    "builtin_scenarios",
    "default_quorum",
    "deterrence_margin",
    "diff_reports",
    "run",
    "scenario",
    "sha256_hex",
    "validate",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def scenario(config, seed=None, overrides=()):
    """Config dict for a builtin name, JSON text or dict, with overrides applied."""
    return json.loads(_core.scenario_json(_text(config), seed, list(overrides)))


def validate(config):
    return _core.validate(_text(config))


def run(config, seed=None, overrides=(), out=None):
    """Runs a scenario to completion and returns its report as a dict."""
    return json.loads(_core.run_scenario(_text(config), seed, list(overrides), None if out is None else str(out)))


def diff_reports(a, b):
    return _core.diff_reports(_text(a), _text(b))
