"""
This module handles loading and merging configuration for the application.

Runtime settings come from a hardcoded default, config.json and an optional
config-development.json. Scenario files are nested JSON documents that the
command-line runner loads on top of them, with ``key=value`` overrides applied
last.
"""

import json
import logging
import os.path

from .errors import ValidationError
from .utils import parse_scalar

log = logging.getLogger(__name__)

CONFIG_DEFAULT_FILE = "config.json"
CONFIG_DEVELOPMENT_FILE = "config-development.json"

# Used when neither the scenario nor the runtime config names a value.
DEFAULT_NUMERICS = {
    "cfl": 0.45,
    "vacuum_eps_ratio": 1e-10,
    "demand_tolerance": 1e-10,
    "flux_clamp_tolerance": 1e-10,
    "sum_to_one_tolerance": 1e-9,
    "vacuum_rule": "upwind",
}


def get_config():
    """
    Runtime settings for a run: log level, threads, output directory, CSV
    digits and the flat ``numerics.<name>`` defaults. config-development.json
    wins over config.json, which wins over ``{"env": "unknown"}``.

    Returns:
        dict: The merged runtime settings.
    """
    return merge_configs(
        {"env": "unknown"},
        parse_config(CONFIG_DEFAULT_FILE),
        parse_config(CONFIG_DEVELOPMENT_FILE),
    )


def parse_config(filename):
    """
    Reads one optional runtime file; a missing or broken file counts as empty.

    Args:
        filename (str): Runtime config path.

    Returns:
        dict: Its settings, or ``{}``.
    """
    if not os.path.isfile(filename):
        return {}
    try:
        with open(filename, "r", encoding="utf-8") as f:
            settings = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        log.warning("skipping runtime config %s: %s", filename, e)
        return {}
    if not isinstance(settings, dict):
        log.warning("skipping runtime config %s: not a JSON object", filename)
        return {}
    return settings


def merge_configs(*configs):
    """
    Layers config tables left to right. Nested tables such as ``numerics`` or
    ``data`` merge key by key; lists and scalars from a later layer replace
    earlier ones. ``None`` layers are skipped.

    Args:
        *configs: Tables, lowest precedence first.

    Returns:
        dict: The merged table.
    """
    merged = {}
    for layer in configs:
        for key, value in (layer or {}).items():
            current = merged.get(key)
            if isinstance(current, dict) and isinstance(value, dict):
                merged[key] = merge_configs(current, value)
            else:
                merged[key] = value
    return merged


def load_scenario(filename):
    """
    Loads a scenario file. Unlike the runtime files, a scenario must exist
    and be valid JSON.

    Args:
        filename (str): Path to the scenario JSON document.

    Returns:
        dict: The parsed scenario.
    """
    if not os.path.isfile(filename):
        raise ValidationError(f"scenario file not found: {filename}")
    try:
        with open(filename, "r", encoding="utf-8") as f:
            scenario = json.load(f)
    except (IOError, json.JSONDecodeError) as e:
        raise ValidationError(f"scenario file {filename} is not valid JSON: {e}") from e
    if not isinstance(scenario, dict):
        raise ValidationError(f"scenario file {filename} must hold a JSON object")
    return scenario


def apply_overrides(config, overrides):
    """
    Applies ``key=value`` overrides to a nested configuration.

    Dotted keys address nested tables (``numerics.T=2``); missing tables are
    created. Values are parsed as JSON when possible.

    Args:
        config (dict): The configuration to update; it is not modified.
        overrides (list[str]): Override expressions.

    Returns:
        dict: A new configuration with the overrides applied.
    """
    result = merge_configs(config)
    for expression in overrides or []:
        key, sep, text = expression.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ValidationError(f"override must look like key=value: {expression!r}")

        *parents, leaf = key.split(".")
        node = result
        for part in parents:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            else:
                child = dict(child)
                node[part] = child
            node = child
        node[leaf] = parse_scalar(text.strip())
        log.debug("override %s=%r", key, node[leaf])
    return result


def numerics_setting(scenario, runtime, name):
    """
    Resolves a numerics setting: the scenario's ``numerics`` table first,
    then the runtime ``numerics.<name>`` key, then the built-in default.
    """
    numerics = scenario.get("numerics", {}) if scenario else {}
    if name in numerics:
        return numerics[name]
    runtime_key = f"numerics.{name}"
    if runtime and runtime_key in runtime:
        return runtime[runtime_key]
    return DEFAULT_NUMERICS.get(name)
