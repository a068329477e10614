"""Experiment configuration files and command-line overrides.

Configuration files are TOML ("key = value" lines with dotted sections).
Command-line overrides use the same dotted names, e.g. ``--model.theta 0.7854``.
"""

import logging
import os
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from utils.errors import ConfigError

OUTPUT_ROOT_ENV = "QLG_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

logger = logging.getLogger("Config")


def output_root():
    """Directory all runs, sweeps and the run registry live under."""
    return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


def load_config(path):
    """Load a TOML configuration file into a nested dict."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}", field="config")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}", field="config")

    logger.info(f"Loaded configuration from {path}")
    return data


def parse_scalar(text):
    """Parse an override value as a TOML scalar, falling back to a bare string."""
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def set_dotted(config, dotted_key, value):
    """Set ``config['a']['b'] = value`` for the key ``'a.b'``."""
    parts = dotted_key.split(".")
    node = config
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError("cannot override inside scalar value", field=dotted_key)
        node = child
    node[parts[-1]] = value


def apply_overrides(config, args):
    """Apply ``--dotted.key value`` pairs (or ``--dotted.key=value``) to config.

    Args:
        config: Nested configuration dict; modified in place and returned.
        args: Remaining command-line tokens.

    Returns:
        The updated configuration dict.
    """
    tokens = list(args)
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--"):
            raise ConfigError(f"unexpected argument {token!r}", field="overrides")
        key = token[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError("missing value", field=key)
            raw = tokens[i + 1]
            i += 2
        if not key:
            raise ConfigError("empty option name", field="overrides")
        set_dotted(config, key, parse_scalar(raw))
        logger.debug(f"Override {key} = {raw}")
    return config


def flatten(config, prefix=""):
    """Flatten a nested dict into ``{'a.b': value}`` form."""
    flat = {}
    for key, value in config.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def unflatten(flat):
    """Inverse of :func:`flatten`."""
    config = {}
    for key, value in flat.items():
        set_dotted(config, key, value)
    return config
