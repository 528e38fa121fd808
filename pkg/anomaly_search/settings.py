"""Runtime defaults from the environment and experiment configuration files."""
import json
import logging
import os
from pathlib import Path
from typing import Union

from dotenv import load_dotenv
from pydantic import ValidationError

from anomaly_search.models import ExperimentSpec

load_dotenv()

logger = logging.getLogger(__name__)

ENV_PREFIX = "ANOMALY_SEARCH_"


class ConfigError(ValueError):
    """An experiment configuration file is missing, malformed or invalid."""


def load_settings() -> dict:
    """Return runtime defaults, overridden by ``ANOMALY_SEARCH_*`` environment variables.

    Bad values are reported and the default is kept.
    """
    defaults: dict = {
        "threads": 1,
        "sample_cap": 10_000_000,
        "log_level": "INFO",
    }
    for key, cast in (("threads", int), ("sample_cap", int), ("log_level", str)):
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is None or raw == "":
            continue
        try:
            value = cast(raw)
            if isinstance(value, int) and value < 1:
                raise ValueError(f"must be >= 1, got {value}")
            defaults[key] = value.upper() if isinstance(value, str) else value
        except ValueError as e:
            logger.warning("[settings] ignoring %s%s=%r: %s", ENV_PREFIX, key.upper(), raw, e)
    return defaults


def load_spec(path: Union[str, Path]) -> ExperimentSpec:
    """Read and validate an experiment configuration JSON file.

    Raises:
        ConfigError: the file is not valid JSON or does not describe a valid experiment.
        OSError: the file cannot be read.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid experiment configuration\n{e}") from e
