"""Published JSON schemas for every artifact, and a validator that raises :class:`ConfigError`."""

import json
from functools import lru_cache
from importlib import resources

from jsonschema import Draft202012Validator

from ..errors import ConfigError

SCHEMA_NAMES = ("search_space", "best_params", "best_params_table", "trial", "metrics", "model", "comparison",
                "report", "shap", "lime", "pdp", "importance", "correlation")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(name)
    text = resources.files(__name__).joinpath(f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def _validator(name: str) -> Draft202012Validator:
    schema = load_schema(name)
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def validate(doc, name: str) -> None:
    """Raise :class:`ConfigError` naming the offending key path on the first violation."""
    errors = sorted(_validator(name).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        key = ".".join(str(p) for p in e.absolute_path) or None
        raise ConfigError(f"{name} schema: {e.message}" + (f" at {key}" if key else ""), key=key)
