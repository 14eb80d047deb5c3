"""JSON schemas for every file the command line reads or writes."""
from __future__ import annotations

import functools
import json
from importlib import resources

from jsonschema import Draft202012Validator

NAMES = ("machine", "trace_record", "metrics", "scenario", "report")


@functools.lru_cache(maxsize=None)
def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"no schema named {name!r}")
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())


@functools.lru_cache(maxsize=None)
def validator(name: str) -> Draft202012Validator:
    schema = load(name)
    Draft202012Validator.check_schema(schema)
    return Draft202012Validator(schema)


def errors(doc, name: str) -> list[str]:
    """Human-readable validation errors, empty when ``doc`` conforms."""
    found = sorted(validator(name).iter_errors(doc), key=lambda e: list(e.absolute_path))
    return [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in found]
