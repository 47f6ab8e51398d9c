"""Scenario configuration: YAML files validated against the shipped JSON schema."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from jsonschema import Draft202012Validator

from .errors import ParseError, SchemaError

SCENARIOS = (
    "classical_run",
    "gauge_check",
    "bucket_analytic",
    "bucket_sweep",
    "bucket_sim",
    "quantum_evolve",
    "quantum_checks",
    "invariant_suite",
)


def load_schema() -> Dict[str, Any]:
    text = resources.files("machian").joinpath("schema/scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    seed: int
    constants: Dict[str, float]
    params: Dict[str, Any]
    output: Dict[str, Any]
    source: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def prefix(self) -> str:
        return self.output.get("prefix") or self.kind

    def output_path(self, suffix: str) -> Path:
        return Path(self.output["dir"]) / f"{self.prefix}_{suffix}"


def _path(error) -> str:
    return ".".join(str(p) for p in error.absolute_path)


def _violations(schema, data):
    out = []
    for err in sorted(Draft202012Validator(schema).iter_errors(data), key=lambda e: (_path(e), e.message)):
        if err.validator == "additionalProperties":
            known = set(err.schema.get("properties", {}))
            base = _path(err)
            for key in sorted(set(err.instance) - known):
                out.append((f"{base}.{key}" if base else str(key), "unknown key"))
        else:
            out.append((_path(err), err.message))
    return out


def fill_defaults(schema: Dict[str, Any], data: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively insert schema defaults for missing keys of objects."""
    props = schema.get("properties", {})
    for key, sub in props.items():
        if key not in data and "default" in sub:
            data[key] = copy.deepcopy(sub["default"])
        if isinstance(data.get(key), dict) and sub.get("type") == "object":
            fill_defaults(sub, data[key])
        elif isinstance(data.get(key), list) and isinstance(sub.get("items"), dict):
            for item in data[key]:
                if isinstance(item, dict):
                    fill_defaults(sub["items"], item)
    return data


def validate_config(data: Any, source: Optional[str] = None) -> ScenarioConfig:
    """Validate a parsed key-value tree; raises SchemaError listing every violation."""
    schema = load_schema()
    if not isinstance(data, dict):
        raise SchemaError([("", "top level must be a mapping")])
    violations = _violations(schema, data)
    kind = data.get("scenario")
    others = [k for k in SCENARIOS if k != kind and k in data]
    for k in others:
        violations.append((k, f"block does not match scenario {kind!r}"))
    if violations:
        raise SchemaError(violations)
    data = copy.deepcopy(data)
    top = {k: v for k, v in schema["properties"].items() if k not in SCENARIOS or k == kind}
    data.setdefault(kind, {})
    fill_defaults({"properties": top}, data)
    return ScenarioConfig(kind, int(data["seed"]), data["constants"], data[kind], data["output"], source, data)


def parse_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{p}: {exc}") from exc
    if data is None:
        raise ParseError(f"{p}: empty configuration")
    return validate_config(data, str(p))


def as_inertia(value) -> float:
    """Config I0 value to float, mapping the strings 'inf'/'infinity' to math.inf."""
    if isinstance(value, str):
        return math.inf
    return float(value)
