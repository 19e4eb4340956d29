"""Parameter overrides.

Overrides name a field by ``section.field`` (``scenario.v_max``,
``scenario.u2d.a``, ``bcd.max_iterations``, ``pso.swarm_size``) and are
given as ``key=value`` strings on the command line or as TOML tables in a
config file. Values are coerced to the declared type of the target
dataclass field; unknown fields and uncoercible values are errors.

File: dctraj/runner/overrides.py
"""

import logging
import math
import typing
from dataclasses import fields, is_dataclass
from enum import Enum
from typing import Any, Dict, Iterable, Mapping, Tuple, Type

from ..core.baseline import PsoOptions
from ..core.bcd import BcdOptions
from ..core.channel import D2bParams, U2dParams
from ..core.model import Scenario
from ..utils.validation import check_override_key

logger = logging.getLogger(__name__)

SECTIONS: Dict[str, Type] = {
    "scenario": Scenario,
    "bcd": BcdOptions,
    "pso": PsoOptions,
}
NESTED: Dict[str, Type] = {
    "u2d": U2dParams,
    "d2b": D2bParams,
}
LOCKED_FIELDS = {
    "scenario": {"users", "seed", "bs_position"},
    "bcd": {"on_iteration"},
    "pso": set(),
}

Overrides = Dict[str, Dict[str, Any]]

class OverrideError(Exception):
    """Raised when an override key or value is invalid."""
    pass

def _field_types(cls: Type) -> Dict[str, Any]:
    return {f.name: f.type for f in fields(cls)}

def _unwrap_optional(tp: Any) -> Tuple[Any, bool]:
    if typing.get_origin(tp) is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False

def coerce_value(name: str, raw: Any, tp: Any) -> Any:
    """Coerce a raw override value to a field type.

    Strings come from the command line; TOML values arrive already typed
    and are checked the same way.

    Raises:
        OverrideError: If the value does not fit the type
    """
    tp, optional = _unwrap_optional(tp)
    if optional and (raw is None or (isinstance(raw, str) and raw.lower() in ("none", "null"))):
        return None
    try:
        if isinstance(tp, type) and issubclass(tp, Enum):
            return tp(raw.lower() if isinstance(raw, str) else raw)
        if tp is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).lower()
            if text in ("true", "1", "yes", "on"):
                return True
            if text in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if tp is int:
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise ValueError(f"not an integer: {raw!r}")
            return int(raw)
        if tp is float:
            if isinstance(raw, bool):
                raise ValueError(f"not a number: {raw!r}")
            value = float(raw)
            if math.isnan(value):
                raise ValueError("NaN is not allowed")
            return value
        if tp is str:
            return str(raw)
    except (TypeError, ValueError) as e:
        raise OverrideError(f"Invalid value for {name}: {e}") from e
    raise OverrideError(f"Field {name} cannot be overridden")

def coerce_section(section: str, values: Mapping[str, Any]) -> Dict[str, Any]:
    """Type-check a whole section (for example a TOML table).

    Raises:
        OverrideError: On unknown sections, fields or bad values
    """
    if section not in SECTIONS:
        raise OverrideError(f"Unknown override section '{section}'")
    types = _field_types(SECTIONS[section])
    coerced: Dict[str, Any] = {}
    for name, raw in values.items():
        if name in LOCKED_FIELDS[section] or name not in types:
            raise OverrideError(f"Unknown field '{section}.{name}'")
        if section == "scenario" and name in NESTED:
            if not isinstance(raw, Mapping):
                raise OverrideError(f"{section}.{name} must be a table of model constants")
            nested_types = _field_types(NESTED[name])
            nested: Dict[str, Any] = {}
            for key, value in raw.items():
                if key not in nested_types:
                    raise OverrideError(f"Unknown field '{section}.{name}.{key}'")
                nested[key] = coerce_value(f"{section}.{name}.{key}", value, nested_types[key])
            coerced[name] = nested
            continue
        coerced[name] = coerce_value(f"{section}.{name}", raw, types[name])
    return coerced

def parse_overrides(items: Iterable[str]) -> Overrides:
    """Parse ``section.field=value`` strings into per-section dicts.

    Returns:
        {"scenario": {...}, "bcd": {...}, "pso": {...}}

    Raises:
        OverrideError: On malformed items, unknown keys or bad values
    """
    raw: Overrides = {section: {} for section in SECTIONS}
    for item in items:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise OverrideError(f"Override '{item}' must look like section.field=value")
        result = check_override_key(key)
        if not result.is_valid:
            raise OverrideError(result.message)
        section, *path = key.split(".")
        if len(path) == 2:
            if section != "scenario" or path[0] not in NESTED:
                raise OverrideError(f"Unknown field '{key}'")
            raw[section].setdefault(path[0], {})[path[1]] = value.strip()
        else:
            raw[section][path[0]] = value.strip()
    return {section: coerce_section(section, values) for section, values in raw.items()}

def merge_overrides(base: Overrides, updates: Overrides) -> Overrides:
    """Merge two override sets; updates win, nested tables merge key by key."""
    merged: Overrides = {section: dict(base.get(section, {})) for section in SECTIONS}
    for section, values in updates.items():
        for name, value in values.items():
            current = merged[section].get(name)
            if isinstance(value, dict) and isinstance(current, dict):
                merged[section][name] = {**current, **value}
            else:
                merged[section][name] = value
    return merged

def render_value(value: Any) -> Any:
    """TOML-friendly form of an override value."""
    if isinstance(value, Enum):
        return value.value
    if is_dataclass(value):
        return {f.name: getattr(value, f.name) for f in fields(value)}
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value
