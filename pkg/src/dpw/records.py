"""Canonical JSON-safe records for every entity.

One type-driven codec instead of eleven hand-written ones: Decimal <-> str,
datetime/date <-> ISO-8601, Enum <-> value, frozenset <-> sorted list,
nested dataclasses <-> dicts. The record form is what gets persisted,
hashed, filtered, and exported, so it must be deterministic.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from datetime import date, datetime, timezone
from decimal import Decimal
from enum import Enum
from typing import Any

from .errors import ValidationError


def encode_value(value: Any) -> Any:
    # Enum must come before str/int: (str, Enum) members are both, and the
    # member object would leak into str()-based consumers (filters, CSV).
    if isinstance(value, Enum):
        return encode_value(value.value)
    if value is None or isinstance(value, (str, int, bool)):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, Decimal):
        return str(value)
    if isinstance(value, datetime):
        return value.astimezone(timezone.utc).isoformat()
    if isinstance(value, date):
        return value.isoformat()
    if dataclasses.is_dataclass(value):
        return {f.name: encode_value(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, frozenset):
        return sorted(encode_value(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [encode_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k): encode_value(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    raise ValidationError(f"cannot encode {type(value).__name__}")


def to_record(entity: Any) -> dict[str, Any]:
    record = encode_value(entity)
    if not isinstance(record, dict):
        raise ValidationError("entities serialize to objects")
    return record


def _decode(value: Any, target: Any) -> Any:
    origin = typing.get_origin(target)
    if target is Any:
        return value
    if origin is typing.Union:
        args = [a for a in typing.get_args(target) if a is not type(None)]
        if value is None:
            return None
        return _decode(value, args[0])
    if dataclasses.is_dataclass(target):
        return from_record(value, target)
    if isinstance(target, type) and issubclass(target, Enum):
        return target(value)
    if target is Decimal:
        return Decimal(str(value))
    if target is datetime:
        parsed = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
        return parsed if parsed.tzinfo else parsed.replace(tzinfo=timezone.utc)
    if target is date:
        return date.fromisoformat(str(value))
    if origin in (tuple, list):
        item_type = (typing.get_args(target) or (Any,))[0]
        items = [_decode(v, item_type) for v in value]
        return tuple(items) if origin is tuple else items
    if origin is frozenset:
        item_type = (typing.get_args(target) or (Any,))[0]
        return frozenset(_decode(v, item_type) for v in value)
    if origin in (dict, typing.get_origin(typing.Mapping[str, Any])):
        key_type, value_type = (typing.get_args(target) or (Any, Any))[:2]
        return {_decode(k, key_type): _decode(v, value_type) for k, v in value.items()}
    return value


def from_record(record: dict[str, Any], entity_type: type) -> Any:
    hints = typing.get_type_hints(entity_type)
    kwargs = {}
    for field_def in dataclasses.fields(entity_type):
        if field_def.name in record:
            kwargs[field_def.name] = _decode(record[field_def.name], hints[field_def.name])
    return entity_type(**kwargs)


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# JSON object keys inside these fields are data (entity ids, gas names,
# metric names), not field names; key-style conversion leaves them alone.
DATA_KEYED_FIELDS = frozenset(
    {
        "characteristics",
        "reportedPcfByMaterial",
        "shares",
        "contributions",
        "factors",
        "payload",
        "fieldMapping",
        "details",
        "params",
    }
)


# segments whose wire casing is not plain title case
_CAMEL_SPECIAL = {"tco2e": "TCO2e"}


def _camel(name: str) -> str:
    head, *rest = str(name).split("_")
    return head + "".join(_CAMEL_SPECIAL.get(part, part[:1].upper() + part[1:]) for part in rest)


def camelize(value: Any, data_keyed: bool = False) -> Any:
    """Convert snake_case record keys to the camelCase used on the wire."""
    if isinstance(value, dict):
        out = {}
        for key, item in value.items():
            new_key = str(key) if data_keyed else _camel(key)
            out[new_key] = camelize(item, data_keyed=(new_key in DATA_KEYED_FIELDS and not data_keyed))
        return out
    if isinstance(value, list):
        return [camelize(item) for item in value]
    return value
